//! Brute-force settling by grid search over height, roll and pitch.
//!
//! Under uniform gravity the potential energy of a rigid body is its center
//! of mass height, so the settled pose is the lowest-CoM grid pose that does
//! not penetrate the terrain, touches it, and has a positive stability margin.
//!
//! Pruning relies on the terrain being a height field (no overhangs): at a
//! fixed orientation the set of non-penetrating heights is then an upward
//! closed interval. Turning pruning off gives a full scan of every
//! orientation with the same result on such terrain.

use std::time::Instant;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::geometry::Pose;
use crate::robot_model::{JointConfig, ModelError, RobotModel};
use crate::scalar::{infinity, lit, to_f64, Real};
use crate::sdf_map::EsdfMap;
use crate::settling::{extract_contacts, PredictionResult, QueryPose, Status};
use crate::stability::{min_stability, support_polygon};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid oracle parameters: {0}")]
    InvalidParams(String),
    #[error("no grid pose is non-penetrating, in contact and stable")]
    NoFeasiblePose,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleParams<T: Real> {
    /// Body-origin height interval searched (m).
    pub z_range: (T, T),
    pub roll_range: (T, T),
    pub pitch_range: (T, T),
    pub z_step: T,
    pub angle_step: T,
    /// Deepest penetration tolerated (m).
    pub penetration_tol: T,
    /// Contact threshold (m).
    pub epsilon: T,
    pub contact_merge_radius: T,
    /// Skip orientations that provably cannot beat the best pose so far.
    pub prune: bool,
}

impl<T: Real> OracleParams<T> {
    /// Default grid: 5 mm in height, 0.25 degrees over +-30 degrees of roll
    /// and pitch.
    pub fn new(z_range: (T, T)) -> Self {
        let limit = lit::<T>(30f64.to_radians());
        Self {
            z_range,
            roll_range: (-limit, limit),
            pitch_range: (-limit, limit),
            z_step: lit(0.005),
            angle_step: lit(0.25f64.to_radians()),
            penetration_tol: lit(1e-6),
            epsilon: lit(0.01),
            contact_merge_radius: lit(0.01),
            prune: true,
        }
    }

    /// Default grid spanning the map's height range.
    pub fn for_map(map: &EsdfMap<T>) -> Self {
        let b = map.bounds();
        Self::new((b.min.z, b.max.z))
    }

    pub fn with_angle_step(mut self, step: T) -> Self {
        self.angle_step = step;
        self
    }

    pub fn with_z_step(mut self, step: T) -> Self {
        self.z_step = step;
        self
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |w: &str| Err(OracleError::InvalidParams(w.to_string()));
        if !(self.z_step > T::zero()) || !(self.angle_step > T::zero()) {
            return bad("steps must be positive");
        }
        for (lo, hi) in [self.z_range, self.roll_range, self.pitch_range] {
            if !(lo <= hi) {
                return bad("ranges must be non-empty");
            }
        }
        if !(self.penetration_tol >= T::zero()) || !(self.epsilon > T::zero()) {
            return bad("tolerances must be non-negative and epsilon positive");
        }
        Ok(())
    }
}

fn grid<T: Real>(range: (T, T), step: T) -> Vec<T> {
    let n = (to_f64((range.1 - range.0) / step) + 1e-9).floor() as usize;
    (0..=n).map(|i| range.0 + step * lit(i as f64)).collect()
}

/// Lexicographic ranking: CoM height, then body height, then |roll|, |pitch|,
/// then the signed angles.
#[derive(Debug, Clone, Copy)]
struct Rank<T: Real> {
    com_z: T,
    z: T,
    roll: T,
    pitch: T,
}

impl<T: Real> Rank<T> {
    fn key(&self) -> [T; 6] {
        [
            self.com_z,
            self.z,
            self.roll.abs(),
            self.pitch.abs(),
            self.roll,
            self.pitch,
        ]
    }

    fn better_than(&self, other: &Rank<T>) -> bool {
        let (a, b) = (self.key(), other.key());
        for k in 0..6 {
            if a[k] < b[k] {
                return true;
            }
            if a[k] > b[k] {
                return false;
            }
        }
        false
    }
}

struct Search<'a, T: Real> {
    map: &'a EsdfMap<T>,
    candidates: &'a [Point3<T>],
    com: Point3<T>,
    query: &'a QueryPose<T>,
    params: &'a OracleParams<T>,
    floor_z: T,
    z_grid: Vec<T>,
}

impl<'a, T: Real> Search<'a, T> {
    fn pose(&self, rot: &UnitQuaternion<T>, z: T) -> Pose<T> {
        Pose::from_parts(Vector3::new(self.query.x, self.query.y, z).into(), *rot)
    }

    /// Distance of candidate `p` (already rotated) at height `z`; points
    /// below the map count as buried, other points outside as free.
    fn distance(&self, rotated: &Vector3<T>, z: T) -> T {
        let w = Point3::new(
            self.query.x + rotated.x,
            self.query.y + rotated.y,
            z + rotated.z,
        );
        if w.z < self.floor_z {
            return -infinity::<T>();
        }
        self.map.try_distance(&w).unwrap_or_else(infinity)
    }

    /// Whether no candidate penetrates at `z`; checks the last offender first.
    fn feasible(&self, rotated: &[Vector3<T>], z: T, hint: &mut usize) -> bool {
        let n = rotated.len();
        for k in 0..n {
            let i = (*hint + k) % n;
            if self.distance(&rotated[i], z) < -self.params.penetration_tol {
                *hint = i;
                return false;
            }
        }
        true
    }

    /// Lowest non-penetrating index in the descending height grid at or
    /// below `start`, given that `start` is feasible.
    fn lowest_feasible(&self, rotated: &[Vector3<T>], start: usize, hint: &mut usize) -> usize {
        let step = self.params.z_step;
        let mut k = start;
        loop {
            if k + 1 >= self.z_grid.len() {
                return k;
            }
            let z = self.z_grid[k];
            let d_min = rotated
                .iter()
                .map(|r| self.distance(r, z))
                .fold(infinity::<T>(), |a, b| a.min(b));
            // The field is 1-Lipschitz, so dropping by the clearance keeps
            // every candidate outside.
            let jump = (to_f64((d_min + self.params.penetration_tol) / step) + 1e-9).floor();
            let jump = if jump.is_finite() {
                (jump as usize).max(1)
            } else {
                self.z_grid.len()
            };
            let next = (k + jump).min(self.z_grid.len() - 1);
            if self.feasible(rotated, self.z_grid[next], hint) {
                k = next;
            } else if next > k + 1 && self.feasible(rotated, self.z_grid[k + 1], hint) {
                k += 1;
            } else {
                return k;
            }
        }
    }

    /// Contacts and stability check of a non-penetrating pose.
    fn accept(&self, pose: &Pose<T>, distances: &mut Vec<T>) -> bool {
        distances.clear();
        let mut touching = false;
        for p in self.candidates {
            let r = pose.rotation * p.coords;
            let d = self.distance(&r, pose.translation.z);
            touching |= d < self.params.epsilon;
            distances.push(d);
        }
        if !touching {
            return false;
        }
        let (contacts, _) = extract_contacts(
            self.candidates,
            distances,
            pose,
            self.params.epsilon,
            self.params.contact_merge_radius,
        );
        let Ok(polygon) = support_polygon(&contacts) else {
            return false;
        };
        matches!(min_stability(&polygon, &(pose * self.com)), Ok(s) if s.is_stable())
    }
}

/// Lowest center-of-mass grid pose at the query's position and heading.
pub fn settle_bruteforce<T: Real>(
    map: &EsdfMap<T>,
    model: &RobotModel<T>,
    joints: &JointConfig<T>,
    query: &QueryPose<T>,
    params: &OracleParams<T>,
) -> Result<PredictionResult<T>, OracleError> {
    let candidates = model.contact_candidates(joints)?;
    let com = model.center_of_mass(joints)?;
    settle_bruteforce_with(map, &candidates.points, &com, query, params)
}

/// Brute-force search on precomputed body-frame candidates and CoM.
pub fn settle_bruteforce_with<T: Real>(
    map: &EsdfMap<T>,
    candidates: &[Point3<T>],
    com: &Point3<T>,
    query: &QueryPose<T>,
    params: &OracleParams<T>,
) -> Result<PredictionResult<T>, OracleError> {
    let start = Instant::now();
    params.validate()?;
    if candidates.is_empty() {
        return Err(OracleError::NoFeasiblePose);
    }
    let mut z_grid = grid(params.z_range, params.z_step);
    z_grid.reverse();
    let search = Search {
        map,
        candidates,
        com: *com,
        query,
        params,
        floor_z: map.bounds().min.z,
        z_grid,
    };
    let rolls = grid(params.roll_range, params.angle_step);
    let pitches = grid(params.pitch_range, params.angle_step);

    let mut best: Option<(Rank<T>, Pose<T>)> = None;
    let mut rotated: Vec<Vector3<T>> = Vec::with_capacity(candidates.len());
    let mut distances = Vec::with_capacity(candidates.len());
    let mut hint = 0usize;
    let top = search.z_grid[0];
    // Visit orientations nearest level first so the pruning bound tightens
    // early; the ranking makes the result independent of the order.
    let mut orientations: Vec<(T, T)> = rolls
        .iter()
        .flat_map(|&r| pitches.iter().map(move |&p| (r, p)))
        .collect();
    orientations.sort_by(|a, b| {
        (a.0 * a.0 + a.1 * a.1)
            .partial_cmp(&(b.0 * b.0 + b.1 * b.1))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    {
        for &(roll, pitch) in &orientations {
            let rot = UnitQuaternion::from_euler_angles(roll, pitch, query.yaw);
            let com_offset = (rot * com.coords).z;
            rotated.clear();
            rotated.extend(candidates.iter().map(|p| rot * p.coords));

            // Highest grid index worth examining.
            let mut first = 0usize;
            if let (true, Some((b, _))) = (params.prune, &best) {
                let limit = b.com_z - com_offset;
                if limit < search.z_grid[search.z_grid.len() - 1] {
                    continue;
                }
                let steps = to_f64((top - limit) / params.z_step);
                first = if steps <= 0.0 {
                    0
                } else {
                    (steps - 1e-9).ceil() as usize
                };
                if first >= search.z_grid.len() {
                    continue;
                }
                if !search.feasible(&rotated, search.z_grid[first], &mut hint) {
                    continue;
                }
            } else {
                while first < search.z_grid.len()
                    && !search.feasible(&rotated, search.z_grid[first], &mut hint)
                {
                    first += 1;
                }
                if first == search.z_grid.len() {
                    continue;
                }
            }
            let lowest = search.lowest_feasible(&rotated, first, &mut hint);
            // Walk back up while still in contact until a stable pose shows.
            let mut k = lowest as isize;
            while k >= 0 {
                let z = search.z_grid[k as usize];
                let rank = Rank {
                    com_z: z + com_offset,
                    z,
                    roll,
                    pitch,
                };
                if let Some((b, _)) = &best {
                    if !rank.better_than(b) {
                        break;
                    }
                }
                let pose = search.pose(&rot, z);
                if search.accept(&pose, &mut distances) {
                    best = Some((rank, pose));
                    break;
                }
                if !distances.iter().any(|&d| d < params.epsilon) {
                    break;
                }
                k -= 1;
            }
        }
    }

    let (_, pose) = best.ok_or(OracleError::NoFeasiblePose)?;
    search.accept(&pose, &mut distances);
    let (contacts, _) = extract_contacts(
        candidates,
        &distances,
        &pose,
        params.epsilon,
        params.contact_merge_radius,
    );
    let support = support_polygon(&contacts).ok();
    let stability = support
        .as_ref()
        .and_then(|p| min_stability(p, &(pose * com)).ok());
    Ok(PredictionResult {
        pose,
        contacts,
        support,
        stability,
        com: pose * com,
        status: Status::Converged,
        fall_iters: 0,
        rotation_stages: 0,
        total_rot_iters: 0,
        elapsed: start.elapsed(),
    })
}

//! Iterative pose settling: a falling stage followed by rotation stages about
//! tipover axes until the support polygon is stable.

use std::time::{Duration, Instant};

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::geometry::{pose_from_euler, Pose};
use crate::robot_model::{JointConfig, ModelError, RobotModel};
use crate::scalar::{infinity, lit, Real};
use crate::sdf_map::EsdfMap;
use crate::stability::{
    farthest_pair, min_stability, support_polygon, ContactState, StabilityError, StabilityResult,
    SupportPolygon,
};

/// Planar query: position, heading and an initial height above the terrain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryPose<T: Real> {
    pub x: T,
    pub y: T,
    pub yaw: T,
    pub z_hint: T,
}

impl<T: Real> QueryPose<T> {
    pub fn new(x: T, y: T, yaw: T, z_hint: T) -> Self {
        Self { x, y, yaw, z_hint }
    }

    /// Level pose at the hinted height.
    pub fn initial_pose(&self) -> Pose<T> {
        pose_from_euler(
            Vector3::new(self.x, self.y, self.z_hint),
            T::zero(),
            T::zero(),
            self.yaw,
        )
    }
}

/// How the expected contact point of a candidate is placed during rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactProjection {
    /// Straight down in the rotation frame by the candidate's distance.
    Vertical,
    /// `Vertical`, but never smaller in magnitude than `Chord`. The chord
    /// angle is always safe, so this only removes needlessly small steps of
    /// candidates close to the vertical plane through the axis.
    VerticalFloored,
    /// Against the map gradient by the candidate's distance. Tends to stall
    /// on edges where the gradient swings between iterations.
    Gradient,
    /// On the candidate's rotation circle at chord length equal to its
    /// distance. Never rotates a candidate past its clearance.
    Chord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettlingParams<T: Real> {
    /// Contact threshold on the signed distance (m).
    pub epsilon: T,
    /// Step decay factor applied after every iteration.
    pub step_decay: T,
    pub max_fall_iters: usize,
    pub max_rot_iters_per_axis: usize,
    pub max_rotation_stages: usize,
    /// Candidates closer than this to the rotation axis are ignored (m).
    pub axis_membership_tol: T,
    /// Contacts closer than this are merged (m).
    pub contact_merge_radius: T,
    /// Penetration tolerated by the validity check (m).
    pub numerical_slack: T,
    pub projection: ContactProjection,
    /// Tighter contact threshold for a second pass started from the first
    /// converged pose. Contacts up to `epsilon` above the surface can anchor
    /// a rotation axis, which tilts the result by about `epsilon` over the
    /// support length; the second pass removes most of that tilt. Its result
    /// is kept only if it also converges.
    pub refine_epsilon: Option<T>,
}

impl<T: Real> Default for SettlingParams<T> {
    fn default() -> Self {
        Self {
            epsilon: lit(0.01),
            step_decay: lit(0.9),
            max_fall_iters: 100,
            max_rot_iters_per_axis: 50,
            max_rotation_stages: 25,
            axis_membership_tol: lit(1e-4),
            contact_merge_radius: lit(0.01),
            numerical_slack: lit(1e-6),
            projection: ContactProjection::Chord,
            refine_epsilon: Some(lit(0.002)),
        }
    }
}

impl<T: Real> SettlingParams<T> {
    pub fn validate(&self) -> Result<(), SettleError> {
        let bad = |what: &str| Err(SettleError::InvalidParams(what.to_string()));
        if !(self.epsilon > T::zero()) {
            return bad("epsilon must be positive");
        }
        if !(self.step_decay > T::zero() && self.step_decay <= T::one()) {
            return bad("step decay must lie in (0, 1]");
        }
        if !(self.axis_membership_tol >= T::zero()) || !(self.contact_merge_radius >= T::zero()) {
            return bad("tolerances must be non-negative");
        }
        if !(self.numerical_slack >= T::zero()) {
            return bad("numerical slack must be non-negative");
        }
        if let Some(fine) = self.refine_epsilon {
            if !(fine > T::zero() && fine <= self.epsilon) {
                return bad("refine epsilon must lie in (0, epsilon]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    NoConvergence,
    OutOfMap,
    Degenerate,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::NoConvergence => "no_convergence",
            Status::OutOfMap => "out_of_map",
            Status::Degenerate => "degenerate",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SettleError {
    #[error("invalid settling parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Why a stage stopped without reaching a valid pose.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum StageError {
    #[error("iteration cap reached")]
    NoConvergence,
    #[error("every candidate is outside the map")]
    OutOfMap,
    #[error("no usable rotation axis or candidates")]
    Degenerate,
    #[error("rotation angle outside the arccos domain")]
    NumericalDomain,
}

impl StageError {
    fn status(self) -> Status {
        match self {
            StageError::NoConvergence => Status::NoConvergence,
            StageError::OutOfMap => Status::OutOfMap,
            StageError::Degenerate | StageError::NumericalDomain => Status::Degenerate,
        }
    }
}

/// Mutable state carried through the stages.
#[derive(Debug, Clone, PartialEq)]
pub struct SettlingState<T: Real> {
    /// `W <- C`.
    pub pose: Pose<T>,
    /// Current step size, reset to one at every stage start.
    pub step: T,
    /// Signed distance of every candidate at the last evaluation
    /// (`+inf` outside the map).
    pub distances: Vec<T>,
}

impl<T: Real> SettlingState<T> {
    pub fn new(pose: Pose<T>) -> Self {
        Self {
            pose,
            step: T::one(),
            distances: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult<T: Real> {
    /// `W <- C`.
    pub pose: Pose<T>,
    pub contacts: ContactState<T>,
    pub support: Option<SupportPolygon<T>>,
    pub stability: Option<StabilityResult<T>>,
    /// Center of mass in the world frame at the final pose.
    pub com: Point3<T>,
    pub status: Status,
    pub fall_iters: usize,
    pub rotation_stages: usize,
    pub total_rot_iters: usize,
    pub elapsed: Duration,
}

impl<T: Real> PredictionResult<T> {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Evaluates the map at every candidate, writing `+inf` for points outside.
pub fn candidate_distances<T: Real>(
    map: &EsdfMap<T>,
    candidates: &[Point3<T>],
    pose: &Pose<T>,
    out: &mut Vec<T>,
) -> Result<(), StageError> {
    out.clear();
    let mut inside = false;
    for p in candidates {
        match map.try_distance(&(pose * p)) {
            Some(d) => {
                inside = true;
                out.push(d);
            }
            None => out.push(infinity()),
        }
    }
    if inside || candidates.is_empty() {
        Ok(())
    } else {
        Err(StageError::OutOfMap)
    }
}

/// At least one candidate within `epsilon` and none deeper than `slack`.
pub fn is_valid<T: Real>(distances: &[T], epsilon: T, slack: T) -> bool {
    distances.iter().any(|&d| d < epsilon) && distances.iter().all(|&d| d >= -slack)
}

/// Translates the body along world `-z` by a decaying fraction of the
/// smallest clearance until the pose is valid. Returns the iteration count.
pub fn falling_stage<T: Real>(
    map: &EsdfMap<T>,
    candidates: &[Point3<T>],
    state: &mut SettlingState<T>,
    params: &SettlingParams<T>,
) -> Result<usize, StageError> {
    if candidates.is_empty() {
        return Err(StageError::Degenerate);
    }
    state.step = T::one();
    for it in 0..=params.max_fall_iters {
        candidate_distances(map, candidates, &state.pose, &mut state.distances)?;
        if is_valid(&state.distances, params.epsilon, params.numerical_slack) {
            return Ok(it);
        }
        if it == params.max_fall_iters {
            break;
        }
        let d_min = state
            .distances
            .iter()
            .copied()
            .fold(infinity::<T>(), |a, b| a.min(b));
        let shift = Translation3::new(T::zero(), T::zero(), -state.step * d_min);
        state.pose = Isometry3::from_parts(shift, UnitQuaternion::identity()) * state.pose;
        state.step *= params.step_decay;
    }
    Err(StageError::NoConvergence)
}

/// World contacts: candidates within `epsilon`, merged within `radius`.
/// Returns the contact points and the candidate index of each.
pub fn extract_contacts<T: Real>(
    candidates: &[Point3<T>],
    distances: &[T],
    pose: &Pose<T>,
    epsilon: T,
    radius: T,
) -> (ContactState<T>, Vec<usize>) {
    let mut points: Vec<Point3<T>> = Vec::new();
    let mut indices = Vec::new();
    for (i, (p, &d)) in candidates.iter().zip(distances).enumerate() {
        if !(d < epsilon) {
            continue;
        }
        let w = pose * p;
        if points.iter().any(|q| (q - w).norm() < radius) {
            continue;
        }
        points.push(w);
        indices.push(i);
    }
    (ContactState::new(points), indices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    SingleContact,
    ContactPair,
    /// Edge index of the support polygon.
    PolygonEdge(usize),
}

/// Directed line the body is rotated about.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationAxis<T: Real> {
    pub point: Point3<T>,
    pub direction: Vector3<T>,
    pub kind: AxisKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AxisChoice<T: Real> {
    /// Every tipover margin is positive.
    Stable {
        polygon: SupportPolygon<T>,
        stability: StabilityResult<T>,
    },
    Rotate {
        axis: RotationAxis<T>,
        polygon: Option<SupportPolygon<T>>,
        stability: Option<StabilityResult<T>>,
    },
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum AxisError {
    #[error("no contacts")]
    NoContacts,
    #[error("rotation axis is degenerate")]
    DegenerateAxis,
}

/// Picks the next rotation axis from the contacts, or reports stability.
pub fn compute_rotation_axis<T: Real>(
    contacts: &ContactState<T>,
    com: &Point3<T>,
) -> Result<AxisChoice<T>, AxisError> {
    let pts = &contacts.points;
    let single = |c: &Point3<T>| {
        let r = (com - c).cross(&-Vector3::z());
        if r.norm() < lit(1e-9) {
            return Err(AxisError::DegenerateAxis);
        }
        Ok(AxisChoice::Rotate {
            axis: RotationAxis {
                point: *c,
                direction: r,
                kind: AxisKind::SingleContact,
            },
            polygon: None,
            stability: None,
        })
    };
    let pair = |a: &Point3<T>, b: &Point3<T>| {
        let r = b - a;
        if r.norm() < lit(1e-9) {
            return Err(AxisError::DegenerateAxis);
        }
        Ok(AxisChoice::Rotate {
            axis: RotationAxis {
                point: *a,
                direction: r,
                kind: AxisKind::ContactPair,
            },
            polygon: None,
            stability: None,
        })
    };
    match pts.len() {
        0 => Err(AxisError::NoContacts),
        1 => single(&pts[0]),
        2 => pair(&pts[0], &pts[1]),
        _ => match support_polygon(contacts) {
            Ok(polygon) => {
                let stability = match min_stability(&polygon, com) {
                    Ok(s) => s,
                    Err(_) => return Err(AxisError::DegenerateAxis),
                };
                if stability.is_stable() {
                    return Ok(AxisChoice::Stable { polygon, stability });
                }
                let (a, b) = polygon.edge(stability.argmin);
                let kind = AxisKind::PolygonEdge(stability.argmin);
                Ok(AxisChoice::Rotate {
                    axis: RotationAxis {
                        point: a,
                        direction: b - a,
                        kind,
                    },
                    polygon: Some(polygon),
                    stability: Some(stability),
                })
            }
            Err(StabilityError::CollinearContacts { extreme: (i, j) }) => pair(&pts[i], &pts[j]),
            Err(_) => {
                let (i, j) = farthest_pair(pts);
                pair(&pts[i], &pts[j])
            }
        },
    }
}

/// Rotation frame `W <- R`: origin on the axis, `x` along it, `z` along the
/// component of gravity perpendicular to it, `y` toward the center of mass.
pub fn rotation_frame<T: Real>(axis: &RotationAxis<T>, com: &Point3<T>) -> Option<Pose<T>> {
    let mut x = axis.direction.try_normalize(lit(1e-12))?;
    let g = -Vector3::z();
    let z = (g - x * g.dot(&x)).try_normalize(lit(1e-9))?;
    let mut y = z.cross(&x);
    if y.dot(&(com - axis.point)) < T::zero() {
        x = -x;
        y = -y;
    }
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    Some(Isometry3::from_parts(
        Translation3::from(axis.point.coords),
        UnitQuaternion::from_rotation_matrix(&rot),
    ))
}

/// Signed angle about the rotation-frame `x` axis that brings candidate `p`
/// onto its expected contact point `c_hat` (both in the rotation frame).
/// The sign follows the candidate's signed distance `d`.
pub fn rotation_angle<T: Real>(p: &Point3<T>, c_hat: &Point3<T>, d: T) -> Result<T, StageError> {
    let rho_p = p.y.hypot(p.z);
    let rho_c = c_hat.y.hypot(c_hat.z);
    let side_sq = (p.y - c_hat.y).powi(2) + (p.z - c_hat.z).powi(2);
    let cos = (rho_p * rho_p + rho_c * rho_c - side_sq) / (lit::<T>(2.0) * rho_p * rho_c);
    let tol = lit::<T>(1e-9);
    if !(cos >= -T::one() - tol && cos <= T::one() + tol) {
        return Err(StageError::NumericalDomain);
    }
    let alpha = cos.clamp(-T::one(), T::one()).acos();
    Ok(if d < T::zero() { -alpha } else { alpha })
}

/// Angle for a candidate whose expected contact lies on its own rotation
/// circle at chord length `|d|`.
pub fn chord_angle<T: Real>(p: &Point3<T>, d: T) -> T {
    let rho = p.y.hypot(p.z);
    let alpha = lit::<T>(2.0) * (d.abs() / (rho + rho)).min(T::one()).asin();
    if d < T::zero() {
        -alpha
    } else {
        alpha
    }
}

/// Rotates the body about `axis` until a new candidate touches the terrain.
/// `excluded` marks candidates that already belong to the contact set.
pub fn rotation_stage<T: Real>(
    map: &EsdfMap<T>,
    candidates: &[Point3<T>],
    state: &mut SettlingState<T>,
    frame: &Pose<T>,
    excluded: &[bool],
    params: &SettlingParams<T>,
) -> Result<usize, StageError> {
    let to_r = frame.inverse();
    let start = state.pose;
    let tol = params.axis_membership_tol;
    state.step = T::one();
    // Bracket on the cumulative angle: `clear` is the largest angle seen free
    // of penetration, `blocked` the smallest seen penetrating.
    let mut theta = T::zero();
    let mut clear = T::zero();
    let mut blocked: Option<T> = None;
    for it in 0..=params.max_rot_iters_per_axis {
        candidate_distances(map, candidates, &state.pose, &mut state.distances)?;
        let mut remaining = 0usize;
        let mut touching = false;
        let mut penetrating = false;
        let mut alpha_min = infinity::<T>();
        for (i, p) in candidates.iter().enumerate() {
            if excluded[i] {
                continue;
            }
            let w = state.pose * p;
            let r = to_r * w;
            if r.y < tol || r.y.hypot(r.z) < tol {
                continue;
            }
            remaining += 1;
            let d = state.distances[i];
            if !d.is_finite() {
                continue;
            }
            touching |= d < params.epsilon;
            penetrating |= d < -params.numerical_slack;
            let alpha = match params.projection {
                ContactProjection::Chord => chord_angle(&r, d),
                ContactProjection::Vertical => rotation_angle(&r, &(r + Vector3::z() * d), d)?,
                ContactProjection::VerticalFloored => {
                    let v = rotation_angle(&r, &(r + Vector3::z() * d), d)?;
                    let c = chord_angle(&r, d);
                    if c.abs() > v.abs() {
                        c
                    } else {
                        v
                    }
                }
                ContactProjection::Gradient => {
                    let c_w = match map.gradient(&w) {
                        Ok(n) => w - n * d,
                        Err(_) => w - Vector3::z() * d,
                    };
                    let c_r = to_r * c_w;
                    if c_r.y.hypot(c_r.z) < tol {
                        continue;
                    }
                    rotation_angle(&r, &c_r, d)?
                }
            };
            if alpha < alpha_min {
                alpha_min = alpha;
            }
        }
        if remaining == 0 {
            return Err(StageError::Degenerate);
        }
        if touching && !penetrating {
            return Ok(it);
        }
        if it == params.max_rot_iters_per_axis {
            break;
        }
        if !alpha_min.is_finite() {
            return Err(StageError::OutOfMap);
        }
        if penetrating {
            blocked = Some(blocked.map_or(theta, |b| b.min(theta)));
        } else {
            clear = clear.max(theta);
        }
        let mut target = theta + state.step * alpha_min;
        if let Some(b) = blocked {
            let mid = (clear + b) / lit(2.0);
            if penetrating {
                target = target.min(mid);
            }
            if target <= clear || target >= b {
                target = mid;
            }
        }
        theta = target;
        let turn = Isometry3::from_parts(
            Translation3::identity(),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), theta),
        );
        state.pose = frame * turn * to_r * start;
        state.pose.rotation.renormalize();
        state.step *= params.step_decay;
    }
    Err(StageError::NoConvergence)
}

/// Settles a robot with fixed joints onto the map starting from `query`.
pub fn predict_pose<T: Real>(
    map: &EsdfMap<T>,
    model: &RobotModel<T>,
    joints: &JointConfig<T>,
    query: &QueryPose<T>,
    params: &SettlingParams<T>,
) -> Result<PredictionResult<T>, SettleError> {
    let start = Instant::now();
    params.validate()?;
    let candidates = model.contact_candidates(joints)?;
    let com = model.center_of_mass(joints)?;
    let mut result = settle(map, &candidates.points, &com, &query.initial_pose(), params);
    result.elapsed = start.elapsed();
    Ok(result)
}

/// Settling core on precomputed body-frame candidates and center of mass.
/// Parameters are assumed valid.
pub fn settle<T: Real>(
    map: &EsdfMap<T>,
    candidates: &[Point3<T>],
    com_body: &Point3<T>,
    initial: &Pose<T>,
    params: &SettlingParams<T>,
) -> PredictionResult<T> {
    let start = Instant::now();
    let mut state = SettlingState::new(*initial);
    let mut out = PredictionResult {
        pose: *initial,
        contacts: ContactState::new(Vec::new()),
        support: None,
        stability: None,
        com: initial * com_body,
        status: Status::Degenerate,
        fall_iters: 0,
        rotation_stages: 0,
        total_rot_iters: 0,
        elapsed: Duration::ZERO,
    };
    let status = run_stages(map, candidates, com_body, &mut state, params, &mut out);
    if let (Status::Converged, Some(fine)) = (status, params.refine_epsilon) {
        let fine_params = SettlingParams {
            epsilon: fine,
            refine_epsilon: None,
            ..params.clone()
        };
        let (mut fine_state, mut fine_out) = (SettlingState::new(state.pose), out.clone());
        if run_stages(
            map,
            candidates,
            com_body,
            &mut fine_state,
            &fine_params,
            &mut fine_out,
        ) == Status::Converged
        {
            (state, out) = (fine_state, fine_out);
        }
    }
    out.status = status;
    out.pose = state.pose;
    out.com = state.pose * com_body;
    out.elapsed = start.elapsed();
    out
}

fn run_stages<T: Real>(
    map: &EsdfMap<T>,
    candidates: &[Point3<T>],
    com_body: &Point3<T>,
    state: &mut SettlingState<T>,
    params: &SettlingParams<T>,
    out: &mut PredictionResult<T>,
) -> Status {
    let fall =
        |state: &mut SettlingState<T>, out: &mut PredictionResult<T>| -> Result<(), Status> {
            let n = falling_stage(map, candidates, state, params).map_err(StageError::status)?;
            out.fall_iters += n;
            Ok(())
        };
    if let Err(s) = fall(state, out) {
        return s;
    }
    for stage in 0..=params.max_rotation_stages {
        if let Err(e) = candidate_distances(map, candidates, &state.pose, &mut state.distances) {
            return e.status();
        }
        if !is_valid(&state.distances, params.epsilon, params.numerical_slack) {
            if let Err(s) = fall(state, out) {
                return s;
            }
        }
        let (contacts, _) = extract_contacts(
            candidates,
            &state.distances,
            &state.pose,
            params.epsilon,
            params.contact_merge_radius,
        );
        let com = state.pose * com_body;
        out.contacts = contacts.clone();
        let axis = match compute_rotation_axis(&contacts, &com) {
            Ok(AxisChoice::Stable { polygon, stability }) => {
                out.support = Some(polygon);
                out.stability = Some(stability);
                return Status::Converged;
            }
            Ok(AxisChoice::Rotate {
                axis,
                polygon,
                stability,
            }) => {
                out.support = polygon;
                out.stability = stability;
                axis
            }
            Err(AxisError::DegenerateAxis) if contacts.len() == 1 => {
                // Center of mass right above a single contact: tip about the
                // horizontal axis across the heading.
                let heading = state.pose.rotation * Vector3::x();
                let mut h = Vector3::new(heading.x, heading.y, T::zero());
                if h.norm() < lit(1e-9) {
                    h = Vector3::x();
                }
                RotationAxis {
                    point: contacts.points[0],
                    direction: Vector3::z().cross(&h),
                    kind: AxisKind::SingleContact,
                }
            }
            Err(_) => return Status::Degenerate,
        };
        if stage == params.max_rotation_stages {
            return Status::NoConvergence;
        }
        let Some(frame) = rotation_frame(&axis, &com) else {
            return Status::Degenerate;
        };
        let excluded: Vec<bool> = candidates
            .iter()
            .map(|p| {
                let w = state.pose * p;
                contacts
                    .points
                    .iter()
                    .any(|c| (c - w).norm() <= params.contact_merge_radius)
            })
            .collect();
        out.rotation_stages += 1;
        match rotation_stage(map, candidates, state, &frame, &excluded, params) {
            Ok(n) => out.total_rot_iters += n,
            Err(e) => return e.status(),
        }
    }
    Status::NoConvergence
}

//! Support polygons and force-angle stability margins under gravity.
//!
//! The margin of a tipover axis is `theta * |l|`, where `l` is the
//! perpendicular from the axis line to the center of mass and `theta` is the
//! signed angle, measured about the axis, between gravity and the direction
//! from the center of mass back to the axis. `theta` is positive when the
//! gravity line through the center of mass passes on the polygon side of the
//! axis, zero when it passes through the axis, and negative when the robot
//! would tip over it.

use nalgebra::{Point2, Point3, Vector3};
use thiserror::Error;

use crate::geometry::convex_hull_2d;
use crate::scalar::{lit, Real};

/// Contacts closer than this in the horizontal plane are merged before the
/// hull is built.
pub const HULL_MERGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("support polygon needs at least 3 contacts, got {0}")]
    TooFewContacts(usize),
    /// Projected contacts are collinear; the payload holds the indices of the
    /// two contacts farthest apart.
    #[error("contacts are collinear in the horizontal plane")]
    CollinearContacts { extreme: (usize, usize) },
    #[error("tipover axis has no horizontal extent")]
    DegenerateAxis,
}

/// Ground contacts in the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactState<T: Real> {
    pub points: Vec<Point3<T>>,
}

impl<T: Real> Default for ContactState<T> {
    fn default() -> Self {
        Self { points: Vec::new() }
    }
}

impl<T: Real> ContactState<T> {
    pub fn new(points: Vec<Point3<T>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Convex hull of the contacts projected onto world XY, counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPolygon<T: Real> {
    /// Hull vertices with their original heights.
    pub vertices: Vec<Point3<T>>,
    /// Index of each vertex in the contact list it was built from.
    pub contact_indices: Vec<usize>,
}

impl<T: Real> SupportPolygon<T> {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1` (cyclic).
    pub fn edge(&self, i: usize) -> (Point3<T>, Point3<T>) {
        (
            self.vertices[i],
            self.vertices[(i + 1) % self.vertices.len()],
        )
    }

    /// Tipover axes `a_i = c_i - c_{i+1}`.
    pub fn axes(&self) -> Vec<Vector3<T>> {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                a - b
            })
            .collect()
    }

    /// Whether `p` projects strictly inside the polygon.
    pub fn contains_xy(&self, p: &Point3<T>) -> bool {
        let q = Point2::new(p.x, p.y);
        (0..self.len()).all(|i| {
            let (a, b) = self.edge(i);
            crate::geometry::cross2(&Point2::new(a.x, a.y), &Point2::new(b.x, b.y), &q) > T::zero()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult<T: Real> {
    /// One margin per polygon edge.
    pub margins: Vec<T>,
    pub min: T,
    /// Edge with the smallest margin (lowest index on ties).
    pub argmin: usize,
}

impl<T: Real> StabilityResult<T> {
    pub fn is_stable(&self) -> bool {
        self.min > T::zero()
    }
}

/// Builds the support polygon of at least three contacts.
pub fn support_polygon<T: Real>(
    contacts: &ContactState<T>,
) -> Result<SupportPolygon<T>, StabilityError> {
    let pts = &contacts.points;
    if pts.len() < 3 {
        return Err(StabilityError::TooFewContacts(pts.len()));
    }
    let tol = lit::<T>(HULL_MERGE_TOLERANCE);
    let mut kept: Vec<usize> = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let dup = kept.iter().any(|&k| {
            let q = &pts[k];
            (p.x - q.x).hypot(p.y - q.y) <= tol
        });
        if !dup {
            kept.push(i);
        }
    }
    let planar: Vec<Point2<T>> = kept
        .iter()
        .map(|&i| Point2::new(pts[i].x, pts[i].y))
        .collect();
    let hull = convex_hull_2d(&planar);
    if hull.len() < 3 {
        return Err(StabilityError::CollinearContacts {
            extreme: farthest_pair(pts),
        });
    }
    Ok(SupportPolygon {
        vertices: hull.iter().map(|&h| pts[kept[h]]).collect(),
        contact_indices: hull.iter().map(|&h| kept[h]).collect(),
    })
}

/// Indices of the two contacts farthest apart in the horizontal plane
/// (lowest index pair on ties).
pub fn farthest_pair<T: Real>(pts: &[Point3<T>]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_d = -T::one();
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = (pts[i].x - pts[j].x).hypot(pts[i].y - pts[j].y);
            if d > best_d {
                best_d = d;
                best = (i, j);
            }
        }
    }
    best
}

/// Stability margin of the directed axis `from -> to` whose polygon interior
/// lies to the left (counter-clockwise orientation).
pub fn fasm_margin<T: Real>(
    from: &Point3<T>,
    to: &Point3<T>,
    com: &Point3<T>,
    gravity: &Vector3<T>,
) -> Result<T, StabilityError> {
    let axis = to - from;
    let horizontal = axis.x.hypot(axis.y);
    if !(horizontal > lit(1e-12)) {
        return Err(StabilityError::DegenerateAxis);
    }
    let a = axis.normalize();
    // Horizontal inward normal; perpendicular to `a` by construction.
    let inward = Vector3::new(-axis.y, axis.x, T::zero()) / horizontal;
    let up = a.cross(&inward);

    let rel = com - from;
    let l = rel - a * rel.dot(&a);
    let f = gravity - a * gravity.dot(&a);
    // In-plane coordinates of the CoM-to-axis direction and of gravity.
    let (u1, u2) = (-l.dot(&inward), -l.dot(&up));
    let (f1, f2) = (f.dot(&inward), f.dot(&up));
    let cross = u1 * f2 - u2 * f1;
    let dot = u1 * f1 + u2 * f2;
    let theta = cross.atan2(dot);
    Ok(theta * l.norm())
}

/// Evaluates every edge of the polygon and reports the least stable one.
pub fn min_stability<T: Real>(
    polygon: &SupportPolygon<T>,
    com: &Point3<T>,
) -> Result<StabilityResult<T>, StabilityError> {
    if polygon.len() < 3 {
        return Err(StabilityError::TooFewContacts(polygon.len()));
    }
    let gravity = -Vector3::z();
    let mut margins = Vec::with_capacity(polygon.len());
    let mut argmin = 0;
    for i in 0..polygon.len() {
        let (a, b) = polygon.edge(i);
        let beta = fasm_margin(&a, &b, com, &gravity)?;
        if i > 0 && beta < margins[argmin] {
            argmin = i;
        }
        margins.push(beta);
    }
    Ok(StabilityResult {
        min: margins[argmin],
        margins,
        argmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g() -> Vector3<f64> {
        -Vector3::z()
    }

    fn square(z: f64) -> ContactState<f64> {
        ContactState::new(vec![
            Point3::new(0.0, 0.0, z),
            Point3::new(1.0, 0.0, z),
            Point3::new(1.0, 1.0, z),
            Point3::new(0.0, 1.0, z),
        ])
    }

    #[test]
    fn triangle_is_returned_ccw() {
        let c = ContactState::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.1),
            Point3::new(1.0, 0.0, 0.2),
        ]);
        let poly = support_polygon(&c).unwrap();
        assert_eq!(poly.contact_indices, vec![0, 2, 1]);
        assert_relative_eq!(poly.vertices[1].z, 0.2);
    }

    #[test]
    fn square_with_center_drops_center() {
        let mut c = square(0.0);
        c.points.push(Point3::new(0.5, 0.5, 0.0));
        let poly = support_polygon(&c).unwrap();
        assert_eq!(poly.len(), 4);
        assert!(!poly.contact_indices.contains(&4));
    }

    #[test]
    fn collinear_contacts_report_extremes() {
        let c = ContactState::new(vec![
            Point3::new(0.5, 0.0, 0.0),
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
        ]);
        assert_eq!(
            support_polygon(&c),
            Err(StabilityError::CollinearContacts { extreme: (1, 2) })
        );
        assert_eq!(
            support_polygon(&ContactState::<f64>::new(vec![Point3::origin(); 2])),
            Err(StabilityError::TooFewContacts(2))
        );
    }

    #[test]
    fn com_above_axis_is_marginal() {
        let beta = fasm_margin(
            &Point3::new(0.0, 0.0, 0.0),
            &Point3::new(1.0, 0.0, 0.0),
            &Point3::new(0.3, 0.0, 0.5),
            &g(),
        )
        .unwrap();
        assert_relative_eq!(beta, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn square_margins_are_equal_and_positive() {
        let poly = support_polygon(&square(0.0)).unwrap();
        let h: f64 = 0.4;
        let res = min_stability(&poly, &Point3::new(0.5, 0.5, h)).unwrap();
        // Each edge: |l| = sqrt(0.25 + h^2), theta = atan(0.5 / h).
        let expected = (0.5f64).atan2(h) * (0.25 + h * h).sqrt();
        for m in &res.margins {
            assert_relative_eq!(*m, expected, epsilon = 1e-12);
        }
        assert_eq!(res.argmin, 0);
        assert!(res.is_stable());
    }

    #[test]
    fn displaced_com_flips_sign_on_one_edge() {
        let poly = support_polygon(&square(0.0)).unwrap();
        // Edge order from (0,0): bottom (y=0), right (x=1), top (y=1), left (x=0).
        let res = min_stability(&poly, &Point3::new(1.3, 0.5, 0.4)).unwrap();
        assert!(res.margins[1] < 0.0);
        assert!(res.margins[3] > 0.0);
        assert_eq!(res.argmin, 1);
        assert!(!res.is_stable());
    }

    #[test]
    fn equilateral_ties_resolve_to_first_edge() {
        let s3 = 3f64.sqrt();
        let c = ContactState::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.5, s3 / 2.0, 0.0),
        ]);
        let poly = support_polygon(&c).unwrap();
        let res = min_stability(&poly, &Point3::new(0.5, s3 / 6.0, 0.3)).unwrap();
        assert!(res
            .margins
            .iter()
            .all(|m| (m - res.margins[0]).abs() < 1e-12));
        assert_eq!(res.argmin, 0);
    }

    #[test]
    fn com_over_edge_midpoint_gives_zero_minimum() {
        let poly = support_polygon(&square(0.0)).unwrap();
        let res = min_stability(&poly, &Point3::new(0.5, 0.0, 0.4)).unwrap();
        assert_relative_eq!(res.min, 0.0, epsilon = 1e-15);
        assert_eq!(res.argmin, 0);
    }

    #[test]
    fn tilted_edges_keep_the_horizontal_side_test() {
        // Contacts at different heights; CoM inside in XY must stay stable.
        let c = ContactState::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.3),
            Point3::new(1.0, 1.0, 0.5),
            Point3::new(0.0, 1.0, 0.1),
        ]);
        let poly = support_polygon(&c).unwrap();
        assert!(min_stability(&poly, &Point3::new(0.9, 0.5, 0.8))
            .unwrap()
            .is_stable());
        assert!(!min_stability(&poly, &Point3::new(1.1, 0.5, 0.8))
            .unwrap()
            .is_stable());
    }
}

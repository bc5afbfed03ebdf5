//! Small geometric kernels: rigid poses, planar hulls, closest points.

use nalgebra::{Isometry3, Point2, Point3, Translation3, UnitQuaternion, Vector3};

use crate::scalar::{lit, Real};

/// Rigid transform world <- body.
pub type Pose<T> = Isometry3<T>;

/// Builds a pose from a translation and Z-Y-X (yaw, pitch, roll) Euler angles.
pub fn pose_from_euler<T: Real>(translation: Vector3<T>, roll: T, pitch: T, yaw: T) -> Pose<T> {
    Isometry3::from_parts(
        Translation3::from(translation),
        UnitQuaternion::from_euler_angles(roll, pitch, yaw),
    )
}

/// Z-Y-X Euler angles `(roll, pitch, yaw)` of a pose's rotation.
pub fn euler_of<T: Real>(pose: &Pose<T>) -> (T, T, T) {
    pose.rotation.euler_angles()
}

/// Angle of the minimal rotation aligning `a` with `b`.
pub fn rotation_distance<T: Real>(a: &UnitQuaternion<T>, b: &UnitQuaternion<T>) -> T {
    let (qa, mut qb) = (a.quaternion().coords, b.quaternion().coords);
    if qa.dot(&qb) < T::zero() {
        qb = -qb;
    }
    lit::<T>(4.0) * (qa - qb).norm().atan2((qa + qb).norm())
}

/// z-component of the planar cross product `(b - a) x (c - a)`.
#[inline]
pub fn cross2<T: Real>(a: &Point2<T>, b: &Point2<T>, c: &Point2<T>) -> T {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Andrew's monotone chain.
///
/// Returns indices into `points` of the strictly convex hull in
/// counter-clockwise order, starting at the lexicographically smallest point.
/// Collinear and duplicate points are dropped. Fewer than three indices are
/// returned when the input is degenerate.
pub fn convex_hull_2d<T: Real>(points: &[Point2<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&points[i], &points[j]);
        a.x.partial_cmp(&b.x)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal))
            .then(i.cmp(&j))
    });
    order.dedup_by(|a, b| points[*a] == points[*b]);
    if order.len() < 3 {
        return order;
    }

    let mut hull: Vec<usize> = Vec::with_capacity(2 * order.len());
    for &i in &order {
        while hull.len() >= 2
            && cross2(
                &points[hull[hull.len() - 2]],
                &points[hull[hull.len() - 1]],
                &points[i],
            ) <= T::zero()
        {
            hull.pop();
        }
        hull.push(i);
    }
    let lower_len = hull.len() + 1;
    for &i in order.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross2(
                &points[hull[hull.len() - 2]],
                &points[hull[hull.len() - 1]],
                &points[i],
            ) <= T::zero()
        {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
///
/// The triangle must be non-degenerate.
pub fn closest_point_on_triangle<T: Real>(
    p: &Point3<T>,
    a: &Point3<T>,
    b: &Point3<T>,
    c: &Point3<T>,
) -> Point3<T> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= T::zero() && d2 <= T::zero() {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= T::zero() && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= T::zero() && d1 >= T::zero() && d3 <= T::zero() {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= T::zero() && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= T::zero() && d2 >= T::zero() && d6 <= T::zero() {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= T::zero() && (d4 - d3) >= T::zero() && (d5 - d6) >= T::zero() {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = T::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// A triangle cached for repeated distance queries.
#[derive(Debug, Clone)]
pub struct Triangle<T: Real> {
    pub a: Point3<T>,
    pub b: Point3<T>,
    pub c: Point3<T>,
}

impl<T: Real> Triangle<T> {
    /// Returns `None` for (near) zero-area triangles.
    pub fn new(a: Point3<T>, b: Point3<T>, c: Point3<T>) -> Option<Self> {
        let area2 = (b - a).cross(&(c - a)).norm();
        let scale = (b - a).norm().max((c - a).norm()).max(lit(1e-300));
        if area2 <= scale * scale * lit(1e-12) {
            None
        } else {
            Some(Self { a, b, c })
        }
    }

    pub fn distance(&self, p: &Point3<T>) -> T {
        (p - closest_point_on_triangle(p, &self.a, &self.b, &self.c)).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hull_of_square_with_center() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert_eq!(convex_hull_2d(&pts), vec![0, 1, 3, 4]);
    }

    #[test]
    fn hull_drops_collinear_and_duplicates() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert_eq!(convex_hull_2d(&pts), vec![0, 2, 4]);
        let line = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(2.0, 2.0),
        ];
        assert!(convex_hull_2d(&line).len() < 3);
    }

    #[test]
    fn triangle_regions() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(1.0, 0.0, 0.0);
        let c = Point3::new(0.0, 1.0, 0.0);
        let t = Triangle::new(a, b, c).unwrap();
        assert_relative_eq!(t.distance(&Point3::new(0.2, 0.2, 0.5)), 0.5);
        assert_relative_eq!(t.distance(&Point3::new(-1.0, -1.0, 0.0)), 2f64.sqrt());
        assert_relative_eq!(t.distance(&Point3::new(1.0, 1.0, 0.0)), 0.5f64.sqrt());
        assert!(Triangle::new(a, b, Point3::new(2.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn rotation_distance_of_yaw() {
        let a = UnitQuaternion::identity();
        let b = UnitQuaternion::from_euler_angles(0.0, 0.0, 10f64.to_radians());
        assert_relative_eq!(
            rotation_distance(&a, &b),
            10f64.to_radians(),
            epsilon = 1e-12
        );
    }
}

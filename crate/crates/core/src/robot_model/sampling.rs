//! Uniform contact-candidate sampling of link surfaces.

use nalgebra::{Point2, Point3};

use super::{LinkGeometry, Pulley};
use crate::geometry::convex_hull_2d;
use crate::scalar::{lit, to_f64, Real};

const PULLEY_RESOLUTION: usize = 720;

/// Number of equal segments needed so that none exceeds `spacing`.
pub(crate) fn segments<T: Real>(length: T, spacing: T) -> usize {
    let n = (to_f64(length / spacing) - 1e-9).ceil();
    if n < 1.0 {
        1
    } else {
        n as usize
    }
}

/// `count + 1` evenly spaced values from `lo` to `hi`; a single value when
/// the span is zero.
fn ticks<T: Real>(lo: T, hi: T, spacing: T) -> Vec<T> {
    if !(hi > lo) {
        return vec![lo];
    }
    let n = segments(hi - lo, spacing);
    (0..=n)
        .map(|k| lo + (hi - lo) * lit(k as f64) / lit(n as f64))
        .collect()
}

pub(crate) fn sample_link<T: Real>(geometry: &LinkGeometry<T>, spacing: T) -> Vec<Point3<T>> {
    match geometry {
        LinkGeometry::None => Vec::new(),
        LinkGeometry::Point { position } => vec![*position],
        LinkGeometry::Box { center, size } => {
            let half: nalgebra::Vector3<T> = size / lit::<T>(2.0);
            let z = center.z - half.z;
            let xs = ticks(center.x - half.x, center.x + half.x, spacing);
            let ys = ticks(center.y - half.y, center.y + half.y, spacing);
            let mut out = Vec::with_capacity(xs.len() * ys.len());
            for &y in &ys {
                for &x in &xs {
                    out.push(Point3::new(x, y, z));
                }
            }
            out
        }
        LinkGeometry::Cylinder {
            center,
            radius,
            length,
        } => {
            let ring = segments(lit::<T>(2.0) * T::pi() * *radius, spacing);
            let half = *length / lit(2.0);
            let ys = ticks(center.y - half, center.y + half, spacing);
            let mut out = Vec::with_capacity(ring * ys.len());
            for &y in &ys {
                for k in 0..ring {
                    // Start at the bottom of the wheel.
                    let phi = -T::frac_pi_2() + T::two_pi() * lit(k as f64) / lit(ring as f64);
                    out.push(Point3::new(
                        center.x + *radius * phi.cos(),
                        y,
                        center.z + *radius * phi.sin(),
                    ));
                }
            }
            out
        }
        LinkGeometry::Track { pulleys, width, y } => {
            let outline = belt_outline(pulleys, spacing);
            let half = *width / lit(2.0);
            let ys = ticks(*y - half, *y + half, spacing);
            let mut out = Vec::with_capacity(outline.len() * ys.len());
            for &yy in &ys {
                for p in &outline {
                    out.push(Point3::new(p.x, yy, p.y));
                }
            }
            out
        }
    }
}

/// Points evenly spaced in arc length around the convex outline of the
/// pulleys, in (x, z) coordinates. The walk starts at the lowest outline
/// point and runs counter-clockwise in the x-z plane.
pub(crate) fn belt_outline<T: Real>(pulleys: &[Pulley<T>], spacing: T) -> Vec<Point2<T>> {
    let mut ring: Vec<Point2<T>> = Vec::with_capacity(pulleys.len() * PULLEY_RESOLUTION);
    for p in pulleys {
        for k in 0..PULLEY_RESOLUTION {
            let phi = T::two_pi() * lit(k as f64) / lit(PULLEY_RESOLUTION as f64);
            ring.push(Point2::new(
                p.x + p.radius * phi.cos(),
                p.z + p.radius * phi.sin(),
            ));
        }
    }
    let hull: Vec<Point2<T>> = convex_hull_2d(&ring).into_iter().map(|i| ring[i]).collect();
    if hull.len() < 3 {
        return hull;
    }
    let start = (0..hull.len())
        .min_by(|&a, &b| {
            (hull[a].y, hull[a].x)
                .partial_cmp(&(hull[b].y, hull[b].x))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let loop_pts: Vec<Point2<T>> = (0..=hull.len())
        .map(|k| hull[(start + k) % hull.len()])
        .collect();
    let perimeter = loop_pts
        .windows(2)
        .fold(T::zero(), |acc, w| acc + (w[1] - w[0]).norm());
    let count = segments(perimeter, spacing);
    let step = perimeter / lit(count as f64);

    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    let mut seg_start = T::zero();
    for k in 0..count {
        let s = step * lit(k as f64);
        loop {
            let len = (loop_pts[seg + 1] - loop_pts[seg]).norm();
            if s <= seg_start + len || seg + 2 >= loop_pts.len() {
                let t = if len > T::zero() {
                    ((s - seg_start) / len).min(T::one())
                } else {
                    T::zero()
                };
                out.push(loop_pts[seg] + (loop_pts[seg + 1] - loop_pts[seg]) * t);
                break;
            }
            seg_start += len;
            seg += 1;
        }
    }
    out
}

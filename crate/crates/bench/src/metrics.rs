//! Pose error measures and ground-truth reduction.

use nalgebra::Isometry3;
use thiserror::Error;
use trackpose::{euler_of, rotation_distance, QueryPose};

/// Pitch magnitude (degrees) from which yaw extraction is ambiguous.
pub const GIMBAL_LIMIT_DEG: f64 = 89.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("pitch {pitch_deg:.2} deg is too close to +-90 deg to extract a heading")]
pub struct GimbalAmbiguity {
    pub pitch_deg: f64,
}

/// Euclidean position error (m) and minimal rotation angle (rad).
pub fn pose_errors(gt: &Isometry3<f64>, pred: &Isometry3<f64>) -> (f64, f64) {
    let pos = (gt.translation.vector - pred.translation.vector).norm();
    (pos, rotation_distance(&gt.rotation, &pred.rotation))
}

/// Keeps x, y and the Z-Y-X yaw of a ground-truth pose.
pub fn reduce_to_query(
    gt: &Isometry3<f64>,
    z_hint: f64,
) -> Result<QueryPose<f64>, GimbalAmbiguity> {
    let (_, pitch, yaw) = euler_of(gt);
    if pitch.abs().to_degrees() >= GIMBAL_LIMIT_DEG {
        return Err(GimbalAmbiguity {
            pitch_deg: pitch.to_degrees(),
        });
    }
    Ok(QueryPose::new(
        gt.translation.x,
        gt.translation.y,
        yaw,
        z_hint,
    ))
}

/// Per-axis differences `pred - reference`: x, y, z (m) and roll, pitch, yaw
/// (rad, wrapped to `(-pi, pi]`).
pub fn axis_errors(reference: &Isometry3<f64>, pred: &Isometry3<f64>) -> [f64; 6] {
    let (r0, p0, y0) = euler_of(reference);
    let (r1, p1, y1) = euler_of(pred);
    let d = pred.translation.vector - reference.translation.vector;
    [d.x, d.y, d.z, wrap(r1 - r0), wrap(p1 - p0), wrap(y1 - y0)]
}

fn wrap(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let w = a.rem_euclid(t);
    if w > std::f64::consts::PI {
        w - t
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use trackpose::pose_from_euler;

    #[test]
    fn identical_poses_have_no_error() {
        let p = pose_from_euler(Vector3::new(1.0, 2.0, 0.3), 0.1, -0.2, 0.5);
        assert_eq!(pose_errors(&p, &p), (0.0, 0.0));
    }

    #[test]
    fn yaw_offset_is_pure_rotation_error() {
        let a = pose_from_euler(Vector3::zeros(), 0.0, 0.0, 0.0);
        let b = pose_from_euler(Vector3::zeros(), 0.0, 0.0, 10f64.to_radians());
        let (p, r) = pose_errors(&a, &b);
        assert_eq!(p, 0.0);
        assert_relative_eq!(r, 10f64.to_radians(), epsilon = 1e-12);
    }

    #[test]
    fn translation_offset_is_three_four_five() {
        let a = pose_from_euler(Vector3::zeros(), 0.0, 0.0, 0.0);
        let b = pose_from_euler(Vector3::new(0.03, 0.04, 0.0), 0.0, 0.0, 0.0);
        let (p, r) = pose_errors(&a, &b);
        assert_relative_eq!(p, 0.05, epsilon = 1e-15);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn reduction_drops_roll_and_pitch() {
        let q = reduce_to_query(&Isometry3::identity(), 0.4).unwrap();
        assert_eq!((q.x, q.y, q.yaw, q.z_hint), (0.0, 0.0, 0.0, 0.4));
        let gt = pose_from_euler(
            Vector3::new(1.0, -2.0, 0.7),
            5f64.to_radians(),
            3f64.to_radians(),
            30f64.to_radians(),
        );
        let q = reduce_to_query(&gt, 0.4).unwrap();
        assert_relative_eq!(q.yaw, 30f64.to_radians(), epsilon = 1e-12);
        assert_eq!((q.x, q.y), (1.0, -2.0));
    }

    #[test]
    fn steep_pitch_is_flagged() {
        let gt = pose_from_euler(Vector3::zeros(), 0.0, 89.5f64.to_radians(), 0.3);
        assert!(reduce_to_query(&gt, 0.0).is_err());
    }

    #[test]
    fn axis_errors_wrap_yaw() {
        let a = pose_from_euler(Vector3::zeros(), 0.0, 0.0, 3.1);
        let b = pose_from_euler(Vector3::zeros(), 0.0, 0.0, -3.1);
        let e = axis_errors(&a, &b);
        assert_relative_eq!(e[5], std::f64::consts::TAU - 6.2, epsilon = 1e-9);
    }
}

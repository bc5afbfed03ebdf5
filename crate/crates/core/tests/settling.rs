use nalgebra::{Isometry3, Matrix3, Point3, Translation3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use trackpose::arenas::arena;
use trackpose::robot_model::bundled;
use trackpose::sdf_map::SdfPrimitive;
use trackpose::settling::{
    candidate_distances, chord_angle, compute_rotation_axis, falling_stage, rotation_angle,
    rotation_frame, rotation_stage, AxisChoice, ContactProjection, SettlingState,
};
use trackpose::{
    euler_of, predict_pose, settle, Bounds, BuildOptions, EsdfMap, JointConfig, PredictionResult,
    QueryPose, RobotModel, SettlingParams, Status, TerrainScene,
};

fn flat_map() -> EsdfMap<f64> {
    let b = Bounds::new(Point3::new(-2.0, -2.0, -0.5), Point3::new(2.0, 2.0, 1.5));
    TerrainScene::new("flat", vec![SdfPrimitive::ground(0.0)])
        .build_map(&b, &BuildOptions::default())
        .unwrap()
}

fn plane_map(normal: Vector3<f64>) -> EsdfMap<f64> {
    let b = Bounds::new(Point3::new(-2.0, -2.0, -1.5), Point3::new(2.0, 2.0, 1.5));
    TerrainScene::new("plane", vec![SdfPrimitive::plane(Point3::origin(), normal)])
        .build_map(&b, &BuildOptions::default())
        .unwrap()
}

/// Bottom face of a box robot, body frame at its center of mass.
fn box_bottom(hx: f64, hy: f64, hz: f64) -> Vec<Point3<f64>> {
    let n = 8;
    let mut out = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let x = -hx + 2.0 * hx * i as f64 / n as f64;
            let y = -hy + 2.0 * hy * j as f64 / n as f64;
            out.push(Point3::new(x, y, -hz));
        }
    }
    out
}

fn tilted(z: f64, pitch: f64) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::new(0.0, 0.0, z),
        UnitQuaternion::from_euler_angles(0.0, pitch, 0.0),
    )
}

fn deg(a: f64) -> f64 {
    a.to_degrees()
}

fn without_timing(mut r: PredictionResult<f64>) -> PredictionResult<f64> {
    r.elapsed = Default::default();
    r
}

fn assert_valid(r: &PredictionResult<f64>, map: &EsdfMap<f64>, candidates: &[Point3<f64>]) {
    let mut d = Vec::new();
    candidate_distances(map, candidates, &r.pose, &mut d).unwrap();
    assert!(d.iter().any(|&x| x < 0.01), "no contact");
    assert!(
        d.iter().all(|&x| x >= -1e-6),
        "penetration {}",
        d.iter().cloned().fold(f64::INFINITY, f64::min)
    );
    assert!(r.stability.as_ref().is_some_and(|s| s.min > 0.0));
}

#[test]
fn box_settles_flat_at_half_height() {
    let map = flat_map();
    let cands = box_bottom(0.3, 0.2, 0.1);
    let r = settle(
        &map,
        &cands,
        &Point3::origin(),
        &QueryPose::new(0.1, -0.2, 0.4, 1.0).initial_pose(),
        &SettlingParams::default(),
    );
    assert_eq!(r.status, Status::Converged);
    let (roll, pitch, yaw) = euler_of(&r.pose);
    assert!(deg(roll).abs() < 0.5 && deg(pitch).abs() < 0.5);
    assert!((yaw - 0.4).abs() < 1e-9);
    assert!((r.pose.translation.z - 0.1).abs() < 0.01);
    assert_valid(&r, &map, &cands);
}

#[test]
fn asterix_on_a_16_degree_ramp_matches_the_slope() {
    let slope = 16f64.to_radians();
    let map = plane_map(Vector3::new(-slope.sin(), 0.0, slope.cos()));
    let robot: RobotModel<f64> = bundled("asterix").unwrap();
    for yaw in [0.0, std::f64::consts::PI] {
        let r = predict_pose(
            &map,
            &robot,
            &JointConfig::new(),
            &QueryPose::new(0.0, 0.0, yaw, 0.7),
            &SettlingParams::default(),
        )
        .unwrap();
        assert_eq!(r.status, Status::Converged);
        let (roll, pitch, _) = euler_of(&r.pose);
        let expected = if yaw == 0.0 { -16.0 } else { 16.0 };
        assert!((deg(pitch) - expected).abs() < 1.0, "pitch {}", deg(pitch));
        assert!(deg(roll).abs() < 1.0, "roll {}", deg(roll));
    }
}

#[test]
fn falling_from_above_reaches_contact() {
    let map = flat_map();
    let cands = box_bottom(0.3, 0.2, 0.1);
    let mut state = SettlingState::new(tilted(1.0, 0.0));
    let n = falling_stage(&map, &cands, &mut state, &SettlingParams::default()).unwrap();
    assert!(n >= 1);
    assert!(state.distances.iter().any(|&d| d < 0.01));
    assert!(state.distances.iter().all(|&d| d >= -1e-6));
}

#[test]
fn falling_from_below_moves_up() {
    let map = flat_map();
    let cands = box_bottom(0.3, 0.2, 0.1);
    let mut state = SettlingState::new(tilted(-0.2, 0.0));
    falling_stage(&map, &cands, &mut state, &SettlingParams::default()).unwrap();
    assert!(state.pose.translation.z > 0.09 && state.pose.translation.z < 0.11);
}

#[test]
fn falling_from_valid_contact_is_a_no_op() {
    let map = flat_map();
    let cands = box_bottom(0.3, 0.2, 0.1);
    let start = tilted(0.105, 0.0);
    let mut state = SettlingState::new(start);
    assert_eq!(
        falling_stage(&map, &cands, &mut state, &SettlingParams::default()),
        Ok(0)
    );
    assert_eq!(state.pose, start);
}

#[test]
fn all_candidates_off_the_map_is_out_of_map() {
    let map = flat_map();
    let cands = box_bottom(0.3, 0.2, 0.1);
    let r = settle(
        &map,
        &cands,
        &Point3::origin(),
        &QueryPose::new(9.0, 0.0, 0.0, 0.5).initial_pose(),
        &SettlingParams::default(),
    );
    assert_eq!(r.status, Status::OutOfMap);
}

#[test]
fn rotation_angle_signs() {
    let p = Point3::new(0.0, 0.8, 0.3);
    assert_eq!(chord_angle(&p, 0.0), 0.0);
    assert_eq!(rotation_angle(&p, &p, 0.0).unwrap(), 0.0);
    assert!(chord_angle(&p, -0.02) < 0.0);
    assert!(rotation_angle(&p, &(p + Vector3::new(0.0, 0.0, -0.02)), -0.02).unwrap() < 0.0);
}

#[test]
fn thirty_degree_candidate_angle() {
    // Axis along x on the ground, candidate at radius 1 raised 30 degrees.
    // Gravity is +z in the rotation frame, so the ground is z = 0 and the
    // candidate sits at negative z.
    let theta = 30f64.to_radians();
    let p = Point3::new(0.0, theta.cos(), -theta.sin());
    let d = theta.sin();
    // The chord angle underestimates the arc by at most this much at 30 deg.
    let chord_error = theta - 2.0 * (d / 2.0).asin();
    let alpha = chord_angle(&p, d);
    assert!(alpha <= theta);
    assert!((alpha - theta).abs() <= chord_error + 1e-12);
    assert!(deg(chord_error) < 1.1);
    let vertical = rotation_angle(&p, &(p + Vector3::new(0.0, 0.0, d)), d).unwrap();
    assert!(
        (vertical - theta).abs() < 1e-9,
        "vertical {}",
        deg(vertical)
    );
}

#[test]
fn box_tips_about_its_resting_edge() {
    let map = flat_map();
    let cands = box_bottom(0.3, 0.2, 0.1);
    for projection in [ContactProjection::Chord, ContactProjection::Vertical] {
        let params = SettlingParams {
            projection,
            ..SettlingParams::default()
        };
        // Tilted 20 degrees nose-down: the front edge lands first.
        let mut state = SettlingState::new(tilted(0.6, 20f64.to_radians()));
        falling_stage(&map, &cands, &mut state, &params).unwrap();
        let edge_x = (state.pose * Point3::new(0.3, 0.0, -0.1)).x;
        let r = settle(&map, &cands, &Point3::origin(), &state.pose, &params);
        assert_eq!(r.status, Status::Converged);
        let (roll, pitch, _) = euler_of(&r.pose);
        assert!(deg(pitch).abs() < 1.0 && deg(roll).abs() < 1.0);
        // Rigid rotation about the edge: the box center ends half a length behind it.
        assert!(
            (r.pose.translation.x - (edge_x - 0.3)).abs() < 0.01,
            "x {}",
            r.pose.translation.x
        );
        assert!((r.pose.translation.z - 0.1).abs() < 0.01);
    }
}

#[test]
fn rotation_fixes_points_on_the_axis() {
    let map = flat_map();
    let cands = box_bottom(0.3, 0.2, 0.1);
    let params = SettlingParams::default();
    let mut state = SettlingState::new(tilted(0.6, 15f64.to_radians()));
    falling_stage(&map, &cands, &mut state, &params).unwrap();
    let (contacts, _) = trackpose::settling::extract_contacts(
        &cands,
        &state.distances,
        &state.pose,
        params.epsilon,
        params.contact_merge_radius,
    );
    let com = state.pose * Point3::origin();
    let AxisChoice::Rotate { axis, .. } = compute_rotation_axis(&contacts, &com).unwrap() else {
        panic!("already stable")
    };
    let frame = rotation_frame(&axis, &com).unwrap();
    let before = state.pose;
    let excluded = vec![false; cands.len()];
    rotation_stage(&map, &cands, &mut state, &frame, &excluded, &params).unwrap();
    let motion = state.pose * before.inverse();
    for t in [-1.0, 0.0, 0.5, 2.0] {
        let p = axis.point + axis.direction * t;
        assert!((motion * p - p).norm() < 1e-9);
    }
    // The box is symmetric about the plane through the axis, so the axis
    // contacts stay put as well.
    for c in &contacts.points {
        assert!((motion * c - c).norm() < 1e-6);
    }
}

#[test]
fn settling_is_bit_identical_across_runs() {
    let scene: TerrainScene<f64> = arena("curb", 0).unwrap();
    let map = scene
        .build_map(scene.bounds.as_ref().unwrap(), &BuildOptions::default())
        .unwrap();
    let robot: RobotModel<f64> = bundled("asterix").unwrap();
    let q = JointConfig::new().with("flipper_front", 0.3);
    for k in 0..5 {
        let query = QueryPose::new(1.0 + 0.4 * k as f64, 1.1, 0.3 * k as f64, 0.6);
        let a = predict_pose(&map, &robot, &q, &query, &SettlingParams::default()).unwrap();
        let b = predict_pose(&map, &robot, &q, &query, &SettlingParams::default()).unwrap();
        assert_eq!(without_timing(a), without_timing(b));
    }
}

#[test]
fn final_rotations_stay_orthonormal() {
    let scene: TerrainScene<f64> = arena("elevated-ramps", 7).unwrap();
    let map = scene
        .build_map(scene.bounds.as_ref().unwrap(), &BuildOptions::default())
        .unwrap();
    let robot: RobotModel<f64> = bundled("asterix").unwrap();
    for k in 0..10 {
        let query = QueryPose::new(
            0.9 + 0.3 * k as f64,
            3.9 - 0.3 * k as f64,
            0.6 * k as f64,
            0.6,
        );
        let r = predict_pose(
            &map,
            &robot,
            &JointConfig::new(),
            &query,
            &SettlingParams::default(),
        )
        .unwrap();
        let m: Matrix3<f64> = r.pose.rotation.to_rotation_matrix().into_inner();
        assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-9);
        assert!((m.determinant() - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn falling_never_overshoots_and_decays_exactly(
        tilt in 0.0f64..25.0,
        dir in 0.0f64..6.28,
        z0 in -0.3f64..1.0,
        pitch in -0.2f64..0.2,
    ) {
        let t = tilt.to_radians();
        let map = plane_map(Vector3::new(t.sin() * dir.cos(), t.sin() * dir.sin(), t.cos()));
        let cands = box_bottom(0.3, 0.2, 0.1);
        let params = SettlingParams::<f64>::default();
        let start = tilted(z0, pitch);
        let mut prev_min = {
            let mut d = Vec::new();
            candidate_distances(&map, &cands, &start, &mut d).unwrap();
            d.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        for cap in 1..=12 {
            let mut state = SettlingState::new(start);
            let capped = SettlingParams { max_fall_iters: cap, ..params.clone() };
            let iters = match falling_stage(&map, &cands, &mut state, &capped) {
                Ok(n) => n,
                Err(_) => cap,
            };
            let mut expected_step = 1.0;
            for _ in 0..iters {
                expected_step *= params.step_decay;
            }
            prop_assert_eq!(state.step, expected_step);
            let mut d = Vec::new();
            candidate_distances(&map, &cands, &state.pose, &mut d).unwrap();
            let now = d.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(now >= -prev_min.abs() - 1e-12, "{} after {}", now, prev_min);
            if iters < cap {
                break;
            }
            prev_min = now;
        }
    }
}

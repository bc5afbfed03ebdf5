use nalgebra::{Point2, Point3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trackpose::geometry::convex_hull_2d;
use trackpose::stability::{fasm_margin, min_stability, support_polygon};
use trackpose::ContactState;

/// O(n^3) hull: a directed pair is a hull edge when every other point lies
/// strictly to its left. Returns vertices CCW from the lexicographic minimum.
fn brute_hull(pts: &[Point2<f64>]) -> Vec<usize> {
    let n = pts.len();
    let mut next = vec![None; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let left = (0..n).filter(|&k| k != i && k != j).all(|k| {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x) > 0.0
            });
            if left {
                next[i] = Some(j);
            }
        }
    }
    let start = (0..n)
        .filter(|&i| next[i].is_some())
        .min_by(|&a, &b| {
            pts[a]
                .x
                .partial_cmp(&pts[b].x)
                .unwrap()
                .then(pts[a].y.partial_cmp(&pts[b].y).unwrap())
        })
        .unwrap();
    let mut out = vec![start];
    let mut cur = next[start].unwrap();
    while cur != start {
        out.push(cur);
        cur = next[cur].unwrap();
    }
    out
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2<f64>> {
    (0..n)
        .map(|_| Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Even-odd ray casting, independent of the hull orientation.
fn point_in_polygon(poly: &[Point2<f64>], q: &Point2<f64>) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a.y > q.y) != (b.y > q.y) && q.x < (b.x - a.x) * (q.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
    }
    inside
}

fn distance_to_boundary(poly: &[Point2<f64>], q: &Point2<f64>) -> f64 {
    (0..poly.len())
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            let ab = b - a;
            let t = ((q - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            (q - (a + ab * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Straightforward margin of edge `a -> b` under gravity `-z`: the signed
/// angle between gravity and the CoM-to-axis direction, times the arm.
fn reference_margin(a: &Point3<f64>, b: &Point3<f64>, com: &Point3<f64>) -> f64 {
    let axis = (b - a).normalize();
    let rel = com - a;
    let l = rel - axis * rel.dot(&axis);
    let g = Vector3::new(0.0, 0.0, -1.0);
    let f = g - axis * g.dot(&axis);
    let to_axis = -l;
    let sign = axis.dot(&to_axis.cross(&f)).signum();
    sign * to_axis.angle(&f) * l.norm()
}

fn contacts_3d(rng: &mut ChaCha8Rng, n: usize) -> ContactState<f64> {
    ContactState::new(
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-0.1..0.1),
                )
            })
            .collect(),
    )
}

#[test]
fn fifty_random_points_match_brute_force_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let pts = random_points(&mut rng, 50);
    assert_eq!(convex_hull_2d(&pts), brute_hull(&pts));
}

#[test]
fn thousand_random_sets_match_brute_force_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let n = rng.gen_range(3..40);
        let pts = random_points(&mut rng, n);
        let hull = convex_hull_2d(&pts);
        assert_eq!(hull, brute_hull(&pts), "set of {n}");
        let contacts = ContactState::new(pts.iter().map(|p| Point3::new(p.x, p.y, 0.0)).collect());
        assert_eq!(support_polygon(&contacts).unwrap().contact_indices, hull);
    }
}

#[test]
fn positive_margin_iff_com_projects_inside() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.gen_range(3..12);
        let contacts = ContactState::new(
            (0..n)
                .map(|_| Point3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.4..0.4), 0.0))
                .collect(),
        );
        let Ok(poly) = support_polygon(&contacts) else {
            continue;
        };
        let com = Point3::new(
            rng.gen_range(-0.7..0.7),
            rng.gen_range(-0.6..0.6),
            rng.gen_range(0.05..1.0),
        );
        let ring: Vec<Point2<f64>> = poly
            .vertices
            .iter()
            .map(|v| Point2::new(v.x, v.y))
            .collect();
        let q = Point2::new(com.x, com.y);
        if distance_to_boundary(&ring, &q) < 1e-9 {
            continue;
        }
        let stable = min_stability(&poly, &com).unwrap().is_stable();
        assert_eq!(stable, point_in_polygon(&ring, &q), "com {com:?}");
        checked += 1;
    }
}

#[test]
fn minimum_matches_duplicate_implementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..500 {
        let n = rng.gen_range(3..15);
        let contacts = contacts_3d(&mut rng, n);
        let Ok(poly) = support_polygon(&contacts) else {
            continue;
        };
        let com = Point3::new(
            rng.gen_range(-1.2..1.2),
            rng.gen_range(-1.2..1.2),
            rng.gen_range(0.1..1.0),
        );
        let result = min_stability(&poly, &com).unwrap();
        let mut best = (0, f64::INFINITY);
        for i in 0..poly.len() {
            let (a, b) = poly.edge(i);
            let beta = reference_margin(&a, &b, &com);
            assert!(
                (result.margins[i] - beta).abs() < 1e-9,
                "edge {i}: {} vs {beta}",
                result.margins[i]
            );
            if beta < best.1 {
                best = (i, beta);
            }
        }
        assert!((result.min - best.1).abs() < 1e-9);
    }
}

#[test]
fn margin_sign_does_not_depend_on_gravity_scale() {
    let (a, b) = (Point3::new(0.0f64, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0));
    let com = Point3::new(0.5, 0.2, 0.4);
    let unit = fasm_margin(&a, &b, &com, &Vector3::new(0.0, 0.0, -1.0)).unwrap();
    let heavy = fasm_margin(&a, &b, &com, &Vector3::new(0.0, 0.0, -9.81)).unwrap();
    assert!(unit > 0.0);
    assert!((unit - heavy).abs() < 1e-12);
}

fn arb_contacts() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -0.1f64..0.1), 3..16)
}

fn build(raw: &[(f64, f64, f64)]) -> ContactState<f64> {
    ContactState::new(raw.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn margins_are_yaw_invariant(raw in arb_contacts(), cx in -1.0f64..1.0, cy in -1.0f64..1.0, cz in 0.1f64..1.0, yaw in -3.1f64..3.1) {
        let contacts = build(&raw);
        let Ok(poly) = support_polygon(&contacts) else { return Ok(()) };
        let com = Point3::new(cx, cy, cz);
        let base = min_stability(&poly, &com).unwrap();
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
        let turned = ContactState::new(contacts.points.iter().map(|p| rot * p).collect());
        let tpoly = support_polygon(&turned).unwrap();
        prop_assert_eq!(tpoly.len(), poly.len());
        let tres = min_stability(&tpoly, &(rot * com)).unwrap();
        // Same edges, possibly starting elsewhere in the cycle.
        let shift = tpoly.contact_indices.iter().position(|&i| i == poly.contact_indices[0]).unwrap();
        for i in 0..poly.len() {
            prop_assert!((base.margins[i] - tres.margins[(i + shift) % poly.len()]).abs() < 1e-9);
        }
    }

    #[test]
    fn margins_are_translation_invariant(raw in arb_contacts(), cx in -1.0f64..1.0, cy in -1.0f64..1.0, cz in 0.1f64..1.0, t in prop::array::uniform3(-5.0f64..5.0)) {
        let contacts = build(&raw);
        let Ok(poly) = support_polygon(&contacts) else { return Ok(()) };
        let com = Point3::new(cx, cy, cz);
        let shift = Vector3::from(t);
        let moved = ContactState::new(contacts.points.iter().map(|p| p + shift).collect());
        let mpoly = support_polygon(&moved).unwrap();
        prop_assert_eq!(&mpoly.contact_indices, &poly.contact_indices);
        let a = min_stability(&poly, &com).unwrap();
        let b = min_stability(&mpoly, &(com + shift)).unwrap();
        for (x, y) in a.margins.iter().zip(&b.margins) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_about_com_keeps_signs_and_argmin(raw in arb_contacts(), cx in -1.0f64..1.0, cy in -1.0f64..1.0, cz in 0.1f64..1.0, s in 0.2f64..5.0) {
        let contacts = build(&raw);
        let Ok(poly) = support_polygon(&contacts) else { return Ok(()) };
        let com = Point3::new(cx, cy, cz);
        let scaled = ContactState::new(contacts.points.iter().map(|p| com + (p - com) * s).collect());
        let spoly = support_polygon(&scaled).unwrap();
        prop_assert_eq!(&spoly.contact_indices, &poly.contact_indices);
        let a = min_stability(&poly, &com).unwrap();
        let b = min_stability(&spoly, &com).unwrap();
        for (x, y) in a.margins.iter().zip(&b.margins) {
            prop_assert_eq!(x.signum(), y.signum());
            prop_assert!((x * s - y).abs() < 1e-9 * (1.0 + y.abs()));
        }
        prop_assert_eq!(a.argmin, b.argmin);
    }

    #[test]
    fn hull_is_idempotent(raw in arb_contacts()) {
        let contacts = build(&raw);
        let Ok(poly) = support_polygon(&contacts) else { return Ok(()) };
        let again = support_polygon(&ContactState::new(poly.vertices.clone())).unwrap();
        prop_assert_eq!(&again.vertices, &poly.vertices);
    }
}

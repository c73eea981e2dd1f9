use conelab::cone_algebra::*;
use conelab::geometry::*;
use conelab::par::stream_rng;
use proptest::prelude::*;
use std::f64::consts::E;
use std::sync::Arc;

fn cone(name: &str) -> Arc<ConeSpec> {
    builtin_cone(name).unwrap()
}

fn half(v: f64) -> ConeElement {
    ConeElement::from_coords(&cone("halfline"), vec![v], Side::Primal).unwrap()
}

#[test]
fn distance_examples() {
    let x = half(1.0);
    assert_eq!(dist(&x, &x).unwrap(), 0.0);
    assert!((dist(&x, &half(E * E)).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn q_ratio_bounds() {
    let rep = check_q_ratio_bounds(&cone("sym2"), 0.0, 2000, 1).unwrap();
    assert!(rep.max_ratio.iter().all(|v| (v - 1.0).abs() < 1e-9));
    let rep = check_q_ratio_bounds(&cone("halfline"), 1.0, 4000, 1).unwrap();
    assert!(rep.max_ratio[0] <= E * (1.0 + 1e-6));
    assert!(rep.max_ratio[0] > 0.99 * E);
    let rep = check_q_ratio_bounds(&cone("omegaE"), 1.0, 20_000, 1).unwrap();
    assert!(rep.max_ratio.iter().all(|v| v.is_finite()));
    assert!(rep.drift < 0.05, "drift {}", rep.drift);
}

#[test]
fn q_ratio_bound_grows_with_radius() {
    let c = cone("vinberg");
    let small = check_q_ratio_bounds(&c, 0.5, 4000, 2).unwrap();
    let large = check_q_ratio_bounds(&c, 1.0, 4000, 2).unwrap();
    for j in 0..c.rank() {
        assert!(large.max_ratio[j] >= small.max_ratio[j]);
    }
}

#[test]
fn halfline_lattice_is_log_spaced() {
    let lat = build_lattice(&cone("halfline"), &Region::q_box((-3f64).exp(), 3f64.exp()), 1.0).unwrap();
    assert!((6..=14).contains(&lat.len()), "{} points", lat.len());
    assert!(lat.checks.covered && lat.checks.disjoint);
}

#[test]
fn infinite_radius_gives_one_point() {
    for name in BUILTIN_NAMES {
        let lat = build_lattice(&cone(name), &Region::q_box(0.25, 4.0), f64::INFINITY).unwrap();
        assert_eq!(lat.len(), 1, "{name}");
    }
}

#[test]
fn sym2_multiplicity_is_bounded() {
    let lat = build_lattice(&cone("sym2"), &Region::q_box(0.25, 4.0), 1.0).unwrap();
    assert!(lat.multiplicity_bound <= 64);
    assert!(lat.checks.covered && lat.checks.disjoint);
}

#[test]
fn lattice_json_has_lambda_and_points() {
    let lat = build_lattice(&cone("halfline"), &Region::q_box(0.25, 4.0), 1.0).unwrap();
    let v = serde_json::to_value(&lat).unwrap();
    assert_eq!(v["lambda"], 1.0);
    assert_eq!(v["points"].as_array().unwrap().len(), lat.len());
}

#[test]
fn halfline_ball_volume() {
    let est = ball_volume(&half(1.0), 1.0, 200_000, 1).unwrap();
    let exact = E - 1.0 / E;
    assert!((est.value - exact).abs() < (4.0 * est.stderr).max(0.01 * exact), "{est:?}");
}

#[test]
fn ball_volume_scales_like_q_tau() {
    let ratios: Vec<f64> = [1.0, 5.0, 20.0]
        .iter()
        .map(|&c| ball_volume(&half(c), 1.0, 200_000, 3).unwrap().value / c)
        .collect();
    for r in &ratios {
        assert!((r / ratios[0] - 1.0).abs() < 0.02, "{ratios:?}");
    }
}

#[test]
fn ball_volume_shrinks_with_radius() {
    let e = ConeElement::identity(&cone("sym2"), Side::Primal);
    let vols: Vec<f64> = [1.0, 0.5, 0.25, 0.1].iter().map(|&l| ball_volume(&e, l, 100_000, 5).unwrap().value).collect();
    assert!(vols.windows(2).all(|w| w[1] < w[0]), "{vols:?}");
}

#[test]
fn pairing_examples() {
    for name in ["sym2", "omegaE"] {
        let c = cone(name);
        let e = ConeElement::identity(&c, Side::Primal);
        let r = pairing_bounds_radius(&e, 0.0, 200, 1).unwrap();
        let f = ConeElement::identity(&c, Side::Dual);
        assert!((r.min - inner(&e, &f)).abs() < 1e-9 && (r.max - inner(&e, &f)).abs() < 1e-9);
    }
    let r = pairing_bounds(&half(1.0), 4000, 1).unwrap();
    assert!(r.min >= (-2f64).exp() * (1.0 - 1e-9) && r.max <= 2f64.exp() * (1.0 + 1e-9));
}

#[test]
fn pairing_range_is_center_independent() {
    let c = cone("omegaE");
    let e = ConeElement::identity(&c, Side::Primal);
    let y = TriangularFactor::random(&c, &mut stream_rng(9, 0), 1.0).apply_to_identity();
    let (a, b) = (pairing_bounds(&e, 4000, 1).unwrap(), pairing_bounds(&y, 4000, 1).unwrap());
    assert!(a.min / b.min < 2.0 && b.min / a.min < 2.0);
    assert!(a.max / b.max < 2.0 && b.max / a.max < 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_is_invariant(name in prop::sample::select(BUILTIN_NAMES.to_vec()), seed in any::<u64>()) {
        let c = cone(name);
        let mut rng = stream_rng(seed, 0);
        let x = TriangularFactor::random(&c, &mut rng, 1.0).apply_to_identity();
        let y = TriangularFactor::random(&c, &mut rng, 1.0).apply_to_identity();
        let h = TriangularFactor::random(&c, &mut rng, 1.0);
        let before = dist(&x, &y).unwrap();
        let after = dist(&act(&h, &x).unwrap(), &act(&h, &y).unwrap()).unwrap();
        prop_assert!((before - after).abs() < 1e-9 * before.max(1.0));
        prop_assert!((dist(&y, &x).unwrap() - before).abs() < 1e-9 * before.max(1.0));
    }

    #[test]
    fn lattices_satisfy_whitney_axioms(name in prop::sample::select(vec!["halfline", "sym2"]), lambda in 0.5f64..2.0) {
        let lat = build_lattice(&cone(name), &Region::q_box(0.25, 4.0), lambda).unwrap();
        prop_assert!(lat.checks.disjoint);
        prop_assert!(lat.checks.covered);
        prop_assert!(lat.multiplicity_bound >= 1);
    }
}

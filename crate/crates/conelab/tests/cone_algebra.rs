use conelab::cone_algebra::*;
use conelab::linalg::Mat;
use conelab::par::stream_rng;
use conelab::rational::{int, rat, Rat};
use conelab::weights::WeightVector;
use proptest::prelude::*;
use std::sync::Arc;

fn cone(name: &str) -> Arc<ConeSpec> {
    builtin_cone(name).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn sym2_point() -> ConeElement {
    ConeElement::from_coords(&cone("sym2"), vec![4.0, 2.0, 2.0], Side::Primal).unwrap()
}

#[test]
fn omega_e_structure_constants() {
    let e = cone("omegaE");
    assert_eq!(e.m(), vec![3, 1, 0]);
    assert_eq!(e.n_col(), vec![0, 1, 3]);
    assert_eq!(e.tau_exact(), vec![rat(5, 2), int(2), rat(5, 2)]);
    assert_eq!(e.dim(), 7);
    assert_eq!(e.dim(), e.rank() + e.m().iter().sum::<usize>());
    assert_eq!(e.dim(), e.rank() + e.n_col().iter().sum::<usize>());
}

#[test]
fn halfline_structure_constants() {
    let h = cone("halfline");
    assert_eq!(h.tau_exact(), vec![int(1)]);
    assert_eq!(h.dim(), 1);
}

#[test]
fn every_builtin_has_edge_zeros() {
    for name in BUILTIN_NAMES {
        let c = cone(name);
        assert_eq!(*c.m().last().unwrap(), 0, "{name}");
        assert_eq!(c.n_col()[0], 0, "{name}");
        assert!(c.subspace_residual(&c.identity()) < 1e-14);
    }
}

#[test]
fn unknown_cone_is_an_error() {
    assert!(matches!(builtin_cone("cube"), Err(conelab::Error::UnknownCone(_))));
}

#[test]
fn identity_factorization() {
    for name in BUILTIN_NAMES {
        let c = cone(name);
        let f = cholesky_upper(&ConeElement::identity(&c, Side::Primal)).unwrap();
        assert!(f.rho.iter().all(|r| (r - 1.0).abs() < 1e-14));
        assert!(f.t.sub(&c.identity()).max_abs() < 1e-14);
    }
}

#[test]
fn halfline_square_root() {
    let x = ConeElement::from_coords(&cone("halfline"), vec![4.0], Side::Primal).unwrap();
    assert!((cholesky_upper(&x).unwrap().rho[0] - 2.0).abs() < 1e-15);
}

#[test]
fn sym2_reverse_order_minors() {
    // x = t tᵀ with t upper: Q_2 = x_22 and Q_1 = det(x)/x_22
    let qv = q(&sym2_point()).unwrap();
    let (x11, x12, x22) = (4.0, 2.0, 2.0);
    let oracle = [(x11 * x22 - x12 * x12) / x22, x22];
    for j in 0..2 {
        assert!((qv[j] - oracle[j]).abs() < 1e-14);
    }
    let exact = q_exact(&cone("sym2"), &[int(4), int(2), int(2)]).unwrap();
    assert_eq!(exact, vec![int(2), int(2)]);
}

#[test]
fn qpow_examples() {
    let s = cone("sym2");
    let x = sym2_point();
    let v = qpow(&WeightVector::exact(vec![int(1), int(2)]), &x).unwrap();
    assert!((v - 8.0).abs() < 1e-12);
    assert_eq!(qpow_exact(&s, &[1, 2], &[int(4), int(2), int(2)]).unwrap(), int(8));
    assert!((qpow(&WeightVector::zeros(2), &x).unwrap() - 1.0).abs() < 1e-15);
    for name in BUILTIN_NAMES {
        let c = cone(name);
        let e = ConeElement::identity(&c, Side::Primal);
        assert!((qpow(&c.tau_weights(), &e).unwrap() - 1.0).abs() < 1e-14);
        let two = q(&e.scaled(2.0)).unwrap();
        assert!(two.iter().all(|v| (v - 2.0).abs() < 1e-14));
    }
}

#[test]
fn exact_q_with_negative_exponents() {
    let h = cone("halfline");
    assert_eq!(qpow_exact(&h, &[-3], &[rat(2, 3)]).unwrap(), rat(27, 8));
}

#[test]
fn qstar_examples() {
    let h = cone("halfline");
    let xi = ConeElement::from_coords(&h, vec![9.0], Side::Dual).unwrap();
    assert!((qstar(&xi).unwrap()[0] - 9.0).abs() < 1e-14);
    for name in BUILTIN_NAMES {
        let c = cone(name);
        let e = ConeElement::identity(&c, Side::Dual);
        assert!(qstar(&e).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }
}

#[test]
fn dual_point_examples() {
    let h = cone("halfline");
    let x = ConeElement::from_coords(&h, vec![4.0], Side::Primal).unwrap();
    assert!((dual_point(&x).unwrap().coords[0] - 0.25).abs() < 1e-15);
    for name in BUILTIN_NAMES {
        let c = cone(name);
        let e = ConeElement::identity(&c, Side::Primal);
        let d = dual_point(&e).unwrap();
        assert!(d.embedded.sub(&c.identity()).max_abs() < 1e-13);
    }
}

#[test]
fn act_examples() {
    let h = cone("halfline");
    let t = TriangularFactor::from_matrix(&h, Mat::from_rows(&[&[3.0]])).unwrap();
    let x = ConeElement::from_coords(&h, vec![2.0], Side::Primal).unwrap();
    assert!((act(&t, &x).unwrap().coords[0] - 18.0).abs() < 1e-13);
    let id = TriangularFactor::identity(&cone("omegaE"));
    let y = TriangularFactor::random(&cone("omegaE"), &mut stream_rng(3, 0), 1.0).apply_to_identity();
    let z = act(&id, &y).unwrap();
    assert!(z.embedded.sub(&y.embedded).max_abs() < 1e-13);
}

#[test]
fn inner_examples() {
    let h = cone("halfline");
    let x = ConeElement::from_coords(&h, vec![4.0], Side::Primal).unwrap();
    let xi = ConeElement::from_coords(&h, vec![3.0], Side::Dual).unwrap();
    assert!((inner(&x, &xi) - 12.0).abs() < 1e-14);
    let s = cone("sym2");
    let e = ConeElement::identity(&s, Side::Primal);
    let xi = ConeElement::from_coords(&s, vec![2.0, 5.0, 0.0], Side::Dual).unwrap();
    assert!((inner(&e, &xi) - 7.0).abs() < 1e-14);
    for name in BUILTIN_NAMES {
        let c = cone(name);
        let e = ConeElement::identity(&c, Side::Primal);
        let f = ConeElement::identity(&c, Side::Dual);
        assert!((inner_with(&e, &f, &Pairing::TAlgebra) - c.rank() as f64).abs() < 1e-14);
    }
}

#[test]
fn boundary_points_are_rejected() {
    let s = cone("sym2");
    let x = ConeElement::from_coords(&s, vec![1.0, 1.0, 1.0], Side::Primal).unwrap();
    assert!(cholesky_upper(&x).is_err());
    let y = ConeElement::from_coords(&s, vec![1.0, -1.0, 0.0], Side::Primal).unwrap();
    assert!(q(&y).is_err());
}

#[test]
fn json_export_round_trips() {
    for name in BUILTIN_NAMES {
        let c = cone(name);
        let back = ConeSpec::from_json(&c.to_json()).unwrap();
        assert_eq!(back.m(), c.m());
        assert_eq!(back.n_col(), c.n_col());
        assert_eq!(back.tau_exact(), c.tau_exact());
    }
}

#[test]
fn exact_and_float_q_agree_on_rationals() {
    let s = cone("sym2");
    let coords: Vec<Rat> = vec![rat(7, 3), rat(5, 2), rat(-1, 4)];
    let exact = q_exact(&s, &coords).unwrap();
    let x = ConeElement::from_coords(&s, coords.iter().map(conelab::rational::to_f64).collect(), Side::Primal).unwrap();
    let float = q(&x).unwrap();
    for j in 0..2 {
        assert!(close(conelab::rational::to_f64(&exact[j]), float[j], 1e-14));
    }
}

fn random_point(c: &Arc<ConeSpec>, seed: u64, stream: u64) -> ConeElement {
    TriangularFactor::random(c, &mut stream_rng(seed, stream), 1.0).apply_to_identity()
}

fn cone_strategy() -> impl Strategy<Value = &'static str> {
    prop::sample::select(BUILTIN_NAMES.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factorization_round_trip(name in cone_strategy(), seed in any::<u64>()) {
        let c = cone(name);
        let x = random_point(&c, seed, 0);
        let f = cholesky_upper(&x).unwrap();
        let resid = f.t.mul_transpose(&f.t).sub(&x.embedded).frobenius_norm() / x.embedded.frobenius_norm();
        prop_assert!(resid < 1e-10);
        prop_assert!(c.pattern_residual(&f.t) < 1e-10);
    }

    #[test]
    fn q_is_multiplicative(name in cone_strategy(), seed in any::<u64>()) {
        let c = cone(name);
        let t = TriangularFactor::random(&c, &mut stream_rng(seed, 1), 1.0);
        let x = random_point(&c, seed, 2);
        let lhs = q(&act(&t, &x).unwrap()).unwrap();
        let (qt, qx) = (q(&t.apply_to_identity()).unwrap(), q(&x).unwrap());
        for j in 0..c.rank() {
            prop_assert!(close(lhs[j], qt[j] * qx[j], 1e-10));
        }
        let xi = t.dual_apply_to_identity();
        let s = TriangularFactor::random(&c, &mut stream_rng(seed, 3), 1.0);
        let lhs = qstar(&act_dual(&s, &xi).unwrap()).unwrap();
        let (qs, qxi) = (qstar(&s.dual_apply_to_identity()).unwrap(), qstar(&xi).unwrap());
        for j in 0..c.rank() {
            prop_assert!(close(lhs[j], qs[j] * qxi[j], 1e-10));
        }
    }

    #[test]
    fn duality_and_involution(name in cone_strategy(), seed in any::<u64>()) {
        let c = cone(name);
        let x = random_point(&c, seed, 4);
        let d = dual_point(&x).unwrap();
        let (qx, qd) = (q(&x).unwrap(), qstar(&d).unwrap());
        for j in 0..c.rank() {
            prop_assert!(close(qx[j] * qd[j], 1.0, 1e-10));
        }
        let back = dual_point(&d).unwrap();
        prop_assert!(back.embedded.sub(&x.embedded).frobenius_norm() < 1e-9 * x.embedded.frobenius_norm().max(1.0));
    }

    #[test]
    fn q_is_homogeneous(name in cone_strategy(), seed in any::<u64>(), k in 0usize..3) {
        let c = cone(name);
        let lambda = [0.5, 2.0, 10.0][k];
        let x = random_point(&c, seed, 5);
        let (a, b) = (q(&x).unwrap(), q(&x.scaled(lambda)).unwrap());
        for j in 0..c.rank() {
            prop_assert!(close(b[j], lambda * a[j], 1e-12));
        }
    }

    #[test]
    fn action_determinant_is_q_tau(name in cone_strategy(), seed in any::<u64>()) {
        let c = cone(name);
        let t = TriangularFactor::random(&c, &mut stream_rng(seed, 6), 1.0);
        let lhs = det_action(&t);
        let rhs = qpow(&c.tau_weights(), &t.apply_to_identity()).unwrap();
        prop_assert!(close(lhs, rhs, 1e-8));
    }
}

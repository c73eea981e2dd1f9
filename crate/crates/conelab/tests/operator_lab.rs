use conelab::cone_algebra::{builtin_cone, qpow, ConeElement, ConeSpec, Side};
use conelab::geometry::{build_lattice, Region};
use conelab::indices::{s_conditions, ParamSet};
use conelab::operator_lab::*;
use conelab::rational::{int, parse_rat_list, rat, Rat};
use conelab::weights::WeightVector;
use nalgebra::DMatrix;
use num_traits::Zero;
use proptest::prelude::*;
use statrs::function::beta::beta;
use std::sync::Arc;

fn cone(name: &str) -> Arc<ConeSpec> {
    builtin_cone(name).unwrap()
}

fn bergman(c: &ConeSpec, nu: &str, q: Rat) -> ParamSet {
    let nu = parse_rat_list(nu).unwrap();
    ParamSet::bergman(c, &nu, &nu, None, q.clone(), q).unwrap()
}

#[test]
fn single_point_kernel() {
    let s = cone("sym2");
    let ps = bergman(&s, "2,2", int(2));
    let lat = build_lattice(&s, &Region::q_box(0.5, 2.0), f64::INFINITY).unwrap();
    let op = assemble_s(&s, &ps, &lat).unwrap();
    assert_eq!(op.len(), 1);
    let y = &lat.points[0];
    let w = |v: &[Rat]| WeightVector::exact(v.to_vec());
    let beta_tau: Vec<Rat> = ps.beta.iter().zip(s.tau_exact()).map(|(b, t)| b + t).collect();
    let oracle = qpow(&w(&ps.alpha), y).unwrap() * qpow(&w(&beta_tau), y).unwrap()
        / qpow(&w(&ps.gamma), &y.scaled(2.0)).unwrap();
    assert!((op.kernel()[(0, 0)] - oracle).abs() < 1e-12 * oracle);
}

#[test]
fn halfline_kernel_is_hilbert_type() {
    let h = cone("halfline");
    let ps = ParamSet::new(&h, vec![Rat::zero()], vec![Rat::zero()], vec![int(2)], vec![int(1)], vec![int(1)], vec![Rat::zero()], (int(2), int(2), int(2))).unwrap();
    let lat = build_lattice(&h, &Region::q_box(0.05, 20.0), 1.0).unwrap();
    let op = assemble_s(&h, &ps, &lat).unwrap();
    let a = op.normalized(2.0, 2.0);
    for (j, yj) in op.points.iter().enumerate() {
        for (k, yk) in op.points.iter().enumerate() {
            let (x, y) = (yj[0], yk[0]);
            // y_j^{1/2} (y_j + y_k)^{−2} y_k · y_k^{−1/2}
            let oracle = x.sqrt() * y.sqrt() / (x + y).powi(2);
            assert!((a[(j, k)] - oracle).abs() < 1e-12 * oracle);
        }
    }
    let t = a.transpose();
    assert!((&a - &t).abs().max() < 1e-14);
}

#[test]
fn norm_estimate_oracles() {
    let id = DMatrix::<f64>::identity(7, 7);
    let est = norm_estimate(&id, 2.0, 4.0, &NormConfig::default());
    assert!((est.value - 1.0).abs() < 1e-8, "{}", est.value);
    // ℓ⁴ → ℓ² norm of the n×n identity is n^{1/2−1/4}
    let est = norm_estimate(&id, 4.0, 2.0, &NormConfig::default());
    assert!((est.value - 7f64.powf(0.25)).abs() < 1e-6, "{}", est.value);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 3.0, 1.0]));
    let est = norm_estimate(&d, 3.0, 3.0, &NormConfig::default());
    assert!((est.value - 3.0).abs() < 1e-6, "{}", est.value);
}

#[test]
fn adjoint_estimates_agree() {
    let s = cone("sym2");
    let ps = bergman(&s, "2,2", rat(5, 2));
    let lat = build_lattice(&s, &Region::q_box(0.25, 4.0), 1.0).unwrap();
    let a = assemble_s(&s, &ps, &lat).unwrap().normalized(2.5, 2.5);
    let q = 2.5;
    let qc = q / (q - 1.0);
    let fwd = norm_estimate(&a, q, q, &NormConfig::default()).value;
    let back = norm_estimate(&Transposed(&a), qc, qc, &NormConfig::default()).value;
    assert!((fwd - back).abs() < 0.02 * fwd, "{fwd} vs {back}");
}

#[test]
fn sweep_norms_grow_with_truncation() {
    let s = cone("sym2");
    let cfg = SweepConfig { levels: vec![2, 4, 8], fibre_samples: 16, ..SweepConfig::default() };
    let res = sweep_q(&s, &parse_rat_list("2,2").unwrap(), &[int(2), int(4)], &cfg).unwrap();
    for qi in 0..2 {
        for l in 1..res.levels.len() {
            assert!(res.norms[l][qi] >= res.norms[l - 1][qi] * (1.0 - 1e-6), "{:?}", res.norms);
        }
    }
    assert!(res.grid_points.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn okikiolu_feasibility_examples() {
    let e = cone("omegaE");
    let good = bergman(&e, "3,3,3", int(2));
    let p = okikiolu_params(&e, &good);
    assert!(p.feasible, "{:?}", p.witness);
    assert!(p.t.iter().all(|t| *t > Rat::zero() && *t < int(1)));
    let narrow = bergman(&e, "2,2/3,1", rat(3, 2));
    assert!(!okikiolu_params(&e, &narrow).feasible);
    assert_eq!(s_conditions(&e, &narrow).unwrap().satisfied, Some(false));
    let mut unbalanced = good.clone();
    unbalanced.gamma[1] += rat(1, 10);
    let p = okikiolu_params(&e, &unbalanced);
    assert!(!p.feasible);
    assert!(p.witness.is_some());
}

#[test]
fn halfline_okikiolu_integrals_are_beta_values() {
    let h = cone("halfline");
    let ps = bergman(&h, "1", int(2));
    let params = okikiolu_params(&h, &ps);
    assert_eq!((params.t[0].clone(), params.u[0].clone(), params.v[0].clone()), (rat(3, 4), rat(1, 8), rat(3, 8)));
    let probes: Vec<ConeElement> = [1.0, 2.0, 5.0].iter().map(|c| ConeElement::identity(&h, Side::Primal).scaled(*c)).collect();
    let lat = build_lattice(&h, &Region::q_box(0.25, 4.0), 1.0).unwrap();
    let rep = okikiolu_verify(&h, &ps, &params, &probes, Some(&lat), 100_000, 1).unwrap();
    // ∫₀^∞ (1+x)^{−3/2} x^{−1/4} dx and ∫₀^∞ (1+x)^{−1/2} x^{−3/4} dx
    let (b1, b2) = (beta(0.75, 0.75), beta(0.25, 0.25));
    for e in &rep.first {
        assert!((e.value - b1).abs() < 4.0 * e.stderr, "{e:?} vs {b1}");
    }
    assert!((rep.m2 - b1.sqrt()).abs() < 0.01 * b1.sqrt());
    assert!((rep.m1 - b2.sqrt()).abs() < 0.02 * b2.sqrt());
    let d = rep.discrete.unwrap();
    assert!(d.holds && d.norm_lower_bound <= d.m1 * d.m2);
}

#[test]
fn scaling_examples() {
    let h = cone("halfline");
    let z = vec![Rat::zero()];
    let ps = ParamSet::new(&h, z.clone(), z.clone(), vec![int(2)], vec![int(1)], vec![int(1)], z, (int(2), int(2), int(2))).unwrap();
    let rep = scaling_exponent_check(&h, &ps, &[1.0, 2.0, 4.0, 8.0], 12).unwrap();
    assert_eq!(rep.predicted_exponent, int(1));
    assert!(rep.holds, "{}", rep.fitted_exponent);
    let mut shifted = ps.clone();
    shifted.gamma[0] += rat(1, 10);
    let rep2 = scaling_exponent_check(&h, &shifted, &[1.0, 2.0, 4.0, 8.0], 12).unwrap();
    assert!((rep2.fitted_exponent - rep.fitted_exponent - 0.1).abs() < SCALING_TOLERANCE);
    let s = cone("sym2");
    let rep = scaling_exponent_check(&s, &bergman(&s, "2,2", int(2)), &[1.0, 2.0, 4.0], 6).unwrap();
    assert!(rep.holds, "{} vs {}", rep.fitted_exponent, rep.predicted_exponent);
}

#[test]
fn counterexample_reproduces_on_omega_e() {
    let e = cone("omegaE");
    let nu = parse_rat_list("3,3,3").unwrap();
    let rep = counterexample_necessary(&e, &nu, &int(6), &CounterexampleConfig::default()).unwrap();
    assert_eq!(rep.alpha, vec![rat(1, 4), rat(7, 12), rat(-1, 2)]);
    assert!(rep.norm_cauchy && rep.norm_tail < CAUCHY_TAIL);
    assert!(rep.log_fit.r_squared > LOG_FIT_R2);
    assert!(rep.reproduced);
    assert!(counterexample_necessary(&e, &nu, &int(5), &CounterexampleConfig::default()).is_err());
    assert!(counterexample_necessary(&cone("halfline"), &[int(1)], &int(4), &CounterexampleConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn halfline_scaling_matches_homogeneity(a in -4i64..4, b in -4i64..4, g in 0i64..12) {
        let h = cone("halfline");
        let z = vec![Rat::zero()];
        let ps = ParamSet::new(&h, vec![rat(a, 4)], vec![rat(b, 4)], vec![rat(g, 4)], vec![int(1)], vec![int(1)], z, (int(2), int(2), int(2))).unwrap();
        let rep = scaling_exponent_check(&h, &ps, &[1.0, 2.0, 4.0], 12).unwrap();
        prop_assert_eq!(rep.predicted_exponent.clone(), int(-1) + rat(g - a - b, 4));
        prop_assert!(rep.holds, "{} vs {}", rep.fitted_exponent, rep.predicted_exponent);
    }

    #[test]
    fn random_param_sets_are_balanced_or_flagged(seed in any::<u64>()) {
        let e = cone("omegaE");
        let ps = random_param_set(&e, &mut conelab::par::stream_rng(seed, 0));
        let balanced = ps.gamma == ps.balanced_gamma(&e);
        prop_assert_eq!(balanced, conelab::indices::homogeneity_residual(&e, &ps).is_zero());
        if !balanced {
            prop_assert!(!okikiolu_params(&e, &ps).feasible);
        }
    }
}

//! Acceptance criteria 1 to 9. Each test prints one `criterion N: PASS|FAIL` line.

use conelab::cone_algebra::*;
use conelab::geometry::{ball_volume, build_lattice, Region};
use conelab::indices::{a_nu, c_nu, s_conditions, sharp_range_tube, ParamSet};
use conelab::operator_lab::*;
use conelab::par::stream_rng;
use conelab::quadrature::*;
use conelab::rational::{int, parse_rat_list, rat, ExtRat};
use conelab::weights::WeightVector;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

const C1_RUNTIME: Duration = Duration::from_secs(1);
const C2_SAMPLES: usize = 1000;
const C2_REL_ERROR: f64 = 1e-8;
const C2_RUNTIME: Duration = Duration::from_secs(30);
const C3_SPREAD: f64 = 0.05;
const C3_HALFLINE_REL: f64 = 0.01;
const C3_MIN_PROBES: usize = 3;
const C3_RUNTIME: Duration = Duration::from_secs(600);
const C4_R2: f64 = 0.99;
const C4_SAMPLES: usize = 20_000;
const C5_Q_LO: f64 = 0.125;
const C5_Q_HI: f64 = 8.0;
const C5_SLOPE_TOL: f64 = 0.05;
const C5_BALLS: usize = 8;
const C5_BALL_SAMPLES: usize = 40_000;
const C6_SATURATE: f64 = 1.05;
const C6_GROW: f64 = 1.5;
const C6_RUNTIME: Duration = Duration::from_secs(900);
const C7_SETS: usize = 500;
const C7_SEED: u64 = 7;
const C8_TAIL: f64 = 0.01;
const C8_R2: f64 = 0.99;
const C9_SETS: usize = 20;
const C9_TOL: f64 = 1e-3;
const C9_NODES: usize = 4;

fn verdict(n: u32, ok: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn cone(name: &str) -> Arc<ConeSpec> {
    builtin_cone(name).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_1_omega_e_numbers() {
    let start = Instant::now();
    let e = cone("omegaE");
    let nu0 = parse_rat_list("2,2/3,1").unwrap();
    let structure = e.m() == vec![3, 1, 0]
        && e.n_col() == vec![0, 1, 3]
        && e.tau_exact() == vec![rat(5, 2), int(2), rat(5, 2)]
        && e.dim() == 7;
    let a = a_nu(&e, &nu0).unwrap();
    let c = c_nu(&e, &nu0).unwrap();
    let range = sharp_range_tube(&e, &nu0).unwrap().range.unwrap();
    let elapsed = start.elapsed();
    let ok = structure
        && a == ExtRat::Finite(rat(4, 3))
        && c == ExtRat::Finite(rat(5, 3))
        && range.describe() == "EMPTY"
        && elapsed < C1_RUNTIME;
    verdict(1, ok, format!("m={:?} n={:?} dim={} a={a} c={c} sharp={} in {elapsed:?}", e.m(), e.n_col(), e.dim(), range.describe()));
}

#[test]
fn criterion_2_algebraic_identities() {
    let start = Instant::now();
    let mut worst = [0.0f64; 5];
    for name in BUILTIN_NAMES {
        let c = cone(name);
        let mut rng = stream_rng(2, BUILTIN_NAMES.iter().position(|n| *n == name).unwrap() as u64);
        for _ in 0..C2_SAMPLES {
            let t = TriangularFactor::random(&c, &mut rng, 1.0);
            let x = TriangularFactor::random(&c, &mut rng, 1.0).apply_to_identity();
            let te = t.apply_to_identity();
            let (qt, qx, qtx) = (q(&te).unwrap(), q(&x).unwrap(), q(&act(&t, &x).unwrap()).unwrap());
            let qs_t = qstar(&t.dual_apply_to_identity()).unwrap();
            let xd = dual_point(&x).unwrap();
            let qs_xd = qstar(&xd).unwrap();
            for j in 0..c.rank() {
                worst[0] = worst[0].max(rel(qtx[j], qt[j] * qx[j]));
                worst[1] = worst[1].max(rel(qs_t[j], qt[j]));
                worst[2] = worst[2].max(rel(qx[j] * qs_xd[j], 1.0));
            }
            let back = dual_point(&xd).unwrap();
            worst[3] = worst[3].max(back.embedded.sub(&x.embedded).frobenius_norm() / x.embedded.frobenius_norm());
            worst[4] = worst[4].max(rel(det_action(&t), qpow(&c.tau_weights(), &te).unwrap()));
        }
    }
    let elapsed = start.elapsed();
    let ok = worst.iter().all(|w| *w < C2_REL_ERROR) && elapsed < C2_RUNTIME;
    verdict(2, ok, format!("max rel errors [mult, star, dual, involution, det] = {:?} in {elapsed:?}", worst.map(|v| format!("{v:.2e}"))));
}

fn dual_probes(c: &Arc<ConeSpec>, side: Side) -> Vec<ConeElement> {
    let e = ConeElement::identity(c, side);
    let t = TriangularFactor::random(c, &mut stream_rng(3, 0), 0.5);
    let third = match side {
        Side::Primal => t.apply_to_identity(),
        Side::Dual => t.dual_apply_to_identity(),
    };
    vec![e.clone(), e.scaled(2.0), third]
}

fn scaled_probes(c: &Arc<ConeSpec>, side: Side, scales: &[f64]) -> Vec<ConeElement> {
    scales.iter().map(|s| ConeElement::identity(c, side).scaled(*s)).collect()
}

fn w(text: &str, c: &ConeSpec) -> WeightVector {
    WeightVector::parse(text, c.rank()).unwrap()
}

#[test]
fn criterion_3_integral_identities() {
    let start = Instant::now();
    let cfg = QuadConfig::default();
    let mut lines = Vec::new();
    let mut ok = true;
    let mut spread_check = |label: &str, rep: IntegralReport| {
        let good = rep.probes.len() >= C3_MIN_PROBES && rep.spread < C3_SPREAD;
        ok &= good;
        lines.push(format!("{label} spread {:.4}", rep.spread));
    };
    for name in ["sym2", "vinberg", "omegaE"] {
        let c = cone(name);
        let nu = if name == "omegaE" { "3,2,2" } else { "2" };
        spread_check(&format!("integ/{name}"), verify_integ(&c, &w(nu, &c), &dual_probes(&c, Side::Dual), &cfg).unwrap());
    }
    let s = cone("sym2");
    spread_check("beta/sym2", verify_beta(&s, &w("-4", &s), &w("1", &s), &dual_probes(&s, Side::Primal), &cfg).unwrap());
    let e = cone("omegaE");
    spread_check("beta/omegaE", verify_beta(&e, &w("-4,-3,-4", &e), &w("2,1,1", &e), &dual_probes(&e, Side::Primal), &cfg).unwrap());
    spread_check("j_alpha/sym2", verify_j_alpha(&s, &w("4", &s), &dual_probes(&s, Side::Primal), &cfg).unwrap());

    let h = cone("halfline");
    let mut closed = |label: &str, rep: IntegralReport, exact: f64| {
        let err = rep.probes.iter().map(|p| rel(p.ratio, exact)).fold(0.0, f64::max);
        let good = rep.probes.len() >= C3_MIN_PROBES && err < C3_HALFLINE_REL;
        ok &= good;
        lines.push(format!("{label} closed-form err {err:.4}"));
    };
    let hp = |side| scaled_probes(&h, side, &[1.0, 2.0, 5.0]);
    closed("integ/halfline", verify_integ(&h, &w("3", &h), &hp(Side::Dual), &cfg).unwrap(), 2.0);
    closed("beta/halfline", verify_beta(&h, &w("-3", &h), &w("1", &h), &hp(Side::Primal), &cfg).unwrap(), 0.5);
    closed("j_alpha/halfline", verify_j_alpha(&h, &w("2", &h), &hp(Side::Primal), &cfg).unwrap(), PI);
    let sd = SiegelData::halfline(1).unwrap();
    closed("form/halfline", verify_hermitian_form(&sd, &hp(Side::Dual), &cfg).unwrap(), PI);
    let sp = |y: f64, u: f64| SiegelProbe { y: vec![y], u: vec![Complex64::new(u, 0.0)] };
    let probes = [sp(2.0, 0.0), sp(3.0, 1.0), sp(5.0, 0.5)];
    closed("siegel/halfline", verify_siegel_integral(&sd, &WeightVector::exact(vec![int(2)]), &probes, &cfg).unwrap(), PI);

    let mut divergent = |label: &str, rep: IntegralReport| {
        let good = rep.verdict == Verdict::Divergent;
        ok &= good;
        lines.push(format!("{label} {:?}", rep.verdict));
    };
    let one = |c: &Arc<ConeSpec>, side| scaled_probes(c, side, &[1.0]);
    divergent("integ nu=(1/4,2)", verify_integ(&s, &WeightVector::exact(vec![rat(1, 4), int(2)]), &one(&s, Side::Dual), &cfg).unwrap());
    divergent("beta mu=-1 nu=1", verify_beta(&s, &w("-1", &s), &w("1", &s), &one(&s, Side::Primal), &cfg).unwrap());
    divergent("j_alpha alpha=1", verify_j_alpha(&h, &w("1", &h), &one(&h, Side::Primal), &cfg).unwrap());
    let origin = ConeElement::from_coords(&h, vec![0.0], Side::Dual).unwrap();
    divergent("form xi=0", verify_hermitian_form(&sd, &[origin], &cfg).unwrap());
    divergent("siegel lambda=1", verify_siegel_integral(&sd, &WeightVector::exact(vec![int(1)]), &probes[..1], &cfg).unwrap());

    let elapsed = start.elapsed();
    ok &= elapsed < C3_RUNTIME;
    verdict(3, ok, format!("{} in {elapsed:?}", lines.join("; ")));
}

#[test]
fn criterion_4_sharp_classifier() {
    let mut ok = true;
    let mut lines = Vec::new();
    for name in ["sym2", "omegaE"] {
        let c = cone(name);
        let r = c.rank();
        let mut alpha = vec![0.0; r];
        let cases = [(0.0, 0.0, Growth::Converges), (-1.0, -0.5, Growth::Diverges), (-1.0, -2.0, Growth::Converges)];
        for (ar, beta, expected) in cases {
            alpha[r - 1] = ar;
            let rep = classify_i_alpha_beta(&c, &alpha, beta, C4_SAMPLES, 1);
            let mut good = rep.analytic == expected && rep.numeric == expected;
            if expected == Growth::Diverges {
                good &= rep.best_fit.r_squared > C4_R2;
            }
            ok &= good;
            lines.push(format!(
                "{name} (a_r={ar}, b={beta}): {:?}/{:?} fit R2 {:.4} (power {}) log R2 {:.4}",
                rep.analytic, rep.numeric, rep.best_fit.r_squared, rep.best_fit.power, rep.log_fit.r_squared
            ));
        }
    }
    verdict(4, ok, lines.join("; "));
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn criterion_5_lattices_and_ball_volumes() {
    let mut ok = true;
    let mut lines = Vec::new();
    for name in BUILTIN_NAMES {
        let c = cone(name);
        let lat = build_lattice(&c, &Region::q_box(C5_Q_LO, C5_Q_HI), 1.0).unwrap();
        let axioms = lat.checks.disjoint && lat.checks.covered && lat.multiplicity_bound >= 1;
        let tau = c.tau_weights();
        let mut ranked: Vec<(f64, &ConeElement)> =
            lat.points.iter().map(|p| (qpow(&tau, p).unwrap().ln(), p)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
        let picks = C5_BALLS.min(ranked.len());
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for i in 0..picks {
            let (lq, p) = ranked[i * (ranked.len() - 1) / (picks - 1).max(1)];
            xs.push(lq);
            ys.push(ball_volume(p, 1.0, C5_BALL_SAMPLES, 5 + i as u64).unwrap().value.ln());
        }
        let b = slope(&xs, &ys);
        let good = axioms && (b - 1.0).abs() < C5_SLOPE_TOL;
        ok &= good;
        lines.push(format!(
            "{name}: {} points, disjoint={} covered={} multiplicity<={} slope {b:.4}",
            lat.len(),
            lat.checks.disjoint,
            lat.checks.covered,
            lat.multiplicity_bound
        ));
    }
    verdict(5, ok, lines.join("; "));
}

#[test]
fn criterion_6_sharp_threshold_sweep() {
    let start = Instant::now();
    let e = cone("omegaE");
    let cfg = SweepConfig { saturate_below: C6_SATURATE, grow_above: C6_GROW, ..SweepConfig::default() };
    let inside = sweep_q(&e, &parse_rat_list("3,3,3").unwrap(), &[int(2), rat(7, 2)], &cfg).unwrap();
    let old = sweep_q(&e, &parse_rat_list("2,2/3,1").unwrap(), &[rat(3, 2)], &cfg).unwrap();
    let grows = |r: &[f64]| r.windows(2).any(|w| w[0] > C6_GROW && w[1] > C6_GROW);
    let saturates = |r: &[f64]| r.last().is_some_and(|v| *v < C6_SATURATE);
    let elapsed = start.elapsed();
    let ok = saturates(&inside.growth_ratios[0])
        && grows(&inside.growth_ratios[1])
        && grows(&old.growth_ratios[0])
        && elapsed < C6_RUNTIME;
    verdict(
        6,
        ok,
        format!(
            "nu=(3,3,3) q=2 ratios {:.3?}; q=7/2 ratios {:.3?}; nu0 q=3/2 ratios {:.3?}; in {elapsed:?}",
            inside.growth_ratios[0], inside.growth_ratios[1], old.growth_ratios[0]
        ),
    );
}

#[test]
fn criterion_7_okikiolu_agreement() {
    let e = cone("omegaE");
    let lat = build_lattice(&e, &Region::q_box(0.5, 2.0), 1.5).unwrap();
    let mut rng = stream_rng(C7_SEED, 0);
    let (mut agree, mut feasible, mut bound_ok) = (0, 0, 0);
    let mut first_mismatch = None;
    for i in 0..C7_SETS {
        let ps = random_param_set(&e, &mut rng);
        let params = okikiolu_params(&e, &ps);
        let cond = s_conditions(&e, &ps).unwrap().satisfied.unwrap();
        if params.feasible == cond {
            agree += 1;
        } else if first_mismatch.is_none() {
            first_mismatch = Some(format!("set {i}: feasible={} conditions={cond}", params.feasible));
        }
        if params.feasible {
            feasible += 1;
            let op = assemble_s(&e, &ps, &lat).unwrap();
            let (m1, m2) = discrete_okikiolu_constants(&op, &e, &ps, &params);
            let (q, s) = (conelab::rational::to_f64(&ps.q), conelab::rational::to_f64(&ps.s));
            let est = norm_estimate(&op.normalized(q, s), q, s, &NormConfig::default());
            if est.value <= m1 * m2 * (1.0 + 1e-9) {
                bound_ok += 1;
            }
        }
    }
    let ok = agree == C7_SETS && bound_ok == feasible;
    verdict(
        7,
        ok,
        format!(
            "agreement {agree}/{C7_SETS}; M1*M2 >= norm in {bound_ok}/{feasible} feasible sets on {} lattice points; first mismatch {}",
            lat.len(),
            first_mismatch.unwrap_or_else(|| "none".into())
        ),
    );
}

#[test]
fn criterion_8_counterexample() {
    let e = cone("omegaE");
    let nu = parse_rat_list("3,3,3").unwrap();
    let q = critical_exponent(&e, &nu).unwrap();
    let rep = counterexample_necessary(&e, &nu, &q, &CounterexampleConfig::default()).unwrap();
    let ok = q == int(6) && rep.norm_tail < C8_TAIL && rep.log_fit.r_squared > C8_R2 && rep.reproduced;
    verdict(
        8,
        ok,
        format!(
            "q={} tail {:.4} log-fit R2 {:.4} increment ratios {:.3?}",
            rep.q, rep.norm_tail, rep.log_fit.r_squared, rep.increment_ratios
        ),
    );
}

#[test]
fn criterion_9_scaling_law() {
    let e = cone("omegaE");
    let mut rng = stream_rng(9, 0);
    let mut worst = 0.0f64;
    for _ in 0..C9_SETS {
        let ps: ParamSet = random_param_set(&e, &mut rng);
        let rep = scaling_exponent_check(&e, &ps, &[1.0, 2.0, 4.0, 8.0], C9_NODES).unwrap();
        let predicted = conelab::rational::to_f64(&rep.predicted_exponent);
        worst = worst.max((rep.fitted_exponent - predicted).abs());
    }
    verdict(9, worst < C9_TOL, format!("{C9_SETS} sets, max |fitted - predicted| = {worst:.2e}"));
}

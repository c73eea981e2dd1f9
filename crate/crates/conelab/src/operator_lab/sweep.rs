//! q-sweeps of the positive Bergman operator on the tube domain.
//!
//! Under the balance condition the kernel a(y, x) of S between the unweighted
//! L^q(Ω, Q^{−τ}dx) spaces is invariant under the triangular group H, so S is
//! a right convolution on H and ‖S‖_{q→q} = ∫_H a(e, w·e) Δ(w)^{−1/q} dw with
//! Δ = Q^{(n−m)/2}. Integrating the convolution kernel over the off-diagonal
//! fibres leaves a convolution on the diagonal log-scales σ ∈ R^r with the same
//! norm. That kernel is tabulated on a grid of spacing h and truncated to
//! nested Q-boxes [2^{−k}, 2^k].

use super::{norm_estimate, NormConfig, PositiveOperator};
use crate::chart::HaarChart;
use crate::cone_algebra::{log_power_f, ConeSpec, Side};
use crate::error::{Error, Result};
use crate::par::{map_indexed, stream_rng};
use crate::quadrature::MultiT;
use crate::rational::{format_rat, to_f64, Rat};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::sync::Arc;

/// ln F(δ), F(δ) = J₀ ∫ Q^{−γ}(e + x(δ, u)) du, on the grid δ ∈ h·[−2M, 2M]^r.
#[derive(Clone, Debug)]
pub struct FibredKernel {
    pub cone: Arc<ConeSpec>,
    pub gamma: Vec<f64>,
    pub spacing: f64,
    pub max_index: usize,
    log_fibre: Vec<f64>,
    strides: Vec<usize>,
}

fn grid_point(flat: usize, side: usize, r: usize) -> Vec<usize> {
    let mut idx = vec![0; r];
    let mut rest = flat;
    for d in (0..r).rev() {
        idx[d] = rest % side;
        rest /= side;
    }
    idx
}

impl FibredKernel {
    pub fn new(cone: &Arc<ConeSpec>, gamma: &[f64], spacing: f64, max_index: usize, samples: usize, seed: u64) -> FibredKernel {
        let r = cone.rank();
        let side = 4 * max_index + 1;
        let total = side.pow(r as u32);
        let chart = HaarChart::new(cone, Side::Primal);
        let e = cone.identity();
        let blocks = cone.off_blocks();
        let d = chart.off_dim();
        let proposal = MultiT { center: vec![0.0; d], scale: 1.0, df: 1.0 };
        let log_j0 = chart.log_j0();
        let log_fibre = map_indexed(total, |flat| {
            let delta: Vec<f64> = grid_point(flat, side, r)
                .iter()
                .map(|&i| (i as f64 - 2.0 * max_index as f64) * spacing)
                .collect();
            // Q(e + t·e) = Q(t·e) Q(e + t⁻¹·e) is better conditioned when t is large;
            // draws where neither form factors stably are dropped, which can only
            // lower the kernel
            let eval = |u: &[f64]| {
                let t = chart.factor(&delta, u);
                if let Ok(qv) = cone.q_values(&e.add(&chart.point(&t))) {
                    return -log_power_f(gamma, &qv);
                }
                let inv = t.upper_triangular_inverse();
                match cone.q_values(&e.add(&inv.mul_transpose(&inv))) {
                    Ok(qv) => -log_power_f(gamma, &qv) - delta.iter().zip(gamma).map(|(d, g)| 2.0 * d * g).sum::<f64>(),
                    Err(_) => f64::NEG_INFINITY,
                }
            };
            if d == 0 {
                return log_j0 + eval(&[]);
            }
            let rho: Vec<f64> = delta.iter().map(|s| s.exp()).collect();
            // Haar-coordinate scale of each off-diagonal entry
            let scales: Vec<f64> = blocks
                .iter()
                .zip(chart.scale_block())
                .map(|(&(i, j), &b)| 0.5 * ((1.0 + rho[i] * rho[i]) * (1.0 + rho[j] * rho[j])).sqrt() / rho[b])
                .collect();
            let log_scale: f64 = scales.iter().map(|s| s.ln()).sum();
            let mut rng = stream_rng(seed, flat as u64);
            let mut logs = Vec::with_capacity(samples);
            for _ in 0..samples {
                let (z, lp) = proposal.draw(&mut rng);
                let u: Vec<f64> = z.iter().zip(&scales).map(|(a, s)| a * s).collect();
                logs.push(eval(&u) + log_scale - lp);
            }
            let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                return top;
            }
            let mean = logs.iter().map(|l| (l - top).exp()).sum::<f64>() / samples as f64;
            log_j0 + top + mean.ln()
        });
        let strides = (0..r).map(|k| side.pow((r - 1 - k) as u32)).collect();
        FibredKernel { cone: cone.clone(), gamma: gamma.to_vec(), spacing, max_index, log_fibre, strides }
    }

    pub fn rank(&self) -> usize {
        self.cone.rank()
    }

    fn side(&self) -> usize {
        4 * self.max_index + 1
    }

    /// ln F at grid offset δ/h (each entry in [−2M, 2M]).
    pub fn log_fibre_at(&self, offset: &[i64]) -> f64 {
        let m2 = 2 * self.max_index as i64;
        let flat: usize = offset.iter().zip(&self.strides).map(|(o, s)| (o + m2) as usize * s).sum();
        self.log_fibre[flat]
    }

    /// Truncation to σ ∈ h·[−level_index, level_index]^r with kernel
    /// ln F(δ) + Σ 2δ_j c_j + r ln h.
    pub fn toeplitz(&self, level_index: usize, exponent: &[f64]) -> ToeplitzGrid {
        assert!(level_index <= self.max_index);
        let r = self.rank();
        let side = self.side();
        let h = self.spacing;
        let kernel: Vec<f64> = (0..self.log_fibre.len())
            .map(|flat| {
                let idx = grid_point(flat, side, r);
                let lin: f64 = idx
                    .iter()
                    .zip(exponent)
                    .map(|(&i, c)| 2.0 * (i as f64 - 2.0 * self.max_index as f64) * h * c)
                    .sum();
                (self.log_fibre[flat] + lin + r as f64 * h.ln()).exp()
            })
            .collect();
        let n_side = 2 * level_index + 1;
        let shift = self.max_index - level_index;
        let positions: Vec<usize> = (0..n_side.pow(r as u32))
            .map(|flat| grid_point(flat, n_side, r).iter().zip(&self.strides).map(|(a, s)| (a + shift) * s).sum())
            .collect();
        let center: usize = self.strides.iter().map(|s| 2 * self.max_index * s).sum();
        ToeplitzGrid::new(r, n_side, positions, kernel, center, &self.strides)
    }
}

/// Truncated convolution on a cubic grid: y_j = Σ_k K(σ_k − σ_j) x_k,
/// applied through zero-padded FFTs.
pub struct ToeplitzGrid {
    pub rank: usize,
    pub n_side: usize,
    positions: Vec<usize>,
    kernel: Vec<f64>,
    center: usize,
    pad: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// Spectrum of d ↦ K(−d), for `apply`.
    forward: Vec<Complex64>,
    /// Spectrum of d ↦ K(d), for `apply_transpose`.
    backward: Vec<Complex64>,
}

impl ToeplitzGrid {
    fn new(rank: usize, n_side: usize, positions: Vec<usize>, kernel: Vec<f64>, center: usize, strides: &[usize]) -> ToeplitzGrid {
        let pad = 2 * n_side;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(pad);
        let ifft = planner.plan_fft_inverse(pad);
        let total = pad.pow(rank as u32);
        let reach = n_side as i64 - 1;
        let mut forward = vec![Complex64::new(0.0, 0.0); total];
        let mut backward = forward.clone();
        for flat in 0..(2 * n_side - 1).pow(rank as u32) {
            let offset: Vec<i64> = grid_point(flat, 2 * n_side - 1, rank).iter().map(|&a| a as i64 - reach).collect();
            let at = |sign: i64| {
                let table = center as i64 + offset.iter().zip(strides).map(|(o, s)| sign * o * *s as i64).sum::<i64>();
                kernel[table as usize]
            };
            let slot: usize = offset.iter().fold(0, |acc, o| acc * pad + o.rem_euclid(pad as i64) as usize);
            forward[slot] = Complex64::new(at(-1), 0.0);
            backward[slot] = Complex64::new(at(1), 0.0);
        }
        let mut grid = ToeplitzGrid { rank, n_side, positions, kernel, center, pad, fft, ifft, forward, backward };
        grid.forward = grid.transform(grid.forward.clone(), false);
        grid.backward = grid.transform(grid.backward.clone(), false);
        grid
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Product sine bump, a good start for the Perron vector.
    pub fn bump(&self) -> Vec<f64> {
        let n = self.n_side;
        (0..self.len())
            .map(|flat| {
                grid_point(flat, n, self.rank)
                    .iter()
                    .map(|&a| (std::f64::consts::PI * (a as f64 + 1.0) / (n as f64 + 1.0)).sin())
                    .product()
            })
            .collect()
    }

    /// Matrix entry (j, k), read directly from the kernel table.
    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.kernel[self.center + self.positions[k] - self.positions[j]]
    }

    /// In-place multidimensional FFT, one axis at a time.
    fn transform(&self, mut buf: Vec<Complex64>, inverse: bool) -> Vec<Complex64> {
        let pad = self.pad;
        let plan = if inverse { &self.ifft } else { &self.fft };
        let lines = pad.pow(self.rank as u32 - 1);
        for axis in 0..self.rank {
            let stride = pad.pow((self.rank - 1 - axis) as u32);
            let base = |l: usize| (l / stride) * stride * pad + l % stride;
            let done = map_indexed(lines, |l| {
                let b = base(l);
                let mut line: Vec<Complex64> = (0..pad).map(|t| buf[b + t * stride]).collect();
                plan.process(&mut line);
                line
            });
            for (l, line) in done.into_iter().enumerate() {
                let b = base(l);
                for (t, v) in line.into_iter().enumerate() {
                    buf[b + t * stride] = v;
                }
            }
        }
        buf
    }

    fn slot(&self, flat: usize) -> usize {
        grid_point(flat, self.n_side, self.rank).iter().fold(0, |acc, &a| acc * self.pad + a)
    }

    fn convolve(&self, x: &[f64], spectrum: &[Complex64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); spectrum.len()];
        for (flat, v) in x.iter().enumerate() {
            buf[self.slot(flat)] = Complex64::new(*v, 0.0);
        }
        let mut buf = self.transform(buf, false);
        for (b, s) in buf.iter_mut().zip(spectrum) {
            *b *= s;
        }
        let buf = self.transform(buf, true);
        let norm = spectrum.len() as f64;
        // round-off can leave tiny negatives in a positive result
        (0..x.len()).map(|flat| (buf[self.slot(flat)].re / norm).max(0.0)).collect()
    }
}

impl PositiveOperator for ToeplitzGrid {
    fn rows(&self) -> usize {
        self.len()
    }

    fn cols(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.convolve(x, &self.forward)
    }

    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.convolve(y, &self.backward)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepClass {
    Saturating,
    Growing,
    Inconclusive,
}

/// Saturating if the last ratio is below `saturate`, growing if two
/// consecutive ratios exceed `grow`.
pub fn classify_growth(ratios: &[f64], saturate: f64, grow: f64) -> SweepClass {
    match ratios.last() {
        Some(&last) if last < saturate => SweepClass::Saturating,
        _ if ratios.windows(2).any(|w| w[0] > grow && w[1] > grow) => SweepClass::Growing,
        _ => SweepClass::Inconclusive,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepConfig {
    /// Q-box exponents k of the nested truncations [2^{−k}, 2^k].
    pub levels: Vec<u32>,
    /// Grid spacing in σ.
    pub spacing: f64,
    pub fibre_samples: usize,
    pub seed: u64,
    pub saturate_below: f64,
    pub grow_above: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            levels: vec![4, 8, 16, 32, 64],
            spacing: 1.0,
            fibre_samples: 64,
            seed: 1,
            saturate_below: 1.05,
            grow_above: 1.5,
            max_iterations: 400,
            tolerance: 1e-7,
        }
    }
}

impl SweepConfig {
    fn level_index(&self, k: u32) -> usize {
        ((k as f64 * std::f64::consts::LN_2 / 2.0) / self.spacing + 1e-9).floor() as usize
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub cone: String,
    pub nu: Vec<String>,
    pub q_grid: Vec<String>,
    pub levels: Vec<u32>,
    pub grid_points: Vec<usize>,
    /// norms[level][q]
    pub norms: Vec<Vec<f64>>,
    /// growth_ratios[q][level − 1]
    pub growth_ratios: Vec<Vec<f64>>,
    pub classification: Vec<SweepClass>,
    pub converged: Vec<Vec<bool>>,
    pub config: SweepConfig,
}

impl SweepResult {
    pub fn class_of(&self, q: &Rat) -> Option<SweepClass> {
        let key = format_rat(q);
        self.q_grid.iter().position(|g| *g == key).map(|i| self.classification[i])
    }

    /// level,q,norm,ratio,class
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,q,norm,ratio,class\n");
        for (qi, q) in self.q_grid.iter().enumerate() {
            for (li, k) in self.levels.iter().enumerate() {
                let ratio = if li == 0 { String::new() } else { format!("{:.6}", self.growth_ratios[qi][li - 1]) };
                let class = serde_json::to_value(self.classification[qi]).unwrap();
                out.push_str(&format!("{},{},{:.9e},{},{}\n", k, q, self.norms[li][qi], ratio, class.as_str().unwrap()));
            }
        }
        out
    }
}

/// Discrete q→q norms of the positive Bergman operator P_ν⁺ on nested
/// truncations, classified as saturating or growing.
pub fn sweep_q(cone: &Arc<ConeSpec>, nu: &[Rat], q_grid: &[Rat], cfg: &SweepConfig) -> Result<SweepResult> {
    if nu.len() != cone.rank() {
        return Err(Error::LengthMismatch { expected: cone.rank(), got: nu.len() });
    }
    if q_grid.iter().any(|q| *q <= Rat::from_integer(1.into())) {
        return Err(Error::Precondition("every q must exceed 1".into()));
    }
    if cfg.levels.is_empty() || cfg.levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("levels must be strictly increasing".into()));
    }
    let nu_f: Vec<f64> = nu.iter().map(to_f64).collect();
    let (m, n) = (cone.m(), cone.n_col());
    let max_index = cfg.level_index(*cfg.levels.last().unwrap());
    let kernel = FibredKernel::new(cone, &nu_f, cfg.spacing, max_index, cfg.fibre_samples, cfg.seed);
    let mut norms = vec![vec![0.0; q_grid.len()]; cfg.levels.len()];
    let mut converged = vec![vec![false; cfg.levels.len()]; q_grid.len()];
    let mut grid_points = Vec::new();
    for (qi, q) in q_grid.iter().enumerate() {
        let qf = to_f64(q);
        // β + τ − ν/q + (m − n)/(2q) with β = ν − τ
        let exponent: Vec<f64> = (0..cone.rank())
            .map(|j| nu_f[j] * (1.0 - 1.0 / qf) + (m[j] as f64 - n[j] as f64) / (2.0 * qf))
            .collect();
        for (li, &k) in cfg.levels.iter().enumerate() {
            let grid = kernel.toeplitz(cfg.level_index(k), &exponent);
            if qi == 0 {
                grid_points.push(grid.len());
            }
            let ncfg = NormConfig {
                max_iterations: cfg.max_iterations,
                tolerance: cfg.tolerance,
                seed: cfg.seed,
                start: Some(grid.bump()),
            };
            let est = norm_estimate(&grid, qf, qf, &ncfg);
            norms[li][qi] = est.value;
            converged[qi][li] = est.converged;
        }
    }
    let growth_ratios: Vec<Vec<f64>> = (0..q_grid.len())
        .map(|qi| (1..cfg.levels.len()).map(|li| norms[li][qi] / norms[li - 1][qi]).collect())
        .collect();
    let classification = growth_ratios.iter().map(|r| classify_growth(r, cfg.saturate_below, cfg.grow_above)).collect();
    Ok(SweepResult {
        cone: cone.name.clone(),
        nu: nu.iter().map(format_rat).collect(),
        q_grid: q_grid.iter().map(format_rat).collect(),
        levels: cfg.levels.clone(),
        grid_points,
        norms,
        growth_ratios,
        classification,
        converged,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_dense() {
        let cone = crate::cone_algebra::builtin_cone("sym2").unwrap();
        let kernel = FibredKernel::new(&cone, &[2.0, 2.0], 0.5, 3, 16, 3);
        let grid = kernel.toeplitz(2, &[0.7, 0.4]);
        let n = grid.len();
        let x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let dense: Vec<f64> = (0..n).map(|j| (0..n).map(|k| grid.entry(j, k) * x[k]).sum()).collect();
        let dense_t: Vec<f64> = (0..n).map(|k| (0..n).map(|j| grid.entry(j, k) * x[j]).sum()).collect();
        for (a, b) in grid.apply(&x).iter().zip(&dense).chain(grid.apply_transpose(&x).iter().zip(&dense_t)) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn classification_rules() {
        assert_eq!(classify_growth(&[1.3, 1.1, 1.01], 1.05, 1.5), SweepClass::Saturating);
        assert_eq!(classify_growth(&[1.2, 1.6, 1.7], 1.05, 1.5), SweepClass::Growing);
        assert_eq!(classify_growth(&[1.6, 1.2, 1.6], 1.05, 1.5), SweepClass::Inconclusive);
    }
}

//! H-invariant log-factor distance, balls, Whitney-type lattices and the
//! ball-volume and pairing checks built on them.

use crate::chart::HaarChart;
use crate::cone_algebra::{
    cholesky_dual, cholesky_upper, dual_point, inner, q, ConeElement, ConeSpec,
    TriangularFactor, Side,
};
use crate::error::{Error, Result};
use crate::halton;
use crate::linalg::Mat;
use crate::par::{map_indexed, stream_rng};
use crate::quadrature::{batch_estimate, Coord1D, Estimate, BATCHES};
use rand::Rng;
use serde::Serialize;
use std::sync::Arc;

/// Distance from the weighted Frobenius norm of a matrix logarithm:
/// primal d(x,y) = ‖log(a·aᵀ)‖ with a = t_x⁻¹·t_y, dual d*(ξ,η) = ‖log(aᵀ·a)‖
/// with a = s_η·s_ξ⁻¹.
#[derive(Clone, Debug)]
pub struct DistanceModel {
    pub cone: Arc<ConeSpec>,
    /// Per diagonal block; entry (a, b) of the logarithm gets sqrt(w_i·w_j).
    pub metric_weights: Vec<f64>,
}

impl DistanceModel {
    pub fn new(cone: &Arc<ConeSpec>) -> DistanceModel {
        DistanceModel { cone: cone.clone(), metric_weights: vec![1.0; cone.rank()] }
    }

    pub fn with_weights(cone: &Arc<ConeSpec>, weights: Vec<f64>) -> Result<DistanceModel> {
        if weights.len() != cone.rank() {
            return Err(Error::LengthMismatch { expected: cone.rank(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidSpec("metric weights must be positive".into()));
        }
        Ok(DistanceModel { cone: cone.clone(), metric_weights: weights })
    }

    fn unit(&self) -> bool {
        self.metric_weights.iter().all(|w| *w == 1.0)
    }

    /// Weighted norm of log(m) for symmetric positive definite m.
    fn log_norm(&self, m: &Mat) -> f64 {
        let eig = nalgebra::SymmetricEigen::new(m.symmetrized().to_dmatrix());
        if eig.eigenvalues.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return f64::INFINITY;
        }
        if self.unit() {
            return eig.eigenvalues.iter().map(|v| v.ln().powi(2)).sum::<f64>().sqrt();
        }
        let logs = eig.eigenvalues.map(|v| v.ln());
        let l = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&logs) * eig.eigenvectors.transpose();
        let offsets = self.cone.offsets();
        let block_of = |a: usize| offsets.iter().rposition(|&o| o <= a).unwrap();
        let mut acc = 0.0;
        for a in 0..l.nrows() {
            for b in 0..l.ncols() {
                let w = (self.metric_weights[block_of(a)] * self.metric_weights[block_of(b)]).sqrt();
                acc += w * l[(a, b)].powi(2);
            }
        }
        acc.sqrt()
    }

    fn raw_factors(&self, from: &Mat, to: &Mat, side: Side) -> f64 {
        let inv = from.upper_triangular_inverse();
        match side {
            Side::Primal => {
                let a = inv.mul(to);
                self.log_norm(&a.mul_transpose(&a))
            }
            Side::Dual => {
                let a = to.mul(&inv);
                self.log_norm(&a.transpose_mul(&a))
            }
        }
    }

    /// Distance between two points of the same side, symmetrized by max.
    pub fn dist(&self, x: &ConeElement, y: &ConeElement) -> Result<f64> {
        if x.side != y.side {
            return Err(Error::InvalidSpec("points lie on different sides".into()));
        }
        let (fx, fy) = match x.side {
            Side::Primal => (cholesky_upper(x)?.t, cholesky_upper(y)?.t),
            Side::Dual => (cholesky_dual(x)?.t, cholesky_dual(y)?.t),
        };
        Ok(self.dist_factors(&fx, &fy, x.side))
    }

    /// Distance between the points generated by two factors.
    pub fn dist_factors(&self, fx: &Mat, fy: &Mat, side: Side) -> f64 {
        let a = self.raw_factors(fx, fy, side);
        if self.unit() {
            return a;
        }
        a.max(self.raw_factors(fy, fx, side))
    }
}

/// Unit-weight distance on Ω (or on Ω* for dual points).
pub fn dist(x: &ConeElement, y: &ConeElement) -> Result<f64> {
    DistanceModel::new(&x.cone).dist(x, y)
}

/// Heavy-tailed draw of a factor near the identity, scaled to the ball of
/// radius λ; returns the factor, σ and ln of the proposal density in Haar
/// coordinates. Every point of the ball has positive density.
fn draw_near_identity<R: Rng + ?Sized>(chart: &HaarChart, lambda: f64, rng: &mut R) -> (Mat, Vec<f64>, f64) {
    let dims = chart.cone.block_dims();
    let mut log_p = 0.0;
    let sigma: Vec<f64> = (0..chart.rank())
        .map(|j| {
            let (x, lp) = Coord1D::Student { loc: 0.0, scale: 0.35 * lambda / (dims[j] as f64).sqrt(), df: 3.0 }.draw(rng);
            log_p += lp;
            x
        })
        .collect();
    let u: Vec<f64> = (0..chart.off_dim())
        .map(|_| {
            let (x, lp) = Coord1D::Student { loc: 0.0, scale: 0.5 * lambda, df: 3.0 }.draw(rng);
            log_p += lp;
            x
        })
        .collect();
    (chart.factor(&sigma, &u), sigma, log_p)
}

/// Largest s with d(e, z(s·v)) ≤ λ along the chart ray z(s·v), assuming the
/// distance grows along the ray; z(s·v) has Haar coordinates s·(σ, u).
fn ray_to_sphere(chart: &HaarChart, model: &DistanceModel, sigma: &[f64], u: &[f64], lambda: f64) -> f64 {
    let id = chart.cone.identity();
    let at = |s: f64| {
        let sg: Vec<f64> = sigma.iter().map(|v| v * s).collect();
        let su: Vec<f64> = u.iter().map(|v| v * s).collect();
        model.dist_factors(&id, &chart.factor(&sg, &su), chart.side)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut grow = 0;
    while at(hi) <= lambda && grow < 60 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if at(mid) <= lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Random chart direction, scaled to the sphere of radius λ about e, then
/// shrunk by `shrink` ∈ [0, 1].
fn draw_in_ball<R: Rng + ?Sized>(chart: &HaarChart, model: &DistanceModel, lambda: f64, shrink: Option<f64>, rng: &mut R) -> Mat {
    let sigma: Vec<f64> = (0..chart.rank()).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    let u: Vec<f64> = (0..chart.off_dim()).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    let s = ray_to_sphere(chart, model, &sigma, &u, lambda) * shrink.unwrap_or(1.0);
    let sg: Vec<f64> = sigma.iter().map(|v| v * s).collect();
    let su: Vec<f64> = u.iter().map(|v| v * s).collect();
    chart.factor(&sg, &su)
}

#[derive(Clone, Debug, Serialize)]
pub struct QRatioReport {
    pub lambda: f64,
    /// Empirical sup of max(Q_j(y)/Q_j(x), Q_j(x)/Q_j(y)) over pairs with d ≤ λ.
    pub max_ratio: Vec<f64>,
    /// Same over the first half of the samples.
    pub max_ratio_half: Vec<f64>,
    /// Largest relative change between the half and full sample maxima.
    pub drift: f64,
    pub accepted_pairs: usize,
}

/// Samples random centers x and neighbours y = t_x·z·t_xᵀ on the sphere
/// d(x,y) = λ (where the extremes sit), keeps pairs with d(x,y) ≤ λ and
/// records the extreme Q ratios.
pub fn check_q_ratio_bounds(cone: &Arc<ConeSpec>, lambda: f64, samples: usize, seed: u64) -> Result<QRatioReport> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidSpec("lambda must be nonnegative".into()));
    }
    let r = cone.rank();
    let chart = HaarChart::new(cone, Side::Primal);
    let model = DistanceModel::new(cone);
    let per = samples.div_ceil(BATCHES).max(1);
    let batches = map_indexed(BATCHES, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let mut best = vec![1.0f64; r];
        let mut kept = 0usize;
        for _ in 0..per {
            let tx = TriangularFactor::random(cone, &mut rng, 1.0);
            let z = draw_in_ball(&chart, &model, lambda, None, &mut rng);
            let ty = tx.t.mul(&z);
            if !(model.dist_factors(&tx.t, &ty, Side::Primal) <= lambda * (1.0 + 1e-9)) {
                continue;
            }
            let (Ok(qx), Ok(qy)) = (cone.q_values(&tx.t.mul_transpose(&tx.t)), cone.q_values(&ty.mul_transpose(&ty))) else {
                continue;
            };
            kept += 1;
            for j in 0..r {
                let ratio = qy[j] / qx[j];
                best[j] = best[j].max(ratio).max(1.0 / ratio);
            }
        }
        (best, kept)
    });
    let fold = |range: &[(Vec<f64>, usize)]| {
        let mut best = vec![1.0f64; r];
        for (b, _) in range {
            for j in 0..r {
                best[j] = best[j].max(b[j]);
            }
        }
        best
    };
    let max_ratio = fold(&batches);
    let max_ratio_half = fold(&batches[..BATCHES / 2]);
    let drift = max_ratio.iter().zip(&max_ratio_half).map(|(a, b)| (a - b) / b).fold(0.0, f64::max);
    Ok(QRatioReport {
        lambda,
        max_ratio,
        max_ratio_half,
        drift,
        accepted_pairs: batches.iter().map(|b| b.1).sum(),
    })
}

/// Lebesgue volume (basis coordinates) of B_λ(center), by importance sampling
/// around the identity transported to the center.
pub fn ball_volume(center: &ConeElement, lambda: f64, samples: usize, seed: u64) -> Result<Estimate> {
    let cone = &center.cone;
    let tc = cholesky_upper(center)?;
    let chart = HaarChart::new(cone, Side::Primal);
    let model = DistanceModel::new(cone);
    // y = t_c·z·t_cᵀ has factor t_c·t_z, so its σ is σ_c + σ_z
    let sigma_c: Vec<f64> = tc.rho.iter().map(|v| v.ln()).collect();
    let per = samples.div_ceil(BATCHES).max(1);
    let means = map_indexed(BATCHES, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let mut acc = 0.0;
        for _ in 0..per {
            let (z, sz, log_p) = draw_near_identity(&chart, lambda, &mut rng);
            let ty = tc.t.mul(&z);
            if !(model.dist_factors(&tc.t, &ty, Side::Primal) <= lambda) {
                continue;
            }
            let sigma: Vec<f64> = sigma_c.iter().zip(&sz).map(|(a, b)| a + b).collect();
            acc += (chart.log_jacobian(&sigma) - log_p).exp();
        }
        acc / per as f64
    });
    Ok(batch_estimate(&means, per * BATCHES))
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingRange {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

/// Range of (y|ξ) for y ∈ B_1(y0) and ξ ∈ B*_1(y0′), y0′ the dual point of y0.
/// Points are drawn along random chart rays, radially spread inside the ball.
pub fn pairing_bounds(y0: &ConeElement, samples: usize, seed: u64) -> Result<PairingRange> {
    pairing_bounds_radius(y0, 1.0, samples, seed)
}

pub fn pairing_bounds_radius(y0: &ConeElement, radius: f64, samples: usize, seed: u64) -> Result<PairingRange> {
    let cone = &y0.cone;
    let t0 = cholesky_upper(y0)?;
    let dual0 = dual_point(y0)?;
    let s0 = cholesky_dual(&dual0)?;
    let primal = HaarChart::new(cone, Side::Primal);
    let dual = HaarChart::new(cone, Side::Dual);
    let model = DistanceModel::new(cone);
    let per = samples.div_ceil(BATCHES).max(1);
    let ranges = map_indexed(BATCHES, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let mut kept = 0;
        while kept < per {
            let shrink_y = rng.random::<f64>().powf(1.0 / primal.cone.dim() as f64);
            let shrink_x = rng.random::<f64>().powf(1.0 / primal.cone.dim() as f64);
            let z = draw_in_ball(&primal, &model, radius, Some(shrink_y), &mut rng);
            let w = draw_in_ball(&dual, &model, radius, Some(shrink_x), &mut rng);
            let ty = t0.t.mul(&z);
            let sx = w.mul(&s0.t);
            kept += 1;
            if !(model.dist_factors(&t0.t, &ty, Side::Primal) <= radius * (1.0 + 1e-9)
                && model.dist_factors(&s0.t, &sx, Side::Dual) <= radius * (1.0 + 1e-9))
            {
                continue;
            }
            let Ok(y) = ConeElement::from_matrix(cone, &ty.mul_transpose(&ty), Side::Primal) else { continue };
            let Ok(xi) = ConeElement::from_matrix(cone, &cone.project(&sx.transpose_mul(&sx)), Side::Dual) else { continue };
            let v = inner(&y, &xi);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi, kept)
    });
    let min = ranges.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let max = ranges.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(PairingRange { min, max, samples: ranges.iter().map(|r| r.2).sum() })
}

/// Truncation {x : Q_j(x) ∈ [q_lo, q_hi] ∀j, |u_k| ≤ off_bound} in Haar
/// coordinates.
#[derive(Clone, Debug, Serialize)]
pub struct Region {
    pub q_lo: f64,
    pub q_hi: f64,
    pub off_bound: f64,
}

impl Region {
    pub fn q_box(q_lo: f64, q_hi: f64) -> Region {
        Region { q_lo, q_hi, off_bound: 1.0 }
    }

    /// Q-box [2^{−k}, 2^k].
    pub fn dyadic(k: u32) -> Region {
        let s = 2f64.powi(k as i32);
        Region::q_box(1.0 / s, s)
    }

    fn map(&self, chart: &HaarChart, unit: &[f64]) -> Mat {
        let r = chart.rank();
        let (a, b) = (0.5 * self.q_lo.ln(), 0.5 * self.q_hi.ln());
        let sigma: Vec<f64> = unit[..r].iter().map(|h| a + h * (b - a)).collect();
        let u: Vec<f64> = unit[r..].iter().map(|h| (2.0 * h - 1.0) * self.off_bound).collect();
        chart.factor(&sigma, &u)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LatticeChecks {
    /// Smallest pairwise distance; ≥ λ keeps the λ/2-balls disjoint.
    pub min_separation: f64,
    pub disjoint: bool,
    pub test_points: usize,
    pub uncovered: usize,
    pub covered: bool,
    /// Largest number of λ-balls containing one test point or lattice point.
    pub max_multiplicity: usize,
    pub repairs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Lattice {
    #[serde(skip)]
    pub cone: Option<Arc<ConeSpec>>,
    pub lambda: f64,
    pub region: Region,
    #[serde(serialize_with = "serialize_points")]
    pub points: Vec<ConeElement>,
    #[serde(skip)]
    pub factors: Vec<Mat>,
    pub multiplicity_bound: usize,
    pub checks: LatticeChecks,
}

fn serialize_points<S: serde::Serializer>(points: &[ConeElement], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(points.len()))?;
    for p in points {
        seq.serialize_element(&p.coords)?;
    }
    seq.end()
}

pub const LATTICE_CANDIDATES: usize = 4000;
pub const LATTICE_TEST_POINTS: usize = 2000;

/// Greedy maximal λ-separated subset of a Halton candidate stream, then a
/// covering check on an independent test stream with repair of uncovered
/// test points.
pub fn build_lattice(cone: &Arc<ConeSpec>, region: &Region, lambda: f64) -> Result<Lattice> {
    build_lattice_with(cone, region, lambda, LATTICE_CANDIDATES, LATTICE_TEST_POINTS, 0)
}

pub fn build_lattice_with(
    cone: &Arc<ConeSpec>,
    region: &Region,
    lambda: f64,
    candidates: usize,
    test_points: usize,
    seed: u64,
) -> Result<Lattice> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidSpec("lambda must be positive".into()));
    }
    if !(region.q_lo > 0.0 && region.q_lo <= region.q_hi && region.off_bound >= 0.0) {
        return Err(Error::RegionTooSmall);
    }
    let chart = HaarChart::new(cone, Side::Primal);
    let model = DistanceModel::new(cone);
    let dim = chart.rank() + chart.off_dim();
    // candidate 0 is the region's center
    // sweep the Halton candidates in lexicographic order of their unit coordinates
    let mut units: Vec<Vec<f64>> = (1..=candidates as u64).map(|i| halton::point(i + seed, dim)).collect();
    units.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let stream: Vec<Mat> = units.iter().map(|h| region.map(&chart, h)).collect();
    let mut factors: Vec<Mat> = Vec::new();
    for c in &stream {
        if factors.iter().all(|p| model.dist_factors(p, c, Side::Primal) >= lambda) {
            factors.push(*c);
        }
    }
    if factors.is_empty() {
        return Err(Error::RegionTooSmall);
    }
    let shift: Vec<f64> = (0..dim).map(|k| ((k as f64 + 1.0) * 0.618_033_988_75).fract()).collect();
    let tests: Vec<Mat> = (0..test_points as u64)
        .map(|i| region.map(&chart, &halton::shifted_point(i + 7919 + seed, &shift)))
        .collect();
    let far = |factors: &[Mat], t: &Mat| factors.iter().all(|p| model.dist_factors(p, t, Side::Primal) > lambda);
    let missed: Vec<bool> = map_indexed(tests.len(), |i| far(&factors, &tests[i]));
    let mut repairs = 0;
    for (t, miss) in tests.iter().zip(&missed) {
        if *miss && far(&factors, t) {
            factors.push(*t);
            repairs += 1;
        }
    }
    let uncovered = map_indexed(tests.len(), |i| far(&factors, &tests[i])).iter().filter(|m| **m).count();
    let min_sep = map_indexed(factors.len(), |a| {
        ((a + 1)..factors.len())
            .map(|b| model.dist_factors(&factors[a], &factors[b], Side::Primal))
            .fold(f64::INFINITY, f64::min)
    })
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    let probes: Vec<&Mat> = tests.iter().chain(factors.iter()).collect();
    let max_mult = map_indexed(probes.len(), |i| {
        factors.iter().filter(|p| model.dist_factors(p, probes[i], Side::Primal) < lambda).count()
    })
    .into_iter()
    .max()
    .unwrap_or(0);
    let points = factors
        .iter()
        .map(|t| ConeElement::from_matrix(cone, &t.mul_transpose(t), Side::Primal))
        .collect::<Result<Vec<_>>>()?;
    Ok(Lattice {
        cone: Some(cone.clone()),
        lambda,
        region: region.clone(),
        points,
        factors,
        multiplicity_bound: max_mult,
        checks: LatticeChecks {
            min_separation: min_sep,
            disjoint: min_sep >= lambda,
            test_points,
            uncovered,
            covered: uncovered == 0,
            max_multiplicity: max_mult,
            repairs,
        },
    })
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dual lattice {y_j′}.
    pub fn dual_points(&self) -> Result<Vec<ConeElement>> {
        self.points.iter().map(dual_point).collect()
    }

    pub fn q_values(&self) -> Result<Vec<Vec<f64>>> {
        self.points.iter().map(q).collect()
    }
}

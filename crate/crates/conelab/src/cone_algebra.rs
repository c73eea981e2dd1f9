//! Matrix-realized homogeneous cones: block data, triangular factorizations,
//! the functions Q_j and Q*_j, duality, the triangular group action and the pairing.
//!
//! A cone is a subspace E of symmetric N×N matrices that decomposes into
//! diagonal blocks (multiples of the identity) and off-diagonal block patterns.
//! Points of Ω are t·tᵀ for t in the group H of block upper triangular
//! matrices with scalar diagonal blocks and off-diagonal blocks in the patterns.
//! Points of Ω* are proj_E(sᵀ·s) for s in H.

use crate::error::{Error, Result};
use crate::linalg::{Mat, MAX_DIM};
use crate::rational::{int, rat, Rat};
use crate::weights::WeightVector;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const PATTERN_TOL: f64 = 1e-9;
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BasisKind {
    Diagonal(usize),
    OffDiagonal(usize, usize),
}

/// Orthonormal (Frobenius) directions of one off-diagonal block pattern, each a
/// row-major d_i×d_j matrix.
#[derive(Clone, Debug)]
struct Pattern {
    i: usize,
    j: usize,
    dirs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct ConeSpec {
    pub name: String,
    block_dims: Vec<usize>,
    basis: Vec<Mat>,
    offsets: Vec<usize>,
    patterns: Vec<Pattern>,
    pattern_index: Vec<Vec<Option<usize>>>,
    gram_inv: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Primal,
    Dual,
}

fn block_range(offsets: &[usize], dims: &[usize], i: usize) -> std::ops::Range<usize> {
    offsets[i]..offsets[i] + dims[i]
}

impl ConeSpec {
    /// Validates a block-adapted basis and derives all T-algebra data.
    pub fn new(name: &str, block_dims: Vec<usize>, basis: Vec<Mat>) -> Result<ConeSpec> {
        let r = block_dims.len();
        if r == 0 || block_dims.contains(&0) {
            return Err(Error::InvalidSpec("block dimensions must be positive".into()));
        }
        let big_n: usize = block_dims.iter().sum();
        if big_n > MAX_DIM {
            return Err(Error::InvalidSpec(format!("embedding size {big_n} exceeds {MAX_DIM}")));
        }
        let mut offsets = vec![0; r];
        for i in 1..r {
            offsets[i] = offsets[i - 1] + block_dims[i - 1];
        }
        let block_of = |row: usize| (0..r).rfind(|&b| offsets[b] <= row).unwrap();

        let mut kinds = Vec::with_capacity(basis.len());
        for (k, b) in basis.iter().enumerate() {
            if b.dim() != big_n {
                return Err(Error::InvalidSpec(format!("basis matrix {k} has wrong size")));
            }
            if b.asymmetry() > 1e-12 {
                return Err(Error::InvalidSpec(format!("basis matrix {k} is not symmetric")));
            }
            let mut touched: Vec<(usize, usize)> = Vec::new();
            for a in 0..big_n {
                for c in 0..big_n {
                    if b[(a, c)].abs() > 1e-14 {
                        let key = (block_of(a).min(block_of(c)), block_of(a).max(block_of(c)));
                        if !touched.contains(&key) {
                            touched.push(key);
                        }
                    }
                }
            }
            if touched.len() != 1 {
                return Err(Error::InvalidSpec(format!(
                    "basis matrix {k} must be supported on exactly one block"
                )));
            }
            let (i, j) = touched[0];
            if i == j {
                let range = block_range(&offsets, &block_dims, i);
                let c = b[(range.start, range.start)];
                for a in range.clone() {
                    for e in range.clone() {
                        let want = if a == e { c } else { 0.0 };
                        if (b[(a, e)] - want).abs() > 1e-12 {
                            return Err(Error::InvalidSpec(format!(
                                "basis matrix {k} is not a multiple of the identity on block {}",
                                i + 1
                            )));
                        }
                    }
                }
                kinds.push(BasisKind::Diagonal(i));
            } else {
                kinds.push(BasisKind::OffDiagonal(i, j));
            }
        }
        for i in 0..r {
            let count = kinds.iter().filter(|k| **k == BasisKind::Diagonal(i)).count();
            if count != 1 {
                return Err(Error::InvalidSpec(format!(
                    "block {} needs exactly one diagonal basis matrix, found {count}",
                    i + 1
                )));
            }
        }

        // Orthonormal pattern directions per off-diagonal block.
        let mut patterns = Vec::new();
        let mut pattern_index = vec![vec![None; r]; r];
        for i in 0..r {
            for j in (i + 1)..r {
                let (ri, rj) = (
                    block_range(&offsets, &block_dims, i),
                    block_range(&offsets, &block_dims, j),
                );
                let mut dirs: Vec<Vec<f64>> = Vec::new();
                for (k, b) in basis.iter().enumerate() {
                    if kinds[k] != BasisKind::OffDiagonal(i, j) {
                        continue;
                    }
                    let mut v: Vec<f64> = Vec::with_capacity(ri.len() * rj.len());
                    for a in ri.clone() {
                        for c in rj.clone() {
                            v.push(b[(a, c)]);
                        }
                    }
                    for d in &dirs {
                        let dot: f64 = v.iter().zip(d).map(|(x, y)| x * y).sum();
                        for (x, y) in v.iter_mut().zip(d) {
                            *x -= dot * y;
                        }
                    }
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm < 1e-10 {
                        return Err(Error::InvalidSpec(format!(
                            "basis matrices on block ({},{}) are linearly dependent",
                            i + 1,
                            j + 1
                        )));
                    }
                    dirs.push(v.iter().map(|x| x / norm).collect());
                }
                pattern_index[i][j] = Some(patterns.len());
                patterns.push(Pattern { i, j, dirs });
            }
        }

        let n = basis.len();
        let gram = DMatrix::from_fn(n, n, |a, b| basis[a].frobenius_dot(&basis[b]));
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::InvalidSpec("basis is linearly dependent".into()))?;
        let gram_inv: Vec<f64> = (0..n * n).map(|k| gram_inv[(k / n, k % n)]).collect();

        let spec = ConeSpec {
            name: name.to_string(),
            block_dims,
            basis,
            offsets,
            patterns,
            pattern_index,
            gram_inv,
        };
        spec.check_group_structure()?;
        Ok(spec)
    }

    /// Random checks that H is closed under products and that t·tᵀ stays in E.
    fn check_group_structure(&self) -> Result<()> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..8 {
            let a = self.sample_factor(&mut rng, 0.5);
            let b = self.sample_factor(&mut rng, 0.5);
            let prod = a.mul(&b);
            let resid = self.pattern_residual(&prod);
            if resid > 1e-10 * (1.0 + prod.frobenius_norm()) {
                return Err(Error::InvalidSpec(format!(
                    "triangular group is not closed under products (residual {resid:e})"
                )));
            }
            let x = a.mul_transpose(&a);
            let resid = self.subspace_residual(&x);
            if resid > 1e-10 {
                return Err(Error::InvalidSpec(format!(
                    "t·tᵀ leaves the realization subspace (residual {resid:e})"
                )));
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.block_dims.len()
    }

    /// Embedding size N.
    pub fn ambient(&self) -> usize {
        self.offsets[self.rank() - 1] + self.block_dims[self.rank() - 1]
    }

    /// dim V = n.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn basis(&self) -> &[Mat] {
        &self.basis
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// n_ij for i < j (0-based).
    pub fn n_ij(&self, i: usize, j: usize) -> usize {
        match self.pattern_index[i.min(j)][i.max(j)] {
            Some(p) if i != j => self.patterns[p].dirs.len(),
            _ => 0,
        }
    }

    /// m_i = Σ_{j>i} n_ij
    pub fn m(&self) -> Vec<usize> {
        let r = self.rank();
        (0..r).map(|i| ((i + 1)..r).map(|j| self.n_ij(i, j)).sum()).collect()
    }

    /// n_i = Σ_{j<i} n_ji
    pub fn n_col(&self) -> Vec<usize> {
        (0..self.rank()).map(|i| (0..i).map(|j| self.n_ij(j, i)).sum()).collect()
    }

    pub fn tau_exact(&self) -> Vec<Rat> {
        self.m()
            .iter()
            .zip(self.n_col())
            .map(|(&m, n)| int(1) + rat((m + n) as i64, 2))
            .collect()
    }

    pub fn tau(&self) -> Vec<f64> {
        self.m().iter().zip(self.n_col()).map(|(&m, n)| 1.0 + (m + n) as f64 / 2.0).collect()
    }

    pub fn tau_weights(&self) -> WeightVector {
        WeightVector::Exact(self.tau_exact())
    }

    pub fn m_exact(&self) -> Vec<Rat> {
        self.m().iter().map(|&v| int(v as i64)).collect()
    }

    pub fn n_exact(&self) -> Vec<Rat> {
        self.n_col().iter().map(|&v| int(v as i64)).collect()
    }

    /// Number of off-diagonal parameters of a factor (n − r).
    pub fn off_dim(&self) -> usize {
        self.patterns.iter().map(|p| p.dirs.len()).sum()
    }

    /// For each off-diagonal parameter, its (row block, column block).
    pub fn off_blocks(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for p in &self.patterns {
            for _ in &p.dirs {
                out.push((p.i, p.j));
            }
        }
        out
    }

    pub fn identity(&self) -> Mat {
        Mat::identity(self.ambient())
    }

    pub fn embed(&self, coords: &[f64]) -> Mat {
        assert_eq!(coords.len(), self.dim());
        let mut m = Mat::zeros(self.ambient());
        for (c, b) in coords.iter().zip(&self.basis) {
            m = m.add(&b.scale(*c));
        }
        m
    }

    /// Least-squares coordinates of a symmetric matrix in the basis.
    pub fn coords(&self, m: &Mat) -> Vec<f64> {
        let n = self.dim();
        let rhs: Vec<f64> = self.basis.iter().map(|b| b.frobenius_dot(m)).collect();
        (0..n)
            .map(|a| (0..n).map(|b| self.gram_inv[a * n + b] * rhs[b]).sum())
            .collect()
    }

    /// Orthogonal projection of a symmetric matrix onto E, blockwise.
    pub fn project(&self, m: &Mat) -> Mat {
        let r = self.rank();
        let mut out = Mat::zeros(self.ambient());
        for i in 0..r {
            let ri = block_range(&self.offsets, &self.block_dims, i);
            let c = ri.clone().map(|a| m[(a, a)]).sum::<f64>() / self.block_dims[i] as f64;
            for a in ri {
                out[(a, a)] = c;
            }
        }
        for p in &self.patterns {
            let block = self.project_block(p, m, false);
            let (ri, rj) = (self.range(p.i), self.range(p.j));
            let w = rj.len();
            for (ai, a) in ri.clone().enumerate() {
                for (ci, c) in rj.clone().enumerate() {
                    let v = block[ai * w + ci];
                    out[(a, c)] = v;
                    out[(c, a)] = v;
                }
            }
        }
        out
    }

    fn range(&self, i: usize) -> std::ops::Range<usize> {
        block_range(&self.offsets, &self.block_dims, i)
    }

    /// Pattern projection of block (p.i, p.j) of m; symmetrizes with the
    /// transposed block when `symmetrize` is set.
    fn project_block(&self, p: &Pattern, m: &Mat, symmetrize: bool) -> Vec<f64> {
        let (ri, rj) = (self.range(p.i), self.range(p.j));
        let mut raw = Vec::with_capacity(ri.len() * rj.len());
        for a in ri.clone() {
            for c in rj.clone() {
                raw.push(if symmetrize { 0.5 * (m[(a, c)] + m[(c, a)]) } else { m[(a, c)] });
            }
        }
        let mut out = vec![0.0; raw.len()];
        for d in &p.dirs {
            let coef: f64 = raw.iter().zip(d).map(|(x, y)| x * y).sum();
            for (o, y) in out.iter_mut().zip(d) {
                *o += coef * y;
            }
        }
        out
    }

    /// Relative Frobenius distance of a symmetric matrix from E.
    pub fn subspace_residual(&self, m: &Mat) -> f64 {
        let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
        m.sub(&self.project(m)).frobenius_norm() / scale
    }

    /// Distance of a matrix from the triangular group's pattern (absolute).
    pub fn pattern_residual(&self, t: &Mat) -> f64 {
        let r = self.rank();
        let mut acc = 0.0;
        for i in 0..r {
            let ri = self.range(i);
            let c = t[(ri.start, ri.start)];
            for a in ri.clone() {
                for b in ri.clone() {
                    let want = if a == b { c } else { 0.0 };
                    acc += (t[(a, b)] - want).powi(2);
                }
            }
            for j in 0..i {
                for a in ri.clone() {
                    for b in self.range(j) {
                        acc += t[(a, b)].powi(2);
                    }
                }
            }
        }
        for p in &self.patterns {
            let proj = self.project_block(p, t, false);
            for (k, (a, c)) in
                self.range(p.i).flat_map(|a| self.range(p.j).map(move |c| (a, c))).enumerate()
            {
                acc += (t[(a, c)] - proj[k]).powi(2);
            }
        }
        acc.sqrt()
    }

    /// Triangular matrix with diagonal blocks diag_i·I and off-diagonal pattern coefficients.
    pub fn triangular(&self, diag: &[f64], off: &[f64]) -> Mat {
        assert_eq!(diag.len(), self.rank());
        assert_eq!(off.len(), self.off_dim());
        let mut t = Mat::zeros(self.ambient());
        for i in 0..self.rank() {
            for a in self.range(i) {
                t[(a, a)] = diag[i];
            }
        }
        let mut k = 0;
        for p in &self.patterns {
            let w = self.block_dims[p.j];
            for d in &p.dirs {
                for (ai, a) in self.range(p.i).enumerate() {
                    for (ci, c) in self.range(p.j).enumerate() {
                        t[(a, c)] += off[k] * d[ai * w + ci];
                    }
                }
                k += 1;
            }
        }
        t
    }

    /// Inverse of `triangular`: diagonal scalars and pattern coefficients of t.
    pub fn triangular_params(&self, t: &Mat) -> (Vec<f64>, Vec<f64>) {
        let diag = (0..self.rank()).map(|i| t[(self.offsets[i], self.offsets[i])]).collect();
        let mut off = Vec::with_capacity(self.off_dim());
        for p in &self.patterns {
            let w = self.block_dims[p.j];
            for d in &p.dirs {
                let mut acc = 0.0;
                for (ai, a) in self.range(p.i).enumerate() {
                    for (ci, c) in self.range(p.j).enumerate() {
                        acc += t[(a, c)] * d[ai * w + ci];
                    }
                }
                off.push(acc);
            }
        }
        (diag, off)
    }

    /// Random element of H: ρ_i = exp(spread·N(0,1)), pattern coefficients N(0,1).
    pub fn sample_factor<R: Rng + ?Sized>(&self, rng: &mut R, spread: f64) -> Mat {
        let diag: Vec<f64> = (0..self.rank())
            .map(|_| (spread * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect();
        let off: Vec<f64> = (0..self.off_dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.triangular(&diag, &off)
    }

    /// x = t·tᵀ with t upper triangular in H, by elimination from the last block.
    /// Returns (t, ρ²).
    pub fn factor_primal(&self, x: &Mat) -> Result<(Mat, Vec<f64>)> {
        let r = self.rank();
        let scale = x.frobenius_norm();
        let mut rem = *x;
        let mut t = Mat::zeros(self.ambient());
        let mut q = vec![0.0; r];
        for k in (0..r).rev() {
            let rk = self.range(k);
            let d = self.block_dims[k] as f64;
            let pivot = rk.clone().map(|a| rem[(a, a)]).sum::<f64>() / d;
            if !(pivot > BOUNDARY_TOL * 1e-4 * scale) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { block: k + 1, pivot });
            }
            let mut dev = 0.0f64;
            for a in rk.clone() {
                for b in rk.clone() {
                    let want = if a == b { pivot } else { 0.0 };
                    dev = dev.max((rem[(a, b)] - want).abs());
                }
            }
            if dev > PATTERN_TOL * scale {
                return Err(Error::NotInCone(dev / scale));
            }
            q[k] = pivot;
            let rho = pivot.sqrt();
            for a in rk.clone() {
                t[(a, a)] = rho;
            }
            for i in 0..k {
                for a in self.range(i) {
                    for c in rk.clone() {
                        t[(a, c)] = rem[(a, c)] / rho;
                    }
                }
                let p = &self.patterns[self.pattern_index[i][k].unwrap()];
                let proj = self.project_block(p, &t, false);
                let mut dev = 0.0f64;
                for (idx, (a, c)) in
                    self.range(i).flat_map(|a| rk.clone().map(move |c| (a, c))).enumerate()
                {
                    dev = dev.max((t[(a, c)] - proj[idx]).abs());
                    t[(a, c)] = proj[idx];
                }
                if dev > PATTERN_TOL * scale.sqrt().max(1.0) {
                    return Err(Error::NotInCone(dev));
                }
            }
            let head = self.offsets[k];
            for a in 0..head {
                for b in 0..=a {
                    let mut acc = 0.0;
                    for c in rk.clone() {
                        acc += t[(a, c)] * t[(b, c)];
                    }
                    rem[(a, b)] -= acc;
                    if a != b {
                        rem[(b, a)] -= acc;
                    }
                }
            }
        }
        Ok((t, q))
    }

    /// ξ = proj_E(sᵀ·s) with s upper triangular in H, by elimination from the
    /// first block. Returns (s, ρ²).
    pub fn factor_dual(&self, xi: &Mat) -> Result<(Mat, Vec<f64>)> {
        let r = self.rank();
        let scale = xi.frobenius_norm();
        let mut rem = *xi;
        let mut s = Mat::zeros(self.ambient());
        let mut q = vec![0.0; r];
        for k in 0..r {
            let rk = self.range(k);
            let d = self.block_dims[k] as f64;
            let pivot = rk.clone().map(|a| rem[(a, a)]).sum::<f64>() / d;
            if !(pivot > BOUNDARY_TOL * 1e-4 * scale) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { block: k + 1, pivot });
            }
            q[k] = pivot;
            let rho = pivot.sqrt();
            for a in rk.clone() {
                s[(a, a)] = rho;
            }
            for j in (k + 1)..r {
                let p = &self.patterns[self.pattern_index[k][j].unwrap()];
                let proj = self.project_block(p, &rem, false);
                for (idx, (a, c)) in
                    rk.clone().flat_map(|a| self.range(j).map(move |c| (a, c))).enumerate()
                {
                    s[(a, c)] = proj[idx] / rho;
                }
            }
            let tail = self.offsets[k] + self.block_dims[k];
            let big_n = self.ambient();
            for a in tail..big_n {
                for b in tail..=a {
                    let mut acc = 0.0;
                    for c in rk.clone() {
                        acc += s[(c, a)] * s[(c, b)];
                    }
                    rem[(a, b)] -= acc;
                    if a != b {
                        rem[(b, a)] -= acc;
                    }
                }
            }
        }
        Ok((s, q))
    }

    /// Q_j(x) by the primal factorization.
    pub fn q_values(&self, x: &Mat) -> Result<Vec<f64>> {
        self.factor_primal(x).map(|(_, q)| q)
    }

    /// Q*_j(ξ) by the dual factorization.
    pub fn qstar_values(&self, xi: &Mat) -> Result<Vec<f64>> {
        self.factor_dual(xi).map(|(_, q)| q)
    }

    /// Q_j of the complex symmetric matrix re + i·im (analytic continuation of
    /// the square-root-free elimination).
    pub fn q_complex(&self, re: &Mat, im: &Mat) -> Result<Vec<Complex64>> {
        let r = self.rank();
        let big_n = self.ambient();
        let mut rem = [[Complex64::new(0.0, 0.0); MAX_DIM]; MAX_DIM];
        for a in 0..big_n {
            for b in 0..big_n {
                rem[a][b] = Complex64::new(re[(a, b)], im[(a, b)]);
            }
        }
        let scale = re.frobenius_norm() + im.frobenius_norm();
        let mut q = vec![Complex64::new(0.0, 0.0); r];
        for k in (0..r).rev() {
            let rk = self.range(k);
            let c: Complex64 =
                rk.clone().map(|a| rem[a][a]).sum::<Complex64>() / self.block_dims[k] as f64;
            if !(c.norm() > 1e-14 * scale) {
                return Err(Error::SingularMinor);
            }
            q[k] = c;
            let head = self.offsets[k];
            let mut upd = [[Complex64::new(0.0, 0.0); MAX_DIM]; MAX_DIM];
            for a in 0..head {
                for b in 0..head {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for e in rk.clone() {
                        acc += rem[a][e] * rem[e][b];
                    }
                    upd[a][b] = acc / c;
                }
            }
            for a in 0..head {
                for b in 0..head {
                    rem[a][b] -= upd[a][b];
                }
            }
        }
        Ok(q)
    }

    /// Matrix of the linear map x ↦ t·x·tᵀ on E in basis coordinates.
    pub fn action_matrix(&self, t: &Mat) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (k, b) in self.basis.iter().enumerate() {
            let c = self.coords(&t.congruence(b));
            for a in 0..n {
                m[(a, k)] = c[a];
            }
        }
        m
    }

    pub fn to_json(&self) -> ConeJson {
        let r = self.rank();
        let mut n_table = Vec::new();
        for i in 0..r {
            for j in (i + 1)..r {
                n_table.push(NTableEntry { i: i + 1, j: j + 1, n: self.n_ij(i, j) });
            }
        }
        ConeJson {
            name: self.name.clone(),
            r,
            block_dims: self.block_dims.clone(),
            n_table,
            basis: self.basis.iter().map(|b| b.row_major()).collect(),
        }
    }

    pub fn from_json(doc: &ConeJson) -> Result<ConeSpec> {
        let big_n: usize = doc.block_dims.iter().sum();
        if doc.r != doc.block_dims.len() {
            return Err(Error::InvalidSpec("r differs from the number of blocks".into()));
        }
        let mut basis = Vec::new();
        for (k, rows) in doc.basis.iter().enumerate() {
            if rows.len() != big_n * big_n || big_n > MAX_DIM || big_n == 0 {
                return Err(Error::InvalidSpec(format!("basis matrix {k} has wrong length")));
            }
            basis.push(Mat::from_row_major(big_n, rows));
        }
        let spec = ConeSpec::new(&doc.name, doc.block_dims.clone(), basis)?;
        for e in &doc.n_table {
            if e.i == 0 || e.j > doc.r || e.i >= e.j {
                return Err(Error::InvalidSpec(format!("bad n_table index ({},{})", e.i, e.j)));
            }
            if spec.n_ij(e.i - 1, e.j - 1) != e.n {
                return Err(Error::InvalidSpec(format!(
                    "n_table ({},{}) = {} disagrees with the basis ({})",
                    e.i,
                    e.j,
                    e.n,
                    spec.n_ij(e.i - 1, e.j - 1)
                )));
            }
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NTableEntry {
    pub i: usize,
    pub j: usize,
    pub n: usize,
}

/// Serialized form of a cone.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeJson {
    pub name: String,
    pub r: usize,
    pub block_dims: Vec<usize>,
    pub n_table: Vec<NTableEntry>,
    pub basis: Vec<Vec<f64>>,
}

fn unit_sym(n: usize, a: usize, b: usize) -> Mat {
    let mut m = Mat::zeros(n);
    m[(a, b)] = 1.0;
    m[(b, a)] = 1.0;
    m
}

fn diag_block(n: usize, rows: std::ops::Range<usize>) -> Mat {
    let mut m = Mat::zeros(n);
    for a in rows {
        m[(a, a)] = 1.0;
    }
    m
}

pub const BUILTIN_NAMES: [&str; 4] = ["halfline", "sym2", "vinberg", "omegaE"];

/// The built-in cones. Coordinates list the diagonal blocks first.
pub fn builtin_cone(name: &str) -> Result<Arc<ConeSpec>> {
    let spec = match name {
        "halfline" => ConeSpec::new(name, vec![1], vec![Mat::identity(1)])?,
        "sym2" => ConeSpec::new(
            name,
            vec![1, 1],
            vec![diag_block(2, 0..1), diag_block(2, 1..2), unit_sym(2, 0, 1)],
        )?,
        "vinberg" => ConeSpec::new(
            name,
            vec![1, 1, 1],
            vec![
                diag_block(3, 0..1),
                diag_block(3, 1..2),
                diag_block(3, 2..3),
                unit_sym(3, 0, 1),
                unit_sym(3, 0, 2),
            ],
        )?,
        // Rows: block 1 (scalar), block 2 (scalar), block 3 (x·I₂). Block (1,3)
        // is a full 1×2 row, block (2,3) is the single direction e.
        "omegaE" => ConeSpec::new(
            name,
            vec![1, 1, 2],
            vec![
                diag_block(4, 0..1),
                diag_block(4, 1..2),
                diag_block(4, 2..4),
                unit_sym(4, 0, 1),
                unit_sym(4, 0, 2),
                unit_sym(4, 0, 3),
                unit_sym(4, 1, 3),
            ],
        )?,
        other => return Err(Error::UnknownCone(other.to_string())),
    };
    Ok(Arc::new(spec))
}

/// A point of V together with the side of the duality it is read on.
#[derive(Clone, Debug)]
pub struct ConeElement {
    pub cone: Arc<ConeSpec>,
    pub coords: Vec<f64>,
    pub embedded: Mat,
    pub side: Side,
}

impl ConeElement {
    pub fn from_coords(cone: &Arc<ConeSpec>, coords: Vec<f64>, side: Side) -> Result<ConeElement> {
        if coords.len() != cone.dim() {
            return Err(Error::LengthMismatch { expected: cone.dim(), got: coords.len() });
        }
        let embedded = cone.embed(&coords);
        Ok(ConeElement { cone: cone.clone(), coords, embedded, side })
    }

    /// Projects a symmetric matrix to coordinates; fails if it is not in E.
    pub fn from_matrix(cone: &Arc<ConeSpec>, m: &Mat, side: Side) -> Result<ConeElement> {
        let resid = cone.subspace_residual(m);
        if resid > 1e-9 {
            return Err(Error::SubspaceViolation(resid));
        }
        let coords = cone.coords(m);
        let embedded = cone.embed(&coords);
        Ok(ConeElement { cone: cone.clone(), coords, embedded, side })
    }

    pub fn identity(cone: &Arc<ConeSpec>, side: Side) -> ConeElement {
        ConeElement::from_matrix(cone, &cone.identity(), side).expect("identity lies in E")
    }

    pub fn scaled(&self, c: f64) -> ConeElement {
        ConeElement {
            cone: self.cone.clone(),
            coords: self.coords.iter().map(|v| v * c).collect(),
            embedded: self.embedded.scale(c),
            side: self.side,
        }
    }

    /// Relative Frobenius residual between the cache and Σ coords_k·basis_k.
    pub fn reconstruction_residual(&self) -> f64 {
        let rebuilt = self.cone.embed(&self.coords);
        rebuilt.sub(&self.embedded).frobenius_norm() / self.embedded.frobenius_norm().max(1e-300)
    }

    /// Primal points must be positive definite; dual points must have
    /// positive pivots in the dual elimination (Ω* need not lie in the
    /// positive definite matrices).
    pub fn ensure_interior(&self) -> Result<()> {
        if self.side == Side::Dual {
            let q = self.cone.qstar_values(&self.embedded)?;
            let scale = self.embedded.frobenius_norm();
            let low = q.iter().cloned().fold(f64::INFINITY, f64::min);
            if low < BOUNDARY_TOL * scale {
                return Err(Error::BoundaryPoint(low / scale));
            }
            return Ok(());
        }
        let eig = self.embedded.symmetric_eigenvalues();
        let top = eig.last().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
        let low = eig[0];
        if low < BOUNDARY_TOL * self.embedded.frobenius_norm() {
            return if low <= 0.0 {
                Err(Error::NotPositiveDefinite { block: 0, pivot: low })
            } else {
                Err(Error::BoundaryPoint(low / top))
            };
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TriangularFactor {
    pub cone: Arc<ConeSpec>,
    pub t: Mat,
    pub rho: Vec<f64>,
}

impl TriangularFactor {
    pub fn identity(cone: &Arc<ConeSpec>) -> TriangularFactor {
        TriangularFactor { cone: cone.clone(), t: cone.identity(), rho: vec![1.0; cone.rank()] }
    }

    pub fn from_matrix(cone: &Arc<ConeSpec>, t: Mat) -> Result<TriangularFactor> {
        let resid = cone.pattern_residual(&t);
        if resid > 1e-10 * (1.0 + t.frobenius_norm()) {
            return Err(Error::NotInCone(resid));
        }
        let (rho, _) = cone.triangular_params(&t);
        if rho.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::NotPositiveDefinite { block: 0, pivot: 0.0 });
        }
        Ok(TriangularFactor { cone: cone.clone(), t, rho })
    }

    pub fn random<R: Rng + ?Sized>(cone: &Arc<ConeSpec>, rng: &mut R, spread: f64) -> TriangularFactor {
        let t = cone.sample_factor(rng, spread);
        let (rho, _) = cone.triangular_params(&t);
        TriangularFactor { cone: cone.clone(), t, rho }
    }

    /// t·e = t·tᵀ
    pub fn apply_to_identity(&self) -> ConeElement {
        let m = self.t.mul_transpose(&self.t);
        ConeElement::from_matrix(&self.cone, &m, Side::Primal).expect("t·tᵀ lies in E")
    }

    /// t*·e = proj(tᵀ·t), a point of Ω*.
    pub fn dual_apply_to_identity(&self) -> ConeElement {
        let m = self.cone.project(&self.t.transpose_mul(&self.t));
        ConeElement::from_matrix(&self.cone, &m, Side::Dual).expect("projection lies in E")
    }

    pub fn compose(&self, other: &TriangularFactor) -> TriangularFactor {
        let t = self.t.mul(&other.t);
        let rho = self.rho.iter().zip(&other.rho).map(|(a, b)| a * b).collect();
        TriangularFactor { cone: self.cone.clone(), t, rho }
    }

    pub fn inverse(&self) -> TriangularFactor {
        TriangularFactor {
            cone: self.cone.clone(),
            t: self.t.upper_triangular_inverse(),
            rho: self.rho.iter().map(|v| 1.0 / v).collect(),
        }
    }
}

/// Factor x = t·tᵀ, rejecting boundary points.
pub fn cholesky_upper(x: &ConeElement) -> Result<TriangularFactor> {
    x.ensure_interior()?;
    let (t, q) = x.cone.factor_primal(&x.embedded)?;
    let resid = t.mul_transpose(&t).sub(&x.embedded).frobenius_norm() / x.embedded.frobenius_norm();
    if resid > 1e-10 {
        return Err(Error::NotInCone(resid));
    }
    Ok(TriangularFactor { cone: x.cone.clone(), t, rho: q.iter().map(|v| v.sqrt()).collect() })
}

/// Factor ξ = proj(sᵀ·s) for a point of Ω*.
pub fn cholesky_dual(xi: &ConeElement) -> Result<TriangularFactor> {
    xi.ensure_interior()?;
    let (s, q) = xi.cone.factor_dual(&xi.embedded)?;
    Ok(TriangularFactor { cone: xi.cone.clone(), t: s, rho: q.iter().map(|v| v.sqrt()).collect() })
}

/// Q_j(x) = ρ_j².
pub fn q(x: &ConeElement) -> Result<Vec<f64>> {
    Ok(cholesky_upper(x)?.rho.iter().map(|v| v * v).collect())
}

/// Q*_j(ξ) = ρ_j² for ξ = proj(sᵀ·s).
pub fn qstar(xi: &ConeElement) -> Result<Vec<f64>> {
    Ok(cholesky_dual(xi)?.rho.iter().map(|v| v * v).collect())
}

/// Π Q_j^{α_j}(x), evaluated in the log domain.
pub fn qpow(alpha: &WeightVector, x: &ConeElement) -> Result<f64> {
    Ok(log_power(alpha, &q(x)?).exp())
}

pub fn qstar_pow(alpha: &WeightVector, xi: &ConeElement) -> Result<f64> {
    Ok(log_power(alpha, &qstar(xi)?).exp())
}

/// Σ α_j ln Q_j
pub fn log_power(alpha: &WeightVector, qv: &[f64]) -> f64 {
    assert_eq!(alpha.len(), qv.len(), "weight vector rank differs from cone rank");
    qv.iter().enumerate().map(|(j, v)| alpha.get(j) * v.ln()).sum()
}

pub fn log_power_f(alpha: &[f64], qv: &[f64]) -> f64 {
    qv.iter().zip(alpha).map(|(v, a)| a * v.ln()).sum()
}

/// Exact Π Q_j^{α_j} for rational points with integer exponents.
pub fn qpow_exact(cone: &ConeSpec, alpha: &[i64], x: &[Rat]) -> Result<Rat> {
    let qv = q_exact(cone, x)?;
    let mut acc = int(1);
    for (v, a) in qv.iter().zip(alpha) {
        let p = num_traits::pow(v.clone(), a.unsigned_abs() as usize);
        acc *= if *a < 0 { num_traits::Inv::inv(p) } else { p };
    }
    Ok(acc)
}

/// Exact Q_j by square-root-free elimination over the rationals.
pub fn q_exact(cone: &ConeSpec, coords: &[Rat]) -> Result<Vec<Rat>> {
    use num_traits::{Signed, Zero};
    let big_n = cone.ambient();
    let mut rem = vec![vec![Rat::zero(); big_n]; big_n];
    for (c, b) in coords.iter().zip(cone.basis()) {
        for a in 0..big_n {
            for e in 0..big_n {
                let v = b[(a, e)];
                if v != 0.0 {
                    rem[a][e] += c * crate::rational::from_f64_exact(v);
                }
            }
        }
    }
    let r = cone.rank();
    let mut q = vec![Rat::zero(); r];
    for k in (0..r).rev() {
        let rk = cone.range(k);
        let c = rk.clone().fold(Rat::zero(), |acc, a| acc + &rem[a][a])
            / Rat::from_integer((cone.block_dims[k] as i64).into());
        if !c.is_positive() {
            return Err(Error::NotPositiveDefinite { block: k + 1, pivot: crate::rational::to_f64(&c) });
        }
        let head = cone.offsets[k];
        let mut upd = vec![vec![Rat::zero(); head]; head];
        for a in 0..head {
            for b in 0..head {
                let mut acc = Rat::zero();
                for e in rk.clone() {
                    acc += &rem[a][e] * &rem[e][b];
                }
                upd[a][b] = acc / &c;
            }
        }
        for a in 0..head {
            for b in 0..head {
                rem[a][b] -= &upd[a][b];
            }
        }
        q[k] = c;
    }
    Ok(q)
}

/// Dual point: x = t·e ↦ (t*)⁻¹·e; ξ = s*·e ↦ s⁻¹·e. An involution.
pub fn dual_point(x: &ConeElement) -> Result<ConeElement> {
    let cone = &x.cone;
    match x.side {
        Side::Primal => {
            let f = cholesky_upper(x)?;
            let s = f.t.upper_triangular_inverse();
            let m = s.transpose_mul(&s);
            let proj = cone.project(&m);
            let inv = x.embedded.inverse().ok_or(Error::NotPositiveDefinite { block: 0, pivot: 0.0 })?;
            let resid = proj.sub(&cone.project(&inv)).frobenius_norm() / proj.frobenius_norm();
            if resid > 1e-9 {
                return Err(Error::SubspaceViolation(resid));
            }
            ConeElement::from_matrix(cone, &proj, Side::Dual)
        }
        Side::Dual => {
            let f = cholesky_dual(x)?;
            let t = f.t.upper_triangular_inverse();
            let m = t.mul_transpose(&t);
            ConeElement::from_matrix(cone, &m, Side::Primal)
        }
    }
}

/// π(t)[x] = t·x·tᵀ
pub fn act(t: &TriangularFactor, x: &ConeElement) -> Result<ConeElement> {
    let m = t.t.congruence(&x.embedded);
    ConeElement::from_matrix(&x.cone, &m, x.side)
}

/// Dual action ξ ↦ proj(tᵀ·ξ·t); Q*_j is multiplicative under it.
pub fn act_dual(t: &TriangularFactor, xi: &ConeElement) -> Result<ConeElement> {
    let m = t.t.transpose_mul(&xi.embedded).mul(&t.t);
    ConeElement::from_matrix(&xi.cone, &xi.cone.project(&m), xi.side)
}

/// Diagonal-block weights of the pairing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Pairing {
    /// Matrix trace of the product.
    Unit,
    /// Each diagonal block counted once (weight 1/d_i).
    TAlgebra,
    Custom(Vec<f64>),
}

impl Pairing {
    pub fn block_weights(&self, cone: &ConeSpec) -> Vec<f64> {
        match self {
            Pairing::Unit => vec![1.0; cone.rank()],
            Pairing::TAlgebra => cone.block_dims().iter().map(|&d| 1.0 / d as f64).collect(),
            Pairing::Custom(w) => w.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Pairing::Unit => "unit".into(),
            Pairing::TAlgebra => "t-algebra".into(),
            Pairing::Custom(w) => format!("custom{w:?}"),
        }
    }
}

/// Σ_i w_i tr(x_ii ξ_ii) + Σ_{i≠j} tr(x_ij ξ_ji)
pub fn pair_matrices(cone: &ConeSpec, x: &Mat, xi: &Mat, weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    let r = cone.rank();
    for i in 0..r {
        for j in 0..r {
            let w = if i == j { weights[i] } else { 1.0 };
            let mut part = 0.0;
            for a in cone.range(i) {
                for b in cone.range(j) {
                    part += x[(a, b)] * xi[(b, a)];
                }
            }
            acc += w * part;
        }
    }
    acc
}

/// (x|ξ) under the default (matrix trace) pairing.
pub fn inner(x: &ConeElement, xi: &ConeElement) -> f64 {
    inner_with(x, xi, &Pairing::Unit)
}

pub fn inner_with(x: &ConeElement, xi: &ConeElement, pairing: &Pairing) -> f64 {
    pair_matrices(&x.cone, &x.embedded, &xi.embedded, &pairing.block_weights(&x.cone))
}

/// |det π(t)| on E from the numeric action matrix.
pub fn det_action(t: &TriangularFactor) -> f64 {
    t.cone.action_matrix(&t.t).determinant().abs()
}

/// Γ_Ω(ν) by quadrature of the defining integral at ξ = e.
pub fn gamma_omega(
    cone: &Arc<ConeSpec>,
    nu: &WeightVector,
    samples: usize,
    seed: u64,
) -> Result<crate::quadrature::GammaReport> {
    crate::quadrature::gamma_omega(cone, nu, samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn builtin_block_data() {
        let e = builtin_cone("omegaE").unwrap();
        assert_eq!(e.m(), vec![3, 1, 0]);
        assert_eq!(e.n_col(), vec![0, 1, 3]);
        assert_eq!(e.tau(), vec![2.5, 2.0, 2.5]);
        assert_eq!(e.dim(), 7);
        let v = builtin_cone("vinberg").unwrap();
        assert_eq!(v.m(), vec![2, 0, 0]);
        assert_eq!(v.n_col(), vec![0, 1, 1]);
        assert!(builtin_cone("nope").is_err());
    }

    #[test]
    fn primal_and_dual_factors_round_trip() {
        let mut g = rng();
        for name in BUILTIN_NAMES {
            let cone = builtin_cone(name).unwrap();
            for _ in 0..20 {
                let t = cone.sample_factor(&mut g, 0.7);
                let x = t.mul_transpose(&t);
                let (t2, _) = cone.factor_primal(&x).unwrap();
                assert!(t2.sub(&t).max_abs() < 1e-10 * (1.0 + t.max_abs()));
                let xi = cone.project(&t.transpose_mul(&t));
                let (s2, _) = cone.factor_dual(&xi).unwrap();
                assert!(s2.sub(&t).max_abs() < 1e-10 * (1.0 + t.max_abs()));
            }
        }
    }

    #[test]
    fn complex_elimination_matches_real_on_real_input() {
        let mut g = rng();
        let cone = builtin_cone("omegaE").unwrap();
        let t = cone.sample_factor(&mut g, 0.5);
        let x = t.mul_transpose(&t);
        let qr = cone.q_values(&x).unwrap();
        let qc = cone.q_complex(&x, &Mat::zeros(4)).unwrap();
        for (a, b) in qr.iter().zip(&qc) {
            assert!((a - b.re).abs() < 1e-12 * a && b.im.abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_block_basis() {
        let bad = vec![diag_block(2, 0..2), unit_sym(2, 0, 1)];
        assert!(ConeSpec::new("bad", vec![1, 1], bad).is_err());
    }

    #[test]
    fn json_round_trip() {
        let cone = builtin_cone("omegaE").unwrap();
        let doc = serde_json::to_string(&cone.to_json()).unwrap();
        let back = ConeSpec::from_json(&serde_json::from_str(&doc).unwrap()).unwrap();
        assert_eq!(back.m(), cone.m());
        assert_eq!(back.dim(), 7);
    }
}

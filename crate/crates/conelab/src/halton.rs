//! Halton low-discrepancy points in the unit cube.

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    acc
}

/// The `index`-th point (index ≥ 1 avoids the origin) in `dim` dimensions.
pub fn point(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton dimension {dim} too large");
    PRIMES[..dim].iter().map(|&b| radical_inverse(index, b)).collect()
}

/// Cranley–Patterson rotated point, for randomized QMC.
pub fn shifted_point(index: u64, shift: &[f64]) -> Vec<f64> {
    point(index, shift.len())
        .into_iter()
        .zip(shift)
        .map(|(p, s)| (p + s).fract())
        .collect()
}

//! Exact Gaussian sampling of Brownian and fractional Brownian paths on a
//! uniform fine grid.
//!
//! Fractional Gaussian noise is stationary, so its covariance matrix is
//! Toeplitz. The Durbin–Levinson recursion produces the Cholesky factor of that
//! matrix one row at a time (innovations form): the `n`-th increment is its
//! best linear predictor from the past plus `sqrt(v_n)` times a fresh normal.
//! This is the same linear map as multiplying by the dense lower Cholesky
//! factor, at `O(n²)` cost and `O(n)` memory.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Autocovariance of fractional Gaussian noise with step `h` at lag `k`.
pub fn fgn_autocovariance(hurst: f64, h: f64, k: usize) -> f64 {
    let two_h = 2.0 * hurst;
    let k = k as f64;
    let up = (k + 1.0).powf(two_h);
    let mid = k.powf(two_h);
    let down = if k == 0.0 { 1.0 } else { (k - 1.0).powf(two_h) };
    0.5 * h.powf(two_h) * (up - 2.0 * mid + down)
}

/// Dense lower Cholesky factor of the fGn covariance matrix. Cubic cost;
/// kept for cross-checking the Levinson sampler on small grids.
pub fn fgn_cholesky(hurst: f64, h: f64, n: usize) -> Result<Vec<Vec<f64>>> {
    let cov = |i: usize, j: usize| fgn_autocovariance(hurst, h, i.abs_diff(j));
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = cov(i, j);
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Factorisation(i));
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Maps `normals` (one row per component, `n` entries each) to fGn
/// increments through the Levinson form of the Cholesky factor.
pub fn fgn_from_normals(hurst: f64, h: f64, normals: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = normals.first().map_or(0, Vec::len);
    let mut out: Vec<Vec<f64>> = normals.iter().map(|_| Vec::with_capacity(n)).collect();
    if n == 0 {
        return Ok(out);
    }
    let gamma: Vec<f64> = (0..=n).map(|k| fgn_autocovariance(hurst, h, k)).collect();

    // phi holds the prediction coefficients of order m: x_m ≈ Σ_j phi[j-1] x_{m-j}.
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut next: Vec<f64> = Vec::with_capacity(n);
    let mut v = gamma[0];
    if v <= 0.0 {
        return Err(Error::Factorisation(0));
    }
    for (row, z) in out.iter_mut().zip(normals) {
        row.push(v.sqrt() * z[0]);
    }
    for m in 1..n {
        let acc: f64 = (1..m).map(|j| phi[j - 1] * gamma[m - j]).sum();
        let reflection = (gamma[m] - acc) / v;
        next.clear();
        next.extend((1..m).map(|j| phi[j - 1] - reflection * phi[m - j - 1]));
        next.push(reflection);
        std::mem::swap(&mut phi, &mut next);
        v *= 1.0 - reflection * reflection;
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::Factorisation(m));
        }
        let sd = v.sqrt();
        for (row, z) in out.iter_mut().zip(normals) {
            let mean: f64 = (1..=m).map(|j| phi[j - 1] * row[m - j]).sum();
            row.push(mean + sd * z[m]);
        }
    }
    Ok(out)
}

/// Draws `n` standard normals per component in component-major order.
pub fn draw_normals<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Vec<Vec<f64>> {
    (0..d).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// Cumulative sums of increments, starting from zero.
pub fn cumulate(increments: &[f64]) -> Vec<f64> {
    let mut path = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    path.push(acc);
    for dx in increments {
        acc += dx;
        path.push(acc);
    }
    path
}

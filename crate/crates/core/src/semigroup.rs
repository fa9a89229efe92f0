//! Semigroups `S_t = e^{tA}` acting diagonally on Fourier modes.
//!
//! `A = Δ` gives the heat semigroup, multiplier `e^{-k²t}`; `A = 0` gives the
//! identity for every `t` and turns the mild formulation into the plain
//! integral equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::SpectralVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// `A = Δ` on the torus
    Laplacian,
    /// `A = 0`
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemigroupSpec {
    pub generator: Generator,
}

impl SemigroupSpec {
    pub fn laplacian() -> Self {
        Self { generator: Generator::Laplacian }
    }

    pub fn zero() -> Self {
        Self { generator: Generator::Zero }
    }

    /// `λ_k` with `A e_k = -λ_k e_k`.
    #[inline]
    pub fn decay_rate(&self, k: i64) -> f64 {
        match self.generator {
            Generator::Laplacian => (k * k) as f64,
            Generator::Zero => 0.0,
        }
    }

    /// `e^{-λ_k t}` for modes `-K..=K`, in storage order.
    pub fn multipliers(&self, max_mode: usize, t: f64) -> Vec<f64> {
        let k0 = max_mode as i64;
        (-k0..=k0).map(|k| (-self.decay_rate(k) * t).exp()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.generator == Generator::Zero
    }
}

/// `S_t v`.
pub fn apply_semigroup(spec: &SemigroupSpec, v: &SpectralVector, t: f64) -> Result<SpectralVector> {
    if t < 0.0 {
        return Err(Error::Parameter(format!("semigroup time must be nonnegative, got {t}")));
    }
    if spec.is_identity() || t == 0.0 {
        return Ok(v.clone());
    }
    Ok(v.apply_multiplier(|k| (-spec.decay_rate(k) * t).exp()))
}

/// Multiplies `v` in place by precomputed multipliers.
pub(crate) fn apply_multipliers(v: &mut SpectralVector, m: &[f64]) {
    for (c, w) in v.coeffs_mut().iter_mut().zip(m) {
        *c *= *w;
    }
}

/// Best constants in the smoothing estimates
///
/// ```text
/// ‖S_t x‖_{θ+σ}     ≤ C₀ t^{-σ} ‖x‖_θ
/// ‖S_t x - x‖_θ     ≤ C₁ t^{σ}  ‖x‖_{θ+σ}
/// ```
///
/// over modes `|k| ≤ K` and the given times, computed as exact maxima of the
/// mode-wise multiplier ratios. Both are independent of `θ`.
pub fn smoothing_constants(
    spec: &SemigroupSpec,
    _theta: f64,
    sigma: f64,
    max_mode: usize,
    t_grid: &[f64],
) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::Parameter(format!("σ must lie in [0, 1], got {sigma}")));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::Parameter("times must lie in (0, 1]".into()));
    }
    let mut c0 = 0.0f64;
    let mut c1 = 0.0f64;
    for &t in t_grid {
        for k in 0..=max_mode as i64 {
            let w = (1.0 + (k * k) as f64).powf(sigma);
            let lam = spec.decay_rate(k) * t;
            c0 = c0.max(t.powf(sigma) * w * (-lam).exp());
            c1 = c1.max(-(-lam).exp_m1() / (w * t.powf(sigma)));
        }
    }
    Ok((c0, c1))
}

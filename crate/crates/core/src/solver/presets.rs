//! Ready-made models: the scalar oracles and the stochastic heat equation
//! with fractional-Laplacian noise coefficient.

use crate::nonlinearity::NonlinearitySpec;
use crate::semigroup::SemigroupSpec;

use super::ModelSpec;

fn scalar(f: NonlinearitySpec, g: NonlinearitySpec, r: f64, t_end: f64) -> ModelSpec {
    ModelSpec {
        semigroup: SemigroupSpec::zero(),
        f,
        g,
        r,
        t_end,
        theta: 0.0,
        alpha: 0.45,
        alpha_tilde: 0.4,
        alpha_bar: 0.42,
        alpha_hat: 0.42,
        sigma1: 0.5,
        sigma2: 0.1,
    }
}

/// `y' = -y` with `A = 0`, `G = 0`: `y_t = e^{-t}` from `φ ≡ 1`.
pub fn decay_ode(r: f64, t_end: f64) -> ModelSpec {
    scalar(NonlinearitySpec::affine(vec![-1.0], vec![0.0]), NonlinearitySpec::zero(1), r, t_end)
}

/// `dy = y_{t-r} dX` with `A = 0`, `F = 0`.
pub fn pure_delay(r: f64, t_end: f64) -> ModelSpec {
    scalar(NonlinearitySpec::zero(1), NonlinearitySpec::affine(vec![0.0], vec![1.0]), r, t_end)
}

/// Solution of `y'_t = y_{t-r}`, `y ≡ 1` on `[-r, 0]`:
/// `y_t = Σ_{k ≥ 0, (k-1)r ≤ t} (t - (k-1)r)^k / k!`.
pub fn pure_delay_exact(t: f64, r: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut fact = 1.0;
    let mut k = 0usize;
    loop {
        let base = t - (k as f64 - 1.0) * r;
        if base < 0.0 {
            break sum;
        }
        if k > 0 {
            fact *= k as f64;
        }
        sum += base.powi(k as i32) / fact;
        k += 1;
    }
}

/// Stochastic heat equation on the torus,
/// `dy = [Δy + 𝓕(y_t, y_{t-r})] dt + (-Δ)^σ (a y_t + b y_{t-r}) dX`,
/// with `𝓕` a bounded smooth map on the modes `|k| ≤ cutoff` and
/// `σ = 0.6 α`. Exponents fit an fBm or Brownian driver with `H > 0.36`.
pub fn heat_spde(r: f64, t_end: f64, d: usize, a: f64, b: f64) -> ModelSpec {
    let alpha = 0.36;
    ModelSpec {
        semigroup: SemigroupSpec::laplacian(),
        f: NonlinearitySpec::smooth_bounded(4, vec![1.0], vec![0.0], vec![0.5]),
        g: NonlinearitySpec::frac_laplacian(0.6 * alpha, vec![a; d], vec![b; d]),
        r,
        t_end,
        theta: 0.0,
        alpha,
        alpha_tilde: 0.33,
        alpha_bar: 0.33,
        alpha_hat: 0.33,
        sigma1: 0.5,
        sigma2: 0.6 * alpha,
    }
}

/// Delay-to-zero model: drift `𝓕(y_t)`, noise coefficient `(-Δ)^σ y_{t-r}`.
pub fn delayed_noise_spde(r: f64, t_end: f64, d: usize) -> ModelSpec {
    heat_spde(r, t_end, d, 0.0, 1.0)
}

/// Delay-to-zero model for smooth drivers, `dy = κ y_{t-r} dX`, compared
/// against `dy = κ y_t dX`. The gap is `O(r)` once `κ r ≪ 1`.
pub fn delayed_linear(r: f64, t_end: f64, kappa: f64) -> ModelSpec {
    scalar(NonlinearitySpec::zero(1), NonlinearitySpec::affine(vec![0.0], vec![kappa]), r, t_end)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_delay_closed_form() {
        let r = 0.25;
        assert!((pure_delay_exact(0.1, r) - 1.1).abs() < 1e-15);
        // second interval: 1 + t + (t - r)^2 / 2
        let t = 0.4;
        assert!((pure_delay_exact(t, r) - (1.0 + t + (t - r) * (t - r) / 2.0)).abs() < 1e-15);
        // derivative matches the delayed value
        let h = 1e-6;
        for &t in &[0.3, 0.6, 0.7] {
            let d = (pure_delay_exact(t + h, r) - pure_delay_exact(t - h, r)) / (2.0 * h);
            assert!((d - pure_delay_exact(t - r, r)).abs() < 1e-8);
        }
    }

    #[test]
    fn presets_validate() {
        decay_ode(0.25, 1.0).validate().unwrap();
        pure_delay(0.25, 1.0).validate().unwrap();
        heat_spde(0.25, 1.0, 1, 1.0, 1.0).validate().unwrap();
        delayed_noise_spde(0.1, 1.0, 1).validate_for_convergence().unwrap();
    }
}

//! Nonlinearities `F, G: B × B → B` acting on a present state `y` and a
//! delayed state `z`, each with `dim()` output components.
//!
//! * `affine`: `G_i(y, z) = a_i y + b_i z + offset_i`
//! * `frac_laplacian_affine`: `G_i(y, z) = (-Δ)^σ (a_i y + b_i z)`, Fourier
//!   multiplier `|k|^{2σ}` (zero on the constant mode)
//! * `smooth_bounded`: `G_i(y, z) = c_i P sin(P(a_i y + b_i z))`, where `P`
//!   keeps the modes `|k| ≤ K₀` and `sin` acts pointwise on a collocation grid
//!   of at least `4K₀` points. The map is smooth with bounded derivatives of
//!   every order, and its derivatives are computed exactly for the discrete map.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::{ScaleWeights, SpectralVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    Affine {
        a: Vec<f64>,
        b: Vec<f64>,
        /// per component, `(cos, sin)` coefficients for `k = 0, 1, …`
        #[serde(default)]
        offset: Vec<Vec<(f64, f64)>>,
    },
    FracLaplacianAffine {
        sigma: f64,
        a: Vec<f64>,
        b: Vec<f64>,
    },
    SmoothBounded {
        cutoff: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        scale: Vec<f64>,
    },
}

/// Which argument a derivative is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Present,
    Delayed,
}

impl NonlinearitySpec {
    pub fn affine(a: Vec<f64>, b: Vec<f64>) -> Self {
        NonlinearitySpec::Affine { a, b, offset: Vec::new() }
    }

    pub fn zero(dim: usize) -> Self {
        Self::affine(vec![0.0; dim], vec![0.0; dim])
    }

    pub fn frac_laplacian(sigma: f64, a: Vec<f64>, b: Vec<f64>) -> Self {
        NonlinearitySpec::FracLaplacianAffine { sigma, a, b }
    }

    pub fn smooth_bounded(cutoff: usize, a: Vec<f64>, b: Vec<f64>, scale: Vec<f64>) -> Self {
        NonlinearitySpec::SmoothBounded { cutoff, a, b, scale }
    }

    fn weights(&self) -> (&[f64], &[f64]) {
        match self {
            NonlinearitySpec::Affine { a, b, .. }
            | NonlinearitySpec::FracLaplacianAffine { a, b, .. }
            | NonlinearitySpec::SmoothBounded { a, b, .. } => (a, b),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights().0.len()
    }

    /// Checks component counts and parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.weights();
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::Parameter(format!(
                "weights a ({}) and b ({}) must be nonempty and of equal length",
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(b).any(|x| !x.is_finite()) {
            return Err(Error::Parameter("weights must be finite".into()));
        }
        match self {
            NonlinearitySpec::Affine { offset, .. } => {
                if !offset.is_empty() && offset.len() != a.len() {
                    return Err(Error::Parameter("one offset per component".into()));
                }
            }
            NonlinearitySpec::FracLaplacianAffine { sigma, .. } => {
                if !(0.0..1.0).contains(sigma) {
                    return Err(Error::Parameter(format!("σ must lie in [0, 1), got {sigma}")));
                }
            }
            NonlinearitySpec::SmoothBounded { cutoff, scale, .. } => {
                if scale.len() != a.len() {
                    return Err(Error::Parameter("one scale per component".into()));
                }
                if *cutoff == 0 {
                    return Err(Error::Parameter("cutoff must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// `(y, z) ↦ G(y, y)`: the delayed weight folded into the present one.
    pub fn undelayed(&self) -> Self {
        let mut out = self.clone();
        match &mut out {
            NonlinearitySpec::Affine { a, b, .. }
            | NonlinearitySpec::FracLaplacianAffine { a, b, .. }
            | NonlinearitySpec::SmoothBounded { a, b, .. } => {
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    *x += *y;
                    *y = 0.0;
                }
            }
        }
        out
    }

    /// Whether `G` ignores its delayed argument.
    pub fn ignores_delay(&self) -> bool {
        self.weights().1.iter().all(|&b| b == 0.0)
    }

    /// Whether the derivatives are constant (no dependence on the base point).
    pub fn is_affine(&self) -> bool {
        !matches!(self, NonlinearitySpec::SmoothBounded { .. })
    }

    /// Largest output loss of regularity, `σ` for the fractional Laplacian.
    pub fn order(&self) -> f64 {
        match self {
            NonlinearitySpec::FracLaplacianAffine { sigma, .. } => *sigma,
            _ => 0.0,
        }
    }

    /// `G_i(y, z)`.
    pub fn eval_component(&self, i: usize, y: &SpectralVector, z: &SpectralVector) -> SpectralVector {
        let (a, b) = self.weights();
        let mut u = y.scaled(a[i]);
        if b[i] != 0.0 {
            u.axpy(b[i], z);
        }
        match self {
            NonlinearitySpec::Affine { offset, .. } => {
                if let Some(off) = offset.get(i) {
                    u += &SpectralVector::from_trig(y.max_mode(), off);
                }
                u
            }
            NonlinearitySpec::FracLaplacianAffine { sigma, .. } => {
                u.apply_multiplier_in_place(|k| frac_multiplier(k, *sigma));
                u
            }
            NonlinearitySpec::SmoothBounded { cutoff, scale, .. } => {
                let u = u.truncated(*cutoff);
                collocate(&u, *cutoff, &[]).scaled(scale[i])
            }
        }
    }

    /// `G(y, z)` as a tuple of `dim()` vectors.
    pub fn eval(&self, y: &SpectralVector, z: &SpectralVector) -> Vec<SpectralVector> {
        (0..self.dim()).map(|i| self.eval_component(i, y, z)).collect()
    }

    /// `D_{slot} G_i(y, z)[h]`.
    pub fn derivative_component(
        &self,
        i: usize,
        y: &SpectralVector,
        z: &SpectralVector,
        h: &SpectralVector,
        slot: Slot,
    ) -> SpectralVector {
        let (a, b) = self.weights();
        let w = match slot {
            Slot::Present => a[i],
            Slot::Delayed => b[i],
        };
        match self {
            NonlinearitySpec::Affine { .. } => h.scaled(w),
            NonlinearitySpec::FracLaplacianAffine { sigma, .. } => {
                h.apply_multiplier(|k| w * frac_multiplier(k, *sigma))
            }
            NonlinearitySpec::SmoothBounded { .. } => self.derivative_n(i, y, z, &[(h, slot)]),
        }
    }

    /// `D_{slot} G(y, z)[h]` for every component.
    pub fn derivative(&self, y: &SpectralVector, z: &SpectralVector, h: &SpectralVector, slot: Slot) -> Vec<SpectralVector> {
        (0..self.dim()).map(|i| self.derivative_component(i, y, z, h, slot)).collect()
    }

    /// `D^n G_i(y, z)[h_1, …, h_n]`, each direction paired with the argument
    /// it perturbs. Zero for `n ≥ 2` on the affine kinds.
    pub fn derivative_n(
        &self,
        i: usize,
        y: &SpectralVector,
        z: &SpectralVector,
        dirs: &[(&SpectralVector, Slot)],
    ) -> SpectralVector {
        let (a, b) = self.weights();
        match self {
            NonlinearitySpec::SmoothBounded { cutoff, scale, .. } => {
                let mut u = y.scaled(a[i]);
                u.axpy(b[i], z);
                let u = u.truncated(*cutoff);
                let dirs: Vec<SpectralVector> = dirs
                    .iter()
                    .map(|(h, slot)| {
                        let w = if *slot == Slot::Present { a[i] } else { b[i] };
                        h.truncated(*cutoff).scaled(w)
                    })
                    .collect();
                collocate(&u, *cutoff, &dirs).scaled(scale[i])
            }
            _ if dirs.len() == 1 => self.derivative_component(i, y, z, dirs[0].0, dirs[0].1),
            _ if dirs.is_empty() => self.eval_component(i, y, z),
            _ => SpectralVector::zeros(y.max_mode()),
        }
    }
}

/// `|k|^{2σ}`, with `0^0 = 1` and zero on the constant mode otherwise.
#[inline]
pub fn frac_multiplier(k: i64, sigma: f64) -> f64 {
    if k == 0 {
        if sigma == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        ((k * k) as f64).powf(sigma)
    }
}

pub fn eval_g(spec: &NonlinearitySpec, y: &SpectralVector, z: &SpectralVector) -> Vec<SpectralVector> {
    spec.eval(y, z)
}

pub fn eval_dg(
    spec: &NonlinearitySpec,
    y: &SpectralVector,
    z: &SpectralVector,
    direction: &SpectralVector,
    slot: Slot,
) -> Vec<SpectralVector> {
    spec.derivative(y, z, direction, slot)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

fn collocation_size(cutoff: usize) -> usize {
    (4 * cutoff + 4).next_power_of_two()
}

fn to_grid(v: &SpectralVector, cutoff: usize, n: usize, inverse: &Arc<dyn Fft<f64>>) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let kmax = cutoff.min(v.max_mode()) as i64;
    for k in -kmax..=kmax {
        buf[k.rem_euclid(n as i64) as usize] = v.get(k);
    }
    inverse.process(&mut buf);
    buf
}

/// `P[sin^{(n)}(u) · v_1 ⋯ v_n]` evaluated pointwise at the collocation
/// nodes, `n = dirs.len()`.
fn collocate(u: &SpectralVector, cutoff: usize, dirs: &[SpectralVector]) -> SpectralVector {
    let n = collocation_size(cutoff);
    let (forward, inverse) = plans(n);
    let mut ug = to_grid(u, cutoff, n, &inverse);
    let grids: Vec<Vec<Complex64>> = dirs.iter().map(|v| to_grid(v, cutoff, n, &inverse)).collect();
    let order = dirs.len() % 4;
    for (j, w) in ug.iter_mut().enumerate() {
        // sin^{(n)} cycles through sin, cos, -sin, -cos
        let base = match order {
            0 => w.sin(),
            1 => w.cos(),
            2 => -w.sin(),
            _ => -w.cos(),
        };
        *w = grids.iter().fold(base, |acc, g| acc * g[j]);
    }
    forward.process(&mut ug);
    let mut out = SpectralVector::zeros(u.max_mode());
    let kmax = cutoff.min(u.max_mode()) as i64;
    let scale = 1.0 / n as f64;
    for k in -kmax..=kmax {
        out.set(k, ug[k.rem_euclid(n as i64) as usize] * scale);
    }
    out
}

/// Empirical Lipschitz constant of `(y, z) ↦ D_{present}G_i(y, z)[G_j(y, z)]`
/// from `‖·‖_θ` (summed over both arguments) to `‖·‖_{θ-2α-σ₂}`, maximised
/// over component pairs and random pairs of bounded samples.
pub fn verify_h4_product_bound(
    spec: &NonlinearitySpec,
    samples: usize,
    max_mode: usize,
    theta: f64,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_in = ScaleWeights::new(max_mode, theta);
    let w_out = ScaleWeights::new(max_mode, theta - 2.0 * alpha - spec.order());
    let bounded = |rng: &mut ChaCha8Rng| {
        let v = SpectralVector::random_real(rng, max_mode, 1.0 + theta.max(0.0));
        let n = v.norm_with(&w_in);
        if n > 1.0 {
            v.scaled(1.0 / n)
        } else {
            v
        }
    };
    let product = |y: &SpectralVector, z: &SpectralVector, i: usize, j: usize| {
        let g = spec.eval_component(j, y, z);
        spec.derivative_component(i, y, z, &g, Slot::Present)
    };
    let d = spec.dim();
    let mut best = 0.0f64;
    for _ in 0..samples {
        let (y1, z1) = (bounded(&mut rng), bounded(&mut rng));
        let (y2, z2) = (bounded(&mut rng), bounded(&mut rng));
        let gap = y1.distance_with(&y2, &w_in) + z1.distance_with(&z2, &w_in);
        if gap == 0.0 {
            continue;
        }
        for i in 0..d {
            for j in 0..d {
                let diff = product(&y1, &z1, i, j).distance_with(&product(&y2, &z2, i, j), &w_out);
                best = best.max(diff / gap);
            }
        }
    }
    Ok(best)
}

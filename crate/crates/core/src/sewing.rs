//! Semigroup-twisted sewing and the delayed rough convolution
//!
//! ```text
//! 𝒦_t(f) = lim Σ_{[u,v] ∈ 𝒫} S_{t-u} f_{v,u},
//! ∫_s^t S_{t-u} y_u · d𝐗̄_u = 𝒦 of  y_u·δX_{v,u} + Σ_{i,j} y'^{i,j}_u 𝕏^{j,i}_{v,u} + ȳ'^{i,j}_u 𝕏(-r)^{j,i}_{v,u}.
//! ```
//!
//! Germs are only evaluated at grid nodes, so the limit is approximated by a
//! family of dyadic partitions whose finest member is the grid itself. The
//! second-level increments of the driver already carry the sub-grid
//! information.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controlled::{controlled_distance, controlled_norm, driver_norm_for, DelayedControlledPath};
use crate::driver::{rough_distance_on, DelayedRoughDriver};
use crate::error::{Error, Result};
use crate::scale::{Grid, ScaleWeights, SpectralVector};
use crate::semigroup::SemigroupSpec;

/// A two-index germ `f_{t,s}` evaluated at grid nodes `s ≤ t`.
pub trait Germ: Sync {
    fn max_mode(&self) -> usize;

    /// Writes `f_{t,s}` into `out` (overwriting it).
    fn eval_into(&self, s: usize, t: usize, out: &mut SpectralVector);

    fn eval(&self, s: usize, t: usize) -> SpectralVector {
        let mut out = SpectralVector::zeros(self.max_mode());
        self.eval_into(s, t, &mut out);
        out
    }
}

/// Germ given by a closure.
pub struct FnGerm<F> {
    max_mode: usize,
    f: F,
}

impl<F: Fn(usize, usize) -> SpectralVector + Sync> FnGerm<F> {
    pub fn new(max_mode: usize, f: F) -> Self {
        Self { max_mode, f }
    }
}

impl<F: Fn(usize, usize) -> SpectralVector + Sync> Germ for FnGerm<F> {
    fn max_mode(&self) -> usize {
        self.max_mode
    }

    fn eval_into(&self, s: usize, t: usize, out: &mut SpectralVector) {
        *out = (self.f)(s, t);
    }
}

/// `a f + b g`.
pub struct LinearCombination<'a> {
    pub terms: Vec<(f64, &'a dyn Germ)>,
}

impl Germ for LinearCombination<'_> {
    fn max_mode(&self) -> usize {
        self.terms.first().map_or(0, |(_, g)| g.max_mode())
    }

    fn eval_into(&self, s: usize, t: usize, out: &mut SpectralVector) {
        *out = SpectralVector::zeros(self.max_mode());
        for (a, g) in &self.terms {
            out.axpy(*a, &g.eval(s, t));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SewResult {
    /// Value on the finest partition.
    pub value: SpectralVector,
    /// `‖v_{ℓ-1} - v_ℓ‖₀` between consecutive partitions, coarse to fine.
    pub increments: Vec<f64>,
    /// Last increment below `1e-9·(1 + ‖value‖₀)`.
    pub converged: bool,
}

pub const DEFAULT_REFINE_LEVELS: usize = 6;

/// `Σ_{[u,v] ∈ 𝒫} S_{t-u} f_{v,u}` for the partition of `[s, t]` into blocks
/// of `width` cells, the last block possibly shorter.
fn partition_sum(germ: &dyn Germ, semigroup: &SemigroupSpec, grid: &Grid, s: usize, t: usize, width: usize) -> SpectralVector {
    let k = germ.max_mode();
    let blocks: Vec<usize> = (s..t).step_by(width).collect();
    let terms: Vec<SpectralVector> = blocks
        .par_iter()
        .map(|&u| {
            let v = (u + width).min(t);
            let mut f = germ.eval(u, v);
            if !semigroup.is_identity() {
                let lag = grid.span(u, t);
                f.apply_multiplier_in_place(|m| (-semigroup.decay_rate(m) * lag).exp());
            }
            f
        })
        .collect();
    // summed in order so the result does not depend on the schedule
    terms.iter().fold(SpectralVector::zeros(k), |mut acc, f| {
        acc += f;
        acc
    })
}

/// Sews `germ` over `[s, t]` on dyadic partitions with blocks of
/// `2^refine_levels, …, 2, 1` cells.
pub fn sew_between(
    germ: &dyn Germ,
    semigroup: &SemigroupSpec,
    grid: &Grid,
    s: usize,
    t: usize,
    refine_levels: usize,
) -> Result<SewResult> {
    if s > t {
        return Err(Error::Unordered { s, t });
    }
    if t >= grid.n_points() {
        return Err(Error::Grid(format!("node {t} outside the grid")));
    }
    if refine_levels == 0 {
        return Err(Error::Parameter("at least one refinement level is needed".into()));
    }
    if s == t {
        return Ok(SewResult { value: SpectralVector::zeros(germ.max_mode()), increments: vec![0.0], converged: true });
    }
    let sums: Vec<SpectralVector> = (0..=refine_levels)
        .rev()
        .map(|l| partition_sum(germ, semigroup, grid, s, t, 1 << l))
        .collect();
    let increments: Vec<f64> = sums.windows(2).map(|w| (&w[1] - &w[0]).norm(0.0)).collect();
    let value = sums.into_iter().last().unwrap();
    let tol = 1e-9 * (1.0 + value.norm(0.0));
    let last = *increments.last().unwrap();
    let converged = last < tol;
    let growing = increments.len() >= 2 && increments.windows(2).all(|w| w[1] >= w[0]) && increments[0] > 0.0;
    if growing && !converged {
        return Err(Error::Sewing(format!("Cauchy increments do not decrease: {increments:?}")));
    }
    Ok(SewResult { value, increments, converged })
}

/// `𝒦_t(f)` over `[0, t]`.
pub fn sew(germ: &dyn Germ, semigroup: &SemigroupSpec, grid: &Grid, t: usize, refine_levels: usize) -> Result<SewResult> {
    sew_between(germ, semigroup, grid, grid.origin(), t, refine_levels)
}

/// The compensated germ of a `d`-tuple of delayed controlled paths.
pub struct ConvolutionGerm<'a> {
    driver: &'a DelayedRoughDriver,
    paths: &'a [DelayedControlledPath],
}

impl<'a> ConvolutionGerm<'a> {
    pub fn new(paths: &'a [DelayedControlledPath]) -> Result<Self> {
        let first = paths.first().ok_or_else(|| Error::Parameter("no integrand".into()))?;
        let driver = &**first.driver();
        if paths.len() != driver.dim() {
            return Err(Error::Parameter(format!("need {} integrands, got {}", driver.dim(), paths.len())));
        }
        for p in paths {
            if !std::sync::Arc::ptr_eq(p.driver(), first.driver()) && p.driver().x_values() != driver.x_values() {
                return Err(Error::GridMismatch("integrands must share one driver".into()));
            }
            if p.lo() != first.lo() || p.hi() != first.hi() || p.max_mode() != first.max_mode() {
                return Err(Error::GridMismatch("integrands must share nodes and modes".into()));
            }
        }
        if first.lo() < driver.grid().origin() {
            return Err(Error::MissingHistory("the convolution runs over [0, T]".into()));
        }
        Ok(Self { driver, paths })
    }

    pub fn lo(&self) -> usize {
        self.paths[0].lo()
    }

    pub fn hi(&self) -> usize {
        self.paths[0].hi()
    }

    fn accumulate(&self, s: usize, t: usize, area: &[f64], delayed: &[f64], out: &mut SpectralVector) {
        let d = self.driver.dim();
        for c in out.coeffs_mut() {
            *c = Default::default();
        }
        for (i, p) in self.paths.iter().enumerate() {
            out.axpy(self.driver.increment(s, t, i), p.y(s));
            for (j, yp) in p.y_prime(s).iter().enumerate() {
                out.axpy(area[j * d + i], yp);
            }
            if let Some(yb) = p.ybar_prime(s) {
                for (j, v) in yb.iter().enumerate() {
                    out.axpy(delayed[j * d + i], v);
                }
            }
        }
    }
}

impl Germ for ConvolutionGerm<'_> {
    fn max_mode(&self) -> usize {
        self.paths[0].max_mode()
    }

    fn eval_into(&self, s: usize, t: usize, out: &mut SpectralVector) {
        if t == s + 1 {
            self.accumulate(s, t, self.driver.cell_area(s), self.driver.cell_delayed_area(s), out);
        } else {
            let area = self.driver.reconstruct_area(s, t, false).expect("nodes checked on construction");
            let delayed = self.driver.reconstruct_area(s, t, true).expect("nodes checked on construction");
            self.accumulate(s, t, &area, &delayed, out);
        }
    }
}

/// `∫_lo^t S_{t-u} y_u · d𝐗̄_u` for a `d`-tuple of integrands starting at `lo`.
pub fn rough_convolution(paths: &[DelayedControlledPath], semigroup: &SemigroupSpec, t: usize) -> Result<SewResult> {
    let germ = ConvolutionGerm::new(paths)?;
    if t > germ.hi() || t < germ.lo() {
        return Err(Error::Grid(format!("node {t} outside [{}, {}]", germ.lo(), germ.hi())));
    }
    sew_between(&germ, semigroup, paths[0].grid(), germ.lo(), t, DEFAULT_REFINE_LEVELS)
}

/// `ζ_t = ∫_lo^t S_{t-u} y_u · d𝐗̄_u` at every node, from the finest partition:
/// `ζ_{n+1} = S_dt(ζ_n + Ξ_n)` with `Ξ_n` the germ on cell `n`.
pub fn convolution_path(paths: &[DelayedControlledPath], semigroup: &SemigroupSpec) -> Result<Vec<SpectralVector>> {
    let germ = ConvolutionGerm::new(paths)?;
    let (lo, hi) = (germ.lo(), germ.hi());
    let k = germ.max_mode();
    let step = semigroup.multipliers(k, paths[0].grid().dt());
    let cells: Vec<SpectralVector> = (lo..hi).into_par_iter().map(|n| germ.eval(n, n + 1)).collect();
    let mut out = Vec::with_capacity(hi - lo + 1);
    let mut zeta = SpectralVector::zeros(k);
    out.push(zeta.clone());
    for xi in &cells {
        zeta += xi;
        if !semigroup.is_identity() {
            for (c, m) in zeta.coeffs_mut().iter_mut().zip(&step) {
                *c *= *m;
            }
        }
        out.push(zeta.clone());
    }
    Ok(out)
}

/// Fitted decay of the local expansion error of the convolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExpansion {
    /// Least-squares slope of `log error` against `log(t - s)`.
    pub slope: f64,
    /// Every sampled error vanished to rounding; `slope` is then NaN.
    pub exact: bool,
    pub pairs: usize,
}

/// `‖∫_s^t S_{t-u} y_u·d𝐗̄_u - S_{t-s}[y_s·δX + y'_s:𝕏 + ȳ'_s:𝕏(-r)]_{t,s}‖_{θ-2α+β}`
/// over `pair_sample` pairs spread across dyadic gaps, with the finest
/// partition as reference for the integral.
pub fn local_expansion_error(
    paths: &[DelayedControlledPath],
    semigroup: &SemigroupSpec,
    alpha: f64,
    beta: f64,
    pair_sample: usize,
) -> Result<LocalExpansion> {
    if !(0.0..3.0 * alpha).contains(&beta) {
        return Err(Error::Parameter(format!("β = {beta} must lie in [0, 3α)")));
    }
    let germ = ConvolutionGerm::new(paths)?;
    let (lo, hi) = (germ.lo(), germ.hi());
    let grid = *paths[0].grid();
    let theta = paths[0].theta();
    let k = germ.max_mode();
    let w = ScaleWeights::new(k, theta - 2.0 * alpha + beta);

    let mut gaps = Vec::new();
    let mut g = 2;
    while g <= (hi - lo) / 2 {
        gaps.push(g);
        g *= 2;
    }
    if gaps.is_empty() {
        return Err(Error::TooFewPairs(0));
    }
    let per_gap = pair_sample.div_ceil(gaps.len()).max(1);
    let mut pairs = Vec::new();
    for &g in &gaps {
        let room = hi - lo - g;
        for j in 0..per_gap {
            let s = lo + (j * room) / per_gap.max(1);
            pairs.push((s, s + g));
        }
    }
    let errors: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(s, t)| {
            let reference = partition_sum(&germ, semigroup, &grid, s, t, 1);
            let mut local = germ.eval(s, t);
            let lag = grid.span(s, t);
            local.apply_multiplier_in_place(|m| (-semigroup.decay_rate(m) * lag).exp());
            ((t - s) as f64 * grid.dt(), (&reference - &local).norm_with(&w))
        })
        .collect();
    let floor = 1e-13 * errors.iter().map(|e| 1.0 + e.1).fold(0.0, f64::max);
    let ref_scale = pairs
        .iter()
        .map(|&(s, t)| germ.eval(s, t).norm_with(&w))
        .fold(0.0, f64::max);
    if errors.iter().all(|&(_, e)| e <= 1e-12 * (1.0 + ref_scale)) {
        return Ok(LocalExpansion { slope: f64::NAN, exact: true, pairs: errors.len() });
    }
    // mean error per gap, then a log-log fit across gaps
    let mut points = Vec::new();
    for chunk in errors.chunks(per_gap) {
        let usable: Vec<f64> = chunk.iter().map(|e| e.1).filter(|&e| e > floor).collect();
        if !usable.is_empty() {
            let mean = usable.iter().sum::<f64>() / usable.len() as f64;
            points.push((chunk[0].0.ln(), mean.ln()));
        }
    }
    let usable = errors.iter().filter(|e| e.1 > floor).count();
    if usable < 8 || points.len() < 2 {
        return Err(Error::TooFewPairs(usable));
    }
    Ok(LocalExpansion { slope: fit_slope(&points), exact: false, pairs: usable })
}

/// Least-squares slope through `(x, y)` points.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// The convolution as a controlled path `(ζ, ζ' = y)` at regularity `θ + σ`,
/// together with the two a priori bounds evaluated without constants.
#[derive(Debug, Clone)]
pub struct ControlledConvolution {
    pub path: DelayedControlledPath,
    /// `‖ζ,ζ'‖_{2α̃,θ+σ} / [(1 + ρ_α(𝐗̄)) Σ‖y‖_{2α̃,θ} T^{λ₀} + Σ‖y_0‖_θ]`
    pub ratio_tilde: f64,
    /// `‖ζ,ζ'‖_{2α,θ+σ} / [(1 + ρ_α(𝐗̄))(Σ‖y‖_{2α,θ} T^{α-σ} + ‖y'_0‖ + ‖ȳ'_0‖) + Σ‖y_0‖_θ]`
    pub ratio: f64,
    pub lambda0: f64,
}

pub fn convolution_as_controlled(
    paths: &[DelayedControlledPath],
    semigroup: &SemigroupSpec,
    alpha: f64,
    alpha_tilde: f64,
    sigma: f64,
) -> Result<ControlledConvolution> {
    if !(sigma > 0.0 && sigma < alpha_tilde && alpha_tilde <= alpha) {
        return Err(Error::Parameter(format!("need 0 < σ < α̃ ≤ α, got σ = {sigma}, α̃ = {alpha_tilde}, α = {alpha}")));
    }
    let zeta = convolution_path(paths, semigroup)?;
    let first = &paths[0];
    let (lo, hi) = (first.lo(), first.hi());
    let theta = first.theta();
    let derivs = (lo..=hi).map(|t| paths.iter().map(|p| p.y(t).clone()).collect()).collect();
    let path = DelayedControlledPath::controlled(first.driver().clone(), lo, theta + sigma, zeta, derivs)?;

    let big_t = first.grid().span(lo, hi);
    let lambda0 = (alpha - alpha_tilde).min(alpha_tilde - sigma);
    let rho = driver_norm_for(first, alpha);
    let y0: f64 = paths.iter().map(|p| p.y(lo).norm(theta)).sum();
    let first_derivs = |p: &DelayedControlledPath| -> f64 {
        let a: f64 = p.y_prime(lo).iter().map(|v| v.norm(theta - alpha)).sum();
        let b: f64 = p.ybar_prime(lo).map_or(0.0, |v| v.iter().map(|v| v.norm(theta - alpha)).sum());
        a + b
    };
    let input_tilde: f64 = paths.iter().map(|p| controlled_norm(p, alpha_tilde, theta).total).sum();
    let input: f64 = paths.iter().map(|p| controlled_norm(p, alpha, theta).total).sum();
    let d0: f64 = paths.iter().map(first_derivs).sum();

    let lhs_tilde = controlled_norm(&path, alpha_tilde, theta + sigma).total;
    let lhs = controlled_norm(&path, alpha, theta + sigma).total;
    let rhs_tilde = (1.0 + rho) * input_tilde * big_t.powf(lambda0) + y0;
    let rhs = (1.0 + rho) * (input * big_t.powf(alpha - sigma) + d0) + y0;
    let ratio = |l: f64, r: f64| if r > 0.0 { l / r } else if l == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(ControlledConvolution { path, ratio_tilde: ratio(lhs_tilde, rhs_tilde), ratio: ratio(lhs, rhs), lambda0 })
}

/// Both sides of the two-driver stability estimate for the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionStability {
    /// `ρ_{2α̃,2α,θ+σ}(ζ, χ)`
    pub distance: f64,
    /// `ρ_{2α̃,2α,θ}(y, z)`, summed over the `d` integrands
    pub input_distance: f64,
    /// `T^λ`
    pub time_factor: f64,
    /// `ρ_{α,I}(𝐗̄, 𝐘̄)`
    pub driver_distance: f64,
    /// `Σ‖y_0 - z_0‖_θ`
    pub initial_gap: f64,
    pub lambda: f64,
}

impl ConvolutionStability {
    pub fn rhs(&self) -> f64 {
        self.input_distance * self.time_factor + self.driver_distance + self.initial_gap
    }
}

pub fn convolution_stability(
    px: &[DelayedControlledPath],
    py: &[DelayedControlledPath],
    semigroup: &SemigroupSpec,
    alpha: f64,
    alpha_tilde: f64,
    sigma: f64,
) -> Result<ConvolutionStability> {
    if !(alpha_tilde > sigma && alpha_tilde < alpha) || 3.0 * alpha_tilde - 2.0 * alpha - sigma <= 0.0 {
        return Err(Error::Parameter(format!(
            "need σ < α̃ < α and 3α̃ - 2α - σ > 0, got α = {alpha}, α̃ = {alpha_tilde}, σ = {sigma}"
        )));
    }
    if px.len() != py.len() {
        return Err(Error::Parameter("integrand tuples differ in length".into()));
    }
    let zeta = convolution_as_controlled(px, semigroup, alpha, alpha_tilde, sigma)?.path;
    let chi = convolution_as_controlled(py, semigroup, alpha, alpha_tilde, sigma)?.path;
    let theta = px[0].theta();
    let distance = controlled_distance(&zeta, &chi, alpha_tilde, alpha, theta + sigma)?;
    let mut input_distance = 0.0;
    let mut initial_gap = 0.0;
    for (y, z) in px.iter().zip(py) {
        input_distance += controlled_distance(y, z, alpha_tilde, alpha, theta)?;
        initial_gap += (y.y(y.lo()) - z.y(z.lo())).norm(theta);
    }
    let (lo, hi) = (px[0].lo(), px[0].hi());
    let driver_distance = rough_distance_on(px[0].driver(), py[0].driver(), alpha, lo, hi)?;
    let lambda = (alpha - alpha_tilde)
        .min(alpha_tilde * (alpha - sigma) / alpha)
        .min(3.0 * alpha_tilde - 2.0 * alpha - sigma);
    let time_factor = px[0].grid().span(lo, hi).powf(lambda);
    Ok(ConvolutionStability { distance, input_distance, time_factor, driver_distance, initial_gap, lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{enhance_deterministic, sample_fbm, Flavor};
    use num_complex::Complex64;
    use std::sync::Arc;

    fn smooth_driver(n: usize, path: fn(f64) -> f64) -> Arc<DelayedRoughDriver> {
        let g = Grid::delayed(1.0 / n as f64, n, 0).unwrap();
        Arc::new(enhance_deterministic(move |t| vec![path(t)], 1, &g, 4).unwrap())
    }

    #[test]
    fn riemann_sum_of_constant_germ() {
        let g = Grid::interval(1.0, 64).unwrap();
        let c = SpectralVector::single_mode(2, 1, Complex64::new(1.5, 0.0));
        let germ = FnGerm::new(2, |s, t| c.scaled(g.span(s, t)));
        let out = sew(&germ, &SemigroupSpec::zero(), &g, 40, 6).unwrap();
        assert!((&out.value - &c.scaled(g.time(40))).norm(0.0) < 1e-14);
        assert!(out.converged);
        let zero = FnGerm::new(2, |_, _| SpectralVector::zeros(2));
        assert!(sew(&zero, &SemigroupSpec::zero(), &g, 64, 3).unwrap().value.is_zero());
        assert!(sew(&zero, &SemigroupSpec::zero(), &g, 64, 0).is_err());
    }

    #[test]
    fn heat_semigroup_linear_germ() {
        // Σ S_{t-u} v (v-u) → v (1 - e^{-k²t}) / k², with O(dt) error
        let k = 2i64;
        let v = SpectralVector::single_mode(3, k, Complex64::new(1.0, 0.0));
        let lam = (k * k) as f64;
        let mut errs = Vec::new();
        for n in [256usize, 512, 1024] {
            let g = Grid::interval(1.0, n).unwrap();
            let germ = FnGerm::new(3, |s, t| v.scaled(g.span(s, t)));
            let out = sew(&germ, &SemigroupSpec::laplacian(), &g, n, 6).unwrap();
            let exact = (1.0 - (-lam).exp()) / lam;
            errs.push((out.value.get(k).re - exact).abs());
        }
        assert!(errs[2] < 1e-3, "{errs:?}");
        assert!(errs[0] / errs[1] > 1.8 && errs[1] / errs[2] > 1.8, "{errs:?}");
    }

    #[test]
    fn sewing_is_linear() {
        let g = Grid::interval(1.0, 64).unwrap();
        let a = SpectralVector::from_trig(3, &[(1.0, 0.0), (0.5, -0.2)]);
        let b = SpectralVector::from_trig(3, &[(0.0, 0.0), (0.0, 0.0), (1.0, 1.0)]);
        let f = FnGerm::new(3, |s, t| a.scaled(g.span(s, t) + g.span(s, t).powf(1.5) * g.time(s)));
        let h = FnGerm::new(3, |s, t| b.scaled(g.span(s, t).powf(1.2) * g.time(t)));
        let comb = LinearCombination { terms: vec![(2.0, &f), (-3.0, &h)] };
        let sg = SemigroupSpec::laplacian();
        let lhs = sew(&comb, &sg, &g, 50, 4).unwrap().value;
        let mut rhs = sew(&f, &sg, &g, 50, 4).unwrap().value.scaled(2.0);
        rhs.axpy(-3.0, &sew(&h, &sg, &g, 50, 4).unwrap().value);
        assert!((&lhs - &rhs).norm(0.0) < 1e-12);
    }

    #[test]
    fn growing_increments_are_an_error() {
        // a germ that gets larger as the partition refines
        let g = Grid::interval(1.0, 64).unwrap();
        let germ = FnGerm::new(0, |s, t| {
            SpectralVector::single_mode(0, 0, Complex64::new(1.0 / (g.span(s, t)).sqrt(), 0.0))
        });
        assert!(matches!(sew(&germ, &SemigroupSpec::zero(), &g, 64, 4), Err(Error::Sewing(_))));
    }

    fn unit() -> SpectralVector {
        SpectralVector::single_mode(0, 0, Complex64::new(1.0, 0.0))
    }

    #[test]
    fn constant_integrand_telescopes() {
        let drv = Arc::new(sample_fbm(3, 0.4, &Grid::delayed(1.0 / 64.0, 64, 0).unwrap(), 1, 4).unwrap());
        let c = SpectralVector::from_trig(2, &[(0.5, 0.0), (1.0, -1.0)]);
        let p = DelayedControlledPath::constant(drv.clone(), 0, 64, 0.0, &c).unwrap();
        let out = rough_convolution(std::slice::from_ref(&p), &SemigroupSpec::zero(), 64).unwrap();
        let expect = c.scaled(drv.increment(0, 64, 0));
        assert!((&out.value - &expect).norm(0.0) < 1e-13);
    }

    #[test]
    fn smooth_chain_rule() {
        let drv = smooth_driver(512, f64::sin);
        let x: Vec<SpectralVector> = (0..=512).map(|k| unit().scaled(drv.x(k)[0])).collect();
        let p = DelayedControlledPath::controlled(drv.clone(), 0, 0.0, x, vec![vec![unit()]; 513]).unwrap();
        let zeta = convolution_path(std::slice::from_ref(&p), &SemigroupSpec::zero()).unwrap();
        for t in [1usize, 100, 512] {
            let expect = 0.5 * (drv.x(t)[0].powi(2) - drv.x(0)[0].powi(2));
            assert!((zeta[t].get(0).re - expect).abs() < 1e-12);
            let sewn = rough_convolution(std::slice::from_ref(&p), &SemigroupSpec::zero(), t).unwrap();
            assert!((sewn.value.get(0).re - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn index_convention_on_two_components() {
        // y¹ = X², y'^{1,2} = 1: ∫ X² dX¹ needs 𝕏^{2,1} = ∫ δX² dX¹
        let g = Grid::delayed(1.0 / 256.0, 256, 0).unwrap();
        let drv = Arc::new(enhance_deterministic(|t| vec![t, t * t], 2, &g, 8).unwrap());
        let zero = SpectralVector::zeros(0);
        let y1 = (0..=256).map(|k| unit().scaled(drv.x(k)[1])).collect();
        let p1 = DelayedControlledPath::controlled(drv.clone(), 0, 0.0, y1, vec![vec![zero.clone(), unit()]; 257]).unwrap();
        let p2 = DelayedControlledPath::constant(drv.clone(), 0, 256, 0.0, &zero).unwrap();
        let out = rough_convolution(&[p1, p2], &SemigroupSpec::zero(), 256).unwrap();
        // ∫_0^1 t² dt
        assert!((out.value.get(0).re - 1.0 / 3.0).abs() < 1e-5, "{}", out.value.get(0).re);
    }

    #[test]
    fn ito_flavor_gives_ito_formula() {
        let g = Grid::delayed(1.0 / 256.0, 256, 0).unwrap();
        let fine = crate::driver::sample_fine_path(9, 0.5, &g, 1, 16).unwrap();
        let drv = Arc::new(DelayedRoughDriver::from_fine_path(&fine, Flavor::BmIto, 9, 0.5).unwrap());
        let w: Vec<SpectralVector> = (0..=256).map(|k| unit().scaled(drv.x(k)[0])).collect();
        let p = DelayedControlledPath::controlled(drv.clone(), 0, 0.0, w, vec![vec![unit()]; 257]).unwrap();
        let zeta = convolution_path(std::slice::from_ref(&p), &SemigroupSpec::zero()).unwrap();
        for t in [64usize, 256] {
            let expect = 0.5 * (drv.x(t)[0].powi(2) - drv.x(0)[0].powi(2) - g.time(t));
            assert!((zeta[t].get(0).re - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn interval_additivity() {
        let g = Grid::delayed(1.0 / 128.0, 128, 16).unwrap();
        let drv = Arc::new(sample_fbm(4, 0.45, &g, 2, 4).unwrap());
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let y = (16..=144).map(|_| SpectralVector::random_real(rng, 4, 1.0)).collect();
            let yp = (16..=144).map(|_| (0..2).map(|_| SpectralVector::random_real(rng, 4, 1.0)).collect()).collect();
            let yb = (16..=144).map(|_| (0..2).map(|_| SpectralVector::random_real(rng, 4, 1.0)).collect()).collect();
            DelayedControlledPath::new(drv.clone(), 16, 0.5, y, yp, Some(yb)).unwrap()
        };
        let paths = [mk(&mut rng), mk(&mut rng)];
        let sg = SemigroupSpec::laplacian();
        let full = convolution_path(&paths, &sg).unwrap();
        let s = 60;
        let tail: Vec<_> = paths.iter().map(|p| p.restrict(s, 144).unwrap()).collect();
        let part = convolution_path(&tail, &sg).unwrap();
        for t in [s, 90, 144] {
            let carried = crate::semigroup::apply_semigroup(&sg, &full[s - 16], g.span(s, t)).unwrap();
            let lhs = &full[t - 16] - &(&carried + &part[t - s]);
            assert!(lhs.norm(0.0) < 1e-12 * (1.0 + full[t - 16].norm(0.0)));
        }
    }

    #[test]
    fn local_expansion_smooth_is_exact() {
        let drv = smooth_driver(256, |t| t);
        let c = SpectralVector::from_trig(2, &[(1.0, 0.0), (0.3, 0.1)]);
        let p = DelayedControlledPath::constant(drv, 0, 256, 0.0, &c).unwrap();
        let out = local_expansion_error(std::slice::from_ref(&p), &SemigroupSpec::zero(), 0.45, 0.0, 64).unwrap();
        assert!(out.exact && out.slope.is_nan());
        assert!(local_expansion_error(std::slice::from_ref(&p), &SemigroupSpec::zero(), 0.45, 1.5, 64).is_err());
    }

    #[test]
    fn convolution_derivative_is_integrand() {
        let g = Grid::delayed(1.0 / 64.0, 64, 16).unwrap();
        let drv = Arc::new(sample_fbm(6, 0.45, &g, 1, 4).unwrap());
        let zero = DelayedControlledPath::constant(drv.clone(), 16, 80, 1.0, &SpectralVector::zeros(4)).unwrap();
        let out = convolution_as_controlled(std::slice::from_ref(&zero), &SemigroupSpec::laplacian(), 0.45, 0.4, 0.2).unwrap();
        assert!(out.path.values().iter().all(|v| v.is_zero()));
        assert_eq!(out.ratio, 0.0);

        let c = [SpectralVector::from_trig(4, &[(0.0, 0.0), (1.0, 0.5)])];
        let p = DelayedControlledPath::driver_linear(drv.clone(), 16, 80, 1.0, &SpectralVector::from_trig(4, &[(1.0, 0.0)]), &c).unwrap();
        let out = convolution_as_controlled(std::slice::from_ref(&p), &SemigroupSpec::laplacian(), 0.45, 0.4, 0.2).unwrap();
        for t in 16..=80 {
            assert_eq!(&out.path.y_prime(t)[0], p.y(t));
        }
        assert!(out.ratio.is_finite() && out.ratio_tilde.is_finite());
        assert!(convolution_as_controlled(std::slice::from_ref(&p), &SemigroupSpec::laplacian(), 0.45, 0.4, 0.5).is_err());
    }

    #[test]
    fn stability_examples() {
        let g = Grid::delayed(1.0 / 64.0, 64, 16).unwrap();
        let drv = Arc::new(sample_fbm(7, 0.45, &g, 1, 4).unwrap());
        let c = [SpectralVector::from_trig(4, &[(0.0, 0.0), (1.0, 0.5)])];
        let y0 = SpectralVector::from_trig(4, &[(1.0, 0.0)]);
        let p = DelayedControlledPath::driver_linear(drv.clone(), 16, 80, 1.0, &y0, &c).unwrap();
        let sg = SemigroupSpec::laplacian();
        let same = convolution_stability(std::slice::from_ref(&p), std::slice::from_ref(&p), &sg, 0.45, 0.42, 0.05).unwrap();
        assert_eq!(same.distance, 0.0);
        assert_eq!(same.rhs(), 0.0);
        assert!(convolution_stability(std::slice::from_ref(&p), std::slice::from_ref(&p), &sg, 0.45, 0.3, 0.05).is_err());

        let shift = SpectralVector::from_trig(4, &[(0.2, 0.0)]);
        let q = p.shifted(&shift);
        let out = convolution_stability(std::slice::from_ref(&p), std::slice::from_ref(&q), &sg, 0.45, 0.42, 0.05).unwrap();
        assert_eq!(out.driver_distance, 0.0);
        assert!((out.initial_gap - shift.norm(1.0)).abs() < 1e-14);
        // the response is linear in the shift
        let twice = convolution_stability(std::slice::from_ref(&p), std::slice::from_ref(&p.shifted(&shift.scaled(2.0))), &sg, 0.45, 0.42, 0.05).unwrap();
        assert!(out.distance > 0.0);
        assert!((twice.distance - 2.0 * out.distance).abs() < 1e-12 * out.distance);
        assert!((twice.rhs() - 2.0 * out.rhs()).abs() < 1e-12 * out.rhs());
    }
}

//! Mild solutions of
//!
//! ```text
//! dy_t = [A y_t + F(y_t, y_{t-r})] dt + G(y_t, y_{t-r}) · d𝐗̄_t,   y = φ on [-r, 0],
//! y_t = S_{t,0} y_0 + ∫_0^t S_{t,s} F(y_s, y_{s-r}) ds + ∫_0^t S_{t,s} G(y_s, y_{s-r}) · d𝐗̄_s,
//! ```
//!
//! by Picard iteration on consecutive steps of length at most `r ∧ 1`, with
//! the Gubinelli derivative `y'_t = G(y_t, y_{t-r})`.
//!
//! The discrete map is the drift recursion of [`drift_path`] plus the
//! finest-partition rough convolution. Each node depends only on earlier nodes
//! and, through the drift, on itself, so the fixed point on the grid does not
//! depend on how `[0, T]` is cut into Picard steps.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controlled::{compose, controlled_distance, controlled_norm, ControlledNormReport, DelayedControlledPath, Derivatives};
use crate::driver::DelayedRoughDriver;
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;
use crate::scale::{ScaleWeights, SpectralVector};
use crate::semigroup::{apply_multipliers, apply_semigroup, SemigroupSpec};
use crate::sewing::convolution_path;

pub mod experiments;
pub mod presets;

pub use experiments::*;

/// One delay rough PDE together with the exponents used to measure it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub semigroup: SemigroupSpec,
    /// drift `F`, one component
    pub f: NonlinearitySpec,
    /// noise coefficient `G`, one component per driver dimension
    pub g: NonlinearitySpec,
    /// delay `r` in time units
    pub r: f64,
    /// horizon `T`
    pub t_end: f64,
    pub theta: f64,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub alpha_bar: f64,
    pub alpha_hat: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

/// Rates that appear in the a priori and stability bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    /// drift gain `(α - α̃) ∧ (α̃ - σ₂)` of the convolution, used with `α̃`
    pub lambda0: f64,
    /// drift term `(1 - 2α̃) ∧ (1 - σ₁)`
    pub lambda1: f64,
    /// convolution term `(α - α̃) ∧ (α̃ - σ₂)`
    pub lambda2: f64,
    /// step-size rate in the a priori growth bound, `(α - σ₂) ∧ (1 - 2α) ∧ (1 - σ₁)`
    pub lambda3: f64,
    /// convolution stability, `min{α - α̃, α̃(α - σ₂)/α, 3α̃ - 2α - σ₂}`
    pub lambda: f64,
    /// delay-to-zero rate, the same minimum with `ᾱ` and the drift and `1 - 2α` terms
    pub lambda_star: f64,
    /// solution stability, the same minimum with `α̂`
    pub nu: f64,
}

impl ModelSpec {
    pub fn exponents(&self) -> DerivedExponents {
        let (a, at, ab, ah, s1, s2) = (self.alpha, self.alpha_tilde, self.alpha_bar, self.alpha_hat, self.sigma1, self.sigma2);
        let family = |x: f64| (a - x).min(x * (a - s2) / a).min(3.0 * x - 2.0 * a - s2);
        DerivedExponents {
            lambda0: (a - at).min(at - s2),
            lambda1: (1.0 - 2.0 * at).min(1.0 - s1),
            lambda2: (a - at).min(at - s2),
            lambda3: (a - s2).min(1.0 - 2.0 * a).min(1.0 - s1),
            lambda: family(at),
            lambda_star: family(ab).min(1.0 - s1).min(1.0 - 2.0 * a),
            nu: family(ah).min(1.0 - s1).min(1.0 - 2.0 * ah),
        }
    }

    /// Ranges required for existence runs.
    pub fn validate(&self) -> Result<()> {
        self.f.validate()?;
        self.g.validate()?;
        let bad = |msg: String| Err(Error::Parameter(msg));
        let (a, at, ab, ah, s1, s2) = (self.alpha, self.alpha_tilde, self.alpha_bar, self.alpha_hat, self.sigma1, self.sigma2);
        if self.f.dim() != 1 {
            return bad(format!("F must have one component, has {}", self.f.dim()));
        }
        if !(a > 1.0 / 3.0 && a <= 0.5) {
            return bad(format!("α = {a} outside (1/3, 1/2]"));
        }
        if !(s1 > 0.0 && s1 < 1.0) {
            return bad(format!("σ₁ = {s1} outside (0, 1)"));
        }
        if !(s2 >= 0.0 && s2 < at && at < a) {
            return bad(format!("need 0 ≤ σ₂ < α̃ < α, got σ₂ = {s2}, α̃ = {at}"));
        }
        if self.g.order() > s2 + 1e-15 || self.f.order() > s1 + 1e-15 {
            return bad("the coefficients lose more regularity than σ₁, σ₂ allow".into());
        }
        if !(ab > 0.8 * a && ab < a) || s2 + 2.0 * ab - 2.0 * a < 0.0 || 3.0 * ab - 2.0 * a - s2 < 0.0 {
            return bad(format!("ᾱ = {ab} violates 4α/5 < ᾱ < α, σ₂ + 2ᾱ ≥ 2α, 3ᾱ ≥ 2α + σ₂"));
        }
        if !(ah > s2 && ah < a) || 3.0 * ah - 2.0 * a - s2 <= 0.0 {
            return bad(format!("α̂ = {ah} violates σ₂ < α̂ < α, 3α̂ > 2α + σ₂"));
        }
        if !(self.r >= 0.0 && self.t_end > 0.0) {
            return bad("need r ≥ 0 and T > 0".into());
        }
        Ok(())
    }

    /// Additional requirement for delay-to-zero runs: `σ₂ ∈ (α/2, α)`.
    pub fn validate_for_convergence(&self) -> Result<()> {
        self.validate()?;
        if !(self.sigma2 > self.alpha / 2.0 && self.sigma2 < self.alpha) {
            return Err(Error::Parameter(format!("convergence runs need σ₂ ∈ (α/2, α), got {}", self.sigma2)));
        }
        Ok(())
    }

    /// Checks that the driver matches `r`, `T` and the dimension of `G`.
    pub fn check_driver(&self, driver: &DelayedRoughDriver) -> Result<()> {
        let g = driver.grid();
        let tol = 1e-9 * (1.0 + self.t_end);
        if (g.delay() - self.r).abs() > tol || (g.t_end() - self.t_end).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "driver covers [-{}, {}], the model asks for r = {}, T = {}",
                g.delay(),
                g.t_end(),
                self.r,
                self.t_end
            )));
        }
        if self.g.dim() != driver.dim() {
            return Err(Error::Parameter(format!("G has {} components, the driver {}", self.g.dim(), driver.dim())));
        }
        Ok(())
    }

    /// The same model with `G(y, z)` and `F(y, z)` replaced by `G(y, y)`, `F(y, y)`.
    pub fn undelayed(&self) -> Self {
        Self { f: self.f.undelayed(), g: self.g.undelayed(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Picard stops once successive iterates are within `tol·(1 + sup‖y‖_θ)`.
    pub tol: f64,
    /// Upper bound on a step, in cells, on top of `r ∧ 1`.
    pub max_step_cells: usize,
    /// Largest accepted contraction ratio.
    pub ratio_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iter: 80, tol: 1e-11, max_step_cells: 256, ratio_threshold: 0.5 }
    }
}

/// Weights of the exponential integrator for piecewise-linear `F`:
/// `∫_0^h e^{-λ(h-s)} [F_0 (1 - s/h) + F_1 s/h] ds = w0 F_0 + w1 F_1`.
pub fn drift_weights(lambda: f64, h: f64) -> (f64, f64) {
    let x = lambda * h;
    let (phi, g) = if x < 0.25 {
        // Σ_{n≥0} (-x)^n/(n+1)!  and  Σ_{n≥2} (-1)^n (n-1)/n! x^{n-2}
        let mut phi = 0.0;
        let mut g = 0.0;
        let mut fact = 1.0;
        let mut pow = 1.0;
        for n in 0..20 {
            fact *= (n + 1) as f64;
            phi += pow / fact;
            g += pow * (n + 1) as f64 / (fact * (n + 2) as f64);
            pow *= -x;
        }
        (phi, g)
    } else {
        let e = (-x).exp();
        (-(-x).exp_m1() / x, (1.0 - e * (1.0 + x)) / (x * x))
    };
    (h * g, h * (phi - g))
}

/// `D_t = ∫_{t_0}^t S_{t-s} F_s ds` at every node for `F` linear between the
/// given node values `f_values` (spacing `dt`).
pub fn drift_path(semigroup: &SemigroupSpec, dt: f64, f_values: &[SpectralVector]) -> Vec<SpectralVector> {
    let Some(first) = f_values.first() else {
        return Vec::new();
    };
    let k = first.max_mode();
    let step = semigroup.multipliers(k, dt);
    let (w0, w1): (Vec<f64>, Vec<f64>) = (-(k as i64)..=k as i64)
        .map(|m| drift_weights(semigroup.decay_rate(m), dt))
        .unzip();
    let mut out = Vec::with_capacity(f_values.len());
    let mut acc = SpectralVector::zeros(k);
    out.push(acc.clone());
    for pair in f_values.windows(2) {
        apply_multipliers(&mut acc, &step);
        for (j, c) in acc.coeffs_mut().iter_mut().enumerate() {
            *c += pair[0].coeffs()[j] * w0[j] + pair[1].coeffs()[j] * w1[j];
        }
        out.push(acc.clone());
    }
    out
}

/// `∫_{t_0}^{t_n} S_{t_n - s} F_s ds` for the node index `n`.
pub fn drift_integral(semigroup: &SemigroupSpec, dt: f64, f_values: &[SpectralVector], n: usize) -> Result<SpectralVector> {
    if n >= f_values.len() {
        return Err(Error::Grid(format!("node {n} beyond {} drift values", f_values.len())));
    }
    Ok(drift_path(semigroup, dt, &f_values[..=n]).pop().unwrap())
}

/// `r̂ = r ∧ 1` in cells; `1 ∧ T` without delay.
fn max_step_cells(driver: &DelayedRoughDriver, from: usize) -> usize {
    let g = driver.grid();
    let unit = (1.0 / g.dt()).round().max(1.0) as usize;
    let r = g.delay_steps();
    let remaining = g.n_points() - 1 - from;
    if r > 0 {
        r.min(unit)
    } else {
        unit.min(remaining.max(1))
    }
}

/// One accepted Picard step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub start: usize,
    pub end: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub iterations: usize,
    pub ratio: f64,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    /// Plain controlled path on `[a, a + step]` with `y' = G(y, y_{·-r})`.
    pub path: DelayedControlledPath,
    pub iterations: usize,
    /// Largest ratio of successive `ρ_{2α̃,2α,θ}` distances above the noise floor.
    pub ratio: f64,
    /// Geometric mean of the successive ratios, `(d_last / d_first)^{1/(k-1)}`.
    pub rate: f64,
    /// Successive distances, one per iteration.
    pub distances: Vec<f64>,
}

fn mean_rate(distances: &[f64]) -> f64 {
    match distances {
        [first, .., last] if *first > 0.0 && *last > 0.0 => (last / first).powf(1.0 / (distances.len() - 1) as f64),
        _ => 0.0,
    }
}

struct Step<'a> {
    model: &'a ModelSpec,
    driver: &'a Arc<DelayedRoughDriver>,
    history: &'a DelayedControlledPath,
    a: usize,
    b: usize,
    r: usize,
}

impl Step<'_> {
    /// Value and derivative at node `k - r`.
    fn delayed<'v>(&'v self, k: usize, y: &'v [SpectralVector], yp: &'v Derivatives) -> (&'v SpectralVector, &'v [SpectralVector]) {
        let j = k - self.r;
        if j < self.a {
            (self.history.y(j), self.history.y_prime(j))
        } else {
            (&y[j - self.a], &yp[j - self.a])
        }
    }

    /// `G(y_k, y_{k-r})` at every node; values only are needed on the delayed side.
    fn derivatives(&self, y: &[SpectralVector]) -> Derivatives {
        (self.a..=self.b)
            .map(|k| {
                let j = k - self.r;
                let z = if j < self.a { self.history.y(j) } else { &y[j - self.a] };
                self.model.g.eval(&y[k - self.a], z)
            })
            .collect()
    }

    fn path(&self, y: Vec<SpectralVector>, yp: Derivatives) -> Result<DelayedControlledPath> {
        DelayedControlledPath::controlled(self.driver.clone(), self.a, self.model.theta, y, yp)
    }

    /// One application of the solution map.
    fn apply(&self, y: &[SpectralVector], yp: &Derivatives) -> Result<Vec<SpectralVector>> {
        let (a, b, r) = (self.a, self.b, self.r);
        let mut zs = Vec::with_capacity(b - a + 1);
        let mut zps = Vec::with_capacity(b - a + 1);
        for k in a..=b {
            let (z, zp) = self.delayed(k, y, yp);
            zs.push(z.clone());
            zps.push(zp.to_vec());
        }
        let p = self.path(y.to_vec(), yp.clone())?;
        let q = DelayedControlledPath::controlled(self.driver.clone(), a - r, self.model.theta, zs, zps)?;
        let integrands = compose(&self.model.g, &p, &q)?;
        let zeta = convolution_path(&integrands, &self.model.semigroup)?;
        let f_values: Vec<SpectralVector> = (a..=b).map(|k| self.model.f.eval_component(0, &y[k - a], q.y(k - r))).collect();
        let dt = self.driver.grid().dt();
        let drift = drift_path(&self.model.semigroup, dt, &f_values);
        let y_a = &y[0];
        let k = y_a.max_mode();
        let step = self.model.semigroup.multipliers(k, dt);
        let mut free = y_a.clone();
        let mut out = Vec::with_capacity(b - a + 1);
        for n in 0..=b - a {
            if n > 0 {
                apply_multipliers(&mut free, &step);
            }
            let mut v = free.clone();
            v += &drift[n];
            v += &zeta[n];
            out.push(v);
        }
        // the initial value is not iterated
        out[0] = y_a.clone();
        Ok(out)
    }
}

/// Picard iteration on `[a, a + step_cells]`, where `a = history.hi()` and the
/// history covers `[a - r, a]`. The first iterate is the free evolution
/// `S_{t-a} y_a`.
pub fn picard_step(
    model: &ModelSpec,
    driver: &Arc<DelayedRoughDriver>,
    history: &DelayedControlledPath,
    step_cells: usize,
    opts: &SolverOptions,
) -> Result<PicardOutcome> {
    let a = history.hi();
    let r = driver.delay_steps();
    let g = driver.grid();
    if history.is_delayed() || history.lo() + r != a {
        return Err(Error::MissingHistory(format!(
            "history must be a plain controlled path on [a - r, a], got [{}, {a}] with r = {r} cells",
            history.lo()
        )));
    }
    if a < g.origin() || a + step_cells >= g.n_points() || step_cells == 0 {
        return Err(Error::Grid(format!("step of {step_cells} cells from node {a} leaves [0, T]")));
    }
    if step_cells > max_step_cells(driver, a) {
        return Err(Error::Parameter(format!("steps are limited to r ∧ 1, got {step_cells} cells")));
    }
    let step = Step { model, driver, history, a, b: a + step_cells, r };
    let y_a = history.y(a).clone();
    let dt = g.dt();
    let mut y: Vec<SpectralVector> = (0..=step_cells)
        .map(|n| apply_semigroup(&model.semigroup, &y_a, n as f64 * dt))
        .collect::<Result<_>>()?;
    let mut yp = step.derivatives(&y);
    let mut current = step.path(y.clone(), yp.clone())?;
    let weights = ScaleWeights::new(y_a.max_mode(), model.theta);
    let mut distances = Vec::new();
    let mut ratio = 0.0f64;
    for it in 1..=opts.max_iter {
        let next = step.apply(&y, &yp)?;
        let next_p = step.derivatives(&next);
        let next_path = step.path(next.clone(), next_p.clone())?;
        let dist = controlled_distance(&next_path, &current, model.alpha_tilde, model.alpha, model.theta)?;
        let scale = 1.0 + next.iter().map(|v| v.norm_with(&weights)).fold(0.0, f64::max);
        if let Some(&prev) = distances.last() {
            if prev > 1e3 * opts.tol * scale {
                ratio = ratio.max(dist / prev);
            }
        }
        distances.push(dist);
        y = next;
        yp = next_p;
        current = next_path;
        if !dist.is_finite() {
            break;
        }
        if dist <= opts.tol * scale {
            if ratio >= opts.ratio_threshold {
                break;
            }
            let rate = mean_rate(&distances);
            return Ok(PicardOutcome { path: current, iterations: it, ratio, rate, distances });
        }
    }
    let last = distances.last().copied().unwrap_or(f64::NAN);
    let first = distances.first().copied().unwrap_or(f64::NAN);
    let observed = if ratio > 0.0 { ratio } else if first > 0.0 { last / first } else { f64::INFINITY };
    Err(Error::StepTooLarge { nodes: step_cells, ratio: if observed.is_finite() { observed } else { f64::INFINITY } })
}

/// Summary of a solve, without the path itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub steps: Vec<StepRecord>,
    /// Norm report on each macro-interval of length `r ∧ 1`.
    pub norms: Vec<ControlledNormReport>,
    /// `sup ‖y_t‖_θ` on each macro-interval.
    pub sup_norms: Vec<f64>,
    /// Least-squares rate `κ` of `log sup‖y‖_θ ≈ c + κ t` across macro-intervals.
    pub growth_rate: f64,
    /// Every macro-interval sup lies below twice the fitted exponential.
    pub within_envelope: bool,
    /// `max_t ‖y_t - 𝒯(y)_t‖_{θ-2α} / (1 + sup‖y‖_θ)`
    pub fixed_point_residual: f64,
    pub total_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// `(y, y')` on `[a, T]`, `y'_t = G(y_t, y_{t-r})`.
    pub solution: DelayedControlledPath,
    /// The history the solve started from, on `[a - r, a]`.
    pub history: DelayedControlledPath,
    pub summary: SolveSummary,
}

impl SolveReport {
    /// `(y, y')` on `[k - r, k]`, read from the history before its last node
    /// and from the solution after.
    pub fn history_at(&self, k: usize) -> Result<DelayedControlledPath> {
        let r = self.solution.driver().delay_steps();
        let a = self.solution.lo();
        if k < a || k > self.solution.hi() || k < self.history.lo() + r {
            return Err(Error::Grid(format!("node {k} outside the solved range")));
        }
        let (mut y, mut yp) = (Vec::new(), Vec::new());
        for j in k - r..=k {
            let (v, d) = if j < a {
                (self.history.y(j), self.history.y_prime(j))
            } else {
                (self.solution.y(j), self.solution.y_prime(j))
            };
            y.push(v.clone());
            yp.push(d.to_vec());
        }
        DelayedControlledPath::controlled(self.solution.driver().clone(), k - r, self.solution.theta(), y, yp)
    }
}

/// Solves on `[0, T]` from `φ` on `[-r, 0]`.
pub fn solve(model: &ModelSpec, driver: &Arc<DelayedRoughDriver>, phi: &DelayedControlledPath) -> Result<SolveReport> {
    solve_with(model, driver, phi, None, &SolverOptions::default())
}

/// Solves from the last node of `history` up to node `until` (default: the
/// end of the driver grid).
pub fn solve_with(
    model: &ModelSpec,
    driver: &Arc<DelayedRoughDriver>,
    history: &DelayedControlledPath,
    until: Option<usize>,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    model.validate()?;
    model.check_driver(driver)?;
    let g = *driver.grid();
    let r = g.delay_steps();
    let a0 = history.hi();
    let end = until.unwrap_or(g.n_points() - 1);
    if history.is_delayed() || history.lo() + r != a0 || a0 < g.origin() || end > g.n_points() - 1 || end <= a0 {
        return Err(Error::MissingHistory(format!(
            "need a plain history on [a - r, a] inside [-r, T) before node {end}, got [{}, {a0}]",
            history.lo()
        )));
    }
    if !Arc::ptr_eq(history.driver(), driver) && history.driver().x_values() != driver.x_values() {
        return Err(Error::GridMismatch("the history is controlled by another driver".into()));
    }

    // trajectory on [a0 - r, current]
    let base = a0 - r;
    let mut ys: Vec<SpectralVector> = history.values().to_vec();
    let mut yps: Derivatives = history.derivatives().clone();
    let cap = max_step_cells(driver, a0).min(opts.max_step_cells);
    let mut cells = cap;
    let mut a = a0;
    let mut steps = Vec::new();
    while a < end {
        let h = cells.min(end - a).min(max_step_cells(driver, a));
        let hist = DelayedControlledPath::controlled(driver.clone(), a - r, model.theta, ys[a - r - base..].to_vec(), yps[a - r - base..].to_vec())?;
        match picard_step(model, driver, &hist, h, opts) {
            Ok(out) => {
                log::debug!("step [{a}, {}] accepted after {} iterations, ratio {:.3}", a + h, out.iterations, out.ratio);
                yps[a - base] = out.path.y_prime(a).to_vec();
                for k in a + 1..=a + h {
                    ys.push(out.path.y(k).clone());
                    yps.push(out.path.y_prime(k).to_vec());
                }
                steps.push(StepRecord {
                    start: a,
                    end: a + h,
                    t_start: g.time(a),
                    t_end: g.time(a + h),
                    iterations: out.iterations,
                    ratio: out.ratio,
                    rate: out.rate,
                });
                a += h;
                cells = (2 * h).min(cap);
            }
            Err(Error::StepTooLarge { ratio, .. }) => {
                let half = h / 2;
                if half < 4 {
                    return Err(Error::StepUnderflow {
                        time: g.time(a),
                        detail: format!("{h}-cell step still has contraction ratio {ratio:.3}, dt = {}", g.dt()),
                    });
                }
                log::debug!("step [{a}, {}] rejected, ratio {ratio:.3}; halving", a + h);
                cells = half;
            }
            Err(e) => return Err(e),
        }
    }
    let solution = DelayedControlledPath::controlled(driver.clone(), a0, model.theta, ys[a0 - base..].to_vec(), yps[a0 - base..].to_vec())?;
    let summary = summarize(model, driver, history, &solution, steps)?;
    Ok(SolveReport { solution, history: history.clone(), summary })
}

fn summarize(
    model: &ModelSpec,
    driver: &Arc<DelayedRoughDriver>,
    history: &DelayedControlledPath,
    solution: &DelayedControlledPath,
    steps: Vec<StepRecord>,
) -> Result<SolveSummary> {
    let (lo, hi) = (solution.lo(), solution.hi());
    let macro_len = max_step_cells(driver, lo);
    let mut norms = Vec::new();
    let mut sup_norms = Vec::new();
    let mut times = Vec::new();
    let mut s = lo;
    while s < hi {
        let e = (s + macro_len).min(hi);
        let part = solution.restrict(s, e)?;
        norms.push(controlled_norm(&part, model.alpha, model.theta));
        sup_norms.push(part.values().iter().map(|v| v.norm(model.theta)).fold(0.0, f64::max));
        times.push(driver.grid().time(e));
        s = e;
    }
    let (growth_rate, within_envelope) = envelope(&times, &sup_norms);

    // one global application of the map from y_a
    let whole = Step { model, driver, history, a: lo, b: hi, r: driver.delay_steps() };
    let image = whole.apply(solution.values(), solution.derivatives())?;
    let w = ScaleWeights::new(solution.max_mode(), model.theta - 2.0 * model.alpha);
    let scale = 1.0 + solution.values().iter().map(|v| v.norm(model.theta)).fold(0.0, f64::max);
    let fixed_point_residual = image
        .iter()
        .zip(solution.values())
        .map(|(a, b)| a.distance_with(b, &w))
        .fold(0.0, f64::max)
        / scale;
    let total_iterations = steps.iter().map(|s| s.iterations).sum();
    Ok(SolveSummary { steps, norms, sup_norms, growth_rate, within_envelope, fixed_point_residual, total_iterations })
}

fn envelope(times: &[f64], sups: &[f64]) -> (f64, bool) {
    let pts: Vec<(f64, f64)> = times.iter().zip(sups).filter(|(_, &s)| s > 0.0).map(|(&t, &s)| (t, s.ln())).collect();
    if pts.len() < 2 {
        return (0.0, true);
    }
    let kappa = crate::sewing::fit_slope(&pts);
    let n = pts.len() as f64;
    let c = pts.iter().map(|p| p.1 - kappa * p.0).sum::<f64>() / n;
    let ok = pts.iter().all(|&(t, l)| l <= c + kappa * t + 2f64.ln());
    (kappa, ok)
}

/// Constant history `φ ≡ c` on `[-r, 0]`.
pub fn constant_history(driver: &Arc<DelayedRoughDriver>, theta: f64, c: &SpectralVector) -> Result<DelayedControlledPath> {
    let g = driver.grid();
    DelayedControlledPath::constant(driver.clone(), g.origin() - g.delay_steps(), g.origin(), theta, c)
}

/// Driver-linear history `φ_t = φ₀ + Σ_i c_i (X^i_t - X^i_0)` on `[-r, 0]`,
/// with `φ' ≡ c`. An empty `c` gives the constant history.
pub fn driver_linear_history(
    driver: &Arc<DelayedRoughDriver>,
    theta: f64,
    phi0: &SpectralVector,
    c: &[SpectralVector],
) -> Result<DelayedControlledPath> {
    if c.is_empty() {
        return constant_history(driver, theta, phi0);
    }
    let g = driver.grid();
    let (lo, hi) = (g.origin() - g.delay_steps(), g.origin());
    let mut start = phi0.clone();
    for (i, ci) in c.iter().enumerate() {
        start.axpy(-driver.increment(lo, hi, i), ci);
    }
    DelayedControlledPath::driver_linear(driver.clone(), lo, hi, theta, &start, c)
}

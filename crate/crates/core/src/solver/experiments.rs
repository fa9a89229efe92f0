//! Stability and delay-to-zero experiments.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controlled::{controlled_distance, controlled_norm, DelayedControlledPath};
use crate::driver::{area_gap, enhance_deterministic, plain_rough_norm, rough_distance_on, sample_fine_path, DelayedRoughDriver, FinePath, Flavor};
use crate::error::{Error, Result};
use crate::scale::{Grid, SpectralVector};
use crate::sewing::fit_slope;

use super::{constant_history, driver_linear_history, solve_with, ModelSpec, SolveReport, SolverOptions};

/// `ρ_{2α̂,2α,θ}(y, z)` on `[0, T]` together with the quantities that bound it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionDistance {
    pub distance: f64,
    /// `ρ_{2α̂,2α,θ}(φ, ψ)` on `[-r, 0]`
    pub history_distance: f64,
    /// `ρ_α(𝐗̄, 𝐘̄)` on `[0, T]`
    pub driver_distance: f64,
    /// history plus driver distance
    pub u: f64,
    /// largest controlled norm of the histories and solutions, and rough norm of the drivers
    pub history_norm: f64,
    pub solution_norm: f64,
    pub driver_norm: f64,
}

/// Compares two solves on the same grid. The drivers may differ.
pub fn solution_distance(a: &SolveReport, b: &SolveReport, alpha_hat: f64, alpha: f64, theta: f64) -> Result<SolutionDistance> {
    let (ya, yb) = (&a.solution, &b.solution);
    if ya.grid() != yb.grid() || ya.lo() != yb.lo() || ya.hi() != yb.hi() || a.history.lo() != b.history.lo() {
        return Err(Error::GridMismatch("solutions live on different grids or ranges".into()));
    }
    let distance = controlled_distance(ya, yb, alpha_hat, alpha, theta)?;
    let history_distance = controlled_distance(&a.history, &b.history, alpha_hat, alpha, theta)?;
    let driver_distance = rough_distance_on(ya.driver(), yb.driver(), alpha, ya.lo(), ya.hi())?;
    let norm = |p: &DelayedControlledPath| controlled_norm(p, alpha, theta).total;
    Ok(SolutionDistance {
        distance,
        history_distance,
        driver_distance,
        u: history_distance + driver_distance,
        history_norm: norm(&a.history).max(norm(&b.history)),
        solution_norm: norm(ya).max(norm(yb)),
        driver_norm: plain_rough_norm(ya.driver(), alpha, ya.lo(), ya.hi()).max(plain_rough_norm(yb.driver(), alpha, yb.lo(), yb.hi())),
    })
}

/// How drivers are produced for each `(r, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverSource {
    /// One fine path per seed on `[-r_max, T]`, restricted for smaller `r`.
    Sampled { flavor: Flavor, hurst: f64, dim: usize, subgrid_factor: usize },
    /// `X_t = t · slope`, seed ignored.
    Linear { slope: Vec<f64>, subgrid_factor: usize },
}

impl DriverSource {
    pub fn dim(&self) -> usize {
        match self {
            DriverSource::Sampled { dim, .. } => *dim,
            DriverSource::Linear { slope, .. } => slope.len(),
        }
    }

    fn fine_path(&self, seed: u64, grid: &Grid) -> Result<Option<FinePath>> {
        match self {
            DriverSource::Sampled { hurst, dim, subgrid_factor, .. } => Ok(Some(sample_fine_path(seed, *hurst, grid, *dim, *subgrid_factor)?)),
            DriverSource::Linear { .. } => Ok(None),
        }
    }

    fn driver(&self, seed: u64, grid: &Grid, fine: Option<&FinePath>) -> Result<DelayedRoughDriver> {
        match (self, fine) {
            (DriverSource::Sampled { flavor, hurst, .. }, Some(fine)) => {
                let fine = fine.restrict_history(grid.delay_steps())?;
                DelayedRoughDriver::from_fine_path(&fine, *flavor, seed, *hurst)
            }
            (DriverSource::Linear { slope, subgrid_factor }, _) => {
                let d = slope.len();
                let slope = slope.clone();
                enhance_deterministic(move |t| slope.iter().map(|s| s * t).collect(), d, grid, *subgrid_factor)
            }
            _ => Err(Error::Parameter("sampled source without a fine path".into())),
        }
    }

    /// Driver on the grid with `n` cells on `[0, T]` and `delay_steps` cells of history.
    pub fn build(&self, seed: u64, t_end: f64, n: usize, delay_steps: usize) -> Result<DelayedRoughDriver> {
        let grid = Grid::delayed(t_end / n as f64, n, delay_steps)?;
        let fine = self.fine_path(seed, &grid)?;
        self.driver(seed, &grid, fine.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSetup {
    /// `r` is overridden per row.
    pub model: ModelSpec,
    pub source: DriverSource,
    /// cells on `[0, T]`
    pub n: usize,
    /// initial value `φ_0`
    pub phi: SpectralVector,
    /// history slopes: `φ_t = φ_0 + Σ_i c_i (X^i_t - X^i_0)`; empty for a constant history
    #[serde(default)]
    pub phi_slope: Vec<SpectralVector>,
    pub r_list: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCell {
    pub r: f64,
    pub seed: u64,
    /// `ρ_{2ᾱ,2α,θ-α}(y^r, z)` on `[0, T]`, `None` if a solve failed
    pub distance: Option<f64>,
    /// `h(r)`, the delayed-area gap
    pub area_gap: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub r: f64,
    pub r_steps: usize,
    pub median_distance: f64,
    pub median_area_gap: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub cells: Vec<ConvergenceCell>,
    /// log-log slope of the median distance against `r` over rows with `r > 0`
    pub distance_slope: f64,
    /// log-log slope of the median area gap
    pub area_gap_slope: f64,
}

impl ConvergenceReport {
    /// Median distances fall along the (decreasing) `r` list, allowing at most
    /// one rise, and only by a relative `tolerance`.
    pub fn is_monotone(&self, tolerance: f64) -> bool {
        let mut inversions = 0;
        for w in self.rows.windows(2) {
            let (prev, next) = (w[0].median_distance, w[1].median_distance);
            if !(prev.is_finite() && next.is_finite()) {
                return false;
            }
            if next > prev {
                inversions += 1;
                if inversions > 1 || next > prev * (1.0 + tolerance) {
                    return false;
                }
            }
        }
        true
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Delay steps for `r` on a grid with spacing `dt`; `r` must be a grid multiple.
pub fn delay_cells(r: f64, dt: f64) -> Result<usize> {
    if r < 0.0 || (r > 0.0 && r < dt * (1.0 - 1e-9)) {
        return Err(Error::Parameter(format!("delay {r} is negative or below the grid spacing {dt}")));
    }
    let steps = (r / dt).round();
    if (steps * dt - r).abs() > 1e-9 * dt.max(r) {
        return Err(Error::Parameter(format!("delay {r} is not a multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}

/// For each `(r, seed)`: solves the delayed model and its present-state
/// version (`G(y, y)`, no delayed area) on the same driver, and compares them
/// in `ρ_{2ᾱ,2α,θ-α}` on `[0, T]`. Failed solves are flagged and skipped.
pub fn delay_convergence_experiment(setup: &ConvergenceSetup, opts: &SolverOptions) -> Result<ConvergenceReport> {
    let model = &setup.model;
    if !model.f.ignores_delay() {
        return Err(Error::Parameter("the drift must depend on the present state only".into()));
    }
    if matches!(setup.source, DriverSource::Sampled { .. }) {
        model.validate_for_convergence()?;
    } else {
        model.validate()?;
    }
    if setup.source.dim() != model.g.dim() {
        return Err(Error::Parameter("driver and noise coefficient dimensions differ".into()));
    }
    if setup.seeds.is_empty() || setup.r_list.is_empty() {
        return Err(Error::Parameter("need at least one seed and one delay".into()));
    }
    let dt = model.t_end / setup.n as f64;
    let steps: Vec<usize> = setup.r_list.iter().map(|&r| delay_cells(r, dt)).collect::<Result<_>>()?;
    let max_steps = *steps.iter().max().unwrap();
    let base = Grid::delayed(dt, setup.n, max_steps)?;
    let fines: Vec<Option<FinePath>> = setup.seeds.par_iter().map(|&s| setup.source.fine_path(s, &base)).collect::<Result<_>>()?;
    let undelayed = model.undelayed();

    let jobs: Vec<(usize, usize)> = (0..steps.len()).flat_map(|i| (0..setup.seeds.len()).map(move |j| (i, j))).collect();
    let cells: Vec<ConvergenceCell> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (r, seed) = (setup.r_list[i], setup.seeds[j]);
            let run = || -> Result<(f64, f64)> {
                let grid = Grid::delayed(dt, setup.n, steps[i])?;
                let driver = Arc::new(setup.source.driver(seed, &grid, fines[j].as_ref())?);
                let gap = area_gap(&driver, model.alpha_bar);
                let delayed = ModelSpec { r: grid.delay(), ..model.clone() };
                let present = ModelSpec { r: grid.delay(), ..undelayed.clone() };
                let phi = driver_linear_history(&driver, model.theta, &setup.phi, &setup.phi_slope)?;
                let y = solve_with(&delayed, &driver, &phi, None, opts)?;
                let z = solve_with(&present, &driver, &phi, None, opts)?;
                let d = controlled_distance(&y.solution, &z.solution, model.alpha_bar, model.alpha, model.theta - model.alpha)?;
                Ok((d, gap))
            };
            match run() {
                Ok((d, gap)) => ConvergenceCell { r, seed, distance: Some(d), area_gap: gap, failure: None },
                Err(e) => {
                    log::warn!("convergence cell r = {r}, seed = {seed} failed: {e}");
                    ConvergenceCell { r, seed, distance: None, area_gap: f64::NAN, failure: Some(e.to_string()) }
                }
            }
        })
        .collect();

    let rows: Vec<ConvergenceRow> = setup
        .r_list
        .iter()
        .zip(&steps)
        .map(|(&r, &r_steps)| {
            let mine: Vec<&ConvergenceCell> = cells.iter().filter(|c| c.r == r).collect();
            ConvergenceRow {
                r,
                r_steps,
                median_distance: median(mine.iter().filter_map(|c| c.distance).collect()),
                median_area_gap: median(mine.iter().filter(|c| c.failure.is_none()).map(|c| c.area_gap).collect()),
                failures: mine.iter().filter(|c| c.failure.is_some()).count(),
            }
        })
        .collect();
    let slope_of = |value: fn(&ConvergenceRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|w| w.r > 0.0 && value(w) > 0.0).map(|w| (w.r.ln(), value(w).ln())).collect();
        if pts.len() < 2 {
            f64::NAN
        } else {
            fit_slope(&pts)
        }
    };
    let distance_slope = slope_of(|w| w.median_distance);
    let area_gap_slope = slope_of(|w| w.median_area_gap);
    Ok(ConvergenceReport { rows, cells, distance_slope, area_gap_slope })
}

/// Which input is perturbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// `ψ = φ + ε c` with constant `c`
    InitialData { direction: SpectralVector },
    /// `Y = X + ε Z` on the fine path, `Z_t = (sin(2πt·f_i))_i`, re-enhanced
    Driver { frequency: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySetup {
    pub model: ModelSpec,
    pub source: DriverSource,
    pub seed: u64,
    pub n: usize,
    pub phi: SpectralVector,
    pub perturbation: Perturbation,
    /// perturbation sizes, any order
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub epsilon: f64,
    pub report: SolutionDistance,
    /// `distance / 𝓤`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// `distance / 𝓤` at the smallest perturbation
    pub constant: f64,
    /// largest `ratio / constant` over the rows
    pub worst_factor: f64,
}

impl StabilityReport {
    pub fn holds_within(&self, factor: f64) -> bool {
        self.worst_factor.is_finite() && self.worst_factor <= factor
    }
}

/// Solves the model for the base inputs and for each perturbation, reporting
/// `ρ_{2α̂,2α,θ}` against `𝓤` and fitting `C` on the smallest perturbation.
pub fn stability_experiment(setup: &StabilitySetup, opts: &SolverOptions) -> Result<StabilityReport> {
    let model = &setup.model;
    model.validate()?;
    if setup.epsilons.is_empty() || setup.epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Parameter("perturbation sizes must be positive".into()));
    }
    let dt = model.t_end / setup.n as f64;
    let grid = Grid::delayed(dt, setup.n, delay_cells(model.r, dt)?)?;
    let fine = setup.source.fine_path(setup.seed, &grid)?;
    let driver = Arc::new(setup.source.driver(setup.seed, &grid, fine.as_ref())?);
    let model = ModelSpec { r: grid.delay(), ..model.clone() };
    let phi = constant_history(&driver, model.theta, &setup.phi)?;
    let base = solve_with(&model, &driver, &phi, None, opts)?;

    let mut rows: Vec<StabilityRow> = setup
        .epsilons
        .par_iter()
        .map(|&eps| -> Result<StabilityRow> {
            let other = match &setup.perturbation {
                Perturbation::InitialData { direction } => {
                    let mut c = setup.phi.clone();
                    c.axpy(eps, direction);
                    let psi = constant_history(&driver, model.theta, &c)?;
                    solve_with(&model, &driver, &psi, None, opts)?
                }
                Perturbation::Driver { frequency } => {
                    let drv = match (&setup.source, fine.as_ref()) {
                        (DriverSource::Sampled { flavor, hurst, .. }, Some(f)) => {
                            let z = FinePath::from_fn(grid, f.subgrid_factor(), f.dim(), |t| {
                                (0..f.dim()).map(|i| (2.0 * std::f64::consts::PI * t * frequency * (i + 1) as f64).sin()).collect()
                            })?;
                            DelayedRoughDriver::from_fine_path(&f.perturbed(&z, eps)?, *flavor, setup.seed, *hurst)?
                        }
                        (DriverSource::Linear { slope, subgrid_factor }, _) => {
                            let d = slope.len();
                            let slope = slope.clone();
                            let freq = *frequency;
                            enhance_deterministic(
                                move |t| {
                                    slope
                                        .iter()
                                        .enumerate()
                                        .map(|(i, s)| s * t + eps * (2.0 * std::f64::consts::PI * t * freq * (i + 1) as f64).sin())
                                        .collect()
                                },
                                d,
                                &grid,
                                *subgrid_factor,
                            )?
                        }
                        _ => return Err(Error::Parameter("sampled source without a fine path".into())),
                    };
                    let drv = Arc::new(drv);
                    let psi = constant_history(&drv, model.theta, &setup.phi)?;
                    solve_with(&model, &drv, &psi, None, opts)?
                }
            };
            let report = solution_distance(&base, &other, model.alpha_hat, model.alpha, model.theta)?;
            Ok(StabilityRow { epsilon: eps, report, ratio: report.distance / report.u })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let constant = rows[0].ratio;
    let worst_factor = rows.iter().map(|r| r.ratio / constant).fold(0.0, f64::max);
    Ok(StabilityReport { rows, constant, worst_factor })
}

//! The five commands. Output files, relative to the output directory:
//!
//! | command      | files                                    |
//! |--------------|------------------------------------------|
//! | `gen-driver` | `driver-<seed>.drpd`, `driver-<seed>.json` |
//! | `validate`   | `validate.json`                          |
//! | `solve`      | `solve.csv`, `solve.json`                |
//! | `converge`   | `converge.csv`, `converge.json`          |
//! | `stability`  | `stability.csv`, `stability.json`        |
//!
//! CSV columns, in order:
//!
//! - `solve.csv`: `t, norm_theta, norm_theta_minus_alpha, picard_iterations`,
//!   one row per node of `[0, T]`; the iterations are those of the step
//!   ending at or containing the node (0 at `t = 0`).
//! - `converge.csv`: `r, median_distance, median_area_gap, distance_slope,
//!   area_gap_slope, r_steps, failures`, the slopes repeated on every row.
//! - `stability.csv`: `epsilon, distance, u, ratio, history_distance,
//!   driver_distance`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use drough::driver::{chen_residual, load_driver, write_driver, DelayedRoughDriver};
use drough::scale::{interpolation_inequality_check, SpectralVector};
use drough::semigroup::{apply_semigroup, smoothing_constants};
use drough::solver::{
    delay_cells, delay_convergence_experiment, driver_linear_history, solve_with, stability_experiment, ConvergenceReport,
    ConvergenceSetup, SolveSummary, StabilityReport, StabilitySetup,
};

use crate::config::ExperimentConfig;
use crate::output::{write_atomic, write_json, Csv, Provenance};
use crate::CliError;

pub struct Run {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub provenance: Provenance,
}

impl Run {
    pub fn new(config: ExperimentConfig, out: PathBuf) -> Self {
        let provenance = Provenance {
            config_hash: config.hash(),
            seed: config.driver.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        Self { config, out, provenance }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn delay_steps(&self) -> Result<usize, CliError> {
        let m = &self.config.model;
        Ok(delay_cells(m.r, m.t_end / self.config.driver.n as f64)?)
    }

    fn sample_driver(&self) -> Result<DelayedRoughDriver, CliError> {
        let d = &self.config.driver;
        Ok(d.source.build(d.seed, self.config.model.t_end, d.n, self.delay_steps()?)?)
    }

    /// The configured driver file if there is one, otherwise a fresh sample.
    fn driver(&self) -> Result<DelayedRoughDriver, CliError> {
        match &self.config.driver.file {
            Some(path) => load(path),
            None => self.sample_driver(),
        }
    }
}

fn load(path: &Path) -> Result<DelayedRoughDriver, CliError> {
    load_driver(path).map_err(|e| CliError::Io(format!("cannot load driver {}: {e}", path.display())))
}

#[derive(Serialize)]
struct Tagged<'a, T> {
    provenance: &'a Provenance,
    name: &'a str,
    #[serde(flatten)]
    body: T,
}

fn tagged<'a, T>(run: &'a Run, body: T) -> Tagged<'a, T> {
    Tagged { provenance: &run.provenance, name: &run.config.name, body }
}

#[derive(Serialize)]
struct DriverInfo {
    file: String,
    file_sha256: String,
    flavor: drough::driver::Flavor,
    hurst: f64,
    dim: usize,
    n_points: usize,
    delay_steps: usize,
    subgrid_factor: usize,
    chen_residual: f64,
    chen_residual_delayed: f64,
    chen_tolerance: f64,
}

pub fn gen_driver(run: &Run) -> Result<(), CliError> {
    let drv = run.sample_driver()?;
    let mut bytes = Vec::new();
    write_driver(&mut bytes, &drv)?;
    let seed = run.provenance.seed;
    let file = format!("driver-{seed}.drpd");
    write_atomic(&run.path(&file), &bytes)?;
    let (plain, delayed) = chen_residual(&drv);
    let info = DriverInfo {
        file_sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
        file: file.clone(),
        flavor: drv.flavor(),
        hurst: drv.hurst(),
        dim: drv.dim(),
        n_points: drv.grid().n_points(),
        delay_steps: drv.delay_steps(),
        subgrid_factor: drv.subgrid_factor(),
        chen_residual: plain,
        chen_residual_delayed: delayed,
        chen_tolerance: drv.chen_tolerance(),
    };
    write_json(&run.path(&format!("driver-{seed}.json")), &tagged(run, &info))?;
    println!("wrote {}", run.path(&file).display());
    println!("chen residual {plain:.3e}, delayed {delayed:.3e} (tolerance {:.3e})", info.chen_tolerance);
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self { name, passed: value <= threshold, value, threshold, detail: String::new() }
    }

    fn outcome<T, E: std::fmt::Display>(name: &'static str, r: &std::result::Result<T, E>) -> Self {
        Self {
            name,
            passed: r.is_ok(),
            value: if r.is_ok() { 0.0 } else { 1.0 },
            threshold: 0.0,
            detail: r.as_ref().err().map(|e| e.to_string()).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmoothingRow {
    pub sigma: f64,
    pub c0: f64,
    pub c1: f64,
}

#[derive(Serialize)]
struct ValidateReport {
    passed: bool,
    checks: Vec<Check>,
    smoothing_constants: Vec<SmoothingRow>,
}

pub fn validate(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let model = &cfg.model;
    let mut checks = Vec::new();
    checks.push(Check::outcome("model_constraints", &model.validate()));

    let mut drv = run.driver()?;
    if let Some(d) = cfg.validate.inject_area_defect {
        if d.cell >= drv.grid().n_cells() || d.i >= drv.dim() || d.j >= drv.dim() {
            return Err(CliError::Usage(format!("area defect {d:?} is outside the driver")));
        }
        drv = drv.with_perturbed_cell_area(d.cell, d.i, d.j, d.amount);
    }
    checks.push(Check::outcome("driver_matches_model", &model.check_driver(&drv)));
    let (plain, delayed) = chen_residual(&drv);
    checks.push(Check::at_most("chen_residual", plain, drv.chen_tolerance()));
    checks.push(Check::at_most("chen_residual_delayed", delayed, drv.chen_tolerance()));

    let k = cfg.initial.max_mode;
    let mut rng = ChaCha8Rng::seed_from_u64(run.provenance.seed);
    let samples: Vec<SpectralVector> = (0..64).map(|_| SpectralVector::random_real(&mut rng, k, 1.0)).collect();
    let thetas = [-1.0, -0.5, 0.0, 0.3, 1.0];
    let mut worst = 0.0f64;
    for v in &samples {
        for (a, &t1) in thetas.iter().enumerate() {
            for (b, &t2) in thetas.iter().enumerate().skip(a) {
                for &t3 in &thetas[b..] {
                    worst = worst.max(interpolation_inequality_check(v, t1, t2, t3)?);
                }
            }
        }
    }
    checks.push(Check::at_most("interpolation", worst, 1.0 + 1e-10));

    let mut defect = 0.0f64;
    for v in &samples {
        for (s, t) in [(0.1, 0.3), (0.25, 0.5), (0.01, 0.99)] {
            let two = apply_semigroup(&model.semigroup, &apply_semigroup(&model.semigroup, v, s)?, t)?;
            let one = apply_semigroup(&model.semigroup, v, s + t)?;
            defect = defect.max((&two - &one).norm(0.0) / (1.0 + v.norm(0.0)));
        }
    }
    checks.push(Check::at_most("semigroup_property", defect, 1e-14));

    let times: Vec<f64> = (0..=12).map(|j| 0.5f64.powi(j)).collect();
    let table = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&sigma| {
            let (c0, c1) = smoothing_constants(&model.semigroup, model.theta, sigma, k, &times)?;
            Ok(SmoothingRow { sigma, c0, c1 })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let finite = table.iter().all(|r| r.c0.is_finite() && r.c1.is_finite());
    checks.push(Check { name: "smoothing_constants", passed: finite, value: 0.0, threshold: 0.0, detail: String::new() });

    let slope = cfg.initial.slope();
    let history = driver_linear_history(&Arc::new(drv), model.theta, &cfg.initial.value(), &slope);
    checks.push(Check::outcome("initial_history", &history));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    for c in &checks {
        println!("{:<24} {}  {:.3e} (threshold {:.3e}) {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.value, c.threshold, c.detail);
    }
    let report = ValidateReport { passed: failed.is_empty(), checks, smoothing_constants: table };
    write_json(&run.path("validate.json"), &tagged(run, report))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    final_time: f64,
    final_norm_theta: f64,
    summary: &'a SolveSummary,
}

pub fn solve(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let model = &cfg.model;
    let drv = Arc::new(run.driver()?);
    let phi = driver_linear_history(&drv, model.theta, &cfg.initial.value(), &cfg.initial.slope())?;
    info!("solving {} on {} nodes", cfg.name, drv.grid().n_points());
    let rep = solve_with(model, &drv, &phi, None, &cfg.solver)?;
    let g = *drv.grid();
    let mut csv = Csv::new(&run.provenance, &["t", "norm_theta", "norm_theta_minus_alpha", "picard_iterations"]);
    let mut steps = rep.summary.steps.iter().peekable();
    for k in g.origin()..g.n_points() {
        while steps.peek().is_some_and(|s| s.end < k) {
            steps.next();
        }
        let iterations = if k == g.origin() { 0 } else { steps.peek().map_or(0, |s| s.iterations) };
        let y = rep.solution.y(k);
        csv.row(vec![g.time(k).into(), y.norm(model.theta).into(), y.norm(model.theta - model.alpha).into(), iterations.into()]);
    }
    csv.write(&run.path("solve.csv"))?;
    let last = g.n_points() - 1;
    let out = SolveOutput { final_time: g.time(last), final_norm_theta: rep.solution.y(last).norm(model.theta), summary: &rep.summary };
    write_json(&run.path("solve.json"), &tagged(run, out))?;
    println!(
        "t = {}: |y|_theta = {:.10e}, {} steps, {} Picard iterations",
        g.time(last),
        rep.solution.y(last).norm(model.theta),
        rep.summary.steps.len(),
        rep.summary.total_iterations
    );
    Ok(())
}

pub fn converge(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let block = cfg.converge.as_ref().ok_or_else(|| CliError::Usage("the config has no `converge` block".into()))?;
    let seed = run.provenance.seed;
    let setup = ConvergenceSetup {
        model: cfg.model.clone(),
        source: cfg.driver.source.clone(),
        n: cfg.driver.n,
        phi: cfg.initial.value(),
        phi_slope: cfg.initial.slope(),
        r_list: block.r_list.clone(),
        seeds: (seed..seed + block.n_seeds).collect(),
    };
    let rep: ConvergenceReport = delay_convergence_experiment(&setup, &cfg.solver)?;
    let mut csv = Csv::new(
        &run.provenance,
        &["r", "median_distance", "median_area_gap", "distance_slope", "area_gap_slope", "r_steps", "failures"],
    );
    for row in &rep.rows {
        csv.row(vec![
            row.r.into(),
            row.median_distance.into(),
            row.median_area_gap.into(),
            rep.distance_slope.into(),
            rep.area_gap_slope.into(),
            row.r_steps.into(),
            row.failures.into(),
        ]);
        println!("r = {:<8} median distance {:.4e}, area gap {:.4e}, failures {}", row.r, row.median_distance, row.median_area_gap, row.failures);
    }
    csv.write(&run.path("converge.csv"))?;
    write_json(&run.path("converge.json"), &tagged(run, &rep))?;
    println!("slopes: distance {:.3}, area gap {:.3}", rep.distance_slope, rep.area_gap_slope);
    Ok(())
}

pub fn stability(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let block = cfg.stability.as_ref().ok_or_else(|| CliError::Usage("the config has no `stability` block".into()))?;
    let setup = StabilitySetup {
        model: cfg.model.clone(),
        source: cfg.driver.source.clone(),
        seed: run.provenance.seed,
        n: cfg.driver.n,
        phi: cfg.initial.value(),
        perturbation: block.perturbation.resolve(cfg.initial.max_mode),
        epsilons: block.epsilons.clone(),
    };
    let rep: StabilityReport = stability_experiment(&setup, &cfg.solver)?;
    let mut csv = Csv::new(&run.provenance, &["epsilon", "distance", "u", "ratio", "history_distance", "driver_distance"]);
    for row in &rep.rows {
        let r = &row.report;
        csv.row(vec![row.epsilon.into(), r.distance.into(), r.u.into(), row.ratio.into(), r.history_distance.into(), r.driver_distance.into()]);
        println!("eps = {:<8} distance {:.4e}, U {:.4e}, ratio {:.4}", row.epsilon, r.distance, r.u, row.ratio);
    }
    csv.write(&run.path("stability.csv"))?;
    write_json(&run.path("stability.json"), &tagged(run, &rep))?;
    println!("C = {:.4}, worst factor {:.3}", rep.constant, rep.worst_factor);
    Ok(())
}

//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are never captured; exits nonzero if any check fails.

use std::process::ExitCode;
use std::sync::Arc;

use rayon::prelude::*;

use drough::controlled::DelayedControlledPath;
use drough::driver::{area_gap, chen_residual, enhance_deterministic, sample_fine_path, DelayedRoughDriver, Flavor};
use drough::nonlinearity::NonlinearitySpec;
use drough::scale::{Grid, SpectralVector};
use drough::semigroup::SemigroupSpec;
use drough::sewing::{convolution_as_controlled, fit_slope, local_expansion_error, rough_convolution};
use drough::solver::{
    constant_history, delay_convergence_experiment, presets, solve, solve_with, ConvergenceSetup, DriverSource, Perturbation,
    SolverOptions, StabilitySetup, stability_experiment,
};

type Outcome = (bool, String);

fn unit() -> SpectralVector {
    SpectralVector::from_trig(0, &[(1.0, 0.0)])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn spde_initial() -> SpectralVector {
    SpectralVector::from_trig(16, &[(0.5, 0.0), (1.0, 0.5), (0.0, 0.3), (0.2, 0.0)])
}

fn chen_exactness() -> Outcome {
    let g = Grid::delayed(1.0 / 256.0, 256, 64).unwrap();
    let mut drivers: Vec<(String, DelayedRoughDriver)> = Vec::new();
    for h in [0.35, 0.4, 0.45, 0.5] {
        let fine = sample_fine_path(11, h, &g, 2, 4).unwrap();
        drivers.push((format!("fbm H={h}"), DelayedRoughDriver::from_fine_path(&fine, Flavor::FbmSymmetric, 11, h).unwrap()));
    }
    for flavor in [Flavor::BmStratonovich, Flavor::BmIto] {
        let fine = sample_fine_path(12, 0.5, &g, 2, 4).unwrap();
        drivers.push((format!("{flavor:?}"), DelayedRoughDriver::from_fine_path(&fine, flavor, 12, 0.5).unwrap()));
    }
    drivers.push((
        "deterministic".into(),
        enhance_deterministic(|t| vec![(3.0 * t).sin(), t * (2.0 * t).cos()], 2, &g, 4).unwrap(),
    ));
    let mut worst_chen = 0.0f64;
    let mut worst_split = 0.0f64;
    for (_, drv) in &drivers {
        let scale = 1.0 + drv.sup_x().powi(2);
        let (a, b) = chen_residual(drv);
        worst_chen = worst_chen.max(a.max(b) / scale);
        let o = drv.grid().origin();
        let hi = drv.grid().n_points() - 1;
        for delayed in [false, true] {
            let lo = if delayed { o } else { 0 };
            for (s, t) in [(lo, hi), (lo + 3, hi - 5), (lo + 17, lo + 150)] {
                let whole = drv.reconstruct_area(s, t, delayed).unwrap();
                let shift = if delayed { drv.grid().delay_steps() } else { 0 };
                for u in (s + 1..t).step_by(7) {
                    let left = drv.reconstruct_area(s, u, delayed).unwrap();
                    let right = drv.reconstruct_area(u, t, delayed).unwrap();
                    for i in 0..2 {
                        for j in 0..2 {
                            let k = i * 2 + j;
                            let cross = drv.increment(s - shift, u - shift, i) * drv.increment(u, t, j);
                            worst_split = worst_split.max((whole[k] - left[k] - right[k] - cross).abs() / scale);
                        }
                    }
                }
            }
        }
    }
    (
        worst_chen <= 1e-12 && worst_split <= 1e-13,
        format!("{} drivers, worst relative Chen residual {worst_chen:.2e}, split invariance {worst_split:.2e}", drivers.len()),
    )
}

fn smooth_oracle() -> Outcome {
    let n = 512;
    let g = Grid::delayed(1.0 / n as f64, n, 0).unwrap();
    let drv = Arc::new(enhance_deterministic(|t| vec![t.sin()], 1, &g, 4).unwrap());
    let x: Vec<SpectralVector> = (0..=n).map(|k| unit().scaled(drv.x(k)[0])).collect();
    let p = DelayedControlledPath::controlled(drv.clone(), 0, 0.0, x, vec![vec![unit()]; n + 1]).unwrap();
    let mut worst = 0.0f64;
    for t in [1, 37, 256, n] {
        let out = rough_convolution(std::slice::from_ref(&p), &SemigroupSpec::zero(), t).unwrap();
        let expect = 0.5 * (drv.x(t)[0].powi(2) - drv.x(0)[0].powi(2));
        worst = worst.max((out.value.get(0).re - expect).abs());
    }
    (worst < 1e-6, format!("max |ζ_t - (X_t² - X_0²)/2| = {worst:.2e} at n = {n}"))
}

fn sewing_rate() -> Outcome {
    let alpha = 0.4;
    let n = 256;
    let g = Grid::delayed(1.0 / n as f64, n, 0).unwrap();
    let v0 = SpectralVector::from_trig(2, &[(0.2, 0.0), (1.0, 0.3)]);
    let v1 = SpectralVector::from_trig(2, &[(0.0, 0.0), (0.5, -0.4), (0.2, 0.1)]);
    let v2 = SpectralVector::from_trig(2, &[(0.3, 0.0), (0.0, 0.6)]);
    let mut lines = Vec::new();
    let mut ok = true;
    for beta in [0.0, alpha, 2.0 * alpha] {
        let slopes: Vec<f64> = (0..8u64)
            .into_par_iter()
            .map(|seed| {
                let fine = sample_fine_path(100 + seed, 0.45, &g, 1, 8).unwrap();
                let drv = Arc::new(DelayedRoughDriver::from_fine_path(&fine, Flavor::FbmSymmetric, seed, 0.45).unwrap());
                // y = v0 + v1 X + v2 X², y' = v1 + 2 v2 X
                let y = (0..=n)
                    .map(|k| {
                        let x = drv.x(k)[0];
                        let mut v = v0.clone();
                        v.axpy(x, &v1);
                        v.axpy(x * x, &v2);
                        v
                    })
                    .collect();
                let yp = (0..=n)
                    .map(|k| {
                        let mut v = v1.clone();
                        v.axpy(2.0 * drv.x(k)[0], &v2);
                        vec![v]
                    })
                    .collect();
                let p = DelayedControlledPath::controlled(drv, 0, 0.0, y, yp).unwrap();
                local_expansion_error(std::slice::from_ref(&p), &SemigroupSpec::laplacian(), alpha, beta, 256)
                    .unwrap()
                    .slope
            })
            .collect();
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        let need = 3.0 * alpha - beta - 0.15;
        ok &= mean >= need;
        lines.push(format!("β={beta:.1}: slope {mean:.3} ≥ {need:.3}"));
    }
    (ok, lines.join(", "))
}

fn ode_oracle() -> Outcome {
    let n = 512;
    let g = Grid::delayed(1.0 / n as f64, n, n / 4).unwrap();
    let drv = Arc::new(enhance_deterministic(|t| vec![t], 1, &g, 1).unwrap());
    let m = presets::decay_ode(0.25, 1.0);
    let rep = solve(&m, &drv, &constant_history(&drv, 0.0, &unit()).unwrap()).unwrap();
    let err = (g.origin()..g.n_points())
        .map(|k| (rep.solution.y(k).get(0).re - (-g.time(k)).exp()).abs())
        .fold(0.0, f64::max);
    (err < 1e-5, format!("max |y_t - e^-t| = {err:.2e} at n = {n}"))
}

fn method_of_steps() -> Outcome {
    let n = 512;
    let r = 0.25;
    let g = Grid::delayed(1.0 / n as f64, n, n / 4).unwrap();
    let drv = Arc::new(enhance_deterministic(|t| vec![t], 1, &g, 1).unwrap());
    let m = presets::pure_delay(r, 1.0);
    let rep = solve(&m, &drv, &constant_history(&drv, 0.0, &unit()).unwrap()).unwrap();
    let err = (g.origin()..g.n_points())
        .filter(|&k| g.time(k) <= 3.0 * r + 1e-12)
        .map(|k| (rep.solution.y(k).get(0).re - presets::pure_delay_exact(g.time(k), r)).abs())
        .fold(0.0, f64::max);
    (err < 1e-5, format!("max error on [0, 3r] = {err:.2e}"))
}

fn self_convergence() -> Outcome {
    let m = presets::heat_spde(0.25, 1.0, 1, 0.25, 0.25);
    let per_seed: Vec<Vec<f64>> = (0..16u64)
        .into_par_iter()
        .map(|seed| {
            let n = 1024;
            let g = Grid::delayed(1.0 / n as f64, n, n / 4).unwrap();
            let fine = sample_fine_path(200 + seed, 0.45, &g, 1, 2).unwrap();
            let mut drv = DelayedRoughDriver::from_fine_path(&fine, Flavor::FbmSymmetric, seed, 0.45).unwrap();
            let mut sols = Vec::new();
            for _ in 0..4 {
                let d = Arc::new(drv.clone());
                let phi = constant_history(&d, 0.0, &spde_initial()).unwrap();
                sols.push(solve(&m, &d, &phi).unwrap().solution);
                drv = drv.coarsened().unwrap();
            }
            // distances (128, 256), (256, 512), (512, 1024)
            (0..3)
                .rev()
                .map(|i| {
                    let (f, c) = (&sols[i], &sols[i + 1]);
                    (c.lo()..=c.hi()).map(|k| (f.y(2 * k) - c.y(k)).norm(m.theta)).fold(0.0, f64::max)
                })
                .collect()
        })
        .collect();
    let med: Vec<f64> = (0..3).map(|i| median(per_seed.iter().map(|d| d[i]).collect())).collect();
    let f1 = med[0] / med[1];
    let f2 = med[1] / med[2];
    (
        f1 >= 1.5 && f2 >= 1.5,
        format!("median sup distances {:.2e}, {:.2e}, {:.2e}; factors {f1:.2}, {f2:.2}", med[0], med[1], med[2]),
    )
}

fn area_gap_decay() -> Outcome {
    let n = 400;
    let alpha_tilde = 0.3;
    let rs = [0.2, 0.1, 0.05, 0.025];
    let med: Vec<f64> = rs
        .iter()
        .map(|&r| {
            median(
                (0..32u64)
                    .into_par_iter()
                    .map(|seed| {
                        let g = Grid::delayed(1.0 / n as f64, n, (r * n as f64).round() as usize).unwrap();
                        let fine = sample_fine_path(300 + seed, 0.5, &g, 2, 2).unwrap();
                        let d = DelayedRoughDriver::from_fine_path(&fine, Flavor::BmIto, seed, 0.5).unwrap();
                        area_gap(&d, alpha_tilde)
                    })
                    .collect(),
            )
        })
        .collect();
    let strict = med.windows(2).all(|w| w[1] < w[0]);
    let slope = fit_slope(&rs.iter().zip(&med).map(|(r, h)| (r.ln(), h.ln())).collect::<Vec<_>>());
    (strict && slope > 0.0, format!("medians {med:.3?}, slope {slope:.3}"))
}

fn delay_convergence() -> Outcome {
    let r_list = vec![0.2, 0.1, 0.05, 0.025];
    let brownian = ConvergenceSetup {
        model: presets::delayed_noise_spde(0.2, 1.0, 1),
        source: DriverSource::Sampled { flavor: Flavor::BmIto, hurst: 0.5, dim: 1, subgrid_factor: 2 },
        n: 400,
        phi: spde_initial(),
        phi_slope: vec![],
        r_list: r_list.clone(),
        seeds: (0..16).collect(),
    };
    let rep = delay_convergence_experiment(&brownian, &SolverOptions::default()).unwrap();
    let failures: usize = rep.rows.iter().map(|r| r.failures).sum();
    let kappa = 0.25;
    let smooth = ConvergenceSetup {
        model: presets::delayed_linear(0.2, 1.0, kappa),
        source: DriverSource::Linear { slope: vec![1.0], subgrid_factor: 1 },
        n: 400,
        phi: unit(),
        phi_slope: vec![unit().scaled(kappa)],
        r_list,
        seeds: vec![0],
    };
    let lin = delay_convergence_experiment(&smooth, &SolverOptions::default()).unwrap();
    let med: Vec<f64> = rep.rows.iter().map(|r| r.median_distance).collect();
    (
        rep.is_monotone(0.1) && failures == 0 && lin.distance_slope >= 0.9,
        format!(
            "brownian medians {med:.3?} (slope {:.3}, h(r) {:.3?}, {failures} failed); smooth linear slope {:.3}",
            rep.distance_slope,
            rep.rows.iter().map(|r| r.median_area_gap).collect::<Vec<_>>(),
            lin.distance_slope
        ),
    )
}

fn stability() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let perturbations = [
        ("initial data", Perturbation::InitialData { direction: SpectralVector::from_trig(16, &[(1.0, 0.0), (0.0, 1.0)]) }),
        ("driver", Perturbation::Driver { frequency: 1.0 }),
    ];
    for (name, perturbation) in perturbations {
        let setup = StabilitySetup {
            model: presets::heat_spde(0.25, 1.0, 1, 0.5, 0.5),
            source: DriverSource::Sampled { flavor: Flavor::FbmSymmetric, hurst: 0.45, dim: 1, subgrid_factor: 2 },
            seed: 400,
            n: 256,
            phi: spde_initial(),
            perturbation,
            epsilons: vec![1e-4, 1e-3, 1e-2],
        };
        let rep = stability_experiment(&setup, &SolverOptions::default()).unwrap();
        ok &= rep.holds_within(3.0);
        lines.push(format!("{name}: C = {:.3}, worst factor {:.3}", rep.constant, rep.worst_factor));
    }
    (ok, lines.join("; "))
}

fn structural_identities() -> Outcome {
    // ζ' = y for a rough convolution
    let g = Grid::delayed(1.0 / 128.0, 128, 32).unwrap();
    let fine = sample_fine_path(500, 0.45, &g, 2, 2).unwrap();
    let drv = Arc::new(DelayedRoughDriver::from_fine_path(&fine, Flavor::FbmSymmetric, 500, 0.45).unwrap());
    let c = [SpectralVector::from_trig(4, &[(0.0, 0.0), (1.0, 0.5)]), SpectralVector::from_trig(4, &[(0.3, 0.0), (0.0, -0.2)])];
    let paths: Vec<DelayedControlledPath> = (0..2)
        .map(|i| DelayedControlledPath::driver_linear(drv.clone(), 32, 160, 1.0, &SpectralVector::from_trig(4, &[(1.0 + i as f64, 0.0)]), &c).unwrap())
        .collect();
    let conv = convolution_as_controlled(&paths, &SemigroupSpec::laplacian(), 0.4, 0.35, 0.2).unwrap();
    let zeta_prime = (32..=160).all(|t| (0..2).all(|i| conv.path.y_prime(t)[i] == *paths[i].y(t)));

    // y' = G(y, y_{t-r}) on an accepted solution
    let m = presets::heat_spde(g.delay(), 1.0, 2, 0.5, 0.5);
    let phi = constant_history(&drv, 0.0, &spde_initial()).unwrap();
    let rep = solve(&m, &drv, &phi).unwrap();
    let y = &rep.solution;
    let r = g.delay_steps();
    let self_derivative = (y.lo()..=y.hi()).all(|k| {
        let z = if k - r < y.lo() { phi.y(k - r) } else { y.y(k - r) };
        m.g.eval(y.y(k), z).as_slice() == y.y_prime(k)
    });

    // r = 0: delayed areas and the delayed solve coincide with the plain ones
    let g0 = Grid::delayed(1.0 / 128.0, 128, 0).unwrap();
    let fine0 = sample_fine_path(501, 0.45, &g0, 2, 2).unwrap();
    let drv0 = Arc::new(DelayedRoughDriver::from_fine_path(&fine0, Flavor::FbmSymmetric, 501, 0.45).unwrap());
    let areas = drv0.cell_areas() == drv0.cell_delayed_areas()
        && (0..=128).step_by(9).all(|s| drv0.reconstruct_area(s, 128, false).unwrap() == drv0.reconstruct_area(s, 128, true).unwrap());
    let mut m0 = presets::heat_spde(0.0, 1.0, 2, 0.0, 1.0);
    m0.f = NonlinearitySpec::smooth_bounded(4, vec![0.0], vec![1.0], vec![0.5]);
    let phi0 = constant_history(&drv0, 0.0, &spde_initial()).unwrap();
    let opts = SolverOptions::default();
    let a = solve_with(&m0, &drv0, &phi0, None, &opts).unwrap();
    let b = solve_with(&m0.undelayed(), &drv0, &phi0, None, &opts).unwrap();
    let bitwise = a.solution.values() == b.solution.values();

    (
        zeta_prime && self_derivative && areas && bitwise,
        format!("ζ' = y: {zeta_prime}, y' = G(y, y_(t-r)): {self_derivative}, r = 0 areas: {areas}, r = 0 solve: {bitwise}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Chen exactness", chen_exactness),
        ("smooth-path oracle", smooth_oracle),
        ("sewing rate", sewing_rate),
        ("ODE oracle", ode_oracle),
        ("method-of-steps oracle", method_of_steps),
        ("self-convergence", self_convergence),
        ("area gap decay", area_gap_decay),
        ("delay convergence", delay_convergence),
        ("stability response", stability),
        ("structural identities", structural_identities),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check();
        println!("{} {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
        if !ok {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}

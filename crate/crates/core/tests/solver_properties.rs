use std::sync::Arc;

use proptest::prelude::*;

use drough::driver::Flavor;
use drough::scale::SpectralVector;
use drough::solver::{
    constant_history, delay_convergence_experiment, presets, solve, solve_with, stability_experiment, ConvergenceSetup,
    DriverSource, Perturbation, SolverOptions, StabilitySetup,
};

fn initial() -> SpectralVector {
    SpectralVector::from_trig(8, &[(0.3, 0.0), (1.0, 0.2), (0.0, 0.4)])
}

fn scalar_one() -> SpectralVector {
    SpectralVector::from_trig(0, &[(1.0, 0.0)])
}

#[test]
fn zero_delay_convergence_cell_is_exact() {
    let setup = ConvergenceSetup {
        model: presets::delayed_noise_spde(0.0, 1.0, 1),
        source: DriverSource::Sampled { flavor: Flavor::BmStratonovich, hurst: 0.5, dim: 1, subgrid_factor: 2 },
        n: 64,
        phi: initial(),
        phi_slope: Vec::new(),
        r_list: vec![0.0],
        seeds: vec![1, 2],
    };
    let rep = delay_convergence_experiment(&setup, &SolverOptions::default()).unwrap();
    for cell in &rep.cells {
        assert!(cell.failure.is_none(), "{cell:?}");
        assert!(cell.distance.unwrap() <= 1e-9, "{cell:?}");
    }
}

#[test]
fn driver_perturbations_grow_with_their_size() {
    let setup = StabilitySetup {
        model: presets::heat_spde(0.25, 1.0, 1, 0.5, 0.5),
        source: DriverSource::Sampled { flavor: Flavor::FbmSymmetric, hurst: 0.45, dim: 1, subgrid_factor: 2 },
        seed: 21,
        n: 128,
        phi: initial(),
        perturbation: Perturbation::Driver { frequency: 2.0 },
        epsilons: vec![1e-4, 1e-3, 1e-2, 1e-1],
    };
    let rep = stability_experiment(&setup, &SolverOptions::default()).unwrap();
    let d: Vec<f64> = rep.rows.iter().map(|r| r.report.distance).collect();
    assert!(d.windows(2).all(|w| w[0] < w[1]), "{d:?}");
    assert!(rep.holds_within(3.0), "{rep:?}");
}

#[test]
fn pure_delay_error_shrinks_under_refinement() {
    let err = |n: usize| {
        let src = DriverSource::Linear { slope: vec![1.0], subgrid_factor: 1 };
        let drv = Arc::new(src.build(0, 1.0, n, n / 4).unwrap());
        let phi = constant_history(&drv, 0.0, &scalar_one()).unwrap();
        let rep = solve(&presets::pure_delay(0.25, 1.0), &drv, &phi).unwrap();
        let g = *drv.grid();
        (g.origin()..g.n_points())
            .map(|k| (rep.solution.y(k).get(0).re - presets::pure_delay_exact(g.time(k), 0.25)).abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(64), err(128));
    assert!(fine < 1e-3, "{fine}");
    assert!(fine < coarse, "{coarse} -> {fine}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn restarting_anywhere_reproduces_the_solution(seed in 0u64..100, split in 0.05f64..0.95) {
        let src = DriverSource::Sampled { flavor: Flavor::FbmSymmetric, hurst: 0.45, dim: 1, subgrid_factor: 2 };
        let drv = Arc::new(src.build(seed, 1.0, 64, 16).unwrap());
        let model = presets::heat_spde(0.25, 1.0, 1, 0.5, 0.5);
        let opts = SolverOptions::default();
        let phi = constant_history(&drv, 0.0, &initial()).unwrap();
        let whole = solve_with(&model, &drv, &phi, None, &opts).unwrap();
        let g = *drv.grid();
        let k = g.origin() + 1 + ((g.n_cells() - g.origin() - 2) as f64 * split) as usize;
        let first = solve_with(&model, &drv, &phi, Some(k), &opts).unwrap();
        let second = solve_with(&model, &drv, &first.history_at(k).unwrap(), None, &opts).unwrap();
        let scale = 1.0 + whole.summary.sup_norms.iter().fold(0.0f64, |a, b| a.max(*b));
        for t in k..g.n_points() {
            prop_assert!((whole.solution.y(t) - second.solution.y(t)).norm(0.0) <= 1e-8 * scale);
        }
    }
}

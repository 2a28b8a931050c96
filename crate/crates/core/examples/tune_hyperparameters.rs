// Marginal-likelihood tuning of the DC hyperparameters with multi-start Nelder-Mead.

use std::sync::Arc;

use gfrf::covariance::{DcHyperparameters, OrderHyper};
use gfrf::estimator::{map_estimate, relative_gfrf_error, EstimationProblem, EstimationSetup};
use gfrf::experiment::{default_front_filter, true_gfrf_on_grid};
use gfrf::signals::{dft, generate_multisine, MultisineSpec};
use gfrf::tuning::{tune_hyperparameters, TuningOptions};
use gfrf::volterra::{kernel_from_blocks, simulate_steady_state, BlockSystem};

pub fn run_example() -> gfrf::Result<()> {
    let kernels = [kernel_from_blocks(&BlockSystem::hammerstein(
        default_front_filter(),
    ))?];
    let u = generate_multisine(&MultisineSpec::consecutive(55, 13, 1.0, 2))?;
    let y = simulate_steady_state(&kernels, &u)?;
    let setup = Arc::new(EstimationSetup::new(&dft(&u), &dft(&y), &[(2, 20)])?);
    let truth = vec![(2, true_gfrf_on_grid(&kernels, &setup.models[0].freq, 55))];

    let eta0 = DcHyperparameters::new(vec![OrderHyper::shared(2, 1.0, 0.7, 0.5)], 0.0)?;
    let opts = TuningOptions {
        budget: 600,
        starts: 5,
        seed: 2,
        tune_noise: false,
        ..TuningOptions::default()
    };
    let tuned = tune_hyperparameters(&setup, &eta0, &opts)?;
    let h = &tuned.hyper.orders[0];
    println!(
        "best start {} after {} evaluations: c {:.3e} lambda {:.4} rho {:.4} objective {:.6e}",
        tuned.best_start, tuned.evaluations, h.scale, h.decay[0], h.correlation[0], tuned.objective
    );
    for start in 0..opts.starts {
        let best = tuned
            .trace
            .iter()
            .filter(|t| t.start == start)
            .filter_map(|t| t.objective)
            .fold(f64::INFINITY, f64::min);
        println!("  start {start}: best objective {best:.6e}");
    }

    for (label, hyper) in [("starting", eta0), ("tuned", tuned.hyper)] {
        let est = map_estimate(&EstimationProblem::new(setup.clone(), hyper)?)?;
        println!(
            "{label:<8} relative error {:.3}%",
            100.0 * relative_gfrf_error(&est, &truth)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> gfrf::Result<()> {
    run_example()
}

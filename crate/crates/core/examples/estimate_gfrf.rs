// Regularized GFRF estimation on the 55-point, 13-tone benchmark for the three
// block structures, with the prior held at its starting hyperparameters.

use std::sync::Arc;

use gfrf::covariance::{DcHyperparameters, OrderHyper};
use gfrf::estimator::{map_estimate, relative_gfrf_error, EstimationProblem, EstimationSetup};
use gfrf::experiment::{default_systems, true_gfrf_on_grid};
use gfrf::signals::{dft, generate_multisine, MultisineSpec};
use gfrf::volterra::{kernel_from_blocks, simulate_steady_state};

pub fn run_example() -> gfrf::Result<()> {
    let spec = MultisineSpec::consecutive(55, 13, 1.0, 1);
    let u = generate_multisine(&spec)?;
    for sys in default_systems() {
        let kernels = [kernel_from_blocks(&sys)?];
        let y = simulate_steady_state(&kernels, &u)?;
        let setup = Arc::new(EstimationSetup::new(&dft(&u), &dft(&y), &[(2, 20)])?);
        let hyper = DcHyperparameters::new(vec![OrderHyper::shared(2, 1.0, 0.7, 0.5)], 0.0)?;
        let estimate = map_estimate(&EstimationProblem::new(setup.clone(), hyper)?)?;
        let m = &setup.models[0];
        let truth = true_gfrf_on_grid(&kernels, &m.freq, 55);
        let err = relative_gfrf_error(&estimate, &[(2, truth)])?;
        println!(
            "{:<18} {} equations, {} parameters, relative error {:.3}%",
            format!("{:?}", sys.structure),
            setup.y.len(),
            setup.n_parameters(),
            100.0 * err
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> gfrf::Result<()> {
    run_example()
}

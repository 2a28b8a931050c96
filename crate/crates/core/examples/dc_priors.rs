// DC-kernel priors in time and their augmented frequency-domain counterparts.

use gfrf::covariance::{build_time_prior, dc_matrix_1d, to_frequency_domain, OrderHyper};
use gfrf::linalg::{eigen_range, eigen_range_real};
use gfrf::mdft::{build_symmetry_reduction, reduced_transform, Grid};
use gfrf::signals::omega_set;

pub fn run_example() -> gfrf::Result<()> {
    let p1 = dc_matrix_1d(1.0, 0.7, 0.5, 5)?;
    println!("first-order DC prior, memory 5:\n{p1:.4}");

    let n = 16;
    let omega = omega_set(&[1, 2, 3]);
    for (decay, corr) in [(0.5, 0.0), (0.7, 0.5), (0.9, 0.9)] {
        let hyper = OrderHyper::shared(2, 1.0, decay, corr);
        let prior = build_time_prior(2, 6, &hyper)?;
        let freq = build_symmetry_reduction(2, &Grid::Frequency(omega.clone()))?;
        let f = reduced_transform(n, &freq, &prior.reduction)?;
        let sigma = to_frequency_domain(&prior.matrix, &f)?;
        let (lo, hi) = eigen_range_real(&prior.matrix);
        let (slo, shi) = eigen_range(&sigma.sigma());
        println!(
            "lambda {decay:.1} rho {corr:.1}: P_2 {}x{} eig [{lo:.2e}, {hi:.2e}]  Sigma_2 {}x{} eig [{slo:.2e}, {shi:.2e}]",
            prior.matrix.nrows(),
            prior.matrix.ncols(),
            sigma.dim(),
            sigma.dim()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> gfrf::Result<()> {
    run_example()
}

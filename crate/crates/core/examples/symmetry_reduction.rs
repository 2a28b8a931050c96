// Multidimensional DFT matrix and the symmetry reduction of GFRF parameters.

use gfrf::mdft::{apply_mdft, build_fourier_matrix, build_symmetry_reduction, Grid};
use gfrf::signals::{omega_set, C64};
use gfrf::volterra::VolterraKernel;
use nalgebra::DVector;

pub fn run_example() -> gfrf::Result<()> {
    let h = VolterraKernel::from_fn(2, 4, |i| 0.5f64.powi((i[0] + i[1]) as i32))?;
    let f = build_fourier_matrix(2, 4)?;
    let via_matrix =
        &f.matrix * DVector::from_iterator(16, h.values().iter().map(|&v| C64::new(v, 0.0)));
    let direct = apply_mdft(&h, 4)?;
    let dev = via_matrix
        .iter()
        .zip(&direct.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    println!(
        "F_2 is {}x{}, deviation from the direct transform {dev:.2e}",
        f.matrix.nrows(),
        f.matrix.ncols()
    );

    for (tones, order) in [(3, 2), (13, 2), (3, 3)] {
        let omega = omega_set(&(1..=tones).collect::<Vec<_>>());
        let red = build_symmetry_reduction(order, &Grid::Frequency(omega.clone()))?;
        println!(
            "{tones:>2} tones, order {order}: {:>5} grid points, {:>4} permutation classes, {:>4} parameters, {} self-conjugate",
            omega.len().pow(order as u32),
            red.representatives.len(),
            red.n_parameters(),
            red.self_conjugate().len()
        );
    }

    let lags = build_symmetry_reduction(2, &Grid::Lag(4))?;
    println!(
        "memory 4 lag grid: {} unique lags",
        lags.representatives.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> gfrf::Result<()> {
    run_example()
}

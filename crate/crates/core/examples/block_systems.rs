// Second-order kernels of Wiener, Hammerstein and Wiener-Hammerstein systems,
// and the steady-state output predicted from their GFRFs.

use gfrf::experiment::default_systems;
use gfrf::mdft::gfrf_at;
use gfrf::signals::{dft, generate_multisine, MultisineSpec, C64};
use gfrf::volterra::{kernel_from_blocks, simulate_steady_state};

pub fn run_example() -> gfrf::Result<()> {
    let spec = MultisineSpec::consecutive(32, 5, 1.0, 3);
    let u = generate_multisine(&spec)?;
    let uk = dft(&u);
    let n = spec.n_points;
    for sys in default_systems() {
        let h = kernel_from_blocks(&sys)?;
        let y = dft(&simulate_steady_state(std::slice::from_ref(&h), &u)?);
        // Y(k) = 1/N sum_{k1} H_2(k1, k - k1) U(k1) U(k - k1)
        let predicted: Vec<C64> = (0..n as i64)
            .map(|k| {
                (0..n as i64)
                    .map(|k1| gfrf_at(&h, n, &[k1, k - k1]) * uk.at(k1) * uk.at(k - k1))
                    .sum::<C64>()
                    / n as f64
            })
            .collect();
        let err = predicted
            .iter()
            .zip(&y.bins)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        println!(
            "{:<20} memory {:>2} symmetric {} diagonal {:<5} |Y - hyperplane sum| {err:.2e}",
            format!("{:?}", sys.structure),
            h.memory(),
            h.is_symmetric(),
            h.is_diagonal()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> gfrf::Result<()> {
    run_example()
}

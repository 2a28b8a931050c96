// Exact split of a second-order output spectrum into steady state and the three
// transient terms, for zero, random and periodic pre-histories.

use gfrf::experiment::default_front_filter;
use gfrf::signals::{dft, generate_multisine, MultisineSpec, TimeSignal};
use gfrf::transient::{relative_deviation, transient_terms, verify_t1_equals_t2};
use gfrf::volterra::{kernel_from_blocks, simulate_with_history, BlockSystem};

fn peak(v: &[gfrf::C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn run_example() -> gfrf::Result<()> {
    let h = kernel_from_blocks(&BlockSystem::wiener(default_front_filter()))?;
    let window = generate_multisine(&MultisineSpec::consecutive(40, 8, 1.0, 5))?;
    let random: Vec<f64> = (0..9).map(|t| ((t * 7 % 5) as f64 - 2.0) / 2.0).collect();
    let inputs = [
        ("zero", window.with_zero_history(9)),
        (
            "random",
            TimeSignal::with_history(random, window.window().to_vec())?,
        ),
        ("periodic", window.with_periodic_history(9)),
    ];
    for (label, u) in inputs {
        let y = dft(&simulate_with_history(std::slice::from_ref(&h), &u)?);
        let d = transient_terms(&h, &u)?;
        let eq = verify_t1_equals_t2(&d)?;
        println!(
            "{label:<8} |SS| {:.3e} |T1| {:.3e} |T3| {:.3e} |T| {:.3e}  residual {:.1e}  T1-T2 {:.1e}",
            peak(&d.ss),
            peak(&d.t1),
            peak(&d.t3),
            peak(&d.total),
            relative_deviation(&d.output(), &y.bins),
            eq.max_relative_deviation
        );
    }
    let d = transient_terms(&h, &window.with_zero_history(9))?;
    println!(
        "surfaces: h*_1 {}x{}, h*_2 {}x{}, h*_3 {}x{}",
        d.h_star_1.nrows(),
        d.h_star_1.ncols(),
        d.h_star_2.nrows(),
        d.h_star_2.ncols(),
        d.h_star_3.nrows(),
        d.h_star_3.ncols()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> gfrf::Result<()> {
    run_example()
}

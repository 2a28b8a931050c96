// Hammerstein transients: the cross term vanishes and, with zero initial
// conditions, the output is the steady state minus T3.

use gfrf::experiment::default_front_filter;
use gfrf::signals::{dft, generate_multisine, MultisineSpec, TimeSignal, C64};
use gfrf::transient::{hammerstein_terms, relative_deviation, transient_terms};
use gfrf::volterra::{kernel_from_blocks, simulate_with_history, BlockSystem};

pub fn run_example() -> gfrf::Result<()> {
    let h = kernel_from_blocks(&BlockSystem::hammerstein(default_front_filter()))?;
    let window = generate_multisine(&MultisineSpec::consecutive(48, 10, 1.0, 9))?;
    let history: Vec<f64> = (0..9).map(|t| (0.9 * t as f64).sin()).collect();
    for (label, u) in [
        ("zero", window.with_zero_history(9)),
        (
            "nonzero",
            TimeSignal::with_history(history, window.window().to_vec())?,
        ),
    ] {
        let y = dft(&simulate_with_history(std::slice::from_ref(&h), &u)?).bins;
        let d = transient_terms(&h, &u)?;
        let t = hammerstein_terms(&h, &u)?;
        let model: Vec<C64> = (0..y.len())
            .map(|k| d.ss[k] - d.t3[k] + t.r_h[k] * 2.0)
            .collect();
        let peak = |v: &[C64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        println!(
            "{label:<8} max|Q_H| {:.1e}  max|R_H| {:.3e}  |Y - (SS - T3 + 2 R_H)| rel {:.1e}",
            peak(&t.q_h),
            peak(&t.r_h),
            relative_deviation(&model, &y)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> gfrf::Result<()> {
    run_example()
}

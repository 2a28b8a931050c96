// Random-phase multisine: excited bins, leakage-free DFT and the excitation bound.

use gfrf::signals::{
    check_excitation_bound, dft, excited_output_indices, generate_multisine, idft, MultisineSpec,
};

pub fn run_example() -> gfrf::Result<()> {
    let spec = MultisineSpec::consecutive(55, 13, 1.0, 1);
    let u = generate_multisine(&spec)?;
    let spectrum = dft(&u);
    for k in 0..16 {
        println!("U({k:>2}) = {:>10.6}", spectrum.bins[k].norm());
    }

    let back = idft(&spectrum)?;
    let err = u
        .window()
        .iter()
        .zip(back.window())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("inverse DFT round trip max error {err:.2e}");

    let ky = excited_output_indices(&spec.excited_indices, 2, spec.n_points)?;
    println!("second-order output bins: {} ({:?}..)", ky.len(), &ky[..4]);

    // 14 tones at N = 55 would fold second-order products back onto each other
    match check_excitation_bound(&(1..=14).collect::<Vec<_>>(), 2, 55) {
        Err(e) => println!("rejected: {e}"),
        Ok(()) => println!("14 tones accepted"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> gfrf::Result<()> {
    run_example()
}

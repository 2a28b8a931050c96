use gfrf::signals::{dft, dft_real, TimeSignal, C64};
use gfrf::transient::{
    hammerstein_terms, linear_transient, relative_deviation, steady_state_spectrum,
    transient_terms, verify_t1_equals_t2,
};
use gfrf::volterra::{simulate_steady_state, simulate_with_history, VolterraKernel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn case(
    seed: u64,
    n: usize,
    memory: usize,
    n_pre: usize,
    zero: bool,
) -> (VolterraKernel, TimeSignal) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = VolterraKernel::new(2, memory, random_vec(&mut rng, memory * memory))
        .unwrap()
        .symmetrize();
    let history = if zero {
        vec![0.0; n_pre]
    } else {
        random_vec(&mut rng, n_pre)
    };
    let u = TimeSignal::with_history(history, random_vec(&mut rng, n)).unwrap();
    (h, u)
}

#[test]
fn linear_fir_transient_matches_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = random_vec(&mut rng, 6);
    let u = TimeSignal::new(random_vec(&mut rng, 16))
        .unwrap()
        .with_zero_history(5);
    let y: Vec<f64> = (0..16i64)
        .map(|t| (0..6).map(|s| h[s] * u.at(t - s as i64)).sum())
        .collect();
    let yk = dft_real(&y).bins;
    let hk = dft_real(
        &h.iter()
            .copied()
            .chain(std::iter::repeat(0.0))
            .take(16)
            .collect::<Vec<_>>(),
    )
    .bins;
    let uk = dft(&u).bins;
    let expected: Vec<C64> = (0..16).map(|k| yk[k] - hk[k] * uk[k]).collect();
    let t = linear_transient(&h, &u).unwrap();
    assert!(relative_deviation(&t, &expected) < 1e-10);
}

#[test]
fn steady_state_spectrum_matches_periodic_simulation() {
    let (h, u) = case(3, 20, 5, 4, false);
    let window = TimeSignal::new(u.window().to_vec()).unwrap();
    let ss = steady_state_spectrum(&h, &dft(&window)).unwrap();
    let y = dft(&simulate_steady_state(std::slice::from_ref(&h), &window).unwrap()).bins;
    assert!(relative_deviation(&ss, &y) < 1e-9);
}

#[test]
fn nonzero_history_hammerstein_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = random_vec(&mut rng, 5);
    let h = VolterraKernel::from_fn(2, 5, |i| if i[0] == i[1] { g[i[0]] } else { 0.0 }).unwrap();
    let u = TimeSignal::with_history(random_vec(&mut rng, 4), random_vec(&mut rng, 16)).unwrap();
    let y = dft(&simulate_with_history(std::slice::from_ref(&h), &u).unwrap()).bins;
    let d = transient_terms(&h, &u).unwrap();
    let t = hammerstein_terms(&h, &u).unwrap();
    let model: Vec<C64> = (0..16)
        .map(|k| d.ss[k] - d.t3[k] + t.r_h[k] * 2.0)
        .collect();
    assert!(relative_deviation(&model, &y) < 1e-9);
    assert!(t.r_h.iter().any(|z| z.norm() > 1e-6));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_and_t1_t2(seed in any::<u64>(), n in 4usize..=32, memory in 1usize..=8, extra in 0usize..4, zero in any::<bool>()) {
        prop_assume!(memory <= n);
        let (h, u) = case(seed, n, memory, (memory - 1 + extra).min(n), zero);
        let y = dft(&simulate_with_history(std::slice::from_ref(&h), &u).unwrap()).bins;
        let d = transient_terms(&h, &u).unwrap();
        prop_assert!(relative_deviation(&d.output(), &y) < 1e-9);
        prop_assert!(verify_t1_equals_t2(&d).unwrap().max_relative_deviation < 1e-9);
        prop_assert_eq!(&d.h_star_2, &d.h_star_1.transpose());
    }

    #[test]
    fn periodic_history_has_no_transient(seed in any::<u64>(), n in 4usize..=24, memory in 1usize..=6) {
        prop_assume!(memory <= n);
        let (h, u) = case(seed, n, memory, 0, true);
        let u = u.with_periodic_history(memory - 1);
        let d = transient_terms(&h, &u).unwrap();
        prop_assert!(d.t1.iter().chain(&d.t2).chain(&d.t3).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn hammerstein_cross_term_vanishes(seed in any::<u64>(), n in 4usize..=32, memory in 1usize..=8, zero in any::<bool>()) {
        prop_assume!(memory <= n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_vec(&mut rng, memory);
        let h = VolterraKernel::from_fn(2, memory, |i| if i[0] == i[1] { g[i[0]] } else { 0.0 }).unwrap();
        let history = if zero { vec![0.0; memory - 1] } else { random_vec(&mut rng, memory - 1) };
        let u = TimeSignal::with_history(history, random_vec(&mut rng, n)).unwrap();
        let d = transient_terms(&h, &u).unwrap();
        let t = hammerstein_terms(&h, &u).unwrap();
        let ss_peak = d.ss.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(t.q_h.iter().all(|z| z.norm() < 1e-9 * ss_peak.max(f64::MIN_POSITIVE)));
        if zero {
            prop_assert!(t.r_h.iter().all(|z| z.norm() == 0.0));
        }
    }
}

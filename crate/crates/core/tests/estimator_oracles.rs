use std::sync::Arc;

use gfrf::covariance::{DcHyperparameters, OrderHyper};
use gfrf::estimator::{
    map_estimate, negative_log_marginal_likelihood, objective_at, output_covariance,
    EstimationProblem, EstimationSetup,
};
use gfrf::linalg::{eigen_range, CMatrix, CVector};
use gfrf::signals::{dft, generate_multisine, MultisineSpec, TimeSignal, C64};
use gfrf::tuning::{tune_with, TuningOptions};
use gfrf::volterra::{simulate_steady_state, VolterraKernel};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn wiener_setup(n: usize, tones: usize, seed: u64, noise_sd: f64) -> Arc<EstimationSetup> {
    let g = [1.0, -0.5, 0.25];
    let h = VolterraKernel::from_fn(2, 3, |i| g[i[0]] * g[i[1]]).unwrap();
    let u = generate_multisine(&MultisineSpec::consecutive(n, tones, 1.0, seed)).unwrap();
    let mut y = simulate_steady_state(&[h], &u).unwrap().window().to_vec();
    if noise_sd > 0.0 {
        let normal = Normal::new(0.0, noise_sd).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    let y = TimeSignal::new(y).unwrap();
    Arc::new(EstimationSetup::new(&dft(&u), &dft(&y), &[(2, 4)]).unwrap())
}

fn hyper(noise: f64) -> DcHyperparameters {
    DcHyperparameters::new(vec![OrderHyper::shared(2, 1.3, 0.6, 0.4)], noise).unwrap()
}

fn stacked(problem: &EstimationProblem) -> CVector {
    let est = map_estimate(problem).unwrap();
    CVector::from_vec(est.orders.iter().flat_map(|o| o.values.clone()).collect())
}

#[test]
fn noiseless_output_covariance_is_psd() {
    let problem = EstimationProblem::new(wiener_setup(16, 3, 1, 0.0), hyper(0.0)).unwrap();
    let (lo, hi) = eigen_range(&output_covariance(&problem).unwrap());
    assert!(lo >= -1e-10 * hi);
}

#[test]
fn objective_matches_dense_determinant() {
    let problem = EstimationProblem::new(wiener_setup(8, 1, 4, 0.05), hyper(0.3)).unwrap();
    let s = output_covariance(&problem).unwrap();
    let y = problem.setup.augmented_y();
    let log_det: f64 = s
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.ln())
        .sum();
    let z = s.clone().lu().solve(&y).unwrap();
    let dense = (y.adjoint() * z)[(0, 0)].re + log_det;
    let value = negative_log_marginal_likelihood(&problem).unwrap();
    assert!((value - dense).abs() < 1e-8 * dense.abs());
}

#[test]
fn objective_scaling_identity() {
    let setup = wiener_setup(16, 3, 2, 0.05);
    let base = EstimationProblem::new(setup.clone(), hyper(0.2)).unwrap();
    let y = setup.augmented_y();
    let s = output_covariance(&base).unwrap();
    let quad = (y.adjoint() * s.clone().lu().solve(&y).unwrap())[(0, 0)].re;
    let log_det: f64 = s.symmetric_eigenvalues().iter().map(|l| l.ln()).sum();
    let dim = y.len() as f64;
    for alpha in [0.1, 3.0, 40.0] {
        let mut h = base.hyper.scaled(alpha);
        h.noise_variance *= alpha;
        let scaled =
            negative_log_marginal_likelihood(&EstimationProblem::new(setup.clone(), h).unwrap())
                .unwrap();
        let expected = quad / alpha + log_det + dim * alpha.ln();
        assert!((scaled - expected).abs() < 1e-9 * expected.abs().max(1.0));
    }
}

#[test]
fn output_covariance_monte_carlo() {
    let setup = wiener_setup(8, 1, 3, 0.0);
    let noise = 0.05;
    let problem = EstimationProblem::new(setup.clone(), hyper(noise)).unwrap();
    let sigma_y = output_covariance(&problem).unwrap();
    // sample in time, map through the full regressor rather than G = phi F
    let l = problem.priors[0].clone().cholesky().unwrap().l();
    let phi = setup.regressor.augmented();
    let f = &setup.models[0].transform;
    let r = setup.y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let samples = 100_000;
    let mut acc = CMatrix::zeros(2 * r, 2 * r);
    let sd = (noise / 2.0).sqrt();
    for _ in 0..samples {
        let z = DVector::from_fn(l.ncols(), |_, _| StandardNormal.sample(&mut rng));
        let h = f * (&l * z).map(|v| C64::new(v, 0.0));
        let p = h.len();
        let h_aug = CVector::from_fn(2 * p, |i, _| if i < p { h[i] } else { h[i - p].conj() });
        let mut y = &phi * h_aug;
        let v: Vec<C64> = (0..r)
            .map(|_| {
                C64::new(
                    sd * rng.sample::<f64, _>(StandardNormal),
                    sd * rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        for i in 0..r {
            y[i] += v[i];
            y[i + r] += v[i].conj();
        }
        acc += &y * y.adjoint();
    }
    acc /= C64::new(samples as f64, 0.0);
    assert!((acc - &sigma_y).norm() / sigma_y.norm() < 0.05);
}

#[test]
fn fast_map_matches_dense_posterior_mean() {
    let setup = wiener_setup(16, 3, 5, 0.02);
    let problem = EstimationProblem::new(setup.clone(), hyper(0.01)).unwrap();
    let sigma_tot = problem.sigma_tot().unwrap();
    let phi = setup.regressor.augmented();
    let z = output_covariance(&problem)
        .unwrap()
        .lu()
        .solve(&setup.augmented_y())
        .unwrap();
    let dense = sigma_tot * phi.adjoint() * z;
    let fast = stacked(&problem);
    let p = fast.len();
    let dense_first = dense.rows(0, p).into_owned();
    assert!((&fast - &dense_first).norm() < 1e-9 * dense_first.norm());
}

#[test]
fn huge_noise_shrinks_to_prior_mean() {
    let setup = wiener_setup(16, 3, 6, 0.0);
    let signal = setup.y.norm_squared() / setup.y.len() as f64;
    let problem = EstimationProblem::new(setup, hyper(1e8 * signal)).unwrap();
    let prior_scale = problem.sigma_tot().unwrap().trace().re.sqrt();
    assert!(stacked(&problem).norm() < 1e-6 * prior_scale);
}

#[test]
fn tuned_scale_matches_grid_search() {
    // first-order system with noise; only the scale is free
    let h = VolterraKernel::new(
        1,
        8,
        (0..8)
            .map(|t| 0.7f64.powi(t) * if t % 3 == 0 { 1.0 } else { -0.6 })
            .collect(),
    )
    .unwrap();
    let u = generate_multisine(&MultisineSpec::consecutive(32, 10, 1.0, 9)).unwrap();
    let mut y = simulate_steady_state(&[h], &u).unwrap().window().to_vec();
    let normal = Normal::new(0.0, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    let setup = Arc::new(
        EstimationSetup::new(&dft(&u), &dft(&TimeSignal::new(y).unwrap()), &[(1, 8)]).unwrap(),
    );
    let fixed =
        |c: f64| DcHyperparameters::new(vec![OrderHyper::shared(1, c, 0.8, 0.3)], 0.08).unwrap();
    let objective = |h: &DcHyperparameters| objective_at(&setup, &fixed(h.orders[0].scale));

    let grid: Vec<f64> = (0..200)
        .map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 199.0))
        .collect();
    let best_grid = grid
        .iter()
        .copied()
        .min_by(|a, b| {
            objective(&fixed(*a))
                .unwrap()
                .total_cmp(&objective(&fixed(*b)).unwrap())
        })
        .unwrap();
    assert!(best_grid > grid[0] && best_grid < grid[199]);
    let opts = TuningOptions {
        budget: 400,
        starts: 2,
        seed: 1,
        tune_noise: false,
        ..TuningOptions::default()
    };
    let tuned = tune_with(objective, &fixed(1.0), &opts).unwrap();
    let c = tuned.hyper.orders[0].scale;
    println!("tuned {c:.4} grid {best_grid:.4}");
    assert!((c - best_grid).abs() < 0.05 * best_grid);
}

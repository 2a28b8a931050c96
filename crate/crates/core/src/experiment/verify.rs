//! Seeded property suite behind the `verify` command.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{DcHyperparameters, OrderHyper};
use crate::error::{Error, Result};
use crate::estimator::{
    map_estimate, map_estimate_time_domain, output_covariance, EstimationProblem, EstimationSetup,
};
use crate::linalg::{
    hermitian_deviation, is_psd, is_psd_real, symmetric_deviation, to_complex, CMatrix, CVector,
    PsdFactor, STRUCTURE_TOL,
};
use crate::mdft::{build_fourier_matrix, build_symmetry_reduction, Grid, VecIndexMap};
use crate::signals::{dft, generate_multisine, twiddle, MultisineSpec, TimeSignal, C64};
use crate::transient::{
    hammerstein_terms, relative_deviation, transient_terms, verify_t1_equals_t2,
};
use crate::volterra::{simulate_steady_state, simulate_with_history, VolterraKernel};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    /// Worst observed metric across the cases.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

fn check(name: &str, values: &[f64], tolerance: f64) -> CheckResult {
    let worst = values.iter().copied().fold(0.0, f64::max);
    CheckResult {
        name: name.to_string(),
        cases: values.len(),
        worst,
        tolerance,
        passed: values.iter().all(|v| *v < tolerance),
    }
}

fn rng_for(seed: u64, suite: u64, case: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (suite << 32) ^ case as u64)
}

fn vec_rel(a: &CVector, b: &CVector) -> f64 {
    let den = b.norm();
    if den == 0.0 {
        a.norm()
    } else {
        (a - b).norm() / den
    }
}

/// Nested-loop `m`-dimensional DFT of a flat tensor, first index fastest.
fn nested_dft(x: &[C64], m: usize, n: usize) -> Vec<C64> {
    let map = VecIndexMap::new(m, n);
    (0..map.len())
        .map(|r| {
            let ks = map.multi(r);
            (0..map.len())
                .map(|c| {
                    let ts = map.multi(c);
                    ks.iter()
                        .zip(&ts)
                        .fold(x[c], |acc, (&k, &t)| acc * twiddle(k as i64, t as i64, n))
                })
                .sum()
        })
        .collect()
}

fn mdft_check(seed: u64) -> Result<CheckResult> {
    let mut devs = Vec::new();
    for n in [2, 4, 8] {
        for m in 1..=3 {
            let f = build_fourier_matrix(m, n)?;
            for case in 0..10 {
                let mut rng = rng_for(seed, 1, n * 100 + m * 10 + case);
                let x: Vec<C64> = (0..f.matrix.ncols())
                    .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let fast = &f.matrix * CVector::from_vec(x.clone());
                let slow = CVector::from_vec(nested_dft(&x, m, n));
                devs.push(vec_rel(&fast, &slow));
            }
        }
    }
    Ok(check("mdft_matrix_vs_nested_loops", &devs, 1e-10))
}

fn parameter_count_check() -> Result<CheckResult> {
    let omega = crate::signals::omega_set(&(1..=13).collect::<Vec<_>>());
    let red = build_symmetry_reduction(2, &Grid::Frequency(omega))?;
    let count = red.n_parameters();
    Ok(CheckResult {
        name: "unique_parameters_13_tones".into(),
        cases: 1,
        worst: count as f64,
        tolerance: 182.0,
        passed: count == 182,
    })
}

fn random_signal(
    rng: &mut ChaCha8Rng,
    n: usize,
    n_pre: usize,
    zero_history: bool,
) -> Result<TimeSignal> {
    let hist = (0..n_pre)
        .map(|_| {
            if zero_history {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    let win = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    TimeSignal::with_history(hist, win)
}

/// `(decomposition residual, T1/T2 deviation)` per case.
fn decomposition_case(seed: u64, case: usize) -> Result<(f64, f64)> {
    let mut rng = rng_for(seed, 2, case);
    let n = rng.random_range(4..=32usize);
    let memory = rng.random_range(1..=8usize.min(n));
    let h = VolterraKernel::from_fn(2, memory, |_| rng.random_range(-1.0..1.0))?.symmetrize();
    let n_pre = rng.random_range(memory - 1..=n.min(memory + 3));
    let u = random_signal(&mut rng, n, n_pre, case.is_multiple_of(2))?;
    let y = dft(&simulate_with_history(std::slice::from_ref(&h), &u)?);
    let d = transient_terms(&h, &u)?;
    let eq = verify_t1_equals_t2(&d)?;
    Ok((
        relative_deviation(&d.output(), &y.bins),
        eq.max_relative_deviation,
    ))
}

fn hammerstein_case(seed: u64, case: usize) -> Result<[f64; 3]> {
    let mut rng = rng_for(seed, 3, case);
    let n = rng.random_range(4..=32usize);
    let memory = rng.random_range(1..=8usize.min(n));
    let g: Vec<f64> = (0..memory).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h = VolterraKernel::from_fn(2, memory, |i| if i[0] == i[1] { g[i[0]] } else { 0.0 })?;
    let zero = case.is_multiple_of(2);
    let extra = rng.random_range(0..3usize).min(n + 1 - memory);
    let u = random_signal(&mut rng, n, memory - 1 + extra, zero)?;
    let y = dft(&simulate_with_history(std::slice::from_ref(&h), &u)?).bins;
    let d = transient_terms(&h, &u)?;
    let t = hammerstein_terms(&h, &u)?;
    let ss_peak = d.ss.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let q = t.q_h.iter().map(|z| z.norm()).fold(0.0, f64::max) / ss_peak.max(f64::MIN_POSITIVE);
    let model: Vec<C64> = (0..n).map(|k| d.ss[k] - d.t3[k] + t.r_h[k] * 2.0).collect();
    let r = if zero {
        t.r_h.iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok([q, relative_deviation(&model, &y), r])
}

/// Small second-order Wiener problem with random filter, phases and hyperparameters.
pub fn toy_problem(
    rng: &mut ChaCha8Rng,
    n: usize,
    tones: usize,
    noise: f64,
) -> Result<EstimationProblem> {
    let g: Vec<f64> = (0..3)
        .map(|t| rng.random_range(-1.0..1.0) * 0.7f64.powi(t))
        .collect();
    let h = VolterraKernel::from_fn(2, 3, |i| g[i[0]] * g[i[1]])?;
    let spec = MultisineSpec::consecutive(n, tones, 1.0, rng.random());
    let u = generate_multisine(&spec)?;
    let y = simulate_steady_state(&[h], &u)?;
    let setup = Arc::new(EstimationSetup::new(&dft(&u), &dft(&y), &[(2, 4)])?);
    let hyper = DcHyperparameters::new(
        vec![OrderHyper::shared(
            2,
            rng.random_range(0.2..3.0),
            rng.random_range(0.3..0.95),
            rng.random_range(-0.9..0.95),
        )],
        noise,
    )?;
    EstimationProblem::new(setup, hyper)
}

/// MAP from `(Sigma_tot^+ + phi~^H phi~ / s2)^{-1} phi~^H Y~ / s2`, evaluated on the range of `Sigma_tot`.
pub fn regularized_least_squares(problem: &EstimationProblem, noise: f64) -> Result<CVector> {
    let sigma = problem.sigma_tot()?;
    let eig = sigma.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > 1e-13 * top)
        .collect();
    let v = CMatrix::from_fn(sigma.nrows(), keep.len(), |r, c| {
        eig.eigenvectors[(r, keep[c])]
    });
    let phi = problem.setup.regressor.augmented();
    let pv = &phi * &v;
    let mut a = pv.adjoint() * &pv / C64::new(noise, 0.0);
    for (c, &i) in keep.iter().enumerate() {
        a[(c, c)] += C64::new(1.0 / eig.eigenvalues[i], 0.0);
    }
    let rhs = pv.adjoint() * problem.setup.augmented_y() / C64::new(noise, 0.0);
    let z = PsdFactor::new(&a)?.solve_vec(&rhs);
    Ok(v * z)
}

/// First halves of the augmented estimate, stacked per order.
fn first_halves(full: &CVector, problem: &EstimationProblem) -> CVector {
    let mut out = Vec::new();
    let mut offset = 0;
    for m in &problem.setup.models {
        let p = m.freq.n_parameters();
        out.extend(full.rows(offset, p).iter().copied());
        offset += 2 * p;
    }
    CVector::from_vec(out)
}

fn stacked_estimate(problem: &EstimationProblem) -> Result<CVector> {
    let est = map_estimate(problem)?;
    Ok(CVector::from_vec(
        est.orders
            .iter()
            .flat_map(|o| o.values.iter().copied())
            .collect(),
    ))
}

fn map_identity_case(seed: u64, case: usize) -> Result<(f64, f64)> {
    let mut rng = rng_for(seed, 4, case);
    let noise = 1e-6;
    let problem = toy_problem(&mut rng, 16, 3, noise)?;
    let map = stacked_estimate(&problem)?;
    let used = map_estimate(&problem)?.diagnostics.noise_variance;
    let alt = first_halves(&regularized_least_squares(&problem, used)?, &problem);
    let theta = map_estimate_time_domain(&problem)?;
    let through_time = CVector::from_vec(
        problem
            .setup
            .models
            .iter()
            .zip(&theta)
            .flat_map(|(m, t)| {
                (&m.transform * to_complex(&DMatrix::from_column_slice(t.len(), 1, t.as_slice())))
                    .iter()
                    .copied()
                    .collect::<Vec<_>>()
            })
            .collect(),
    );
    // dense frequency-domain MAP from Sigma_tot
    let sigma = problem.sigma_tot()?;
    let phi = problem.setup.regressor.augmented();
    let sy = output_covariance(&problem)?;
    let z = PsdFactor::new(&sy)?.solve_vec(&problem.setup.augmented_y());
    let dense = first_halves(&(sigma * phi.adjoint() * z), &problem);
    Ok((vec_rel(&map, &alt), vec_rel(&through_time, &dense)))
}

/// Empirical `E[Y~ Y~^H]` against `Sigma_Y` for a toy problem, relative Frobenius error.
pub fn monte_carlo_output_covariance(
    problem: &EstimationProblem,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let sy = output_covariance(problem)?;
    let noise = map_estimate(problem)?.diagnostics.noise_variance;
    let r = problem.setup.y.len();
    let chols: Vec<DMatrix<f64>> = problem
        .priors
        .iter()
        .map(|p| {
            let n = p.nrows();
            let jitter = 1e-12 * p.trace() / n as f64;
            (p + DMatrix::identity(n, n) * jitter)
                .cholesky()
                .map(|c| c.l())
                .ok_or_else(|| Error::Internal("prior is not factorizable".into()))
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = CMatrix::zeros(2 * r, 2 * r);
    let sd = (noise / 2.0).sqrt();
    for _ in 0..samples {
        let mut y = CVector::zeros(r);
        for (m, l) in problem.setup.models.iter().zip(&chols) {
            let z = DVector::from_fn(l.ncols(), |_, _| StandardNormal.sample(&mut rng));
            let theta = (l * z).map(|v| C64::new(v, 0.0));
            y += &m.g * theta;
        }
        for v in y.iter_mut() {
            let (a, b): (f64, f64) = (
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            *v += C64::new(sd * a, sd * b);
        }
        let aug = CVector::from_fn(2 * r, |i, _| if i < r { y[i] } else { y[i - r].conj() });
        acc += &aug * aug.adjoint();
    }
    acc /= C64::new(samples as f64, 0.0);
    Ok((acc - &sy).norm() / sy.norm())
}

fn covariance_case(seed: u64, case: usize) -> Result<f64> {
    let mut rng = rng_for(seed, 5, case);
    let noise = rng.random_range(0.0..1e-2);
    let problem = toy_problem(&mut rng, 16, 3, noise)?;
    let mut worst: f64 = 0.0;
    for p in &problem.priors {
        if !is_psd_real(p) || p != &p.transpose() {
            return Ok(f64::INFINITY);
        }
    }
    for b in problem.sigma_blocks()? {
        worst = worst
            .max(hermitian_deviation(&b.k))
            .max(symmetric_deviation(&b.c));
        if !is_psd(&b.sigma()) {
            return Ok(f64::INFINITY);
        }
    }
    let tot = problem.sigma_tot()?;
    let sy = output_covariance(&problem)?;
    worst = worst
        .max(hermitian_deviation(&tot))
        .max(hermitian_deviation(&sy));
    if !is_psd(&tot) || !is_psd(&sy) {
        return Ok(f64::INFINITY);
    }
    Ok(worst)
}

/// Sum over orders of `theta^T P^{-1} theta` for the time-domain MAP.
pub fn prior_norm_squared(problem: &EstimationProblem) -> Result<f64> {
    let theta = map_estimate_time_domain(problem)?;
    let mut total = 0.0;
    for (p, t) in problem.priors.iter().zip(&theta) {
        let chol = p
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Internal("prior is not positive definite".into()))?;
        total += t.dot(&chol.solve(t));
    }
    Ok(total)
}

/// Worst relative growth of the prior-metric estimate norm over six tenfold noise increases.
fn shrinkage_case(seed: u64, case: usize) -> Result<f64> {
    let mut rng = rng_for(seed, 6, case);
    let mut problem = toy_problem(&mut rng, 16, 3, 1e-4)?;
    let mut last = f64::INFINITY;
    let mut worst_growth: f64 = 0.0;
    for _ in 0..6 {
        let norm = prior_norm_squared(&problem)?;
        worst_growth = worst_growth.max((norm - last) / last.max(f64::MIN_POSITIVE));
        last = norm;
        problem.hyper.noise_variance *= 10.0;
    }
    Ok(worst_growth.max(0.0))
}

fn collect<T: Send>(cases: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..cases).into_par_iter().map(f).collect()
}

/// Run every property check; cases within a check run concurrently.
pub fn run_property_suite(seed: u64) -> Result<VerifyReport> {
    let mut checks = vec![mdft_check(seed)?, parameter_count_check()?];

    let dec = collect(50, |c| decomposition_case(seed, c))?;
    checks.push(check(
        "decomposition_identity",
        &dec.iter().map(|d| d.0).collect::<Vec<_>>(),
        1e-9,
    ));
    checks.push(check(
        "t1_equals_t2",
        &dec.iter().map(|d| d.1).collect::<Vec<_>>(),
        1e-9,
    ));

    let ham = collect(20, |c| hammerstein_case(seed, c))?;
    checks.push(check(
        "hammerstein_q_h_vanishes",
        &ham.iter().map(|h| h[0]).collect::<Vec<_>>(),
        1e-9,
    ));
    checks.push(check(
        "hammerstein_output_identity",
        &ham.iter().map(|h| h[1]).collect::<Vec<_>>(),
        1e-9,
    ));
    let r_zero: Vec<f64> = ham.iter().map(|h| h[2]).collect();
    checks.push(CheckResult {
        name: "hammerstein_r_h_zero_history".into(),
        cases: r_zero.len(),
        worst: r_zero.iter().copied().fold(0.0, f64::max),
        tolerance: 0.0,
        passed: r_zero.iter().all(|&v| v == 0.0),
    });

    let thm = collect(5, |c| map_identity_case(seed, c))?;
    checks.push(check(
        "map_matches_regularized_least_squares",
        &thm.iter().map(|t| t.0).collect::<Vec<_>>(),
        1e-6,
    ));
    checks.push(check(
        "time_domain_map_matches_frequency_map",
        &thm.iter().map(|t| t.1).collect::<Vec<_>>(),
        1e-6,
    ));

    let mut rng = rng_for(seed, 7, 0);
    let mc_problem = toy_problem(&mut rng, 8, 1, 1e-2)?;
    let mc = monte_carlo_output_covariance(&mc_problem, 100_000, seed)?;
    checks.push(check("output_covariance_monte_carlo", &[mc], 0.05));

    let cov = collect(20, |c| covariance_case(seed, c))?;
    checks.push(check("covariance_structure_and_psd", &cov, STRUCTURE_TOL));

    let shrink = collect(20, |c| shrinkage_case(seed, c))?;
    checks.push(check("monotone_shrinkage_prior_norm", &shrink, 1e-9));

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        seed,
        checks,
        all_passed,
    })
}

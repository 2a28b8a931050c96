use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::{ExperimentConfig, RunOutput};
use crate::covariance::DcHyperparameters;
use crate::error::{Error, Result};
use crate::estimator::{
    map_estimate, relative_gfrf_error, write_gfrf_csv, EstimateDiagnostics, EstimationProblem,
    EstimationSetup,
};
use crate::mdft::{gfrf_at, SymmetryReduction};
use crate::signals::{dft, generate_multisine, TimeSignal, C64};
use crate::tuning::{tune_hyperparameters, TuningResult};
use crate::volterra::{kernel_from_blocks, simulate_steady_state, VolterraKernel};

/// True GFRF of order `reduction.order` at every point of the excited grid;
/// zero when the system has no kernel of that order.
pub fn true_gfrf_on_grid(
    kernels: &[VolterraKernel],
    reduction: &SymmetryReduction,
    n: usize,
) -> Vec<C64> {
    let map = reduction.index_map();
    (0..map.len())
        .map(|f| {
            let ks: Vec<i64> = map.multi(f).iter().map(|&p| reduction.grid[p]).collect();
            kernels
                .iter()
                .filter(|k| k.order() == reduction.order)
                .map(|k| gfrf_at(k, n, &ks))
                .sum()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimationSummary {
    pub n_points: usize,
    pub excited_input: Vec<usize>,
    pub excited_output: Vec<usize>,
    pub rows: usize,
    /// `(order, kept parameters)`.
    pub parameters_per_order: Vec<(usize, usize)>,
    pub parameters: usize,
    pub rank_deficient: bool,
    /// Relative Frobenius error over the excited grid with the starting hyperparameters.
    pub untuned_relative_error: f64,
    /// Same, with the final (tuned when configured) hyperparameters.
    pub relative_error: f64,
    pub hyperparameters: DcHyperparameters,
    pub diagnostics: EstimateDiagnostics,
    pub tuning: Option<TuningResult>,
    #[serde(skip)]
    pub files: Vec<String>,
}

fn add_output_noise(y: &TimeSignal, variance: f64, seed: u64) -> Result<TimeSignal> {
    if variance == 0.0 {
        return Ok(y.clone());
    }
    // white noise of variance s^2 puts N s^2 into every DFT bin
    let n = y.n_points() as f64;
    let normal = Normal::new(0.0, (variance / n).sqrt())
        .map_err(|e| Error::InvalidSpec(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TimeSignal::new(
        y.window()
            .iter()
            .map(|v| v + normal.sample(&mut rng))
            .collect(),
    )
}

/// Simulate, estimate (and tune when configured), then write the run's files into `out`.
pub fn run_estimation_experiment(
    config: &ExperimentConfig,
    out: &Path,
) -> Result<EstimationSummary> {
    config.validate()?;
    let est = config
        .estimation
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("config has no estimation section".into()))?;
    let kernel = kernel_from_blocks(&config.system)?;
    let kernels = [kernel];
    let u = generate_multisine(&config.signal)?;
    let y = simulate_steady_state(&kernels, &u)?;
    let y = add_output_noise(&y, est.noise_variance, est.noise_seed)?;
    let setup = Arc::new(
        EstimationSetup::new(&dft(&u), &dft(&y), &est.order_memories())
            .map_err(|e| e.context("assembling the estimation problem"))?,
    );
    let truth: Vec<(usize, Vec<C64>)> = setup
        .models
        .iter()
        .map(|m| {
            (
                m.order,
                true_gfrf_on_grid(&kernels, &m.freq, setup.grid.n_points),
            )
        })
        .collect();

    let eta0 = est.initial_hyper()?;
    let untuned = map_estimate(&EstimationProblem::new(setup.clone(), eta0.clone())?)
        .map_err(|e| e.context("estimating with the starting hyperparameters"))?;
    let untuned_error = relative_gfrf_error(&untuned, &truth)?;

    let (hyper, tuning) = match &est.tuning {
        Some(opts) => {
            let r = tune_hyperparameters(&setup, &eta0, opts)
                .map_err(|e| e.context("tuning hyperparameters"))?;
            (r.hyper.clone(), Some(r))
        }
        None => (eta0.clone(), None),
    };
    let estimate = if tuning.is_some() {
        map_estimate(&EstimationProblem::new(setup.clone(), hyper.clone())?)
            .map_err(|e| e.context("estimating with the tuned hyperparameters"))?
    } else {
        untuned
    };
    let error = relative_gfrf_error(&estimate, &truth)?;

    let mut run = RunOutput::new(out)?;
    run.write_with("input.csv", |w| u.write_csv(w))?;
    run.write_with("output.csv", |w| y.write_csv(w))?;
    run.write_with("kernel_order2.csv", |w| kernels[0].write_csv(w))?;
    for (m, o) in setup.models.iter().zip(&estimate.orders) {
        let true_params = m.freq.dedup(|ks| {
            kernels
                .iter()
                .filter(|k| k.order() == m.order)
                .map(|k| gfrf_at(k, setup.grid.n_points, ks))
                .sum::<C64>()
        });
        run.write_with(&format!("gfrf_true_order{}.csv", m.order), |w| {
            write_gfrf_csv(w, &m.freq, &true_params)
        })?;
        run.write_with(&format!("gfrf_estimate_order{}.csv", m.order), |w| {
            o.write_csv(w)
        })?;
    }
    run.write_json("hyperparameters.json", &hyper)?;
    let mut summary = EstimationSummary {
        n_points: setup.grid.n_points,
        excited_input: setup.grid.excited_input.clone(),
        excited_output: setup.grid.excited_output.clone(),
        rows: setup.y.len(),
        parameters_per_order: setup
            .models
            .iter()
            .map(|m| (m.order, m.freq.n_parameters()))
            .collect(),
        parameters: setup.n_parameters(),
        rank_deficient: setup.is_rank_deficient(),
        untuned_relative_error: untuned_error,
        relative_error: error,
        hyperparameters: hyper,
        diagnostics: estimate.diagnostics.clone(),
        tuning,
        files: Vec::new(),
    };
    run.write_json("metrics.json", &summary)?;
    summary.files = run.finish("estimate", config)?;
    Ok(summary)
}

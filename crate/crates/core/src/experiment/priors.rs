use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{ExperimentConfig, RunOutput};
use crate::covariance::{build_time_prior, to_frequency_domain};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg::{eigen_range, eigen_range_real};
use crate::mdft::{build_symmetry_reduction, reduced_transform, Grid};
use crate::signals::{FrequencyGrid, C64};

#[derive(Clone, Debug, Serialize)]
pub struct PriorOrderSummary {
    pub order: usize,
    pub memory: usize,
    pub unique_lags: usize,
    pub parameters: usize,
    pub prior_eigen_range: (f64, f64),
    pub sigma_eigen_range: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct PriorSummary {
    pub orders: Vec<PriorOrderSummary>,
    #[serde(skip)]
    pub files: Vec<String>,
}

fn write_real_matrix<W: Write>(writer: W, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "j", "value"])?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_record([i.to_string(), j.to_string(), fmt_f64(m[(i, j)])])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_complex_matrix<W: Write>(writer: W, m: &DMatrix<C64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "j", "re", "im"])?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_record([i.to_string(), j.to_string(), fmt_f64(z.re), fmt_f64(z.im)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Dump `P_m`, `K_m`, `C_m` and both symmetry reductions for every configured order,
/// using the starting hyperparameters.
pub fn export_priors(config: &ExperimentConfig, out: &Path) -> Result<PriorSummary> {
    config.validate()?;
    let est = config
        .estimation
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("config has no estimation section".into()))?;
    let n = config.signal.n_points;
    let orders: Vec<usize> = est.order_memories().iter().map(|o| o.0).collect();
    let grid = FrequencyGrid::for_orders(n, &config.signal.excited_indices, &orders)?;
    let mut run = RunOutput::new(out)?;
    let mut summaries = Vec::new();
    for o in &est.orders {
        let m = o.order;
        let prior = build_time_prior(m, o.memory, &o.hyper())?;
        let freq = build_symmetry_reduction(m, &Grid::Frequency(grid.omega.clone()))?;
        let f = reduced_transform(n, &freq, &prior.reduction)?;
        let aug = to_frequency_domain(&prior.matrix, &f)?;
        aug.validate()?;
        run.write_with(&format!("prior_order{m}.csv"), |w| {
            write_real_matrix(w, &prior.matrix)
        })?;
        run.write_with(&format!("lag_reduction_order{m}.csv"), |w| {
            prior.reduction.write_csv(w)
        })?;
        run.write_with(&format!("freq_reduction_order{m}.csv"), |w| {
            freq.write_csv(w)
        })?;
        run.write_with(&format!("k_order{m}.csv"), |w| {
            write_complex_matrix(w, &aug.k)
        })?;
        run.write_with(&format!("c_order{m}.csv"), |w| {
            write_complex_matrix(w, &aug.c)
        })?;
        summaries.push(PriorOrderSummary {
            order: m,
            memory: o.memory,
            unique_lags: prior.matrix.nrows(),
            parameters: freq.n_parameters(),
            prior_eigen_range: eigen_range_real(&prior.matrix),
            sigma_eigen_range: eigen_range(&aug.sigma()),
        });
    }
    let mut summary = PriorSummary {
        orders: summaries,
        files: Vec::new(),
    };
    run.write_json("priors.json", &summary)?;
    summary.files = run.finish("export-priors", config)?;
    Ok(summary)
}

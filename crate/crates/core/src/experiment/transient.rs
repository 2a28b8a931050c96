use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, PreHistory, RunOutput, TransientInput};
use crate::error::{Error, Result};
use crate::signals::{dft, generate_multisine, TimeSignal, C64};
use crate::transient::{
    hammerstein_terms, relative_deviation, transient_terms, verify_t1_equals_t2, write_surface_csv,
    write_term_csv,
};
use crate::volterra::{kernel_from_blocks, simulate_with_history};

/// Tolerance shared by the transient identity checks.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            passed: value < tolerance,
        }
    }

    fn exact_zero(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance: 0.0,
            passed: value == 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransientSummary {
    pub checks: Vec<IdentityCheck>,
    pub all_passed: bool,
    #[serde(skip)]
    pub files: Vec<String>,
}

fn build_input(
    config: &ExperimentConfig,
    pre: &PreHistory,
    input: TransientInput,
) -> Result<TimeSignal> {
    let window = match input {
        TransientInput::Multisine => generate_multisine(&config.signal)?,
        TransientInput::Gaussian => {
            let sd = config.signal.amplitudes.first().copied().unwrap_or(1.0);
            let normal = Normal::new(0.0, sd)
                .map_err(|e| Error::InvalidSpec(format!("input distribution: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.signal.seed);
            TimeSignal::new(
                (0..config.signal.n_points)
                    .map(|_| normal.sample(&mut rng))
                    .collect(),
            )?
        }
    };
    match pre {
        PreHistory::Zero { length } => Ok(window.with_zero_history(*length)),
        PreHistory::Periodic { length } => Ok(window.with_periodic_history(*length)),
        PreHistory::Custom { samples } => {
            TimeSignal::with_history(samples.clone(), window.window().to_vec())
        }
    }
}

fn peak(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Decompose the block system's output into steady state and transient terms,
/// check every identity against a time-domain simulation, and write the results.
pub fn run_transient_experiment(config: &ExperimentConfig, out: &Path) -> Result<TransientSummary> {
    config.validate()?;
    let tr = config
        .transient
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("config has no transient section".into()))?;
    let h = kernel_from_blocks(&config.system)?;
    let u = build_input(config, &tr.pre_history, tr.input)?;
    let y = simulate_with_history(std::slice::from_ref(&h), &u)?;
    let measured = dft(&y).bins;
    let d = transient_terms(&h, &u).map_err(|e| e.context("transient decomposition"))?;

    let mut checks = vec![IdentityCheck::below(
        "decomposition_residual",
        relative_deviation(&d.output(), &measured),
        IDENTITY_TOL,
    )];
    let eq = verify_t1_equals_t2(&d)?;
    checks.push(IdentityCheck::below(
        "t1_t2_deviation",
        eq.max_relative_deviation,
        eq.tolerance,
    ));
    let zero_history = u.history().iter().all(|&v| v == 0.0);
    if matches!(tr.pre_history, PreHistory::Periodic { .. }) {
        checks.push(IdentityCheck::exact_zero("transient_peak", peak(&d.total)));
    }
    let hammerstein = if h.is_diagonal() {
        let terms = hammerstein_terms(&h, &u)?;
        let n = d.ss.len();
        let model: Vec<C64> = (0..n)
            .map(|k| d.ss[k] - d.t3[k] + terms.r_h[k] * 2.0)
            .collect();
        checks.push(IdentityCheck::below(
            "hammerstein_residual",
            relative_deviation(&model, &measured),
            IDENTITY_TOL,
        ));
        let ss_peak = peak(&d.ss);
        checks.push(IdentityCheck::below(
            "q_h_relative_magnitude",
            if ss_peak > 0.0 {
                peak(&terms.q_h) / ss_peak
            } else {
                peak(&terms.q_h)
            },
            IDENTITY_TOL,
        ));
        if zero_history {
            checks.push(IdentityCheck::exact_zero("r_h_peak", peak(&terms.r_h)));
            let minus_t3: Vec<C64> = d.t3.iter().map(|z| -z).collect();
            checks.push(IdentityCheck::below(
                "t1_plus_t3_deviation",
                relative_deviation(&d.t1, &minus_t3),
                IDENTITY_TOL,
            ));
        }
        Some(terms)
    } else {
        None
    };

    let mut run = RunOutput::new(out)?;
    run.write_with("input.csv", |w| u.write_csv(w))?;
    run.write_with("output.csv", |w| y.write_csv(w))?;
    for (name, values) in [
        ("ss.csv", &d.ss),
        ("t1.csv", &d.t1),
        ("t2.csv", &d.t2),
        ("t3.csv", &d.t3),
        ("transient_total.csv", &d.total),
    ] {
        run.write_with(name, |w| write_term_csv(w, values))?;
    }
    for (name, s) in [
        ("h_star_1.csv", &d.h_star_1),
        ("h_star_2.csv", &d.h_star_2),
        ("h_star_3.csv", &d.h_star_3),
    ] {
        run.write_with(name, |w| write_surface_csv(w, s))?;
    }
    if let Some(terms) = &hammerstein {
        run.write_with("r_h.csv", |w| write_term_csv(w, &terms.r_h))?;
        run.write_with("q_h.csv", |w| write_term_csv(w, &terms.q_h))?;
    }
    let all_passed = checks.iter().all(|c| c.passed);
    let mut summary = TransientSummary {
        checks,
        all_passed,
        files: Vec::new(),
    };
    run.write_json("report.json", &summary)?;
    summary.files = run.finish("transient", config)?;
    Ok(summary)
}

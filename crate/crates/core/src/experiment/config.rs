use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::covariance::{DcHyperparameters, OrderHyper};
use crate::error::{Error, Result};
use crate::signals::{check_excitation_bound, MultisineSpec};
use crate::tuning::TuningOptions;
use crate::volterra::{BlockSystem, MAX_ORDER};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// One estimated order: prior memory and starting DC hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderConfig {
    pub order: usize,
    pub memory: usize,
    pub scale: f64,
    /// One shared value or one per axis.
    pub decay: Vec<f64>,
    pub correlation: Vec<f64>,
}

impl OrderConfig {
    pub fn hyper(&self) -> OrderHyper {
        OrderHyper {
            order: self.order,
            scale: self.scale,
            decay: self.decay.clone(),
            correlation: self.correlation.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    pub orders: Vec<OrderConfig>,
    /// Per-bin variance of the complex output noise; also the starting `sigma_v^2`.
    pub noise_variance: f64,
    /// Seed of the added output noise.
    #[serde(default)]
    pub noise_seed: u64,
    /// Absent: estimate with the starting hyperparameters only.
    #[serde(default)]
    pub tuning: Option<TuningOptions>,
}

impl EstimationConfig {
    pub fn max_order(&self) -> usize {
        self.orders.iter().map(|o| o.order).max().unwrap_or(0)
    }

    pub fn initial_hyper(&self) -> Result<DcHyperparameters> {
        DcHyperparameters::new(
            self.orders.iter().map(OrderConfig::hyper).collect(),
            self.noise_variance,
        )
    }

    pub fn order_memories(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self.orders.iter().map(|o| (o.order, o.memory)).collect();
        v.sort_unstable();
        v
    }
}

/// Samples before `t = 0` for the transient experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreHistory {
    /// `length` zero samples.
    Zero { length: usize },
    /// The window's own periodic extension.
    Periodic { length: usize },
    /// Explicit `u(-n) .. u(-1)`.
    Custom { samples: Vec<f64> },
}

impl PreHistory {
    pub fn len(&self) -> usize {
        match self {
            PreHistory::Zero { length } | PreHistory::Periodic { length } => *length,
            PreHistory::Custom { samples } => samples.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Window used by the transient experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransientInput {
    /// The configured multisine.
    #[default]
    Multisine,
    /// White Gaussian noise with standard deviation equal to the first amplitude.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientConfig {
    pub pre_history: PreHistory,
    #[serde(default)]
    pub input: TransientInput,
}

/// Complete experiment description, read from a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub system: BlockSystem,
    pub signal: MultisineSpec,
    #[serde(default)]
    pub estimation: Option<EstimationConfig>,
    #[serde(default)]
    pub transient: Option<TransientConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::InvalidSpec(format!(
                "unsupported config schema version {}",
                self.schema_version
            )));
        }
        self.system.validate()?;
        self.signal.validate()?;
        let n = self.signal.n_points;
        let memory = self.system.memory();
        if memory > n {
            return Err(Error::InvalidSpec(format!(
                "system memory {memory} exceeds the window length {n}"
            )));
        }
        if let Some(est) = &self.estimation {
            if est.orders.is_empty() {
                return Err(Error::InvalidSpec(
                    "estimation needs at least one order".into(),
                ));
            }
            for o in &est.orders {
                if o.order == 0 || o.order > MAX_ORDER {
                    return Err(Error::InvalidSpec(format!(
                        "estimated order {} outside 1..={MAX_ORDER}",
                        o.order
                    )));
                }
                if o.memory == 0 || o.memory > n {
                    return Err(Error::InvalidSpec(format!(
                        "order-{} prior memory {} outside 1..={n}",
                        o.order, o.memory
                    )));
                }
            }
            check_excitation_bound(&self.signal.excited_indices, est.max_order(), n)?;
            est.initial_hyper()?;
            if !(est.noise_variance >= 0.0 && est.noise_variance.is_finite()) {
                return Err(Error::InvalidSpec("noise variance must be >= 0".into()));
            }
            if let Some(t) = &est.tuning {
                if t.budget == 0 || t.starts == 0 {
                    return Err(Error::InvalidSpec(
                        "tuning budget and starts must be positive".into(),
                    ));
                }
                t.bounds.validate()?;
                if t.tune_noise && est.noise_variance <= 0.0 {
                    return Err(Error::InvalidSpec(
                        "tuning the noise variance needs a positive starting value".into(),
                    ));
                }
            }
        }
        if let Some(tr) = &self.transient {
            let needed = memory - 1;
            if tr.pre_history.len() < needed {
                return Err(Error::InsufficientHistory {
                    needed,
                    available: tr.pre_history.len(),
                });
            }
            if tr.pre_history.len() > n {
                return Err(Error::InvalidSpec(format!(
                    "pre-history of {} samples exceeds the window length {n}",
                    tr.pre_history.len()
                )));
            }
            if let PreHistory::Custom { samples } = &tr.pre_history {
                if samples.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("pre-history must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Replace every seed in the config (signal phases, output noise, tuner starts).
    pub fn reseed(&mut self, seed: u64) {
        self.signal.seed = seed;
        if let Some(e) = &mut self.estimation {
            e.noise_seed = seed;
            if let Some(t) = &mut e.tuning {
                t.seed = seed;
            }
        }
    }

    /// Benchmark setup: `N = 55`, 13 consecutive tones, second order only, prior memory 20.
    pub fn benchmark(system: BlockSystem, seed: u64) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            system,
            signal: MultisineSpec::consecutive(55, 13, 1.0, seed),
            estimation: Some(EstimationConfig {
                orders: vec![OrderConfig {
                    order: 2,
                    memory: 20,
                    scale: 1.0,
                    decay: vec![0.7],
                    correlation: vec![0.5],
                }],
                noise_variance: 0.0,
                noise_seed: 0,
                tuning: Some(TuningOptions {
                    budget: 600,
                    starts: 5,
                    seed,
                    tune_noise: false,
                    ..TuningOptions::default()
                }),
            }),
            transient: None,
            output_dir: None,
        }
    }
}

/// Decaying test filters used by the bundled configurations.
pub fn default_front_filter() -> Vec<f64> {
    (0..10)
        .map(|t| 0.75f64.powi(t) * (1.0 - 0.03 * t as f64))
        .collect()
}

pub fn default_short_filter() -> Vec<f64> {
    (0..6)
        .map(|t| 0.6f64.powi(t) * if t % 2 == 0 { 1.0 } else { 0.5 })
        .collect()
}

/// Wiener, Hammerstein and Wiener-Hammerstein systems built from the default filters.
pub fn default_systems() -> [BlockSystem; 3] {
    [
        BlockSystem::wiener(default_front_filter()),
        BlockSystem::hammerstein(default_front_filter()),
        BlockSystem::wiener_hammerstein(default_short_filter(), default_short_filter()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_round_trips_and_validates() {
        for sys in default_systems() {
            let c = ExperimentConfig::benchmark(sys, 3);
            let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let c = ExperimentConfig::benchmark(default_systems()[0].clone(), 0);
        let json = c.to_json().unwrap().replacen('{', "{\"bogus\": 1,", 1);
        assert!(ExperimentConfig::from_json(&json).is_err());
    }

    #[test]
    fn excitation_bound_enforced() {
        let mut c = ExperimentConfig::benchmark(default_systems()[0].clone(), 0);
        c.signal = MultisineSpec::consecutive(55, 14, 1.0, 0);
        assert!(matches!(c.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn short_pre_history_rejected() {
        let mut c = ExperimentConfig::benchmark(default_systems()[0].clone(), 0);
        c.transient = Some(TransientConfig {
            pre_history: PreHistory::Zero { length: 3 },
            input: TransientInput::Multisine,
        });
        assert!(matches!(
            c.validate(),
            Err(Error::InsufficientHistory { .. })
        ));
    }
}

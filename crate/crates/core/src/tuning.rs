//! Marginal-likelihood hyperparameter tuning by multi-start Nelder-Mead.
//!
//! The search runs in unconstrained coordinates: per order (ascending)
//! `log c`, `logit lambda_d` for every stored decay, `atanh rho_d` for every
//! stored correlation, then `log sigma_v^2` when the noise is tuned.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::DcHyperparameters;
use crate::error::{Error, Result};
use crate::estimator::{objective_at, EstimationSetup};

/// Box bounds in natural coordinates; the search clamps to them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperBounds {
    pub scale: [f64; 2],
    pub decay: [f64; 2],
    pub correlation: [f64; 2],
    pub noise_variance: [f64; 2],
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            scale: [1e-10, 1e10],
            decay: [1e-3, 0.9999],
            correlation: [-0.9999, 0.9999],
            noise_variance: [1e-16, 1e6],
        }
    }
}

impl HyperBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = |[lo, hi]: [f64; 2], min: f64, max: f64| lo < hi && lo >= min && hi <= max;
        if !ok(self.scale, f64::MIN_POSITIVE, f64::MAX)
            || !ok(self.decay, f64::MIN_POSITIVE, 1.0 - 1e-12)
            || !ok(self.correlation, -1.0 + 1e-12, 1.0 - 1e-12)
            || !ok(self.noise_variance, f64::MIN_POSITIVE, f64::MAX)
        {
            return Err(Error::InvalidHyperparameter(format!(
                "inconsistent tuning bounds {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningOptions {
    /// Total objective evaluations across all starts.
    pub budget: usize,
    pub starts: usize,
    pub seed: u64,
    /// Keep `sigma_v^2` fixed when false.
    pub tune_noise: bool,
    /// Standard deviation of the start perturbations, in unconstrained coordinates.
    pub start_spread: f64,
    /// Edge length of the initial simplex, in unconstrained coordinates.
    pub initial_step: f64,
    #[serde(default)]
    pub bounds: HyperBounds,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self {
            budget: 1000,
            starts: 5,
            seed: 0,
            tune_noise: true,
            start_spread: 1.0,
            initial_step: 0.5,
            bounds: HyperBounds::default(),
        }
    }
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn clamp_to(z: f64, lo: f64, hi: f64) -> f64 {
    z.clamp(lo, hi)
}

/// Maps between `eta` and unconstrained coordinates.
#[derive(Clone, Debug)]
pub struct Parameterization {
    template: DcHyperparameters,
    tune_noise: bool,
    bounds: HyperBounds,
}

impl Parameterization {
    pub fn new(template: DcHyperparameters, tune_noise: bool, bounds: HyperBounds) -> Result<Self> {
        template.validate()?;
        bounds.validate()?;
        if tune_noise && template.noise_variance <= 0.0 {
            return Err(Error::InvalidHyperparameter(
                "a tuned noise variance needs a positive starting value".into(),
            ));
        }
        Ok(Self {
            template,
            tune_noise,
            bounds,
        })
    }

    pub fn dim(&self) -> usize {
        self.template
            .orders
            .iter()
            .map(|o| 1 + o.decay.len() + o.correlation.len())
            .sum::<usize>()
            + usize::from(self.tune_noise)
    }

    pub fn to_unconstrained(&self, h: &DcHyperparameters) -> Vec<f64> {
        let b = &self.bounds;
        let mut x = Vec::with_capacity(self.dim());
        for o in &h.orders {
            x.push(clamp_to(o.scale, b.scale[0], b.scale[1]).ln());
            x.extend(
                o.decay
                    .iter()
                    .map(|&l| logit(clamp_to(l, b.decay[0], b.decay[1]))),
            );
            x.extend(
                o.correlation
                    .iter()
                    .map(|&r| clamp_to(r, b.correlation[0], b.correlation[1]).atanh()),
            );
        }
        if self.tune_noise {
            x.push(clamp_to(h.noise_variance, b.noise_variance[0], b.noise_variance[1]).ln());
        }
        x
    }

    pub fn to_hyper(&self, x: &[f64]) -> DcHyperparameters {
        let b = &self.bounds;
        let mut h = self.template.clone();
        let mut it = x.iter().copied();
        let mut next = || it.next().expect("coordinate vector matches the layout");
        for o in &mut h.orders {
            o.scale = clamp_to(next().exp(), b.scale[0], b.scale[1]);
            for l in &mut o.decay {
                *l = clamp_to(sigmoid(next()), b.decay[0], b.decay[1]);
            }
            for r in &mut o.correlation {
                *r = clamp_to(next().tanh(), b.correlation[0], b.correlation[1]);
            }
        }
        if self.tune_noise {
            h.noise_variance = clamp_to(next().exp(), b.noise_variance[0], b.noise_variance[1]);
        }
        h
    }
}

/// One objective evaluation; `objective` is `None` when it failed numerically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub start: usize,
    pub evaluation: usize,
    pub objective: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TuningResult {
    pub hyper: DcHyperparameters,
    pub objective: f64,
    pub best_start: usize,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

/// Nelder-Mead minimizer; returns every evaluated point with its value in order.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_evals: usize,
) -> Vec<(Vec<f64>, f64)> {
    let n = x0.len();
    let mut trace: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut eval = |x: Vec<f64>, trace: &mut Vec<(Vec<f64>, f64)>| -> Option<f64> {
        if trace.len() >= max_evals {
            return None;
        }
        let v = f(&x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        trace.push((x, v));
        Some(v)
    };
    let Some(f0) = eval(x0.to_vec(), &mut trace) else {
        return trace;
    };
    let mut simplex = vec![(x0.to_vec(), f0)];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let Some(v) = eval(x.clone(), &mut trace) else {
            return trace;
        };
        simplex.push((x, v));
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= 1e-10 * (1.0 + best.abs()) && size < 1e-8 {
            return trace;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let xr = lerp(&centroid, &simplex[n].0, -alpha);
        let Some(fr) = eval(xr.clone(), &mut trace) else {
            return trace;
        };
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &simplex[n].0, -gamma);
            let Some(fe) = eval(xe.clone(), &mut trace) else {
                return trace;
            };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = lerp(&centroid, &xr, rho);
            let Some(fc) = eval(xc.clone(), &mut trace) else {
                return trace;
            };
            (xc, fc)
        } else {
            let xc = lerp(&centroid, &simplex[n].0, rho);
            let Some(fc) = eval(xc.clone(), &mut trace) else {
                return trace;
            };
            (xc, fc)
        };
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let xs = lerp(&x_best, &vertex.0, sigma);
            let Some(fs) = eval(xs.clone(), &mut trace) else {
                return trace;
            };
            *vertex = (xs, fs);
        }
    }
}

/// Minimize the negative log marginal likelihood over `eta` from `eta0`.
///
/// Start 0 begins at `eta0`; further starts perturb it with seeded Gaussian
/// noise. Starts run concurrently; the winner is the lowest objective, ties
/// going to the lower start and then the earlier evaluation.
pub fn tune_hyperparameters(
    setup: &Arc<EstimationSetup>,
    eta0: &DcHyperparameters,
    options: &TuningOptions,
) -> Result<TuningResult> {
    tune_with(|h| objective_at(setup, h), eta0, options)
}

/// [`tune_hyperparameters`] for an arbitrary objective.
pub fn tune_with(
    objective: impl Fn(&DcHyperparameters) -> Result<f64> + Sync,
    eta0: &DcHyperparameters,
    options: &TuningOptions,
) -> Result<TuningResult> {
    if options.budget == 0 || options.starts == 0 {
        return Err(Error::InvalidSpec(
            "tuning needs a positive budget and start count".into(),
        ));
    }
    let param = Parameterization::new(eta0.clone(), options.tune_noise, options.bounds.clone())?;
    let x0 = param.to_unconstrained(eta0);
    let starts = options.starts.min(options.budget);
    let share = options.budget / starts;
    let extra = options.budget % starts;
    let runs: Vec<Vec<(Vec<f64>, f64)>> = (0..starts)
        .into_par_iter()
        .map(|s| {
            let start = if s == 0 {
                x0.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(s as u64));
                x0.iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + options.start_spread * z
                    })
                    .collect()
            };
            let budget = share + usize::from(s < extra);
            nelder_mead(
                |x| {
                    let h = if s == 0 && x == x0.as_slice() {
                        eta0.clone()
                    } else {
                        param.to_hyper(x)
                    };
                    objective(&h).unwrap_or(f64::INFINITY)
                },
                &start,
                options.initial_step,
                budget,
            )
        })
        .collect();
    let mut trace = Vec::new();
    let mut best: Option<(usize, usize, f64)> = None;
    for (s, run) in runs.iter().enumerate() {
        for (e, (_, v)) in run.iter().enumerate() {
            let value = v.is_finite().then_some(*v);
            trace.push(TraceEntry {
                start: s,
                evaluation: e,
                objective: value,
            });
            if let Some(v) = value {
                if best.is_none_or(|(_, _, b)| v < b) {
                    best = Some((s, e, v));
                }
            }
        }
    }
    let Some((s, e, value)) = best else {
        let detail = serde_json::to_string(&trace).unwrap_or_default();
        return Err(Error::Tuning(format!(
            "every start failed numerically; trace: {detail}"
        )));
    };
    Ok(TuningResult {
        // the first evaluation is eta0 itself; avoid a lossy round trip through the coordinates
        hyper: if (s, e) == (0, 0) {
            eta0.clone()
        } else {
            param.to_hyper(&runs[s][e].0)
        },
        objective: value,
        best_start: s,
        evaluations: trace.len(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::OrderHyper;

    fn eta() -> DcHyperparameters {
        DcHyperparameters::new(vec![OrderHyper::shared(1, 2.0, 0.7, 0.3)], 0.1).unwrap()
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let trace = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            0.5,
            2000,
        );
        let (x, _) = trace.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] + 2.0).abs() < 1e-4);
    }

    #[test]
    fn nelder_mead_respects_budget() {
        let trace = nelder_mead(|x| x[0] * x[0], &[3.0], 1.0, 7);
        assert_eq!(trace.len(), 7);
    }

    #[test]
    fn coordinates_round_trip() {
        let p = Parameterization::new(eta(), true, HyperBounds::default()).unwrap();
        assert_eq!(p.dim(), 4);
        let back = p.to_hyper(&p.to_unconstrained(&eta()));
        let (a, b) = (&back.orders[0], &eta().orders[0]);
        assert!((a.scale - b.scale).abs() < 1e-12);
        assert!((a.decay[0] - b.decay[0]).abs() < 1e-12);
        assert!((a.correlation[0] - b.correlation[0]).abs() < 1e-12);
        assert!((back.noise_variance - 0.1).abs() < 1e-12);
    }

    #[test]
    fn budget_one_returns_start() {
        let r = tune_with(
            |h| Ok(h.orders[0].scale),
            &eta(),
            &TuningOptions {
                budget: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.hyper, eta());
        assert_eq!(r.objective, 2.0);
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn best_is_minimum_of_trace_and_deterministic() {
        let f =
            |h: &DcHyperparameters| {
                let o = &h.orders[0];
                Ok((o.scale.ln() - 1.0).powi(2)
                    + (o.decay[0] - 0.5).powi(2)
                    + o.correlation[0].powi(2))
            };
        let opts = TuningOptions {
            budget: 300,
            starts: 4,
            seed: 7,
            tune_noise: false,
            ..Default::default()
        };
        let a = tune_with(f, &eta(), &opts).unwrap();
        let b = tune_with(f, &eta(), &opts).unwrap();
        assert_eq!(a.hyper, b.hyper);
        assert_eq!(a.trace, b.trace);
        assert!(a.trace.iter().all(|t| t.objective.unwrap() >= a.objective));
        assert!(a.evaluations <= 300);
    }

    #[test]
    fn all_failures_are_reported() {
        let r = tune_with(
            |_| Err(Error::Internal("boom".into())),
            &eta(),
            &TuningOptions {
                budget: 10,
                starts: 2,
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(Error::Tuning(_))));
    }
}

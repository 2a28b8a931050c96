//! Augmented (widely linear) Gaussian-process estimation of GFRFs on the excited grid.
//!
//! The output model on the excited output bins `k_y` is
//! `Y(k) = sum_m N^{1-m} sum_{k_1+..+k_m = k} H_m(k_1, .., k_m) U(k_1) .. U(k_m)`,
//! the exact DFT of a periodic Volterra output under the forward-DFT convention
//! of [`crate::signals::dft`]. Stacking `[Y; conj Y]` gives the augmented model
//! `Y~ = phi~ H~ + V~` with prior `H~ ~ CN(0, Sigma_tot)`.
//!
//! Every covariance product is routed through `G_m = phi_m F_m`, where `F_m` is
//! the reduced transform from unique lags to kept GFRF parameters, so that
//! `phi_m K_m phi_m^H = G_m P_m G_m^H` and `phi_m C_m phi_m^T = G_m P_m G_m^T`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{
    assemble_sigma_tot, time_prior_matrix, to_frequency_domain, AugmentedCovariance,
    DcHyperparameters, OrderHyper,
};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg::{
    hermitian_deviation, hermitian_part, is_psd, is_psd_real, to_complex, CMatrix, CVector,
    PsdFactor, STRUCTURE_TOL,
};
use crate::mdft::{build_symmetry_reduction, reduced_transform, Grid, SymmetryReduction};
use crate::signals::{FrequencyGrid, Spectrum, C64};

/// Relative floor on the noise variance, against the mean prior output power.
pub const NOISE_FLOOR: f64 = 1e-8;

/// Bins below this fraction of the peak input magnitude count as unexcited.
pub const EXCITATION_THRESHOLD: f64 = 1e-9;

/// Per-order regressors on the excited output bins.
#[derive(Clone, Debug)]
pub struct Regressor {
    pub n_points: usize,
    /// Output bins `k_y`, ascending; one row each.
    pub rows: Vec<usize>,
    pub orders: Vec<usize>,
    /// `phi_m`, `|k_y| x (kept parameters of order m)`.
    pub blocks: Vec<CMatrix>,
}

impl Regressor {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_parameters(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    /// `[phi_1 .. phi_M]`.
    pub fn phi(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.n_rows(), self.n_parameters());
        let mut col = 0;
        for b in &self.blocks {
            out.view_mut((0, col), b.shape()).copy_from(b);
            col += b.ncols();
        }
        out
    }

    /// `phi~` acting on `[H_1; conj H_1; H_2; conj H_2; ..]`.
    pub fn augmented(&self) -> CMatrix {
        let r = self.n_rows();
        let mut out = CMatrix::zeros(2 * r, 2 * self.n_parameters());
        let mut col = 0;
        for b in &self.blocks {
            let p = b.ncols();
            out.view_mut((0, col), (r, p)).copy_from(b);
            out.view_mut((r, col + p), (r, p)).copy_from(&b.conjugate());
            col += 2 * p;
        }
        out
    }
}

/// Regressor coefficients `multiplicity * prod U(k_i) / N^{m-1}` on each kept
/// representative whose indices sum to the row's output bin.
pub fn build_regressor(
    u: &Spectrum,
    grid: &FrequencyGrid,
    reductions: &[SymmetryReduction],
) -> Result<Regressor> {
    let n = grid.n_points;
    if u.n_points() != n {
        return Err(Error::DimensionMismatch(format!(
            "spectrum has {} bins, grid expects {n}",
            u.n_points()
        )));
    }
    let mut blocks = Vec::with_capacity(reductions.len());
    for red in reductions {
        if red.grid != grid.omega {
            return Err(Error::DimensionMismatch(format!(
                "order-{} reduction is not over the grid's excited frequencies",
                red.order
            )));
        }
        let scale = (n as f64).powi(1 - red.order as i32);
        let mut phi = CMatrix::zeros(grid.excited_output.len(), red.n_parameters());
        for (col, &rep) in red.parameters.iter().enumerate() {
            let ks = red.values_of(rep);
            let sum: i64 = ks.iter().sum();
            if sum <= 0 {
                continue;
            }
            if let Ok(row) = grid.excited_output.binary_search(&(sum as usize)) {
                let prod = ks.iter().fold(C64::new(1.0, 0.0), |acc, &k| acc * u.at(k));
                phi[(row, col)] = prod * (red.multiplicity(rep) as f64 * scale);
            }
        }
        blocks.push(phi);
    }
    Ok(Regressor {
        n_points: n,
        rows: grid.excited_output.clone(),
        orders: reductions.iter().map(|r| r.order).collect(),
        blocks,
    })
}

/// Order-`m` term of the model: reductions, reduced transform and `G_m`.
#[derive(Clone, Debug)]
pub struct OrderModel {
    pub order: usize,
    /// Prior memory (lag extent) of the order-`m` kernel.
    pub memory: usize,
    pub freq: SymmetryReduction,
    pub lag: SymmetryReduction,
    /// Reduced transform, kept parameters x unique lags.
    pub transform: CMatrix,
    /// `phi_m F_m`.
    pub g: CMatrix,
}

/// Hyperparameter-independent part of an estimation problem.
#[derive(Clone, Debug)]
pub struct EstimationSetup {
    pub grid: FrequencyGrid,
    /// Measured output on `k_y`.
    pub y: CVector,
    pub regressor: Regressor,
    pub models: Vec<OrderModel>,
}

impl EstimationSetup {
    /// `orders` lists `(m, prior memory)` pairs.
    pub fn new(u: &Spectrum, y: &Spectrum, orders: &[(usize, usize)]) -> Result<Self> {
        let n = u.n_points();
        if y.n_points() != n {
            return Err(Error::DimensionMismatch(format!(
                "input has {n} bins, output has {}",
                y.n_points()
            )));
        }
        if orders.is_empty() || orders.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidSpec(
                "orders must be non-empty and strictly increasing".into(),
            ));
        }
        let peak = (0..n as i64).map(|k| u.at(k).norm()).fold(0.0, f64::max);
        let excited: Vec<usize> = (1..n.div_ceil(2))
            .filter(|&k| u.at(k as i64).norm() > EXCITATION_THRESHOLD * peak)
            .collect();
        if excited.is_empty() {
            return Err(Error::InvalidSpec("input spectrum excites no bins".into()));
        }
        let order_list: Vec<usize> = orders.iter().map(|o| o.0).collect();
        let grid = FrequencyGrid::for_orders(n, &excited, &order_list)?;
        crate::signals::check_excitation_bound(&excited, grid.max_order, n)?;
        let mut freqs = Vec::new();
        let mut models = Vec::new();
        for &(m, memory) in orders {
            if memory == 0 || memory > n {
                return Err(Error::InvalidSpec(format!(
                    "order-{m} prior memory {memory} must lie in 1..={n}"
                )));
            }
            let freq = build_symmetry_reduction(m, &Grid::Frequency(grid.omega.clone()))?;
            let lag = build_symmetry_reduction(m, &Grid::Lag(memory))?;
            let transform = reduced_transform(n, &freq, &lag)?;
            freqs.push(freq.clone());
            models.push((m, memory, freq, lag, transform));
        }
        let regressor = build_regressor(u, &grid, &freqs)?;
        let models = models
            .into_iter()
            .zip(&regressor.blocks)
            .map(|((order, memory, freq, lag, transform), phi)| OrderModel {
                order,
                memory,
                g: phi * &transform,
                freq,
                lag,
                transform,
            })
            .collect();
        let yv = CVector::from_iterator(
            grid.excited_output.len(),
            grid.excited_output.iter().map(|&k| y.at(k as i64)),
        );
        Ok(Self {
            grid,
            y: yv,
            regressor,
            models,
        })
    }

    pub fn orders(&self) -> Vec<usize> {
        self.models.iter().map(|m| m.order).collect()
    }

    pub fn n_parameters(&self) -> usize {
        self.models.iter().map(|m| m.freq.n_parameters()).sum()
    }

    /// `Y~ = [Y; conj Y]`.
    pub fn augmented_y(&self) -> CVector {
        let r = self.y.len();
        CVector::from_fn(2 * r, |i, _| {
            if i < r {
                self.y[i]
            } else {
                self.y[i - r].conj()
            }
        })
    }

    /// Rows `|k_y|` below the unique parameter count.
    pub fn is_rank_deficient(&self) -> bool {
        self.y.len() < self.n_parameters()
    }
}

/// A setup with concrete hyperparameters and their time-domain priors.
#[derive(Clone, Debug)]
pub struct EstimationProblem {
    pub setup: Arc<EstimationSetup>,
    pub hyper: DcHyperparameters,
    /// `P_m` over unique lags, one per order.
    pub priors: Vec<DMatrix<f64>>,
}

impl EstimationProblem {
    /// Builds and PSD-checks the priors.
    pub fn new(setup: Arc<EstimationSetup>, hyper: DcHyperparameters) -> Result<Self> {
        let p = Self::unchecked(setup, hyper)?;
        for (m, prior) in p.setup.models.iter().zip(&p.priors) {
            if !is_psd_real(prior) {
                return Err(Error::Internal(format!(
                    "order-{} time prior is not PSD",
                    m.order
                )));
            }
        }
        Ok(p)
    }

    /// Same as [`EstimationProblem::new`] without the eigenvalue check; used inside the tuner.
    pub(crate) fn unchecked(setup: Arc<EstimationSetup>, hyper: DcHyperparameters) -> Result<Self> {
        hyper.validate()?;
        let mut priors = Vec::new();
        for m in &setup.models {
            let h = hyper.order(m.order).ok_or_else(|| {
                Error::InvalidHyperparameter(format!("no hyperparameters for order {}", m.order))
            })?;
            priors.push(time_prior_matrix(h, &m.lag));
        }
        if hyper.orders.len() != setup.models.len() {
            return Err(Error::InvalidHyperparameter(
                "hyperparameters name orders absent from the model".into(),
            ));
        }
        Ok(Self {
            setup,
            hyper,
            priors,
        })
    }

    pub fn order_hyper(&self, idx: usize) -> &OrderHyper {
        self.hyper
            .order(self.setup.models[idx].order)
            .expect("validated at construction")
    }

    /// `(K_m, C_m)` for every order.
    pub fn sigma_blocks(&self) -> Result<Vec<AugmentedCovariance>> {
        self.setup
            .models
            .iter()
            .zip(&self.priors)
            .map(|(m, p)| to_frequency_domain(p, &m.transform))
            .collect()
    }

    pub fn sigma_tot(&self) -> Result<CMatrix> {
        assemble_sigma_tot(&self.sigma_blocks()?)
    }

    /// Noise-free blocks `(A, B)` of `phi~ Sigma_tot phi~^H = [[A, B], [conj B, conj A]]`.
    fn signal_blocks(&self) -> (CMatrix, CMatrix) {
        let r = self.setup.y.len();
        let mut a = CMatrix::zeros(r, r);
        let mut b = CMatrix::zeros(r, r);
        for (m, p) in self.setup.models.iter().zip(&self.priors) {
            let gp = &m.g * to_complex(p);
            a += &gp * m.g.adjoint();
            b += &gp * m.g.transpose();
        }
        (a, b)
    }

    /// `max(sigma_v^2, 1e-8 * mean diag(phi~ Sigma_tot phi~^H))`.
    pub fn effective_noise_variance(&self) -> f64 {
        let (a, _) = self.signal_blocks();
        floor_noise(self.hyper.noise_variance, &a)
    }
}

fn floor_noise(noise: f64, a: &CMatrix) -> f64 {
    let dim = a.nrows().max(1) as f64;
    let mean = a.diagonal().iter().map(|z| z.re).sum::<f64>() / dim;
    noise.max(NOISE_FLOOR * mean)
}

fn assemble_output_covariance(a: &CMatrix, b: &CMatrix, noise: f64) -> CMatrix {
    let r = a.nrows();
    let mut s = CMatrix::zeros(2 * r, 2 * r);
    s.view_mut((0, 0), (r, r)).copy_from(a);
    s.view_mut((0, r), (r, r)).copy_from(b);
    s.view_mut((r, 0), (r, r)).copy_from(&b.conjugate());
    s.view_mut((r, r), (r, r)).copy_from(&a.conjugate());
    for i in 0..2 * r {
        s[(i, i)] += C64::new(noise, 0.0);
    }
    hermitian_part(&s)
}

/// `Sigma_Y` and the noise variance actually used.
fn output_covariance_with_noise(problem: &EstimationProblem) -> (CMatrix, f64) {
    let (a, b) = problem.signal_blocks();
    let noise = floor_noise(problem.hyper.noise_variance, &a);
    (assemble_output_covariance(&a, &b, noise), noise)
}

/// `Sigma_Y = phi~ Sigma_tot phi~^H + sigma^2 I`, with the noise floor applied.
pub fn output_covariance(problem: &EstimationProblem) -> Result<CMatrix> {
    let (s, _) = output_covariance_with_noise(problem);
    let dev = hermitian_deviation(&s);
    if dev > STRUCTURE_TOL {
        return Err(Error::Internal(format!(
            "Sigma_Y is not Hermitian ({dev:.3e})"
        )));
    }
    Ok(s)
}

/// `Y~^H Sigma_Y^{-1} Y~ + log det Sigma_Y` from one factorization.
pub fn negative_log_marginal_likelihood(problem: &EstimationProblem) -> Result<f64> {
    let (s, _) = output_covariance_with_noise(problem);
    let factor = PsdFactor::new(&s)?;
    let value = factor.quadratic_form(&problem.setup.augmented_y()) + factor.log_det();
    if !value.is_finite() {
        return Err(Error::Numerical {
            message: "marginal likelihood is not finite".into(),
            max_jitter: factor.jitter,
        });
    }
    Ok(value)
}

/// Evaluate the objective at new hyperparameters on a shared setup.
pub fn objective_at(setup: &Arc<EstimationSetup>, hyper: &DcHyperparameters) -> Result<f64> {
    negative_log_marginal_likelihood(&EstimationProblem::unchecked(setup.clone(), hyper.clone())?)
}

/// Estimated kept GFRF parameters of one order.
#[derive(Clone, Debug)]
pub struct OrderEstimate {
    pub order: usize,
    pub reduction: SymmetryReduction,
    pub values: Vec<C64>,
}

impl OrderEstimate {
    /// Value at any point of the excited grid, conjugating dropped representatives.
    pub fn expand(&self) -> Result<Vec<C64>> {
        self.reduction.expand(&self.values)
    }

    /// `(k_1, .., k_m, re, im, abs)` per kept representative.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_gfrf_csv(writer, &self.reduction, &self.values)
    }
}

pub fn write_gfrf_csv<W: Write>(
    writer: W,
    reduction: &SymmetryReduction,
    values: &[C64],
) -> Result<()> {
    if values.len() != reduction.n_parameters() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} parameters",
            values.len(),
            reduction.n_parameters()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=reduction.order).map(|i| format!("k{i}")).collect();
    header.extend(["re", "im", "abs"].map(String::from));
    w.write_record(&header)?;
    for (p, v) in values.iter().enumerate() {
        let mut rec: Vec<String> = reduction
            .parameter_values(p)
            .iter()
            .map(|k| k.to_string())
            .collect();
        rec.extend([fmt_f64(v.re), fmt_f64(v.im), fmt_f64(v.norm())]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    /// Negative log marginal likelihood at the problem's hyperparameters.
    pub objective: f64,
    pub noise_variance: f64,
    pub jitter: f64,
    /// `(max L_ii / min L_ii)^2` of the `Sigma_Y` Cholesky factor.
    pub condition_estimate: f64,
    /// `||Y~ - phi~ H~||`.
    pub residual_norm: f64,
    /// Max deviation of the augmented second half from the conjugated first half, relative.
    pub conjugate_deviation: f64,
    pub rows: usize,
    pub parameters: usize,
}

#[derive(Clone, Debug)]
pub struct GfrfEstimate {
    pub orders: Vec<OrderEstimate>,
    pub diagnostics: EstimateDiagnostics,
}

impl GfrfEstimate {
    pub fn order(&self, m: usize) -> Option<&OrderEstimate> {
        self.orders.iter().find(|o| o.order == m)
    }
}

/// Solved `Sigma_Y^{-1} Y~`, split into halves, with the factor used.
struct Solved {
    a: CVector,
    b: CVector,
    factor: PsdFactor,
    noise: f64,
}

fn solve_output(problem: &EstimationProblem) -> Result<Solved> {
    let (s, noise) = output_covariance_with_noise(problem);
    let factor = PsdFactor::new(&s)?;
    let z = factor.solve_vec(&problem.setup.augmented_y());
    let r = problem.setup.y.len();
    Ok(Solved {
        a: z.rows(0, r).into_owned(),
        b: z.rows(r, r).into_owned(),
        factor,
        noise,
    })
}

/// MAP estimate of the unique kernel entries: `theta_m = P_m G~_m^H Sigma_Y^{-1} Y~`,
/// with `G~_m = [G_m; conj G_m]`.
pub fn map_estimate_time_domain(problem: &EstimationProblem) -> Result<Vec<DVector<f64>>> {
    let s = solve_output(problem)?;
    Ok(time_domain_from(problem, &s))
}

fn time_domain_from(problem: &EstimationProblem, s: &Solved) -> Vec<DVector<f64>> {
    problem
        .setup
        .models
        .iter()
        .zip(&problem.priors)
        .map(|(m, p)| {
            let w = m.g.adjoint() * &s.a + m.g.transpose() * &s.b;
            p * w.map(|z| z.re)
        })
        .collect()
}

/// `H~ = Sigma_tot phi~^H Sigma_Y^{-1} Y~`, returned as its first half per order.
pub fn map_estimate(problem: &EstimationProblem) -> Result<GfrfEstimate> {
    let s = solve_output(problem)?;
    let y_aug = problem.setup.augmented_y();
    let r = problem.setup.y.len();
    let mut orders = Vec::new();
    let mut fitted = CVector::zeros(r);
    let mut conj_dev: f64 = 0.0;
    for (m, p) in problem.setup.models.iter().zip(&problem.priors) {
        let pc = to_complex(p);
        let pw = &pc * (m.g.adjoint() * &s.a + m.g.transpose() * &s.b);
        let first = &m.transform * &pw;
        // block row [C^H, conj K] reduces to conj(F) P (G^H a + G^T b)
        let second = m.transform.conjugate() * &pw;
        let scale = first
            .iter()
            .map(|z| z.norm())
            .fold(f64::MIN_POSITIVE, f64::max);
        let dev = (0..first.len())
            .map(|i| (second[i] - first[i].conj()).norm())
            .fold(0.0, f64::max);
        conj_dev = conj_dev.max(dev / scale);
        let block = problem
            .setup
            .regressor
            .blocks
            .iter()
            .zip(&problem.setup.regressor.orders)
            .find(|(_, &o)| o == m.order)
            .map(|(b, _)| b)
            .expect("one regressor block per order");
        fitted += block * &first;
        orders.push(OrderEstimate {
            order: m.order,
            reduction: m.freq.clone(),
            values: first.iter().copied().collect(),
        });
    }
    let residual = (0..2 * r)
        .map(|i| {
            let f = if i < r {
                fitted[i]
            } else {
                fitted[i - r].conj()
            };
            (y_aug[i] - f).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    let l = s.factor.l();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].re).collect();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| {
        (lo.min(d), hi.max(d))
    });
    let objective = s.factor.quadratic_form(&y_aug) + s.factor.log_det();
    if conj_dev > 1e-8 {
        return Err(Error::Numerical {
            message: format!("MAP estimate lost conjugate symmetry ({conj_dev:.3e})"),
            max_jitter: s.factor.jitter,
        });
    }
    Ok(GfrfEstimate {
        orders,
        diagnostics: EstimateDiagnostics {
            objective,
            noise_variance: s.noise,
            jitter: s.factor.jitter,
            condition_estimate: if lo > 0.0 {
                (hi / lo).powi(2)
            } else {
                f64::INFINITY
            },
            residual_norm: residual,
            conjugate_deviation: conj_dev,
            rows: r,
            parameters: problem.setup.n_parameters(),
        },
    })
}

/// Full PSD and structure check of `Sigma_Y`, used by the property suite.
pub fn check_output_covariance(problem: &EstimationProblem) -> Result<()> {
    let s = output_covariance(problem)?;
    if !is_psd(&s) {
        return Err(Error::Internal("Sigma_Y is not PSD".into()));
    }
    Ok(())
}

/// Relative Frobenius error over the whole excited grid of each order, pooled.
pub fn relative_gfrf_error(estimate: &GfrfEstimate, truth: &[(usize, Vec<C64>)]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (m, values) in truth {
        let est = estimate
            .order(*m)
            .ok_or_else(|| Error::DimensionMismatch(format!("no order-{m} estimate")))?;
        let full = est.expand()?;
        if full.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "order {m}: {} estimated grid points, {} true",
                full.len(),
                values.len()
            )));
        }
        for (a, b) in full.iter().zip(values) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::OrderHyper;

    fn spectrum_with(n: usize, bins: &[(usize, C64)]) -> Spectrum {
        let mut v = vec![C64::new(0.0, 0.0); n];
        for &(k, c) in bins {
            v[k] = c;
            v[n - k] = c.conj();
        }
        Spectrum::new(v)
    }

    #[test]
    fn single_tone_second_order_row() {
        let c = C64::new(0.3, -1.2);
        let u = spectrum_with(8, &[(1, c)]);
        let grid = FrequencyGrid::for_orders(8, &[1], &[2]).unwrap();
        assert_eq!(grid.excited_output, vec![2]);
        let red = build_symmetry_reduction(2, &Grid::Frequency(grid.omega.clone())).unwrap();
        let reg = build_regressor(&u, &grid, std::slice::from_ref(&red)).unwrap();
        let phi = &reg.blocks[0];
        assert_eq!(phi.shape(), (1, 2));
        for (p, v) in phi.row(0).iter().enumerate() {
            if red.parameter_values(p) == vec![1, 1] {
                assert!((v - c * c / 8.0).norm() < 1e-15);
            } else {
                assert_eq!(*v, C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn two_tone_cross_term_has_multiplicity_two() {
        let (a, b) = (C64::new(1.0, 0.5), C64::new(-0.2, 0.7));
        let u = spectrum_with(16, &[(1, a), (2, b)]);
        let grid = FrequencyGrid::for_orders(16, &[1, 2], &[2]).unwrap();
        let red = build_symmetry_reduction(2, &Grid::Frequency(grid.omega.clone())).unwrap();
        let reg = build_regressor(&u, &grid, std::slice::from_ref(&red)).unwrap();
        let row = grid.excited_output.iter().position(|&k| k == 3).unwrap();
        let col = (0..red.n_parameters())
            .find(|&p| red.parameter_values(p) == vec![1, 2])
            .unwrap();
        assert!((reg.blocks[0][(row, col)] - a * b * 2.0 / 16.0).norm() < 1e-15);
    }

    #[test]
    fn zero_input_gives_zero_regressor() {
        let grid = FrequencyGrid::for_orders(16, &[1, 2], &[1, 2]).unwrap();
        let u = Spectrum::new(vec![C64::new(0.0, 0.0); 16]);
        let reds: Vec<_> = [1, 2]
            .iter()
            .map(|&m| build_symmetry_reduction(m, &Grid::Frequency(grid.omega.clone())).unwrap())
            .collect();
        let reg = build_regressor(&u, &grid, &reds).unwrap();
        assert!(reg.phi().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn augmented_regressor_is_block_diagonal() {
        let u = spectrum_with(16, &[(1, C64::new(1.0, 0.2)), (2, C64::new(0.4, -0.3))]);
        let grid = FrequencyGrid::for_orders(16, &[1, 2], &[1, 2]).unwrap();
        let reds: Vec<_> = [1, 2]
            .iter()
            .map(|&m| build_symmetry_reduction(m, &Grid::Frequency(grid.omega.clone())).unwrap())
            .collect();
        let reg = build_regressor(&u, &grid, &reds).unwrap();
        let aug = reg.augmented();
        let (r, p1) = (reg.n_rows(), reg.blocks[0].ncols());
        assert_eq!(aug.shape(), (2 * r, 2 * reg.n_parameters()));
        for i in 0..r {
            for j in 0..p1 {
                assert_eq!(aug[(i, j)], reg.blocks[0][(i, j)]);
                assert_eq!(aug[(r + i, p1 + j)], reg.blocks[0][(i, j)].conj());
                assert_eq!(aug[(r + i, j)], C64::new(0.0, 0.0));
            }
        }
    }

    fn toy_problem(noise: f64) -> EstimationProblem {
        let u = spectrum_with(8, &[(1, C64::new(1.0, 0.5))]);
        let y = spectrum_with(8, &[(2, C64::new(0.2, -0.1))]);
        let setup = Arc::new(EstimationSetup::new(&u, &y, &[(2, 3)]).unwrap());
        let hyper =
            DcHyperparameters::new(vec![OrderHyper::shared(2, 1.0, 0.6, 0.5)], noise).unwrap();
        EstimationProblem::new(setup, hyper).unwrap()
    }

    #[test]
    fn zero_prior_gives_noise_covariance_and_norm_objective() {
        let mut p = toy_problem(1.0);
        for prior in &mut p.priors {
            prior.fill(0.0);
        }
        let s = output_covariance(&p).unwrap();
        assert_eq!(s, CMatrix::identity(2, 2));
        let nlml = negative_log_marginal_likelihood(&p).unwrap();
        assert!((nlml - p.setup.augmented_y().norm_squared()).abs() < 1e-15);
    }

    #[test]
    fn zero_output_gives_zero_estimate() {
        let mut p = toy_problem(1e-3);
        let mut setup = (*p.setup).clone();
        setup.y.fill(C64::new(0.0, 0.0));
        p.setup = Arc::new(setup);
        let est = map_estimate(&p).unwrap();
        assert!(est.orders[0].values.iter().all(|z| z.norm() == 0.0));
    }
}

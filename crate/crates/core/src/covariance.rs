//! Diagonal/correlated (DC) priors over Volterra kernels and their augmented
//! frequency-domain counterparts.
//!
//! The order-`m` prior over the full lag grid is the Kronecker product of
//! per-axis 1-D DC matrices `lambda^((i+j)/2) rho^|i-j|`, scaled once by `c_m`.
//! It is then projected onto symmetric kernels (averaging over index
//! permutations of both arguments) and restricted to the unique lag
//! representatives of [`crate::mdft::SymmetryReduction`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_deviation, hermitian_part, is_psd, is_psd_real, symmetric_deviation, symmetric_part,
    to_complex, CMatrix, STRUCTURE_TOL,
};
use crate::mdft::{build_symmetry_reduction, Grid, SymmetryReduction, VecIndexMap};
use crate::signals::C64;
use crate::volterra::permutations;

/// Schema version of the serialized hyperparameter vector.
pub const HYPER_SCHEMA_VERSION: u32 = 1;

/// DC hyperparameters of one kernel order.
///
/// `decay` and `correlation` hold either one shared value or one value per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderHyper {
    pub order: usize,
    pub scale: f64,
    pub decay: Vec<f64>,
    pub correlation: Vec<f64>,
}

impl OrderHyper {
    pub fn shared(order: usize, scale: f64, decay: f64, correlation: f64) -> Self {
        Self {
            order,
            scale,
            decay: vec![decay],
            correlation: vec![correlation],
        }
    }

    pub fn decay_axis(&self, d: usize) -> f64 {
        if self.decay.len() == 1 {
            self.decay[0]
        } else {
            self.decay[d]
        }
    }

    pub fn correlation_axis(&self, d: usize) -> f64 {
        if self.correlation.len() == 1 {
            self.correlation[0]
        } else {
            self.correlation[d]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidHyperparameter(
                "order must be positive".into(),
            ));
        }
        for (name, v) in [("decay", &self.decay), ("correlation", &self.correlation)] {
            if v.len() != 1 && v.len() != self.order {
                return Err(Error::InvalidHyperparameter(format!(
                    "order {}: {name} needs 1 or {} values, got {}",
                    self.order,
                    self.order,
                    v.len()
                )));
            }
        }
        check_dc(self.scale, &self.decay, &self.correlation)
            .map_err(|e| e.context(format!("order {}", self.order)))
    }
}

fn check_dc(scale: f64, decay: &[f64], correlation: &[f64]) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidHyperparameter(format!(
            "scale {scale} must be > 0"
        )));
    }
    if let Some(l) = decay.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
        return Err(Error::InvalidHyperparameter(format!(
            "decay {l} outside (0, 1]"
        )));
    }
    if let Some(r) = correlation.iter().find(|r| r.is_nan() || r.abs() > 1.0) {
        return Err(Error::InvalidHyperparameter(format!(
            "correlation {r} outside [-1, 1]"
        )));
    }
    Ok(())
}

/// Hyperparameter vector `eta`: one DC block per order, ascending, then the noise variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcHyperparameters {
    pub schema_version: u32,
    pub orders: Vec<OrderHyper>,
    pub noise_variance: f64,
}

impl DcHyperparameters {
    pub fn new(mut orders: Vec<OrderHyper>, noise_variance: f64) -> Result<Self> {
        orders.sort_by_key(|o| o.order);
        let h = Self {
            schema_version: HYPER_SCHEMA_VERSION,
            orders,
            noise_variance,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != HYPER_SCHEMA_VERSION {
            return Err(Error::InvalidHyperparameter(format!(
                "unsupported schema version {}",
                self.schema_version
            )));
        }
        if self.orders.windows(2).any(|w| w[0].order >= w[1].order) {
            return Err(Error::InvalidHyperparameter(
                "orders must be strictly increasing".into(),
            ));
        }
        for o in &self.orders {
            o.validate()?;
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!(
                "noise variance {} must be >= 0",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn order(&self, m: usize) -> Option<&OrderHyper> {
        self.orders.iter().find(|o| o.order == m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let h: Self = serde_json::from_str(s)?;
        h.validate()?;
        Ok(h)
    }

    /// Multiply every order's scale by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for o in &mut out.orders {
            o.scale *= alpha;
        }
        out
    }
}

/// `P(i, j) = c lambda^((i+j)/2) rho^|i-j|`, `n x n`.
pub fn dc_matrix_1d(scale: f64, decay: f64, correlation: f64, n: usize) -> Result<DMatrix<f64>> {
    check_dc(scale, &[decay], &[correlation])?;
    Ok(dc_unchecked(scale, decay, correlation, n))
}

fn dc_unchecked(scale: f64, decay: f64, correlation: f64, n: usize) -> DMatrix<f64> {
    let half: Vec<f64> = (0..n).map(|i| decay.powf(i as f64 / 2.0)).collect();
    let corr: Vec<f64> = (0..n).map(|d| correlation.powi(d as i32)).collect();
    DMatrix::from_fn(n, n, |i, j| scale * half[i] * half[j] * corr[i.abs_diff(j)])
}

/// Kronecker-DC prior over the full lag grid `{0..n-1}^m`, before symmetrization.
pub fn kronecker_prior_full(hyper: &OrderHyper, memory: usize) -> Result<DMatrix<f64>> {
    hyper.validate()?;
    let m = hyper.order;
    let axes: Vec<DMatrix<f64>> = (0..m)
        .map(|d| dc_unchecked(1.0, hyper.decay_axis(d), hyper.correlation_axis(d), memory))
        .collect();
    let map = VecIndexMap::new(m, memory);
    let size = map.len();
    let idx: Vec<Vec<usize>> = (0..size).map(|f| map.multi(f)).collect();
    Ok(DMatrix::from_fn(size, size, |a, b| {
        hyper.scale
            * (0..m)
                .map(|d| axes[d][(idx[a][d], idx[b][d])])
                .product::<f64>()
    }))
}

/// Symmetrized DC prior over the unique lag representatives of an order-`m` kernel.
#[derive(Clone, Debug)]
pub struct TimePrior {
    pub order: usize,
    pub memory: usize,
    pub reduction: SymmetryReduction,
    pub matrix: DMatrix<f64>,
}

/// Covariance of the unique entries of the symmetrized kernel.
pub(crate) fn time_prior_matrix(hyper: &OrderHyper, lag: &SymmetryReduction) -> DMatrix<f64> {
    let m = hyper.order;
    let memory = lag.grid.len();
    let axes: Vec<DMatrix<f64>> = (0..m)
        .map(|d| dc_unchecked(1.0, hyper.decay_axis(d), hyper.correlation_axis(d), memory))
        .collect();
    let perms = permutations(m);
    let shared = hyper.decay.len() == 1 && hyper.correlation.len() == 1;
    let reps = &lag.representatives;
    let r = reps.len();
    let mut p = DMatrix::zeros(r, r);
    for a in 0..r {
        for b in a..r {
            let (ra, rb) = (&reps[a], &reps[b]);
            let v = if shared {
                // with identical axes the double average collapses to a single one
                perms
                    .iter()
                    .map(|pi| (0..m).map(|d| axes[0][(ra[pi[d]], rb[d])]).product::<f64>())
                    .sum::<f64>()
                    / perms.len() as f64
            } else {
                let mut acc = 0.0;
                for pi in &perms {
                    for sigma in &perms {
                        acc += (0..m)
                            .map(|d| axes[d][(ra[pi[d]], rb[sigma[d]])])
                            .product::<f64>();
                    }
                }
                acc / (perms.len() * perms.len()) as f64
            };
            p[(a, b)] = hyper.scale * v;
            p[(b, a)] = hyper.scale * v;
        }
    }
    p
}

pub fn build_time_prior(order: usize, memory: usize, hyper: &OrderHyper) -> Result<TimePrior> {
    if hyper.order != order {
        return Err(Error::InvalidHyperparameter(format!(
            "hyperparameters for order {} used for order {order}",
            hyper.order
        )));
    }
    hyper.validate()?;
    let reduction = build_symmetry_reduction(order, &Grid::Lag(memory))?;
    let matrix = time_prior_matrix(hyper, &reduction);
    if !is_psd_real(&matrix) {
        return Err(Error::Internal(format!(
            "order-{order} time prior lost positive semidefiniteness"
        )));
    }
    Ok(TimePrior {
        order,
        memory,
        reduction,
        matrix,
    })
}

/// Augmented covariance `[[K, C], [C^H, conj K]]` of a complex Gaussian vector.
#[derive(Clone, Debug)]
pub struct AugmentedCovariance {
    pub k: CMatrix,
    pub c: CMatrix,
}

impl AugmentedCovariance {
    /// Checks the Hermitian / symmetric structure, then stores the exactly
    /// symmetrized parts.
    pub fn new(k: CMatrix, c: CMatrix) -> Result<Self> {
        if !k.is_square() || k.shape() != c.shape() {
            return Err(Error::DimensionMismatch(format!(
                "K is {:?}, C is {:?}",
                k.shape(),
                c.shape()
            )));
        }
        let kd = hermitian_deviation(&k);
        if kd > STRUCTURE_TOL {
            return Err(Error::Internal(format!(
                "K is not Hermitian (deviation {kd:.3e})"
            )));
        }
        let cd = symmetric_deviation(&c);
        if cd > STRUCTURE_TOL {
            return Err(Error::Internal(format!(
                "C is not symmetric (deviation {cd:.3e})"
            )));
        }
        Ok(Self {
            k: hermitian_part(&k),
            c: symmetric_part(&c),
        })
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn sigma(&self) -> CMatrix {
        let n = self.dim();
        let mut s = CMatrix::zeros(2 * n, 2 * n);
        s.view_mut((0, 0), (n, n)).copy_from(&self.k);
        s.view_mut((0, n), (n, n)).copy_from(&self.c);
        s.view_mut((n, 0), (n, n)).copy_from(&self.c.adjoint());
        s.view_mut((n, n), (n, n)).copy_from(&self.k.conjugate());
        s
    }

    /// Structure checks plus `min eig(Sigma) >= -1e-10 max eig(Sigma)`.
    pub fn validate(&self) -> Result<()> {
        if hermitian_deviation(&self.k) > STRUCTURE_TOL
            || symmetric_deviation(&self.c) > STRUCTURE_TOL
        {
            return Err(Error::Internal(
                "augmented covariance lost its structure".into(),
            ));
        }
        if !is_psd(&self.sigma()) {
            return Err(Error::Internal("augmented covariance is not PSD".into()));
        }
        Ok(())
    }
}

/// `K = F P F^H`, `C = F P F^T`.
pub fn to_frequency_domain(
    prior: &DMatrix<f64>,
    transform: &CMatrix,
) -> Result<AugmentedCovariance> {
    if transform.ncols() != prior.nrows() || !prior.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "transform is {:?}, prior is {:?}",
            transform.shape(),
            prior.shape()
        )));
    }
    let fp = transform * to_complex(prior);
    let k = &fp * transform.adjoint();
    let c = &fp * transform.transpose();
    AugmentedCovariance::new(k, c)
}

/// Block-diagonal `Sigma_tot = diag(Sigma_1, .., Sigma_M)`.
pub fn assemble_sigma_tot(blocks: &[AugmentedCovariance]) -> Result<CMatrix> {
    if blocks.is_empty() {
        return Err(Error::InvalidSpec(
            "at least one covariance block is required".into(),
        ));
    }
    let total: usize = blocks.iter().map(|b| 2 * b.dim()).sum();
    let mut s = CMatrix::from_element(total, total, C64::new(0.0, 0.0));
    let mut offset = 0;
    for b in blocks {
        let sig = b.sigma();
        let n = sig.nrows();
        s.view_mut((offset, offset), (n, n)).copy_from(&sig);
        offset += n;
    }
    Ok(s)
}

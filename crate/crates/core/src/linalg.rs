//! Dense complex linear-algebra helpers: structure checks and jittered PSD factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::signals::C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance for Hermitian / symmetric structure.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Relative tolerance on the smallest eigenvalue.
pub const PSD_TOL: f64 = 1e-10;

/// First jitter step, relative to `trace / dim`; grown tenfold up to [`MAX_JITTER`].
pub const MIN_JITTER: f64 = 1e-10;
pub const MAX_JITTER: f64 = 1e-6;

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc: f64, z| acc.max(z.norm()))
}

/// `max |M - M^H| / max |M|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    relative(m, |i, j| (m[(i, j)] - m[(j, i)].conj()).norm())
}

/// `max |M - M^T| / max |M|`.
pub fn symmetric_deviation(m: &CMatrix) -> f64 {
    relative(m, |i, j| (m[(i, j)] - m[(j, i)]).norm())
}

fn relative(m: &CMatrix, dev: impl Fn(usize, usize) -> f64) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max(dev(i, j));
        }
    }
    worst / scale
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn symmetric_part(m: &CMatrix) -> CMatrix {
    (m + m.transpose()) * C64::new(0.5, 0.0)
}

/// Extreme eigenvalues of a Hermitian matrix.
pub fn eigen_range(m: &CMatrix) -> (f64, f64) {
    if m.is_empty() {
        return (0.0, 0.0);
    }
    let eig = hermitian_part(m).symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn eigen_range_real(m: &DMatrix<f64>) -> (f64, f64) {
    if m.is_empty() {
        return (0.0, 0.0);
    }
    let eig = ((m + m.transpose()) * 0.5).symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// `min eig >= -PSD_TOL * max eig`.
pub fn is_psd(m: &CMatrix) -> bool {
    let (lo, hi) = eigen_range(m);
    lo >= -PSD_TOL * hi.max(0.0)
}

pub fn is_psd_real(m: &DMatrix<f64>) -> bool {
    let (lo, hi) = eigen_range_real(m);
    lo >= -PSD_TOL * hi.max(0.0)
}

/// Cholesky factor of a Hermitian PSD matrix, with the diagonal jitter it needed.
#[derive(Clone, Debug)]
pub struct PsdFactor {
    l: CMatrix,
    /// Absolute value added to the diagonal.
    pub jitter: f64,
}

impl PsdFactor {
    /// Plain Cholesky first; on failure add `j * trace / dim` for
    /// `j = 1e-10, 1e-9, .., 1e-6`.
    pub fn new(m: &CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "cannot factor a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical {
                message: "matrix has non-finite entries".into(),
                max_jitter: 0.0,
            });
        }
        if let Some(l) = cholesky_lower(m.clone()) {
            return Ok(Self { l, jitter: 0.0 });
        }
        let dim = m.nrows().max(1) as f64;
        let base = (m.diagonal().iter().map(|z| z.re).sum::<f64>() / dim).abs();
        let base = if base > 0.0 { base } else { 1.0 };
        let mut rel = MIN_JITTER;
        while rel <= MAX_JITTER * (1.0 + 1e-9) {
            let jitter = rel * base;
            let mut shifted = m.clone();
            for i in 0..m.nrows() {
                shifted[(i, i)] += C64::new(jitter, 0.0);
            }
            if let Some(l) = cholesky_lower(shifted) {
                return Ok(Self { l, jitter });
            }
            rel *= 10.0;
        }
        Err(Error::Numerical {
            message: format!(
                "{}x{} matrix is not positive definite",
                m.nrows(),
                m.ncols()
            ),
            max_jitter: MAX_JITTER * base,
        })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve(&self, rhs: &CMatrix) -> CMatrix {
        let mut x = rhs.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        self.l.ad_solve_lower_triangular_mut(&mut x);
        x
    }

    pub fn solve_vec(&self, rhs: &CVector) -> CVector {
        let mut x = rhs.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        self.l.ad_solve_lower_triangular_mut(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.nrows())
            .map(|i| self.l[(i, i)].re.ln())
            .sum::<f64>()
    }

    /// `x^H M^{-1} x`, from one triangular solve.
    pub fn quadratic_form(&self, x: &CVector) -> f64 {
        let mut z = x.clone();
        self.l.solve_lower_triangular_mut(&mut z);
        z.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Lower factor `L` with `M + jitter I = L L^H`.
    pub fn l(&self) -> &CMatrix {
        &self.l
    }
}

/// Hermitian Cholesky that insists on strictly positive real pivots; reads the lower triangle.
fn cholesky_lower(mut a: CMatrix) -> Option<CMatrix> {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= a[(j, k)].norm_sqr();
        }
        if !d.is_finite() || d <= 0.0 {
            return None;
        }
        let d = d.sqrt();
        a[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= a[(i, k)] * a[(j, k)].conj();
            }
            a[(i, j)] = v / d;
        }
    }
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Some(a)
}

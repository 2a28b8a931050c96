//! Exact transient decomposition of second-order Volterra outputs under
//! non-periodic excitation, plus the first-order (linear) transient.
//!
//! With `f(s) = u(s) - u(s + N)` for `s < 0` and `H_2` the 2-D DFT of `h_2`,
//! the DFT of the output over the window `0..N-1` splits as
//! `Y(k) = SS(k) + T1(k) + T2(k) + T3(k)`, where
//!
//! * `SS(k) = 1/N sum_{k1} H_2(k1, k - k1) U(k1) U(k - k1)` is the periodic part,
//! * `T_i(k) = 1/N sum_{k1} sum_{t', t''} h*_i(t', t'') e^{-j w_{k1} t'} e^{-j w_{k-k1} t''}`
//!   collapse the 2-D transforms of three finite surfaces `h*_i`.
//!
//! The `1/N` is the hyperplane factor that makes `SS` the DFT of the periodic output
//! when `U` is the unnormalized forward DFT.
//!
//! Support of the surfaces for a kernel of memory `n`:
//! `h*_1(t', t'') = sum_{tau1} sum_{tau2 > t''} h_2(tau1, tau2) u(t' - tau1) f(t'' - tau2)`
//! with `max(0, t' + 1 - N) <= tau1 <= min(t', n - 1)`. The `u` argument stays inside the
//! window, so `t' <= N + n - 2`, and `tau2 <= n - 1` forces `t'' <= n - 2`.
//! `h*_2` is the same with the axes swapped, and
//! `h*_3(t', t'') = sum_{tau1 > t'} sum_{tau2 > t''} h_2 f(t' - tau1) f(t'' - tau2)`
//! lives on `t', t'' <= n - 2`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::mdft::{apply_mdft, dft_matrix};
use crate::signals::{dft_real, twiddle, Spectrum, TimeSignal, C64};
use crate::volterra::VolterraKernel;

/// `f(t) = u(t) - u(t + N)` on `t = -n_pre .. -1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceSignal {
    values: Vec<f64>,
    n_pre: usize,
}

impl DifferenceSignal {
    pub fn new(u: &TimeSignal) -> Result<Self> {
        let n = u.n_points();
        if u.n_pre() > n {
            return Err(Error::InvalidSpec(format!(
                "pre-history of {} samples exceeds the window length {n}",
                u.n_pre()
            )));
        }
        let n_pre = u.n_pre();
        let values = (-(n_pre as i64)..0)
            .map(|t| u.at(t) - u.at(t + n as i64))
            .collect();
        Ok(Self { values, n_pre })
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `f(t)` for `t < 0`; zero before the stored range and for `t >= 0`.
    pub fn at(&self, t: i64) -> f64 {
        let idx = t + self.n_pre as i64;
        if t >= 0 || idx < 0 {
            0.0
        } else {
            self.values[idx as usize]
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

fn check_history(memory: usize, u: &TimeSignal) -> Result<()> {
    let n = u.n_points();
    if memory > n {
        return Err(Error::InvalidSpec(format!(
            "kernel memory {memory} exceeds the window length {n}"
        )));
    }
    let needed = memory.saturating_sub(1);
    if u.n_pre() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: u.n_pre(),
        });
    }
    Ok(())
}

/// Transient of a linear FIR system: `T(k) = sum_t h*(t) e^{-j w_k t}`,
/// `h*(t) = sum_{n > t} h(n) f(t - n)`.
pub fn linear_transient(h: &[f64], u: &TimeSignal) -> Result<Vec<C64>> {
    check_history(h.len(), u)?;
    let f = DifferenceSignal::new(u)?;
    let n = u.n_points();
    let support = h.len().saturating_sub(1);
    let hstar: Vec<f64> = (0..support)
        .map(|t| {
            (t + 1..h.len())
                .map(|lag| h[lag] * f.at(t as i64 - lag as i64))
                .sum()
        })
        .collect();
    Ok((0..n)
        .map(|k| {
            hstar
                .iter()
                .enumerate()
                .map(|(t, &v)| twiddle(k as i64, t as i64, n) * v)
                .sum()
        })
        .collect())
}

fn check_second_order(h2: &VolterraKernel) -> Result<()> {
    if h2.order() != 2 {
        return Err(Error::InvalidSpec(format!(
            "expected a second-order kernel, got order {}",
            h2.order()
        )));
    }
    Ok(())
}

/// `SS(k) = 1/N sum_{k1} H_2(k1, k - k1) U(k1) U(k - k1)`, indices modulo `N`.
pub fn steady_state_spectrum(h2: &VolterraKernel, u: &Spectrum) -> Result<Vec<C64>> {
    check_second_order(h2)?;
    let n = u.n_points();
    let gfrf = apply_mdft(h2, n)?;
    let scale = 1.0 / n as f64;
    Ok((0..n as i64)
        .map(|k| {
            (0..n as i64)
                .map(|k1| gfrf.at(&[k1, k - k1]) * u.at(k1) * u.at(k - k1))
                .sum::<C64>()
                * scale
        })
        .collect())
}

/// Steady state, the three transient terms and their time-domain surfaces.
#[derive(Clone, Debug)]
pub struct TransientDecomposition {
    pub n_points: usize,
    pub memory: usize,
    pub ss: Vec<C64>,
    pub t1: Vec<C64>,
    pub t2: Vec<C64>,
    pub t3: Vec<C64>,
    pub total: Vec<C64>,
    /// Rows `t' = 0..N+n-2`, columns `t'' = 0..n-2`.
    pub h_star_1: DMatrix<f64>,
    /// Rows `t' = 0..n-2`, columns `t'' = 0..N+n-2`.
    pub h_star_2: DMatrix<f64>,
    /// Rows and columns `0..n-2`.
    pub h_star_3: DMatrix<f64>,
    /// Whether the kernel was exactly symmetric.
    pub kernel_symmetric: bool,
}

impl TransientDecomposition {
    /// `SS + T1 + T2 + T3`.
    pub fn output(&self) -> Vec<C64> {
        self.ss
            .iter()
            .zip(&self.total)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// `sum_{sigma} sum_{rho} h(sigma, rho) u(t_u - sigma) f(t_f - rho)` over the lags that keep
/// `u` in the window and `f` in the pre-history.
fn cross_surface(
    n: usize,
    memory: usize,
    t_u: usize,
    t_f: usize,
    kernel: impl Fn(usize, usize) -> f64,
    u: &TimeSignal,
    f: &DifferenceSignal,
) -> f64 {
    let lo = (t_u + 1).saturating_sub(n);
    let hi = t_u.min(memory - 1);
    let mut acc = 0.0;
    for sigma in lo..=hi {
        let us = u.at(t_u as i64 - sigma as i64);
        for rho in t_f + 1..memory {
            acc += kernel(sigma, rho) * us * f.at(t_f as i64 - rho as i64);
        }
    }
    acc
}

/// `1/N sum_{k1} A(k1, k - k1)` with `A` the 2-D DFT of the surface.
fn collapse(surface: &DMatrix<f64>, n: usize, w: &DMatrix<C64>) -> Vec<C64> {
    if surface.is_empty() {
        return vec![C64::new(0.0, 0.0); n];
    }
    let mut folded = DMatrix::<C64>::zeros(n, n);
    for c in 0..surface.ncols() {
        for r in 0..surface.nrows() {
            folded[(r % n, c % n)] += C64::new(surface[(r, c)], 0.0);
        }
    }
    let spectrum = w * folded * w.transpose();
    let scale = 1.0 / n as f64;
    (0..n)
        .map(|k| {
            (0..n)
                .map(|k1| spectrum[(k1, (k + n - k1) % n)])
                .sum::<C64>()
                * scale
        })
        .collect()
}

pub fn transient_terms(h2: &VolterraKernel, u: &TimeSignal) -> Result<TransientDecomposition> {
    check_second_order(h2)?;
    let memory = h2.memory();
    check_history(memory, u)?;
    let n = u.n_points();
    let f = DifferenceSignal::new(u)?;
    let ss = steady_state_spectrum(h2, &dft_real(u.window()))?;
    let tail = memory - 1;
    let long = n + memory - 1;
    let h = |a: usize, b: usize| h2.get(&[a, b]);
    let h_star_1 = DMatrix::from_fn(long, tail, |tp, tpp| {
        cross_surface(n, memory, tp, tpp, h, u, &f)
    });
    let h_star_2 = DMatrix::from_fn(tail, long, |tp, tpp| {
        cross_surface(n, memory, tpp, tp, |s, r| h(r, s), u, &f)
    });
    let h_star_3 = DMatrix::from_fn(tail, tail, |tp, tpp| {
        let mut acc = 0.0;
        for t1 in tp + 1..memory {
            let f1 = f.at(tp as i64 - t1 as i64);
            for t2 in tpp + 1..memory {
                acc += h(t1, t2) * f1 * f.at(tpp as i64 - t2 as i64);
            }
        }
        acc
    });
    let w = dft_matrix(n);
    let t1 = collapse(&h_star_1, n, &w);
    let t2 = collapse(&h_star_2, n, &w);
    let t3 = collapse(&h_star_3, n, &w);
    let total = (0..n).map(|k| t1[k] + t2[k] + t3[k]).collect();
    Ok(TransientDecomposition {
        n_points: n,
        memory,
        ss,
        t1,
        t2,
        t3,
        total,
        h_star_1,
        h_star_2,
        h_star_3,
        kernel_symmetric: h2.is_symmetric(),
    })
}

/// Tolerance for the `T1 = T2` check.
pub const T1_T2_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqualityReport {
    pub max_relative_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `max |a - b|` over `max(max |a|, max |b|)`; zero when both vanish.
pub fn relative_deviation(a: &[C64], b: &[C64]) -> f64 {
    let scale = a.iter().chain(b).map(|z| z.norm()).fold(0.0, f64::max);
    let dev = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        dev / scale
    }
}

pub fn verify_t1_equals_t2(d: &TransientDecomposition) -> Result<EqualityReport> {
    if !d.kernel_symmetric {
        return Err(Error::Precondition(
            "T1 = T2 holds only for symmetric kernels".into(),
        ));
    }
    let dev = relative_deviation(&d.t1, &d.t2);
    Ok(EqualityReport {
        max_relative_deviation: dev,
        tolerance: T1_T2_TOL,
        passed: dev < T1_T2_TOL,
    })
}

/// Residual terms of the diagonal-kernel (Hammerstein) case.
#[derive(Clone, Debug, PartialEq)]
pub struct HammersteinTerms {
    pub r_h: Vec<C64>,
    pub q_h: Vec<C64>,
}

/// `R_H` and `Q_H` from their explicit frequency-domain sums.
///
/// With `g(tau) = h_2(tau, tau)`, `F_tau(k) = sum_{t=-tau}^{-1} f(t) e^{-j w_k t}`,
/// `A_tau(k) = sum_{t=0}^{N-tau-1} u(t) e^{-j w_k t}` and
/// `B_tau(k) = sum_{t=-tau}^{-1} u(t) e^{-j w_k t}`:
/// `Q_H(k) = 1/N sum_{k1} sum_tau g(tau) e^{-j w_k tau} A_tau(k1) F_tau(k - k1)` and
/// `R_H(k)` is the same with `B_tau` in place of `A_tau`.
pub fn hammerstein_terms(h2: &VolterraKernel, u: &TimeSignal) -> Result<HammersteinTerms> {
    check_second_order(h2)?;
    if !h2.is_diagonal() {
        return Err(Error::Precondition(
            "Hammerstein terms need a strictly diagonal kernel".into(),
        ));
    }
    let memory = h2.memory();
    check_history(memory, u)?;
    let n = u.n_points();
    let f = DifferenceSignal::new(u)?;
    let g = h2.diagonal();
    let partial = |lo: i64, hi: i64, x: &dyn Fn(i64) -> f64| -> Vec<C64> {
        (0..n as i64)
            .map(|k| (lo..=hi).map(|t| twiddle(k, t, n) * x(t)).sum())
            .collect()
    };
    let scale = 1.0 / n as f64;
    let mut r_h = vec![C64::new(0.0, 0.0); n];
    let mut q_h = vec![C64::new(0.0, 0.0); n];
    for (tau, &gt) in g.iter().enumerate() {
        if gt == 0.0 || tau == 0 {
            // tau = 0 leaves every pre-history sum empty
            continue;
        }
        let tau_i = tau as i64;
        let ftau = partial(-tau_i, -1, &|t| f.at(t));
        let atau = partial(0, n as i64 - tau_i - 1, &|t| u.at(t));
        let btau = partial(-tau_i, -1, &|t| u.at(t));
        for k in 0..n {
            let rot = twiddle(k as i64, tau_i, n) * gt * scale;
            let mut q = C64::new(0.0, 0.0);
            let mut r = C64::new(0.0, 0.0);
            for k1 in 0..n {
                let fk = ftau[(k + n - k1) % n];
                q += atau[k1] * fk;
                r += btau[k1] * fk;
            }
            q_h[k] += rot * q;
            r_h[k] += rot * r;
        }
    }
    Ok(HammersteinTerms { r_h, q_h })
}

/// `(k, re, im, abs)` rows.
pub fn write_term_csv<W: Write>(writer: W, values: &[C64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "re", "im", "abs"])?;
    for (k, v) in values.iter().enumerate() {
        w.write_record([
            k.to_string(),
            fmt_f64(v.re),
            fmt_f64(v.im),
            fmt_f64(v.norm()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(t1, t2, value)` rows, `t1` slowest.
pub fn write_surface_csv<W: Write>(writer: W, surface: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t1", "t2", "value"])?;
    for r in 0..surface.nrows() {
        for c in 0..surface.ncols() {
            w.write_record([r.to_string(), c.to_string(), fmt_f64(surface[(r, c)])])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::dft;
    use crate::volterra::simulate_with_history;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, n: usize, n_pre: usize) -> TimeSignal {
        let hist = (0..n_pre).map(|_| rng.random_range(-1.0..1.0)).collect();
        let win = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        TimeSignal::with_history(hist, win).unwrap()
    }

    fn max_rel(a: &[C64], b: &[C64]) -> f64 {
        relative_deviation(a, b)
    }

    #[test]
    fn difference_signal_vanishes_for_periodic_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_signal(&mut rng, 10, 0).with_periodic_history(6);
        assert!(DifferenceSignal::new(&u).unwrap().is_zero());
    }

    #[test]
    fn linear_transient_matches_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = random_signal(&mut rng, 16, 0).with_zero_history(5);
        let kernel = VolterraKernel::new(1, 6, h.clone()).unwrap();
        let y = dft(&simulate_with_history(std::slice::from_ref(&kernel), &u).unwrap());
        let uw = dft_real(u.window());
        let hk = apply_mdft(&kernel, 16).unwrap();
        let t = linear_transient(&h, &u).unwrap();
        let expected: Vec<C64> = (0..16).map(|k| y.at(k) - hk.at(&[k]) * uw.at(k)).collect();
        assert!(max_rel(&t, &expected) < 1e-10);
    }

    #[test]
    fn memoryless_linear_transient_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_signal(&mut rng, 8, 2);
        assert!(linear_transient(&[0.7], &u)
            .unwrap()
            .iter()
            .all(|z| z.norm() == 0.0));
    }

    #[test]
    fn unit_kernel_steady_state_is_scaled_square_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_signal(&mut rng, 12, 0);
        let h = VolterraKernel::new(2, 1, vec![1.0]).unwrap();
        let ss = steady_state_spectrum(&h, &dft_real(u.window())).unwrap();
        let sq: Vec<f64> = u.window().iter().map(|x| x * x).collect();
        let expected = dft_real(&sq);
        assert!(max_rel(&ss, &expected.bins) < 1e-12);
    }

    #[test]
    fn decomposition_matches_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = VolterraKernel::from_fn(2, 4, |_| rng.random_range(-1.0..1.0))
            .unwrap()
            .symmetrize();
        for n_pre in [3, 5] {
            let u = random_signal(&mut rng, 16, n_pre);
            let y = dft(&simulate_with_history(std::slice::from_ref(&h), &u).unwrap());
            let d = transient_terms(&h, &u).unwrap();
            assert!(max_rel(&d.output(), &y.bins) < 1e-12);
            assert!(verify_t1_equals_t2(&d).unwrap().passed);
        }
    }

    #[test]
    fn surfaces_mirror_exactly_and_respect_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = VolterraKernel::from_fn(2, 5, |_| rng.random_range(-1.0..1.0))
            .unwrap()
            .symmetrize();
        let u = random_signal(&mut rng, 8, 4);
        let d = transient_terms(&h, &u).unwrap();
        assert_eq!(d.h_star_1.shape(), (8 + 4, 4));
        assert_eq!(d.h_star_1, d.h_star_2.transpose());
        assert_eq!(d.h_star_3.shape(), (4, 4));
    }

    #[test]
    fn collapse_matches_aliased_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 6;
        let s = DMatrix::from_fn(9, 3, |_, _| rng.random_range(-1.0..1.0));
        let t = collapse(&s, n, &dft_matrix(n));
        for (k, tk) in t.iter().enumerate() {
            let mut direct = C64::new(0.0, 0.0);
            for r in 0..9 {
                for c in 0..3 {
                    if (r as i64 - c as i64).rem_euclid(n as i64) == 0 {
                        direct += twiddle(k as i64, c as i64, n) * s[(r, c)];
                    }
                }
            }
            assert!((tk - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        let h = VolterraKernel::new(2, 2, vec![1.0, 0.5, -0.5, 1.0]).unwrap();
        let u = TimeSignal::with_history(vec![0.3], vec![1.0, -1.0, 0.5, 0.2]).unwrap();
        let d = transient_terms(&h, &u).unwrap();
        assert!(matches!(
            verify_t1_equals_t2(&d),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn hammerstein_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h =
            VolterraKernel::from_fn(2, 5, |i| if i[0] == i[1] { g[i[0]] } else { 0.0 }).unwrap();
        let base = random_signal(&mut rng, 16, 0);
        let zero = base.with_zero_history(4);
        let terms = hammerstein_terms(&h, &zero).unwrap();
        assert!(terms.r_h.iter().all(|z| z.norm() == 0.0));
        let hist: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = TimeSignal::with_history(hist, base.window().to_vec()).unwrap();
        let d = transient_terms(&h, &u).unwrap();
        let terms = hammerstein_terms(&h, &u).unwrap();
        let ss_peak = d.ss.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(terms.q_h.iter().all(|z| z.norm() < 1e-9 * ss_peak));
        let y = dft(&simulate_with_history(std::slice::from_ref(&h), &u).unwrap());
        let model: Vec<C64> = (0..16)
            .map(|k| d.ss[k] - d.t3[k] + terms.r_h[k] * 2.0)
            .collect();
        assert!(max_rel(&model, &y.bins) < 1e-12);
    }

    #[test]
    fn non_diagonal_kernel_rejected() {
        let h = VolterraKernel::new(2, 2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let u = TimeSignal::with_history(vec![0.3], vec![1.0, -1.0, 0.5, 0.2]).unwrap();
        assert!(matches!(
            hammerstein_terms(&h, &u),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn short_history_rejected() {
        let h = VolterraKernel::zeros(2, 4).unwrap();
        let u = TimeSignal::with_history(vec![0.0], vec![1.0; 8]).unwrap();
        assert!(matches!(
            transient_terms(&h, &u),
            Err(Error::InsufficientHistory {
                needed: 3,
                available: 1
            })
        ));
    }
}

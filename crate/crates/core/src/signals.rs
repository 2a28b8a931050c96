//! Excitation design, DFT utilities and excited-index bookkeeping.
//!
//! The forward transform carries no normalization,
//! `X(k) = sum_t x(t) exp(-j 2 pi k t / N)`, and the inverse carries `1/N`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;

pub type C64 = Complex<f64>;

/// `exp(-j 2 pi k t / N)` with the phase reduced modulo `N` before scaling.
pub fn twiddle(k: i64, t: i64, n: usize) -> C64 {
    let n_i = n as i64;
    let r = (k.rem_euclid(n_i) * t.rem_euclid(n_i)).rem_euclid(n_i);
    let angle = -2.0 * PI * r as f64 / n as f64;
    C64::new(angle.cos(), angle.sin())
}

/// Random-phase multisine design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultisineSpec {
    pub n_points: usize,
    pub excited_indices: Vec<usize>,
    /// One amplitude per excited tone.
    pub amplitudes: Vec<f64>,
    pub seed: u64,
    /// Explicit phases; when absent they are drawn from `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
}

impl MultisineSpec {
    /// All tones at the same amplitude.
    pub fn uniform(
        n_points: usize,
        excited_indices: Vec<usize>,
        amplitude: f64,
        seed: u64,
    ) -> Self {
        let amplitudes = vec![amplitude; excited_indices.len()];
        Self {
            n_points,
            excited_indices,
            amplitudes,
            seed,
            phases: None,
        }
    }

    /// Consecutive tones `1..=count`.
    pub fn consecutive(n_points: usize, count: usize, amplitude: f64, seed: u64) -> Self {
        Self::uniform(n_points, (1..=count).collect(), amplitude, seed)
    }

    pub fn with_phases(mut self, phases: Vec<f64>) -> Self {
        self.phases = Some(phases);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::InvalidSpec(
                "multisine length must be positive".into(),
            ));
        }
        if self.excited_indices.is_empty() {
            return Err(Error::InvalidSpec("multisine has no excited tones".into()));
        }
        if self.excited_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec(
                "excited indices must be strictly increasing".into(),
            ));
        }
        if self.excited_indices[0] == 0 {
            return Err(Error::InvalidSpec(
                "excited indices must be positive".into(),
            ));
        }
        if self.amplitudes.len() != self.excited_indices.len() {
            return Err(Error::InvalidSpec(format!(
                "{} amplitudes given for {} tones",
                self.amplitudes.len(),
                self.excited_indices.len()
            )));
        }
        if self.amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidSpec(
                "amplitudes must be finite and nonnegative".into(),
            ));
        }
        if let Some(phases) = &self.phases {
            if phases.len() != self.excited_indices.len() {
                return Err(Error::InvalidSpec(format!(
                    "{} phases given for {} tones",
                    phases.len(),
                    self.excited_indices.len()
                )));
            }
        }
        Ok(())
    }

    /// Phases used by [`generate_multisine`], drawn uniformly on `[0, 2 pi)`.
    pub fn resolved_phases(&self) -> Vec<f64> {
        if let Some(p) = &self.phases {
            return p.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.excited_indices
            .iter()
            .map(|_| rng.random::<f64>() * 2.0 * PI)
            .collect()
    }
}

/// Real time-domain signal; the first `n_pre` samples sit at `t = -n_pre .. -1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSignal {
    samples: Vec<f64>,
    n_pre: usize,
}

impl TimeSignal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        Self::with_history(Vec::new(), samples)
    }

    /// `history` holds `u(-n_pre) .. u(-1)`, `window` holds `u(0) .. u(N-1)`.
    pub fn with_history(history: Vec<f64>, window: Vec<f64>) -> Result<Self> {
        if window.is_empty() {
            return Err(Error::InvalidSpec("signal window is empty".into()));
        }
        let n_pre = history.len();
        let mut samples = history;
        samples.extend(window);
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec(
                "signal contains non-finite samples".into(),
            ));
        }
        Ok(Self { samples, n_pre })
    }

    /// Window with zero pre-history of length `n_pre`.
    pub fn with_zero_history(&self, n_pre: usize) -> Self {
        let mut samples = vec![0.0; n_pre];
        samples.extend_from_slice(self.window());
        Self { samples, n_pre }
    }

    /// Window preceded by `n_pre` samples of its own periodic extension.
    pub fn with_periodic_history(&self, n_pre: usize) -> Self {
        let window = self.window();
        let n = window.len() as i64;
        let mut samples: Vec<f64> = (-(n_pre as i64)..0)
            .map(|t| window[t.rem_euclid(n) as usize])
            .collect();
        samples.extend_from_slice(window);
        Self { samples, n_pre }
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    /// Window length `N`.
    pub fn n_points(&self) -> usize {
        self.samples.len() - self.n_pre
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn window(&self) -> &[f64] {
        &self.samples[self.n_pre..]
    }

    pub fn history(&self) -> &[f64] {
        &self.samples[..self.n_pre]
    }

    /// Sample at time `t`; zero before the stored pre-history.
    pub fn at(&self, t: i64) -> f64 {
        let idx = t + self.n_pre as i64;
        if idx < 0 {
            0.0
        } else {
            self.samples[idx as usize]
        }
    }

    /// Window sample with periodic wrap.
    pub fn periodic(&self, t: i64) -> f64 {
        let w = self.window();
        w[t.rem_euclid(w.len() as i64) as usize]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "value"])?;
        for (i, x) in self.samples.iter().enumerate() {
            let t = i as i64 - self.n_pre as i64;
            w.write_record([t.to_string(), fmt_f64(*x)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `(t, value)` rows; negative `t` become pre-history.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows: Vec<(i64, f64)> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let t: i64 = parse_field(&rec, 0)?;
            let v: f64 = parse_field(&rec, 1)?;
            rows.push((t, v));
        }
        if rows.windows(2).any(|w| w[1].0 != w[0].0 + 1) {
            return Err(Error::InvalidSpec("time column must be consecutive".into()));
        }
        let n_pre = rows.first().map(|r| (-r.0).max(0) as usize).unwrap_or(0);
        let (hist, win): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r.0 < 0);
        if n_pre != hist.len() {
            return Err(Error::InvalidSpec(
                "pre-history rows must end at t = -1".into(),
            ));
        }
        Self::with_history(
            hist.into_iter().map(|r| r.1).collect(),
            win.into_iter().map(|r| r.1).collect(),
        )
    }
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize) -> Result<T> {
    rec.get(idx)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::InvalidSpec(format!("bad csv field {idx} in {rec:?}")))
}

/// `N`-bin DFT spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<C64>,
}

impl Spectrum {
    pub fn new(bins: Vec<C64>) -> Self {
        Self { bins }
    }

    pub fn n_points(&self) -> usize {
        self.bins.len()
    }

    /// Bin at a signed index, wrapped modulo `N`.
    pub fn at(&self, k: i64) -> C64 {
        self.bins[k.rem_euclid(self.bins.len() as i64) as usize]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_complex_csv(writer, &self.bins)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut bins = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let k: usize = parse_field(&rec, 0)?;
            if k != i {
                return Err(Error::InvalidSpec(format!("expected bin {i}, found {k}")));
            }
            bins.push(C64::new(parse_field(&rec, 1)?, parse_field(&rec, 2)?));
        }
        Ok(Self { bins })
    }
}

/// `(k, re, im)` rows.
pub fn write_complex_csv<W: Write>(writer: W, values: &[C64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "re", "im"])?;
    for (k, z) in values.iter().enumerate() {
        w.write_record([k.to_string(), fmt_f64(z.re), fmt_f64(z.im)])?;
    }
    w.flush()?;
    Ok(())
}

/// Excited input, output and signed frequency sets for an experiment of maximum order `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub n_points: usize,
    pub max_order: usize,
    pub excited_input: Vec<usize>,
    pub excited_output: Vec<usize>,
    /// `{-k_u} U {k_u}`, ascending.
    pub omega: Vec<i64>,
}

impl FrequencyGrid {
    /// Grid for a model with every order `1..=max_order`.
    pub fn new(n_points: usize, excited_input: &[usize], max_order: usize) -> Result<Self> {
        let orders: Vec<usize> = (1..=max_order).collect();
        Self::for_orders(n_points, excited_input, &orders)
    }

    /// Grid for a model containing only the listed orders.
    pub fn for_orders(n_points: usize, excited_input: &[usize], orders: &[usize]) -> Result<Self> {
        let max_order = orders.iter().copied().max().unwrap_or(0);
        let excited_output = excited_output_indices_for_orders(excited_input, orders, n_points)?;
        Ok(Self {
            n_points,
            max_order,
            excited_input: excited_input.to_vec(),
            excited_output,
            omega: omega_set(excited_input),
        })
    }
}

/// Signed excited set, negatives first, ascending.
pub fn omega_set(excited_input: &[usize]) -> Vec<i64> {
    let mut omega: Vec<i64> = excited_input.iter().map(|&k| -(k as i64)).collect();
    omega.extend(excited_input.iter().map(|&k| k as i64));
    omega.sort_unstable();
    omega.dedup();
    omega
}

/// Checks `1 <= k` and `2 M k < N` for every excited index.
pub fn check_excitation_bound(
    excited_input: &[usize],
    max_order: usize,
    n_points: usize,
) -> Result<()> {
    // The nominal bound {1, .., N/2M - 1} is read as the strict real inequality k < N/(2M),
    // which admits 13 tones at N = 55, M = 2.
    for &k in excited_input {
        if k == 0 || 2 * max_order * k >= n_points {
            return Err(Error::InvalidSpec(format!(
                "excited index {k} violates 1 <= k < N/(2M) with N = {n_points}, M = {max_order}"
            )));
        }
    }
    Ok(())
}

pub fn generate_multisine(spec: &MultisineSpec) -> Result<TimeSignal> {
    spec.validate()?;
    let n = spec.n_points;
    let phases = spec.resolved_phases();
    let samples = (0..n)
        .map(|t| {
            spec.excited_indices
                .iter()
                .zip(&spec.amplitudes)
                .zip(&phases)
                .map(|((&k, &a), &phi)| {
                    // k t reduced mod N keeps the construction exactly periodic
                    let r = (k * t) % n;
                    a * (2.0 * PI * r as f64 / n as f64 + phi).cos()
                })
                .sum()
        })
        .collect();
    TimeSignal::new(samples)
}

/// Forward DFT of the window `t = 0 .. N-1`.
pub fn dft(signal: &TimeSignal) -> Spectrum {
    dft_real(signal.window())
}

pub fn dft_real(x: &[f64]) -> Spectrum {
    let n = x.len();
    let bins = (0..n as i64)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| twiddle(k, t as i64, n) * v)
                .sum()
        })
        .collect();
    Spectrum { bins }
}

pub fn dft_complex(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    (0..n as i64)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| twiddle(k, t as i64, n) * v)
                .sum()
        })
        .collect()
}

/// Inverse DFT with the `1/N` factor, keeping imaginary parts.
pub fn idft_complex(spectrum: &Spectrum) -> Vec<C64> {
    let n = spectrum.n_points();
    let scale = 1.0 / n as f64;
    (0..n as i64)
        .map(|t| {
            spectrum
                .bins
                .iter()
                .enumerate()
                .map(|(k, &v)| twiddle(k as i64, t, n).conj() * v)
                .sum::<C64>()
                * scale
        })
        .collect()
}

/// Inverse DFT; imaginary parts are discarded.
pub fn idft(spectrum: &Spectrum) -> Result<TimeSignal> {
    if spectrum.n_points() == 0 {
        return Err(Error::InvalidSpec("empty spectrum".into()));
    }
    TimeSignal::new(idft_complex(spectrum).into_iter().map(|z| z.re).collect())
}

/// Positive, non-DC, non-Nyquist output bins reachable as sums of at most `M` signed excited indices.
pub fn excited_output_indices(
    excited_input: &[usize],
    max_order: usize,
    n_points: usize,
) -> Result<Vec<usize>> {
    let orders: Vec<usize> = (1..=max_order).collect();
    excited_output_indices_for_orders(excited_input, &orders, n_points)
}

/// Output bins reachable as sums of exactly `m` signed excited indices for some `m` in `orders`.
pub fn excited_output_indices_for_orders(
    excited_input: &[usize],
    orders: &[usize],
    n_points: usize,
) -> Result<Vec<usize>> {
    let max_order = orders.iter().copied().max().unwrap_or(0);
    if max_order == 0 {
        return Err(Error::InvalidSpec(
            "at least one order of 1 or more is required".into(),
        ));
    }
    check_excitation_bound(excited_input, max_order, n_points)?;
    let omega = omega_set(excited_input);
    let mut reachable: BTreeSet<i64> = BTreeSet::new();
    let mut level: BTreeSet<i64> = omega.iter().copied().collect();
    for m in 1..=max_order {
        if m > 1 {
            level = level
                .iter()
                .flat_map(|&s| omega.iter().map(move |&w| s + w))
                .collect();
        }
        if orders.contains(&m) {
            reachable.extend(level.iter().copied());
        }
    }
    Ok(reachable
        .into_iter()
        .filter(|&k| k > 0 && 2 * k < n_points as i64)
        .map(|k| k as usize)
        .collect())
}

//! Volterra kernels for block-oriented systems and their time-domain simulation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::mdft::VecIndexMap;
use crate::signals::TimeSignal;

/// Largest supported kernel order.
pub const MAX_ORDER: usize = 3;
/// Largest supported memory per axis.
pub const MAX_MEMORY: usize = 32;

/// Dense real kernel `h_m(tau_1, .., tau_m)`, `tau_1` fastest in storage.
#[derive(Clone, Debug, PartialEq)]
pub struct VolterraKernel {
    order: usize,
    memory: usize,
    values: Vec<f64>,
}

impl VolterraKernel {
    pub fn new(order: usize, memory: usize, values: Vec<f64>) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidSpec(format!(
                "kernel order {order} outside 1..={MAX_ORDER}"
            )));
        }
        if memory == 0 || memory > MAX_MEMORY {
            return Err(Error::InvalidSpec(format!(
                "kernel memory {memory} outside 1..={MAX_MEMORY}"
            )));
        }
        if values.len() != memory.pow(order as u32) {
            return Err(Error::DimensionMismatch(format!(
                "order-{order} kernel with memory {memory} needs {} values, got {}",
                memory.pow(order as u32),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(
                "kernel contains non-finite values".into(),
            ));
        }
        Ok(Self {
            order,
            memory,
            values,
        })
    }

    pub fn zeros(order: usize, memory: usize) -> Result<Self> {
        Self::new(order, memory, vec![0.0; memory.pow(order as u32)])
    }

    pub fn from_fn(
        order: usize,
        memory: usize,
        mut f: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self> {
        let map = VecIndexMap::new(order, memory);
        let values = (0..map.len()).map(|flat| f(&map.multi(flat))).collect();
        Self::new(order, memory, values)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index_map(&self) -> VecIndexMap {
        VecIndexMap::new(self.order, self.memory)
    }

    pub fn get(&self, lags: &[usize]) -> f64 {
        self.values[self.index_map().flat(lags)]
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * alpha).collect(),
            ..self.clone()
        }
    }

    /// Average over all permutations of the lag indices.
    pub fn symmetrize(&self) -> Self {
        let map = self.index_map();
        let perms = permutations(self.order);
        let mut values = vec![0.0; self.values.len()];
        let mut permuted = vec![0usize; self.order];
        for (flat, out) in values.iter_mut().enumerate() {
            let idx = map.multi(flat);
            // summing the orbit in flat-index order gives bit-identical results
            // for every member of the orbit
            let mut orbit: Vec<usize> = perms
                .iter()
                .map(|p| {
                    for (d, &src) in p.iter().enumerate() {
                        permuted[d] = idx[src];
                    }
                    map.flat(&permuted)
                })
                .collect();
            orbit.sort_unstable();
            let first = self.values[orbit[0]];
            *out = if orbit.iter().all(|&f| self.values[f] == first) {
                first
            } else {
                orbit.iter().map(|&f| self.values[f]).sum::<f64>() / perms.len() as f64
            };
        }
        Self {
            values,
            ..self.clone()
        }
    }

    /// Largest deviation between the kernel and any permutation of itself.
    pub fn asymmetry(&self) -> f64 {
        let map = self.index_map();
        let perms = permutations(self.order);
        let mut worst: f64 = 0.0;
        let mut permuted = vec![0usize; self.order];
        for flat in 0..self.values.len() {
            let idx = map.multi(flat);
            for p in &perms {
                for (d, &src) in p.iter().enumerate() {
                    permuted[d] = idx[src];
                }
                worst = worst.max((self.values[flat] - self.values[map.flat(&permuted)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() == 0.0
    }

    /// True when every entry off the main diagonal is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let map = self.index_map();
        self.values.iter().enumerate().all(|(flat, &v)| {
            let idx = map.multi(flat);
            v == 0.0 || idx.iter().all(|&i| i == idx[0])
        })
    }

    /// Diagonal `h(tau, .., tau)`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.memory)
            .map(|t| self.get(&vec![t; self.order]))
            .collect()
    }

    /// `(tau_1, .., tau_m, value)` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.order).map(|d| format!("tau{d}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        let map = self.index_map();
        for (flat, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> = map.multi(flat).iter().map(|i| i.to_string()).collect();
            row.push(fmt_f64(*v));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let order = r.headers()?.len().saturating_sub(1);
        let mut entries: Vec<(Vec<usize>, f64)> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<&str> {
                rec.get(i)
                    .map(str::trim)
                    .ok_or_else(|| Error::InvalidSpec("short kernel csv row".into()))
            };
            let idx = (0..order)
                .map(|i| {
                    parse(i)?
                        .parse::<usize>()
                        .map_err(|e| Error::InvalidSpec(e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            let v = parse(order)?
                .parse::<f64>()
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            entries.push((idx, v));
        }
        let memory = entries
            .iter()
            .flat_map(|(i, _)| i.iter())
            .max()
            .map_or(0, |m| m + 1);
        let mut kernel = Self::zeros(order, memory)?;
        let map = kernel.index_map();
        for (idx, v) in entries {
            kernel.values[map.flat(&idx)] = v;
        }
        Ok(kernel)
    }
}

/// All permutations of `0..m`, lexicographic.
pub(crate) fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(m), &mut vec![false; m], &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStructure {
    Wiener,
    Hammerstein,
    WienerHammerstein,
}

/// Block-oriented system with the static nonlinearity `f(x) = x^2`.
///
/// * Wiener: `front` filter, then the square.
/// * Hammerstein: the square, then `front` filter.
/// * Wiener-Hammerstein: `front` filter, square, `back` filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSystem {
    pub structure: BlockStructure,
    pub front: Vec<f64>,
    #[serde(default = "identity_filter")]
    pub back: Vec<f64>,
}

fn identity_filter() -> Vec<f64> {
    vec![1.0]
}

impl BlockSystem {
    pub fn wiener(front: Vec<f64>) -> Self {
        Self {
            structure: BlockStructure::Wiener,
            front,
            back: identity_filter(),
        }
    }

    pub fn hammerstein(front: Vec<f64>) -> Self {
        Self {
            structure: BlockStructure::Hammerstein,
            front,
            back: identity_filter(),
        }
    }

    pub fn wiener_hammerstein(front: Vec<f64>, back: Vec<f64>) -> Self {
        Self {
            structure: BlockStructure::WienerHammerstein,
            front,
            back,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.front.is_empty() || self.back.is_empty() {
            return Err(Error::InvalidSpec("block filters must be non-empty".into()));
        }
        if self.front.iter().chain(&self.back).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("block filters must be finite".into()));
        }
        if self.structure != BlockStructure::WienerHammerstein && self.back != identity_filter() {
            return Err(Error::InvalidSpec(
                "only Wiener-Hammerstein systems take a back filter".into(),
            ));
        }
        Ok(())
    }

    pub fn memory(&self) -> usize {
        match self.structure {
            BlockStructure::Wiener | BlockStructure::Hammerstein => self.front.len(),
            BlockStructure::WienerHammerstein => self.front.len() + self.back.len() - 1,
        }
    }
}

/// Symmetric second-order kernel equivalent to the block system.
pub fn kernel_from_blocks(sys: &BlockSystem) -> Result<VolterraKernel> {
    sys.validate()?;
    let g = &sys.front;
    let n = sys.memory();
    let tap = |v: &[f64], i: i64| -> f64 {
        if i < 0 {
            0.0
        } else {
            v.get(i as usize).copied().unwrap_or(0.0)
        }
    };
    VolterraKernel::from_fn(2, n, |idx| {
        let (t1, t2) = (idx[0], idx[1]);
        match sys.structure {
            BlockStructure::Wiener => g[t1] * g[t2],
            BlockStructure::Hammerstein => {
                if t1 == t2 {
                    g[t1]
                } else {
                    0.0
                }
            }
            BlockStructure::WienerHammerstein => sys
                .back
                .iter()
                .enumerate()
                .map(|(s, q)| q * (tap(g, t1 as i64 - s as i64) * tap(g, t2 as i64 - s as i64)))
                .sum(),
        }
    })
}

fn check_kernels(kernels: &[VolterraKernel]) -> Result<()> {
    if kernels
        .iter()
        .any(|k| k.values.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::InvalidSpec(
            "kernel contains non-finite values".into(),
        ));
    }
    Ok(())
}

fn evaluate(kernels: &[VolterraKernel], t: i64, input: impl Fn(i64) -> f64) -> f64 {
    let mut y = 0.0;
    for kernel in kernels {
        let map = kernel.index_map();
        // input samples u(t - tau) for tau in 0..memory
        let lagged: Vec<f64> = (0..kernel.memory as i64)
            .map(|tau| input(t - tau))
            .collect();
        for (flat, &h) in kernel.values.iter().enumerate() {
            if h == 0.0 {
                continue;
            }
            let prod: f64 = map.multi(flat).iter().map(|&tau| lagged[tau]).product();
            y += h * prod;
        }
    }
    y
}

/// Periodic steady-state value at an arbitrary time `t`.
pub fn steady_state_value(kernels: &[VolterraKernel], u: &TimeSignal, t: i64) -> f64 {
    evaluate(kernels, t, |s| u.periodic(s))
}

/// Steady-state output over the window, with `u(t - tau)` taken modulo `N`.
pub fn simulate_steady_state(kernels: &[VolterraKernel], u: &TimeSignal) -> Result<TimeSignal> {
    check_kernels(kernels)?;
    let n = u.n_points() as i64;
    TimeSignal::new((0..n).map(|t| steady_state_value(kernels, u, t)).collect())
}

/// Output over the window using the literal convolution sums and the stored pre-history.
pub fn simulate_with_history(kernels: &[VolterraKernel], u: &TimeSignal) -> Result<TimeSignal> {
    check_kernels(kernels)?;
    let needed = kernels.iter().map(|k| k.memory - 1).max().unwrap_or(0);
    if u.n_pre() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: u.n_pre(),
        });
    }
    let n = u.n_points() as i64;
    TimeSignal::new((0..n).map(|t| evaluate(kernels, t, |s| u.at(s))).collect())
}

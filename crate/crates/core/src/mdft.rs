//! Multidimensional DFT machinery.
//!
//! Tensors are vectorized with the first index incrementing fastest, so that
//! `flat(i_1, .., i_m) = sum_d i_d N^(d-1)`. Under this ordering the order-`m`
//! transform matrix is built recursively from the `N`-point DFT matrix, block
//! `(a, b)` of `F_m` being `F_{m-1}(a, b) * F_1`.
//!
//! Symmetric kernels and their GFRFs are stored by unique representatives:
//! multi-indices that are non-decreasing in grid order. On a signed frequency
//! grid, representatives are further paired with their conjugates
//! `(-k_1, .., -k_m)`, and one member of each pair is kept as a parameter.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::signals::{twiddle, C64};
use crate::volterra::VolterraKernel;

/// Largest `N^m` for which `F_m` is materialized.
pub const MAX_DENSE_SIZE: usize = 4096;

/// Bijection between multi-indices on `{0..extent-1}^order` and flat positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VecIndexMap {
    pub order: usize,
    pub extent: usize,
}

impl VecIndexMap {
    pub fn new(order: usize, extent: usize) -> Self {
        Self { order, extent }
    }

    pub fn len(&self) -> usize {
        self.extent.pow(self.order as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().rev().fold(0, |acc, &i| acc * self.extent + i)
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        (0..self.order)
            .map(|_| {
                let i = flat % self.extent;
                flat /= self.extent;
                i
            })
            .collect()
    }
}

/// Dense `N^m x N^m` multidimensional DFT matrix.
#[derive(Clone, Debug)]
pub struct FourierMatrix {
    pub order: usize,
    pub extent: usize,
    pub matrix: DMatrix<C64>,
}

/// `N`-point DFT matrix `F_1(k, t) = exp(-j 2 pi k t / N)`.
pub fn dft_matrix(n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |k, t| twiddle(k as i64, t as i64, n))
}

pub fn build_fourier_matrix(order: usize, extent: usize) -> Result<FourierMatrix> {
    if order == 0 || extent < 2 {
        return Err(Error::InvalidSpec(format!(
            "fourier matrix needs m >= 1 and N >= 2, got m = {order}, N = {extent}"
        )));
    }
    let size = extent
        .checked_pow(order as u32)
        .filter(|&s| s <= MAX_DENSE_SIZE)
        .ok_or_else(|| {
            Error::Resource(format!(
                "N^m = {extent}^{order} exceeds the dense limit {MAX_DENSE_SIZE}"
            ))
        })?;
    let f1 = dft_matrix(extent);
    let mut fm = f1.clone();
    for _ in 1..order {
        let prev = fm;
        let rows = prev.nrows() * extent;
        let mut next = DMatrix::zeros(rows, rows);
        for a in 0..prev.nrows() {
            for b in 0..prev.ncols() {
                let scale = prev[(a, b)];
                next.view_mut((a * extent, b * extent), (extent, extent))
                    .copy_from(&(&f1 * scale));
            }
        }
        fm = next;
    }
    debug_assert_eq!(fm.nrows(), size);
    Ok(FourierMatrix {
        order,
        extent,
        matrix: fm,
    })
}

/// Complex tensor on the full `N`-grid, first index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GfrfTensor {
    pub order: usize,
    pub extent: usize,
    pub values: Vec<C64>,
}

impl GfrfTensor {
    pub fn index_map(&self) -> VecIndexMap {
        VecIndexMap::new(self.order, self.extent)
    }

    /// Value at signed frequency indices, each wrapped modulo `N`.
    pub fn at(&self, ks: &[i64]) -> C64 {
        let n = self.extent as i64;
        let idx: Vec<usize> = ks.iter().map(|k| k.rem_euclid(n) as usize).collect();
        self.values[self.index_map().flat(&idx)]
    }
}

/// GFRF of a kernel on the full `N`-grid, computed axis by axis without forming `F_m`.
pub fn apply_mdft(h: &VolterraKernel, extent: usize) -> Result<GfrfTensor> {
    if h.memory() > extent {
        return Err(Error::DimensionMismatch(format!(
            "kernel memory {} exceeds transform extent {extent}",
            h.memory()
        )));
    }
    let order = h.order();
    let map = VecIndexMap::new(order, extent);
    let kmap = h.index_map();
    let mut values = vec![C64::new(0.0, 0.0); map.len()];
    for (flat, &v) in h.values().iter().enumerate() {
        values[map.flat(&kmap.multi(flat))] = C64::new(v, 0.0);
    }
    let f1 = dft_matrix(extent);
    let mut line = vec![C64::new(0.0, 0.0); extent];
    for axis in 0..order {
        let stride = extent.pow(axis as u32);
        for base in 0..map.len() {
            if !(base / stride).is_multiple_of(extent) {
                continue;
            }
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = values[base + t * stride];
            }
            for k in 0..extent {
                values[base + k * stride] = (0..extent).map(|t| f1[(k, t)] * line[t]).sum();
            }
        }
    }
    Ok(GfrfTensor {
        order,
        extent,
        values,
    })
}

/// GFRF at one signed multi-index by direct summation over the kernel support.
pub fn gfrf_at(h: &VolterraKernel, extent: usize, ks: &[i64]) -> C64 {
    let map = h.index_map();
    let per_axis: Vec<Vec<C64>> = ks
        .iter()
        .map(|&k| {
            (0..h.memory())
                .map(|t| twiddle(k, t as i64, extent))
                .collect()
        })
        .collect();
    h.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(flat, &v)| {
            let idx = map.multi(flat);
            idx.iter()
                .enumerate()
                .fold(C64::new(v, 0.0), |acc, (d, &t)| acc * per_axis[d][t])
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Signed excited frequencies; entries pair with their negation.
    Frequency,
    /// Time lags `0..memory`; entries are real.
    Lag,
}

/// Unique-representative bookkeeping for symmetric tensors on a grid.
#[derive(Clone, Debug)]
pub struct SymmetryReduction {
    pub order: usize,
    pub kind: GridKind,
    /// Grid values in ascending order.
    pub grid: Vec<i64>,
    /// Representative multi-indices as grid positions, non-decreasing, lexicographic.
    pub representatives: Vec<Vec<usize>>,
    /// Full-grid flat index (over positions) to representative index.
    pub full_to_rep: Vec<usize>,
    /// Full-grid flat indices of every member of each representative's orbit.
    pub members: Vec<Vec<usize>>,
    /// Representative index of the conjugate `(-k_1, .., -k_m)`; identity on lag grids.
    pub conjugate: Vec<usize>,
    /// Representative indices kept as parameters, ascending.
    pub parameters: Vec<usize>,
    /// Parameter index of each representative, when kept.
    pub rep_to_param: Vec<Option<usize>>,
}

impl SymmetryReduction {
    pub fn index_map(&self) -> VecIndexMap {
        VecIndexMap::new(self.order, self.grid.len())
    }

    pub fn n_parameters(&self) -> usize {
        self.parameters.len()
    }

    pub fn multiplicity(&self, rep: usize) -> usize {
        self.members[rep].len()
    }

    /// Grid values of a representative.
    pub fn values_of(&self, rep: usize) -> Vec<i64> {
        self.representatives[rep]
            .iter()
            .map(|&p| self.grid[p])
            .collect()
    }

    /// Grid values of the `p`-th parameter.
    pub fn parameter_values(&self, param: usize) -> Vec<i64> {
        self.values_of(self.parameters[param])
    }

    /// Representatives equal to their own conjugate.
    pub fn self_conjugate(&self) -> Vec<usize> {
        (0..self.representatives.len())
            .filter(|&r| self.conjugate[r] == r)
            .collect()
    }

    /// Parameter vector from a full-grid tensor given as a function of grid values.
    pub fn dedup<T>(&self, mut full: impl FnMut(&[i64]) -> T) -> Vec<T> {
        (0..self.n_parameters())
            .map(|p| full(&self.parameter_values(p)))
            .collect()
    }

    /// Value at every full-grid position from a complex parameter vector.
    pub fn expand(&self, params: &[C64]) -> Result<Vec<C64>> {
        if params.len() != self.n_parameters() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters given, reduction has {}",
                params.len(),
                self.n_parameters()
            )));
        }
        Ok(self
            .full_to_rep
            .iter()
            .map(|&rep| match self.rep_to_param[rep] {
                Some(p) => params[p],
                None => {
                    let partner = self.conjugate[rep];
                    params[self.rep_to_param[partner].expect("conjugate partner is kept")].conj()
                }
            })
            .collect())
    }

    /// `(flat_index, representative_index, multiplicity, conjugate_partner)` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "flat_index",
            "representative_index",
            "multiplicity",
            "conjugate_partner",
        ])?;
        for (flat, &rep) in self.full_to_rep.iter().enumerate() {
            w.write_record([
                flat.to_string(),
                rep.to_string(),
                self.multiplicity(rep).to_string(),
                self.conjugate[rep].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Grid for a symmetry reduction.
#[derive(Clone, Debug)]
pub enum Grid {
    Frequency(Vec<i64>),
    Lag(usize),
}

pub fn build_symmetry_reduction(order: usize, grid: &Grid) -> Result<SymmetryReduction> {
    if order == 0 {
        return Err(Error::InvalidSpec("order must be at least 1".into()));
    }
    let (kind, values) = match grid {
        Grid::Frequency(omega) => {
            let mut v = omega.clone();
            v.sort_unstable();
            v.dedup();
            if v.contains(&0) {
                return Err(Error::InvalidSpec(
                    "frequency grid must not contain 0".into(),
                ));
            }
            if v.iter().any(|k| !v.contains(&-k)) {
                return Err(Error::InvalidSpec(
                    "frequency grid must be closed under negation".into(),
                ));
            }
            (GridKind::Frequency, v)
        }
        Grid::Lag(memory) => (GridKind::Lag, (0..*memory as i64).collect()),
    };
    let g = values.len();
    let map = VecIndexMap::new(order, g);

    // Representatives are the sorted multi-indices; since full-grid enumeration is
    // first-index-fastest, collect them first and then order lexicographically.
    let mut representatives: Vec<Vec<usize>> = (0..map.len())
        .map(|f| map.multi(f))
        .filter(|idx| idx.windows(2).all(|w| w[0] <= w[1]))
        .collect();
    representatives.sort();
    let rep_lookup = |idx: &[usize]| -> usize {
        let mut s = idx.to_vec();
        s.sort_unstable();
        representatives
            .binary_search(&s)
            .expect("sorted multi-index is a representative")
    };

    let mut full_to_rep = vec![0; map.len()];
    let mut members = vec![Vec::new(); representatives.len()];
    for (flat, slot) in full_to_rep.iter_mut().enumerate() {
        let rep = rep_lookup(&map.multi(flat));
        *slot = rep;
        members[rep].push(flat);
    }

    let conjugate: Vec<usize> = match kind {
        GridKind::Lag => (0..representatives.len()).collect(),
        GridKind::Frequency => representatives
            .iter()
            .map(|rep| {
                // grid is symmetric, so -grid[p] sits at position g - 1 - p
                let neg: Vec<usize> = rep.iter().map(|&p| g - 1 - p).collect();
                rep_lookup(&neg)
            })
            .collect(),
    };

    let sum_of = |rep: usize| -> i64 { representatives[rep].iter().map(|&p| values[p]).sum() };
    let parameters: Vec<usize> = (0..representatives.len())
        .filter(|&r| {
            let c = conjugate[r];
            if c == r {
                return true;
            }
            // Keep the member whose frequencies sum to a positive output bin, so each
            // output row only involves kept parameters; break zero-sum ties by index.
            match sum_of(r).cmp(&0) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => r < c,
            }
        })
        .collect();
    let mut rep_to_param = vec![None; representatives.len()];
    for (p, &r) in parameters.iter().enumerate() {
        rep_to_param[r] = Some(p);
    }

    let total: usize = members.iter().map(Vec::len).sum();
    if total != map.len() {
        return Err(Error::Internal(
            "multiplicities do not cover the grid".into(),
        ));
    }

    Ok(SymmetryReduction {
        order,
        kind,
        grid: values,
        representatives,
        full_to_rep,
        members,
        conjugate,
        parameters,
        rep_to_param,
    })
}

fn check_reduction_pair(
    freq: &SymmetryReduction,
    lag: &SymmetryReduction,
    extent: usize,
) -> Result<()> {
    if freq.kind != GridKind::Frequency || lag.kind != GridKind::Lag {
        return Err(Error::DimensionMismatch(
            "expected a frequency reduction and a lag reduction".into(),
        ));
    }
    if freq.order != lag.order {
        return Err(Error::DimensionMismatch(format!(
            "frequency order {} differs from lag order {}",
            freq.order, lag.order
        )));
    }
    if lag.grid.len() > extent {
        return Err(Error::DimensionMismatch(format!(
            "lag memory {} exceeds transform extent {extent}",
            lag.grid.len()
        )));
    }
    if freq
        .grid
        .iter()
        .any(|k| k.unsigned_abs() as usize >= extent)
    {
        return Err(Error::DimensionMismatch(
            "frequency grid exceeds transform extent".into(),
        ));
    }
    Ok(())
}

/// Reduced transform from a materialized `F_m`: rows are kept GFRF parameters,
/// columns are unique lags with their permutation orbit folded in.
pub fn reduce_transform(
    fm: &FourierMatrix,
    freq: &SymmetryReduction,
    lag: &SymmetryReduction,
) -> Result<DMatrix<C64>> {
    check_reduction_pair(freq, lag, fm.extent)?;
    if fm.order != freq.order {
        return Err(Error::DimensionMismatch(format!(
            "F_{} used with order-{} reductions",
            fm.order, freq.order
        )));
    }
    let n = fm.extent;
    let nmap = VecIndexMap::new(fm.order, n);
    let lmap = lag.index_map();
    let rows: Vec<usize> = (0..freq.n_parameters())
        .map(|p| {
            let ks: Vec<usize> = freq
                .parameter_values(p)
                .iter()
                .map(|k| k.rem_euclid(n as i64) as usize)
                .collect();
            nmap.flat(&ks)
        })
        .collect();
    let cols: Vec<Vec<usize>> = lag
        .members
        .iter()
        .map(|m| {
            m.iter()
                .map(|&f| {
                    let taus: Vec<usize> = lmap
                        .multi(f)
                        .iter()
                        .map(|&p| lag.grid[p] as usize)
                        .collect();
                    nmap.flat(&taus)
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        cols[c].iter().map(|&j| fm.matrix[(rows[r], j)]).sum()
    }))
}

/// Reduced transform by direct evaluation of the exponentials; no size limit.
pub fn reduced_transform(
    extent: usize,
    freq: &SymmetryReduction,
    lag: &SymmetryReduction,
) -> Result<DMatrix<C64>> {
    check_reduction_pair(freq, lag, extent)?;
    let lmap = lag.index_map();
    let orbits: Vec<Vec<Vec<i64>>> = lag
        .members
        .iter()
        .map(|m| {
            m.iter()
                .map(|&f| lmap.multi(f).iter().map(|&p| lag.grid[p]).collect())
                .collect()
        })
        .collect();
    let params: Vec<Vec<i64>> = (0..freq.n_parameters())
        .map(|p| freq.parameter_values(p))
        .collect();
    Ok(DMatrix::from_fn(params.len(), orbits.len(), |r, c| {
        orbits[c]
            .iter()
            .map(|taus| {
                params[r]
                    .iter()
                    .zip(taus)
                    .fold(C64::new(1.0, 0.0), |acc, (&k, &t)| {
                        acc * twiddle(k, t, extent)
                    })
            })
            .sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn index_map_round_trip() {
        let map = VecIndexMap::new(3, 4);
        for f in 0..map.len() {
            assert_eq!(map.flat(&map.multi(f)), f);
        }
        assert_eq!(map.flat(&[1, 0, 0]), 1);
        assert_eq!(map.flat(&[0, 1, 0]), 4);
        assert_eq!(map.flat(&[0, 0, 1]), 16);
    }

    #[test]
    fn two_point_dft_matrix() {
        let f = build_fourier_matrix(1, 2).unwrap();
        let expected = [[1.0, 1.0], [1.0, -1.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!((f.matrix[(i, j)] - C64::new(e, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn order_two_extent_two_signs() {
        let f = build_fourier_matrix(2, 2).unwrap();
        let map = VecIndexMap::new(2, 2);
        for r in 0..4 {
            for c in 0..4 {
                let k = map.multi(r);
                let t = map.multi(c);
                let sign = if (k[0] * t[0] + k[1] * t[1]).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                assert!((f.matrix[(r, c)] - C64::new(sign, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn size_guard() {
        assert!(matches!(
            build_fourier_matrix(3, 17),
            Err(Error::Resource(_))
        ));
        assert!(matches!(
            build_fourier_matrix(2, 1),
            Err(Error::InvalidSpec(_))
        ));
        assert!(build_fourier_matrix(2, 64).is_ok());
    }

    #[test]
    fn unit_impulse_has_flat_gfrf() {
        let h = VolterraKernel::from_fn(2, 3, |i| if i == [0, 0] { 1.0 } else { 0.0 }).unwrap();
        let g = apply_mdft(&h, 5).unwrap();
        assert!(g
            .values
            .iter()
            .all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn all_ones_two_by_two() {
        let h = VolterraKernel::new(2, 2, vec![1.0; 4]).unwrap();
        let g = apply_mdft(&h, 2).unwrap();
        assert!((g.at(&[0, 0]) - C64::new(4.0, 0.0)).norm() < 1e-14);
        for ks in [[0, 1], [1, 0], [1, 1]] {
            assert!(g.at(&ks).norm() < 1e-14);
        }
    }

    #[test]
    fn real_kernel_gfrf_is_conjugate_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = VolterraKernel::from_fn(2, 4, |_| rng.random_range(-1.0..1.0)).unwrap();
        let g = apply_mdft(&h, 7).unwrap();
        for k1 in 0..7i64 {
            for k2 in 0..7i64 {
                assert!((g.at(&[-k1, -k2]) - g.at(&[k1, k2]).conj()).norm() < 1e-12);
                assert!((g.at(&[k1, k2]) - gfrf_at(&h, 7, &[k1, k2])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn memory_longer_than_extent_rejected() {
        let h = VolterraKernel::zeros(2, 5).unwrap();
        assert!(matches!(
            apply_mdft(&h, 4),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn single_tone_second_order_reduction() {
        let red = build_symmetry_reduction(2, &Grid::Frequency(vec![-1, 1])).unwrap();
        assert_eq!(red.representatives.len(), 3);
        let kept: Vec<Vec<i64>> = (0..red.n_parameters())
            .map(|p| red.parameter_values(p))
            .collect();
        assert_eq!(kept, vec![vec![-1, 1], vec![1, 1]]);
        assert_eq!(red.self_conjugate().len(), 1);
    }

    #[test]
    fn thirteen_tones_give_182_parameters() {
        let omega = crate::signals::omega_set(&(1..=13).collect::<Vec<_>>());
        let red = build_symmetry_reduction(2, &Grid::Frequency(omega)).unwrap();
        assert_eq!(red.n_parameters(), 182);
        let total: usize = (0..red.representatives.len())
            .map(|r| red.multiplicity(r))
            .sum();
        assert_eq!(total, 26 * 26);
    }

    #[test]
    fn first_order_keeps_positive_tones() {
        let red = build_symmetry_reduction(1, &Grid::Frequency(vec![-3, -1, 1, 3])).unwrap();
        assert_eq!(red.n_parameters(), 2);
        assert_eq!(red.parameter_values(0), vec![1]);
        assert_eq!(red.parameter_values(1), vec![3]);
    }

    #[test]
    fn lag_reduction_counts() {
        let red = build_symmetry_reduction(3, &Grid::Lag(4)).unwrap();
        // multisets of size 3 from 4 items
        assert_eq!(red.n_parameters(), 20);
        assert!(red.conjugate.iter().enumerate().all(|(i, &c)| i == c));
    }

    #[test]
    fn reduced_transform_routes_agree() {
        let n = 6;
        let omega = vec![-2, -1, 1, 2];
        for order in 1..=3 {
            let freq = build_symmetry_reduction(order, &Grid::Frequency(omega.clone())).unwrap();
            let lag = build_symmetry_reduction(order, &Grid::Lag(4)).unwrap();
            let fm = build_fourier_matrix(order, n).unwrap();
            let a = reduce_transform(&fm, &freq, &lag).unwrap();
            let b = reduced_transform(n, &freq, &lag).unwrap();
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn order_one_reduced_transform_is_selection() {
        let n = 8;
        let freq = build_symmetry_reduction(1, &Grid::Frequency(vec![-3, -1, 1, 3])).unwrap();
        let lag = build_symmetry_reduction(1, &Grid::Lag(5)).unwrap();
        let fm = build_fourier_matrix(1, n).unwrap();
        let red = reduce_transform(&fm, &freq, &lag).unwrap();
        for (r, k) in [1usize, 3].iter().enumerate() {
            for t in 0..5 {
                assert_eq!(red[(r, t)], fm.matrix[(*k, t)]);
            }
        }
    }

    #[test]
    fn mismatched_orders_rejected() {
        let freq = build_symmetry_reduction(2, &Grid::Frequency(vec![-1, 1])).unwrap();
        let lag = build_symmetry_reduction(1, &Grid::Lag(3)).unwrap();
        assert!(matches!(
            reduced_transform(8, &freq, &lag),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn expand_restores_conjugates() {
        let omega = vec![-2, -1, 1, 2];
        let red = build_symmetry_reduction(2, &Grid::Frequency(omega.clone())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = VolterraKernel::from_fn(2, 3, |_| rng.random_range(-1.0..1.0))
            .unwrap()
            .symmetrize();
        let params = red.dedup(|ks| gfrf_at(&h, 9, ks));
        let full = red.expand(&params).unwrap();
        let map = red.index_map();
        for (f, z) in full.iter().enumerate() {
            let ks: Vec<i64> = map.multi(f).iter().map(|&p| omega[p]).collect();
            assert!((z - gfrf_at(&h, 9, &ks)).norm() < 1e-12);
        }
    }
}

//! Excitation-number sectors of the joint space and density matrices stored
//! as sector blocks.
//!
//! Sector `k` holds the basis states with `k` total excitations (photons plus
//! excited atoms): at most `{|gg,k⟩, |eg,k-1⟩, |ge,k-1⟩, |ee,k-2⟩}`. The
//! Hamiltonian is block diagonal in `k`, and `a` maps sector `k+1` into `k`,
//! so every term of the master equation maps block `(k, k')` into blocks with
//! the same offset `k - k'`. A state therefore only ever needs the blocks
//! whose offsets were populated initially.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::linalg::{herm_eigen, ComplexMatrix, FactorDims, C64, ZERO};
use crate::model::excitation_of;

/// Joint-space basis grouped by excitation number.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    dims: FactorDims,
    members: Vec<Vec<usize>>,
    sector_of: Vec<usize>,
    position: Vec<usize>,
}

impl SectorBasis {
    pub fn new(dims: FactorDims) -> Self {
        let count = dims.field + 2;
        let mut members = vec![Vec::new(); count];
        let mut sector_of = vec![0; dims.joint()];
        let mut position = vec![0; dims.joint()];
        for j in 0..dims.joint() {
            let k = excitation_of(dims, j);
            sector_of[j] = k;
            position[j] = members[k].len();
            members[k].push(j);
        }
        SectorBasis {
            dims,
            members,
            sector_of,
            position,
        }
    }

    pub fn dims(&self) -> FactorDims {
        self.dims
    }

    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn size(&self, k: usize) -> usize {
        self.members[k].len()
    }

    /// Joint indices in sector `k`, ascending.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    pub fn sector_of(&self, j: usize) -> usize {
        self.sector_of[j]
    }

    /// Index of joint state `j` within its sector.
    pub fn position(&self, j: usize) -> usize {
        self.position[j]
    }

    /// Sub-block `op[sector k, sector k + shift]` for every `k`, after
    /// checking that `op` has no entry above `tol` outside those blocks.
    pub fn operator_blocks(&self, op: &ComplexMatrix, shift: isize, tol: f64) -> Result<Vec<Option<ComplexMatrix>>> {
        let d = self.dims.joint();
        if op.rows() != d || op.cols() != d {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, joint space is {d}",
                op.rows(),
                op.cols()
            )));
        }
        for r in 0..d {
            for c in 0..d {
                let off = self.sector_of[c] as isize - self.sector_of[r] as isize;
                if off != shift && op[(r, c)].norm() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "operator couples excitation sectors {} and {} (entry {:e}); it does not shift excitation number by {shift}",
                        self.sector_of[r],
                        self.sector_of[c],
                        op[(r, c)].norm()
                    )));
                }
            }
        }
        Ok((0..self.count())
            .map(|k| {
                let kc = k as isize + shift;
                if kc < 0 || kc as usize >= self.count() {
                    return None;
                }
                let rows = &self.members[k];
                let cols = &self.members[kc as usize];
                Some(ComplexMatrix::from_fn(rows.len(), cols.len(), |r, c| {
                    op[(rows[r], cols[c])]
                }))
            })
            .collect())
    }
}

/// One stored block `(row sector, column sector)` inside the flat buffer.
#[derive(Clone, Debug)]
pub struct Slot {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
    pub start: usize,
    /// Slot holding `(row + 1, col + 1)`.
    pub up: Option<usize>,
    /// Slot holding `(row - 1, col - 1)`.
    pub down: Option<usize>,
    /// Slot holding `(col, row)`.
    pub mirror: usize,
}

impl Slot {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.rows * self.cols
    }
}

/// Which sector blocks a state carries and where they live in a flat buffer.
#[derive(Clone, Debug)]
pub struct BlockLayout {
    basis: SectorBasis,
    slots: Vec<Slot>,
    len: usize,
    /// `(flat index, atom row, atom column)` for every stored entry whose two
    /// basis states share a photon number.
    reduction: Vec<(usize, usize, usize)>,
    components: Vec<Vec<usize>>,
}

impl BlockLayout {
    /// Layout holding every block whose sector offset is in `offsets`.
    pub fn with_offsets(basis: SectorBasis, offsets: &BTreeSet<isize>) -> Self {
        let count = basis.count() as isize;
        let mut keys = Vec::new();
        for k in 0..count {
            for &d in offsets {
                let kp = k - d;
                if (0..count).contains(&kp) {
                    keys.push((k as usize, kp as usize));
                }
            }
        }
        keys.sort_unstable();
        let lookup: HashMap<(usize, usize), usize> = keys.iter().enumerate().map(|(i, &key)| (key, i)).collect();

        let mut slots = Vec::with_capacity(keys.len());
        let mut start = 0;
        for &(k, kp) in &keys {
            let rows = basis.size(k);
            let cols = basis.size(kp);
            slots.push(Slot {
                row: k,
                col: kp,
                rows,
                cols,
                start,
                up: lookup.get(&(k + 1, kp + 1)).copied(),
                down: if k > 0 && kp > 0 {
                    lookup.get(&(k - 1, kp - 1)).copied()
                } else {
                    None
                },
                mirror: *lookup.get(&(kp, k)).expect("offset set is symmetric"),
            });
            start += rows * cols;
        }

        let dims = basis.dims();
        let mut reduction = Vec::new();
        for slot in &slots {
            for r in 0..slot.rows {
                let (a1, a2, n) = dims.split(basis.members(slot.row)[r]);
                for c in 0..slot.cols {
                    let (b1, b2, m) = dims.split(basis.members(slot.col)[c]);
                    if n == m {
                        reduction.push((slot.start + r * slot.cols + c, a1 * 2 + a2, b1 * 2 + b2));
                    }
                }
            }
        }

        // connected groups of sectors: the state is block diagonal over them
        let mut parent: Vec<usize> = (0..basis.count()).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            parent[x] = r;
            r
        }
        for &(k, kp) in &keys {
            let (a, b) = (find(&mut parent, k), find(&mut parent, kp));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for k in 0..basis.count() {
            let root = find(&mut parent, k);
            groups.entry(root).or_default().push(k);
        }
        let mut components: Vec<Vec<usize>> = groups.into_values().collect();
        components.sort();

        BlockLayout {
            basis,
            slots,
            len: start,
            reduction,
            components,
        }
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Number of stored complex entries.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn slot_of(&self, row: usize, col: usize) -> Option<usize> {
        self.slots.binary_search_by(|s| (s.row, s.col).cmp(&(row, col))).ok()
    }

    /// Splits a dense joint-space matrix into blocks, keeping only offsets
    /// that carry a nonzero entry.
    pub fn from_dense(basis: SectorBasis, rho: &ComplexMatrix) -> Result<(Self, Vec<C64>)> {
        let d = basis.dims().joint();
        if rho.rows() != d || rho.cols() != d {
            return Err(Error::Dimension(format!(
                "state is {}x{}, joint space is {d}",
                rho.rows(),
                rho.cols()
            )));
        }
        let mut offsets = BTreeSet::new();
        offsets.insert(0);
        for r in 0..d {
            for c in 0..d {
                if rho[(r, c)] != ZERO {
                    let off = basis.sector_of(r) as isize - basis.sector_of(c) as isize;
                    offsets.insert(off);
                    offsets.insert(-off);
                }
            }
        }
        let layout = Self::with_offsets(basis, &offsets);
        let data = layout.gather(rho);
        Ok((layout, data))
    }

    /// Copies the stored blocks of a dense matrix into a flat buffer.
    pub fn gather(&self, m: &ComplexMatrix) -> Vec<C64> {
        let mut data = vec![ZERO; self.len];
        for slot in &self.slots {
            let rows = self.basis.members(slot.row);
            let cols = self.basis.members(slot.col);
            for r in 0..slot.rows {
                for c in 0..slot.cols {
                    data[slot.start + r * slot.cols + c] = m[(rows[r], cols[c])];
                }
            }
        }
        data
    }

    pub fn to_dense(&self, data: &[C64]) -> ComplexMatrix {
        let d = self.basis.dims().joint();
        let mut m = ComplexMatrix::zeros(d, d);
        for slot in &self.slots {
            let rows = self.basis.members(slot.row);
            let cols = self.basis.members(slot.col);
            for r in 0..slot.rows {
                for c in 0..slot.cols {
                    m[(rows[r], cols[c])] = data[slot.start + r * slot.cols + c];
                }
            }
        }
        m
    }

    pub fn trace(&self, data: &[C64]) -> C64 {
        self.slots
            .iter()
            .filter(|s| s.row == s.col)
            .map(|s| (0..s.rows).map(|i| data[s.start + i * s.cols + i]).sum::<C64>())
            .sum()
    }

    /// `⟨𝒩⟩ = Σ_k k · tr(ρ_kk)`.
    pub fn mean_excitation(&self, data: &[C64]) -> f64 {
        self.slots
            .iter()
            .filter(|s| s.row == s.col)
            .map(|s| s.row as f64 * (0..s.rows).map(|i| data[s.start + i * s.cols + i].re).sum::<f64>())
            .sum()
    }

    /// Two-atom reduced state (field traced out).
    pub fn reduce_atoms(&self, data: &[C64]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(4, 4);
        for &(idx, a, b) in &self.reduction {
            out[(a, b)] += data[idx];
        }
        out
    }

    /// Replaces each block pair by the Hermitian average `(B + B'†)/2`.
    pub fn symmetrize(&self, data: &mut [C64]) {
        for (i, slot) in self.slots.iter().enumerate() {
            let j = slot.mirror;
            if j < i {
                continue;
            }
            let other = &self.slots[j];
            for r in 0..slot.rows {
                for c in 0..slot.cols {
                    let p = slot.start + r * slot.cols + c;
                    let q = other.start + c * other.cols + r;
                    let avg = 0.5 * (data[p] + data[q].conj());
                    data[p] = avg;
                    data[q] = avg.conj();
                }
            }
        }
    }

    /// Smallest eigenvalue, diagonalizing each group of coupled sectors
    /// separately.
    pub fn min_eigenvalue(&self, data: &[C64]) -> Result<f64> {
        let mut lowest = f64::INFINITY;
        for group in &self.components {
            let offsets: Vec<usize> = group
                .iter()
                .scan(0, |acc, &k| {
                    let o = *acc;
                    *acc += self.basis.size(k);
                    Some(o)
                })
                .collect();
            let n: usize = group.iter().map(|&k| self.basis.size(k)).sum();
            let mut m = ComplexMatrix::zeros(n, n);
            for (gi, &k) in group.iter().enumerate() {
                for (gj, &kp) in group.iter().enumerate() {
                    let Some(s) = self.slot_of(k, kp) else { continue };
                    let slot = &self.slots[s];
                    for r in 0..slot.rows {
                        for c in 0..slot.cols {
                            m[(offsets[gi] + r, offsets[gj] + c)] = data[slot.start + r * slot.cols + c];
                        }
                    }
                }
            }
            let eig = herm_eigen(&m.hermitian_part())?;
            lowest = lowest.min(*eig.values.last().expect("non-empty sector"));
        }
        Ok(lowest)
    }
}

/// `out += alpha · A · B` for row-major `A (m×k)`, `B (k×n)`.
pub(crate) fn gemm_acc(alpha: C64, a: &[C64], b: &[C64], m: usize, k: usize, n: usize, out: &mut [C64]) {
    for r in 0..m {
        for i in 0..k {
            let x = a[r * k + i];
            if x == ZERO {
                continue;
            }
            let x = alpha * x;
            for c in 0..n {
                out[r * n + c] += x * b[i * n + c];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hamiltonian, ModelParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sectors_partition_the_basis() {
        let dims = FactorDims::new(5).unwrap();
        let basis = SectorBasis::new(dims);
        assert_eq!(basis.count(), 7);
        assert_eq!(basis.size(0), 1);
        assert_eq!(basis.size(1), 3);
        assert_eq!(basis.size(3), 4);
        assert_eq!(basis.size(6), 1);
        let total: usize = (0..basis.count()).map(|k| basis.size(k)).sum();
        assert_eq!(total, dims.joint());
        for j in 0..dims.joint() {
            assert_eq!(basis.members(basis.sector_of(j))[basis.position(j)], j);
        }
    }

    #[test]
    fn hamiltonian_is_sector_diagonal() {
        let p = ModelParams::new(1.0, 0.3, 0.0, 0.0, 6).unwrap();
        let basis = SectorBasis::new(p.dims());
        let h = hamiltonian(&p).unwrap();
        let blocks = basis.operator_blocks(&h, 0, 0.0).unwrap();
        assert!(blocks.iter().all(|b| b.is_some()));
        assert!(basis.operator_blocks(&h, 1, 0.0).is_err());
    }

    #[test]
    fn dense_round_trip_and_observables() {
        let dims = FactorDims::new(4).unwrap();
        let d = dims.joint();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = ComplexMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let rho = x.matmul(&x.dagger());
        let tr = crate::linalg::trace(&rho).unwrap().re;
        let rho = rho.scale_real(1.0 / tr);

        let (layout, data) = BlockLayout::from_dense(SectorBasis::new(dims), &rho).unwrap();
        assert_eq!(layout.len(), d * d);
        assert_eq!(layout.to_dense(&data), rho);
        assert!((layout.trace(&data).re - 1.0).abs() < 1e-14);

        let state = crate::linalg::DensityState::new(rho.clone(), dims.factors()).unwrap();
        let reduced = crate::linalg::partial_trace_field(&state, dims).unwrap();
        assert!(layout.reduce_atoms(&data).max_abs_diff(reduced.matrix()) < 1e-14);

        let n_op = crate::model::excitation_operator(dims);
        let mean = crate::linalg::trace(&n_op.matmul(&rho)).unwrap().re;
        assert!((layout.mean_excitation(&data) - mean).abs() < 1e-13);

        let dense_min = state.min_eigenvalue().unwrap();
        assert!((layout.min_eigenvalue(&data).unwrap() - dense_min).abs() < 1e-12);
    }

    #[test]
    fn diagonal_states_store_only_diagonal_blocks() {
        let dims = FactorDims::new(6).unwrap();
        let basis = SectorBasis::new(dims);
        let rho = ComplexMatrix::from_real_diagonal(&vec![1.0 / dims.joint() as f64; dims.joint()]);
        let (layout, data) = BlockLayout::from_dense(basis, &rho).unwrap();
        assert!(layout.slots().iter().all(|s| s.row == s.col));
        assert!((layout.min_eigenvalue(&data).unwrap() - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_restores_hermiticity() {
        let dims = FactorDims::new(3).unwrap();
        let d = dims.joint();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = ComplexMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let (layout, mut data) = BlockLayout::from_dense(SectorBasis::new(dims), &m).unwrap();
        layout.symmetrize(&mut data);
        assert!(layout.to_dense(&data).max_abs_diff(&m.hermitian_part()) < 1e-15);
    }
}

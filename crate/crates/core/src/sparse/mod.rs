//! Sparse symmetric storage, pencil assembly, fill-reducing ordering and
//! symbolic factorization.
//!
//! Only the lower triangle (`row >= col`) is stored, in compressed-column
//! form. Every matrix carries a [`PatternId`] hashed from its sparsity
//! structure so that symbolic data computed once can be checked and reused
//! for every shift of the same pencil.

pub mod mtx;
mod ordering;
mod symbolic;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

pub use mtx::{parse_matrix_market, read_matrix_market, write_matrix_market};
pub use ordering::compute_ordering;
pub use symbolic::{symbolic_factorize, SymbolicFactorization};

/// Opaque token identifying a sparsity pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternId(pub u64);

/// Real symmetric matrix stored as its lower triangle in compressed columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    pattern_id: PatternId,
}

fn hash_pattern(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> PatternId {
    let mut h = DefaultHasher::new();
    n.hash(&mut h);
    col_ptr.hash(&mut h);
    row_idx.hash(&mut h);
    PatternId(h.finish())
}

impl SparseSymmetric {
    /// Assembles a matrix from coordinates. Entries above the diagonal are
    /// mirrored into the lower triangle and duplicates are summed, so each
    /// coordinate must describe the symmetric element exactly once.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::IndexOutOfRange { row: r, col: c, n });
            }
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            entries.push((c, r, v));
        }
        entries.sort_by_key(|e| (e.0, e.1));

        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (c, r, v) in entries {
            if last == Some((c, r)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((c, r));
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Ok(Self::from_parts(n, col_ptr, row_idx, values))
    }

    fn from_parts(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>, values: Vec<f64>) -> Self {
        let pattern_id = hash_pattern(n, &col_ptr, &row_idx);
        Self {
            n,
            col_ptr,
            row_idx,
            values,
            pattern_id,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_parts(n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    /// Lower triangle of a dense symmetric matrix; exact zeros are skipped
    /// except on the diagonal.
    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let n = dense.n();
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for c in 0..n {
            for r in c..n {
                let v = dense[(r, c)];
                if v != 0.0 || r == c {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr[c + 1] = row_idx.len();
        }
        Self::from_parts(n, col_ptr, row_idx, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored lower-triangular entries.
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn pattern_id(&self) -> PatternId {
        self.pattern_id
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries as `(row, col, value)` with `row >= col`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1])
                .map(move |p| (self.row_idx[p], c, self.values[p]))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (r, c, v) in self.iter() {
            if r == c {
                d[r] = v;
            }
        }
        d
    }

    /// Full symmetric operator applied to `x`.
    pub fn mat_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        self.mat_vec_into(x, &mut y);
        Ok(y)
    }

    /// `y = S x`. Panics on length mismatch.
    pub fn mat_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.n {
            let xc = x[c];
            let mut acc = 0.0;
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[p];
                let v = self.values[p];
                if r == c {
                    acc += v * xc;
                } else {
                    y[r] += v * xc;
                    acc += v * x[r];
                }
            }
            y[c] += acc;
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }

    /// Same values with every diagonal position present in the pattern.
    pub fn with_full_diagonal(&self) -> Self {
        let diag_missing = (0..self.n).any(|c| {
            let range = self.col_ptr[c]..self.col_ptr[c + 1];
            range.is_empty() || self.row_idx[self.col_ptr[c]] != c
        });
        if !diag_missing {
            return self.clone();
        }
        let extra = (0..self.n).map(|i| (i, i, 0.0));
        Self::from_triplets(self.n, self.iter().chain(extra)).expect("indices already validated")
    }

    /// Symmetric adjacency lists of the pattern, without the diagonal.
    pub(crate) fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (r, c, _) in self.iter() {
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// The pencil `(A, B)` together with the union sparsity pattern used to
/// assemble `A − σB` for any shift without re-deriving the structure.
#[derive(Debug, Clone)]
pub struct Pencil {
    a: SparseSymmetric,
    b: SparseSymmetric,
    union_col_ptr: Vec<usize>,
    union_row_idx: Vec<usize>,
    a_vals: Vec<f64>,
    b_vals: Vec<f64>,
    union_id: PatternId,
}

impl Pencil {
    pub fn new(a: SparseSymmetric, b: SparseSymmetric) -> Result<Self> {
        if a.n != b.n {
            return Err(Error::DimensionMismatch {
                expected: a.n,
                actual: b.n,
            });
        }
        let n = a.n;
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(a.nnz().max(b.nnz()) + n);
        let mut a_vals = Vec::with_capacity(row_idx.capacity());
        let mut b_vals = Vec::with_capacity(row_idx.capacity());
        for c in 0..n {
            let (mut pa, ea) = (a.col_ptr[c], a.col_ptr[c + 1]);
            let (mut pb, eb) = (b.col_ptr[c], b.col_ptr[c + 1]);
            // the shifted matrix always carries its diagonal
            let mut diag_pending = true;
            loop {
                let ra = if pa < ea { a.row_idx[pa] } else { usize::MAX };
                let rb = if pb < eb { b.row_idx[pb] } else { usize::MAX };
                let mut r = ra.min(rb);
                if diag_pending && c <= r {
                    diag_pending = false;
                    if c < r {
                        row_idx.push(c);
                        a_vals.push(0.0);
                        b_vals.push(0.0);
                        continue;
                    }
                    r = c;
                }
                if r == usize::MAX {
                    break;
                }
                row_idx.push(r);
                let mut av = 0.0;
                let mut bv = 0.0;
                if ra == r {
                    av = a.values[pa];
                    pa += 1;
                }
                if rb == r {
                    bv = b.values[pb];
                    pb += 1;
                }
                a_vals.push(av);
                b_vals.push(bv);
            }
            col_ptr[c + 1] = row_idx.len();
        }
        let union_id = hash_pattern(n, &col_ptr, &row_idx);
        Ok(Self {
            a,
            b,
            union_col_ptr: col_ptr,
            union_row_idx: row_idx,
            a_vals,
            b_vals,
            union_id,
        })
    }

    pub fn n(&self) -> usize {
        self.a.n
    }

    pub fn a(&self) -> &SparseSymmetric {
        &self.a
    }

    pub fn b(&self) -> &SparseSymmetric {
        &self.b
    }

    /// Pattern id shared by every shifted matrix of this pencil.
    pub fn shifted_pattern_id(&self) -> PatternId {
        self.union_id
    }

    /// `A − σB` on the union pattern (diagonal always present).
    pub fn shifted(&self, sigma: f64) -> SparseSymmetric {
        let values = self
            .a_vals
            .iter()
            .zip(&self.b_vals)
            .map(|(a, b)| a - sigma * b)
            .collect();
        SparseSymmetric {
            n: self.a.n,
            col_ptr: self.union_col_ptr.clone(),
            row_idx: self.union_row_idx.clone(),
            values,
            pattern_id: self.union_id,
        }
    }

    /// `B` stored on its own pattern with the diagonal completed.
    pub fn b_with_diagonal(&self) -> SparseSymmetric {
        self.b.with_full_diagonal()
    }
}

/// `A − σB` on the union of both patterns.
pub fn shifted_combine(
    a: &SparseSymmetric,
    b: &SparseSymmetric,
    sigma: f64,
) -> Result<SparseSymmetric> {
    Ok(Pencil::new(a.clone(), b.clone())?.shifted(sigma))
}

/// Which factorization step a permutation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermutationRole {
    /// Pivot order chosen for numerical stability.
    Stability,
    /// Fill-reducing order chosen from the pattern alone.
    FillReducing,
}

/// `forward[new] = old`: position `new` of the permuted system holds
/// original index `old`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    role: PermutationRole,
}

impl Permutation {
    pub fn identity(n: usize, role: PermutationRole) -> Self {
        Self {
            forward: (0..n).collect(),
            role,
        }
    }

    pub fn new(forward: Vec<usize>, role: PermutationRole) -> Result<Self> {
        let n = forward.len();
        let mut seen = vec![false; n];
        for &i in &forward {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "not a permutation of 0..{n}: index {i} repeated or out of range"
                )));
            }
            seen[i] = true;
        }
        Ok(Self { forward, role })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn role(&self) -> PermutationRole {
        self.role
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    /// `inverse[old] = new`
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.forward.len()];
        for (new, &old) in self.forward.iter().enumerate() {
            inv[old] = new;
        }
        inv
    }

    /// `out[new] = x[forward[new]]`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.forward.iter().map(|&old| x[old]).collect()
    }

    /// Inverse of [`Permutation::apply`].
    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (new, &old) in self.forward.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_from_triplets() {
        let s = SparseSymmetric::from_triplets(2, [(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(s.to_dense(), DenseMatrix::identity(2));
    }

    #[test]
    fn upper_entries_are_mirrored() {
        let s = SparseSymmetric::from_triplets(2, [(0, 1, 3.0)]).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![(1, 0, 3.0)]);
        assert_eq!(s.mat_vec(&[1.0, 0.0]).unwrap(), vec![0.0, 3.0]);
    }

    #[test]
    fn duplicates_are_summed() {
        let s =
            SparseSymmetric::from_triplets(3, [(2, 1, 1.0), (2, 1, 0.5), (1, 2, 0.25)]).unwrap();
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.values()[0], 1.75);
    }

    #[test]
    fn out_of_range_rejected() {
        let err = SparseSymmetric::from_triplets(2, [(2, 0, 1.0)]).unwrap_err();
        assert!(matches!(
            err,
            Error::IndexOutOfRange {
                row: 2,
                col: 0,
                n: 2
            }
        ));
    }

    #[test]
    fn identity_mat_vec() {
        let x = [1.5, -2.0, 3.25];
        assert_eq!(
            SparseSymmetric::identity(3).mat_vec(&x).unwrap(),
            x.to_vec()
        );
    }

    #[test]
    fn mat_vec_dimension_mismatch() {
        let err = SparseSymmetric::identity(3).mat_vec(&[1.0]).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 3,
                actual: 1
            }
        ));
    }

    fn random_sparse(n: usize, density: f64, rng: &mut ChaCha8Rng) -> SparseSymmetric {
        let mut t = Vec::new();
        for c in 0..n {
            for r in c..n {
                if r == c || rng.gen::<f64>() < density {
                    t.push((r, c, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        SparseSymmetric::from_triplets(n, t).unwrap()
    }

    #[test]
    fn mat_vec_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let s = random_sparse(50, 0.2, &mut rng);
        let x: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = s.mat_vec(&x).unwrap();
        let d = s.to_dense();
        for i in 0..50 {
            // dense oracle, summed explicitly row by row
            let expect: f64 = (0..50).map(|j| d[(i, j)] * x[j]).sum();
            assert!(
                (y[i] - expect).abs() <= 1e-14 * expect.abs().max(1.0),
                "row {i}"
            );
        }
    }

    #[test]
    fn shifted_combine_diagonal() {
        let a = SparseSymmetric::from_diagonal(&[1.0, 2.0]);
        let b = SparseSymmetric::identity(2);
        let s = shifted_combine(&a, &b, 1.5).unwrap();
        assert_eq!(s.diagonal(), vec![-0.5, 0.5]);
    }

    #[test]
    fn zero_shift_copies_a_on_union_pattern() {
        let a = SparseSymmetric::from_triplets(3, [(1, 0, 2.0), (2, 2, 4.0)]).unwrap();
        let b = SparseSymmetric::from_triplets(3, [(2, 1, 1.0), (0, 0, 1.0)]).unwrap();
        let s = shifted_combine(&a, &b, 0.0).unwrap();
        assert_eq!(s.to_dense(), a.to_dense());
        // union pattern plus completed diagonal: (0,0) (1,0) (1,1) (2,1) (2,2)
        assert_eq!(s.nnz(), 5);
    }

    #[test]
    fn shifted_combine_matches_dense_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let a = random_sparse(20, 0.3, &mut rng);
        let b = random_sparse(20, 0.3, &mut rng);
        let sigma = 0.731;
        let s = shifted_combine(&a, &b, sigma).unwrap().to_dense();
        let (da, db) = (a.to_dense(), b.to_dense());
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(s[(i, j)], da[(i, j)] - sigma * db[(i, j)]);
            }
        }
    }

    #[test]
    fn shifted_pattern_id_is_shift_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_sparse(15, 0.2, &mut rng);
        let b = random_sparse(15, 0.2, &mut rng);
        let p = Pencil::new(a, b).unwrap();
        for sigma in [-3.0, 0.0, 1e-9, 42.0] {
            assert_eq!(p.shifted(sigma).pattern_id(), p.shifted_pattern_id());
        }
    }

    #[test]
    fn pencil_dimension_mismatch() {
        let err =
            Pencil::new(SparseSymmetric::identity(2), SparseSymmetric::identity(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn permutation_inverse_roundtrip() {
        let p = Permutation::new(vec![2, 0, 3, 1], PermutationRole::FillReducing).unwrap();
        let inv = p.inverse();
        for (new, &old) in p.forward().iter().enumerate() {
            assert_eq!(inv[old], new);
        }
        let x = [10.0, 11.0, 12.0, 13.0];
        assert_eq!(p.apply_inverse(&p.apply(&x)), x.to_vec());
        assert!(Permutation::new(vec![0, 0], PermutationRole::Stability).is_err());
    }
}

//! Sparse `LDLᵀ` factorization with Bunch–Kaufman 1×1 / 2×2 pivoting.
//!
//! Columns are eliminated right-looking in the fill-reducing order of a
//! [`SymbolicFactorization`]. At each step the pivot candidates are the next
//! column `j` in that order and its largest off-diagonal partner `r`, so a
//! pivot is always found inside the current column's active set. The signs of
//! the block diagonal give the inertia of the factored matrix.

use std::cell::Cell;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{
    PatternId, Pencil, Permutation, PermutationRole, SparseSymmetric, SymbolicFactorization,
};

/// `(1 + √17) / 8`, the Bunch–Kaufman growth-bounding constant.
pub const BUNCH_KAUFMAN_ALPHA: f64 = 0.640_388_203_202_208_4;

/// Relative pivot breakdown threshold (`|d| ≤ tol · ‖S‖_max`).
pub const DEFAULT_PIVOT_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularPolicy {
    /// Fail with [`Error::ExactSingularity`].
    Error,
    /// Record a zero pivot and skip its update. The factor then reports
    /// `zero > 0` in its inertia and refuses to solve.
    CountAsZero,
}

#[derive(Debug, Clone, Copy)]
pub struct FactorOptions {
    /// When false every column is a 1×1 pivot in the symbolic order, so the
    /// factor has exactly the predicted structure.
    pub pivoting: bool,
    pub singular: SingularPolicy,
    pub pivot_tolerance: f64,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self {
            pivoting: true,
            singular: SingularPolicy::Error,
            pivot_tolerance: DEFAULT_PIVOT_TOLERANCE,
        }
    }
}

/// Counts of negative, zero and positive eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl Inertia {
    pub fn total(&self) -> usize {
        self.negative + self.zero + self.positive
    }

    fn add_scalar(&mut self, d: f64) {
        if d < 0.0 {
            self.negative += 1;
        } else if d > 0.0 {
            self.positive += 1;
        } else {
            self.zero += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiagBlock {
    One(f64),
    Two { d11: f64, d21: f64, d22: f64 },
}

impl DiagBlock {
    pub fn size(&self) -> usize {
        match self {
            DiagBlock::One(_) => 1,
            DiagBlock::Two { .. } => 2,
        }
    }
}

/// `P Q S Qᵀ Pᵀ = L D Lᵀ`.
///
/// Internally the factor is kept in original indexing: `order[t]` is the
/// original index eliminated at position `t`, and `l_cols[t]` holds the
/// below-block entries of column `t` of `L` keyed by original row index.
#[derive(Debug, Clone)]
pub struct LdlFactorization {
    n: usize,
    p: Permutation,
    q: Permutation,
    order: Vec<usize>,
    l_cols: Vec<Vec<(usize, f64)>>,
    blocks: Vec<(usize, DiagBlock)>,
    inertia: Inertia,
    pattern_id: PatternId,
}

impl LdlFactorization {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Stability permutation, relative to the fill-reducing order.
    pub fn p(&self) -> &Permutation {
        &self.p
    }

    pub fn q(&self) -> &Permutation {
        &self.q
    }

    /// Original index eliminated at each position (`P∘Q` combined).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn pattern_id(&self) -> PatternId {
        self.pattern_id
    }

    /// Diagonal blocks with the position of their first row.
    pub fn blocks(&self) -> &[(usize, DiagBlock)] {
        &self.blocks
    }

    pub fn two_by_two_count(&self) -> usize {
        self.blocks.iter().filter(|(_, b)| b.size() == 2).count()
    }

    /// Strictly-lower nonzeros of `L`, structural zeros included.
    pub fn nnz_l(&self) -> usize {
        self.l_cols.iter().map(Vec::len).sum()
    }

    /// Stored nonzeros of `L` and `D`: strict `L`, the diagonal, and one
    /// off-diagonal per 2×2 block.
    pub fn nzf(&self) -> usize {
        self.nnz_l() + self.n + self.two_by_two_count()
    }

    /// Column `t` of `L` below its diagonal block, as `(permuted row, value)`.
    pub fn l_column(&self, t: usize) -> Vec<(usize, f64)> {
        let pos = self.positions();
        let mut col: Vec<_> = self.l_cols[t].iter().map(|&(i, v)| (pos[i], v)).collect();
        col.sort_by_key(|e| e.0);
        col
    }

    fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.n];
        for (t, &i) in self.order.iter().enumerate() {
            pos[i] = t;
        }
        pos
    }

    /// Solves `S x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        if self.inertia.zero > 0 {
            return Err(Error::SingularFactor {
                zero: self.inertia.zero,
            });
        }
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        for (t, col) in self.l_cols.iter().enumerate() {
            let xt = x[self.order[t]];
            if xt != 0.0 {
                for &(i, l) in col {
                    x[i] -= l * xt;
                }
            }
        }
        for &(t, block) in &self.blocks {
            match block {
                DiagBlock::One(d) => x[self.order[t]] /= d,
                DiagBlock::Two { d11, d21, d22 } => {
                    let (i, j) = (self.order[t], self.order[t + 1]);
                    let det = d11 * d22 - d21 * d21;
                    let (bi, bj) = (x[i], x[j]);
                    x[i] = (d22 * bi - d21 * bj) / det;
                    x[j] = (d11 * bj - d21 * bi) / det;
                }
            }
        }
        for (t, col) in self.l_cols.iter().enumerate().rev() {
            let mut acc = x[self.order[t]];
            for &(i, l) in col {
                acc -= l * x[i];
            }
            x[self.order[t]] = acc;
        }
        Ok(())
    }
}

enum Pivot {
    One(usize),
    Two(usize, usize),
}

/// Active entries of a full symmetric row.
fn active(row: &[(usize, f64)], eliminated: &[bool]) -> Vec<(usize, f64)> {
    row.iter()
        .copied()
        .filter(|&(i, _)| !eliminated[i])
        .collect()
}

fn entry(row: &[(usize, f64)], i: usize) -> f64 {
    row.binary_search_by_key(&i, |e| e.0)
        .map_or(0.0, |p| row[p].1)
}

/// Largest off-diagonal magnitude and its index.
fn off_diagonal_max(row: &[(usize, f64)], diag: usize) -> (Option<usize>, f64) {
    let mut best = (None, 0.0);
    for &(i, v) in row {
        if i != diag && (best.0.is_none() || v.abs() > best.1) {
            best = (Some(i), v.abs());
        }
    }
    best
}

/// `row ← row − Σ_t upd(t) e_{idx[t]}` over sorted `idx`, dropping
/// eliminated entries. Positions in `idx` absent from `row` become fill.
fn subtract_into(
    row: &[(usize, f64)],
    idx: &[usize],
    upd: impl Fn(usize) -> f64,
    eliminated: &[bool],
    out: &mut Vec<(usize, f64)>,
) {
    out.clear();
    let (mut a, mut b) = (0, 0);
    while a < row.len() || b < idx.len() {
        let ra = row.get(a).map_or(usize::MAX, |e| e.0);
        let rb = idx.get(b).copied().unwrap_or(usize::MAX);
        if ra < rb {
            if !eliminated[ra] {
                out.push(row[a]);
            }
            a += 1;
        } else if rb < ra {
            out.push((rb, -upd(b)));
            b += 1;
        } else {
            out.push((ra, row[a].1 - upd(b)));
            a += 1;
            b += 1;
        }
    }
}

/// Factors `s`, whose pattern must be the one `symbolic` was computed for.
pub fn numeric_factorize(
    s: &SparseSymmetric,
    symbolic: &SymbolicFactorization,
) -> Result<LdlFactorization> {
    numeric_factorize_with(s, symbolic, FactorOptions::default())
}

pub fn numeric_factorize_with(
    s: &SparseSymmetric,
    symbolic: &SymbolicFactorization,
    options: FactorOptions,
) -> Result<LdlFactorization> {
    symbolic.check_pattern(s)?;
    let n = s.n();
    let threshold = options.pivot_tolerance * s.max_abs();

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, c, v) in s.iter() {
        rows[c].push((r, v));
        if r != c {
            rows[r].push((c, v));
        }
    }
    for row in rows.iter_mut() {
        row.sort_unstable_by_key(|e| e.0);
    }

    let q_order = symbolic.ordering.forward();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut l_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut blocks = Vec::new();
    let mut inertia = Inertia::default();
    let mut scratch = Vec::new();
    let mut cursor = 0;

    let singular = |pivot: usize, magnitude: f64| Error::ExactSingularity {
        pivot,
        magnitude,
        threshold,
    };

    while order.len() < n {
        while eliminated[q_order[cursor]] {
            cursor += 1;
        }
        let j = q_order[cursor];
        let col_j = active(&rows[j], &eliminated);
        let ajj = entry(&col_j, j);
        let (partner, lambda) = off_diagonal_max(&col_j, j);

        let pivot = match partner {
            Some(r)
                if options.pivoting && lambda > 0.0 && ajj.abs() < BUNCH_KAUFMAN_ALPHA * lambda =>
            {
                let col_r = active(&rows[r], &eliminated);
                let (_, sigma_r) = off_diagonal_max(&col_r, r);
                let arr = entry(&col_r, r);
                if ajj.abs() * sigma_r >= BUNCH_KAUFMAN_ALPHA * lambda * lambda {
                    Pivot::One(j)
                } else if arr.abs() >= BUNCH_KAUFMAN_ALPHA * sigma_r {
                    Pivot::One(r)
                } else {
                    Pivot::Two(j, r)
                }
            }
            _ => Pivot::One(j),
        };

        match pivot {
            Pivot::One(p) => {
                let col = if p == j {
                    col_j
                } else {
                    active(&rows[p], &eliminated)
                };
                let d = entry(&col, p);
                eliminated[p] = true;
                let t = order.len();
                order.push(p);
                blocks.push((t, DiagBlock::One(d)));
                if d.abs() <= threshold {
                    match options.singular {
                        SingularPolicy::Error => return Err(singular(t, d.abs())),
                        SingularPolicy::CountAsZero => {
                            blocks.last_mut().unwrap().1 = DiagBlock::One(0.0);
                            inertia.zero += 1;
                            l_cols.push(Vec::new());
                            continue;
                        }
                    }
                }
                inertia.add_scalar(d);
                let (idx, vals): (Vec<usize>, Vec<f64>) =
                    col.into_iter().filter(|&(i, _)| i != p).unzip();
                for (a, &i) in idx.iter().enumerate() {
                    let li = vals[a] / d;
                    subtract_into(&rows[i], &idx, |b| li * vals[b], &eliminated, &mut scratch);
                    std::mem::swap(&mut rows[i], &mut scratch);
                }
                l_cols.push(idx.iter().zip(&vals).map(|(&i, &v)| (i, v / d)).collect());
            }
            Pivot::Two(j, r) => {
                let t = order.len();
                if lambda <= threshold {
                    return Err(singular(t, lambda));
                }
                let col_r = active(&rows[r], &eliminated);
                let (d11, d21, d22) = (ajj, entry(&col_j, r), entry(&col_r, r));
                let det = d11 * d22 - d21 * d21;
                eliminated[j] = true;
                eliminated[r] = true;
                order.push(j);
                order.push(r);
                blocks.push((t, DiagBlock::Two { d11, d21, d22 }));
                inertia.negative += 1;
                inertia.positive += 1;

                // union of both columns outside the block
                let mut idx: Vec<usize> = col_j
                    .iter()
                    .chain(&col_r)
                    .map(|e| e.0)
                    .filter(|&i| i != j && i != r)
                    .collect();
                idx.sort_unstable();
                idx.dedup();
                let cj: Vec<f64> = idx.iter().map(|&i| entry(&col_j, i)).collect();
                let cr: Vec<f64> = idx.iter().map(|&i| entry(&col_r, i)).collect();
                let lj: Vec<f64> = (0..idx.len())
                    .map(|a| (cj[a] * d22 - cr[a] * d21) / det)
                    .collect();
                let lr: Vec<f64> = (0..idx.len())
                    .map(|a| (cr[a] * d11 - cj[a] * d21) / det)
                    .collect();
                for (a, &i) in idx.iter().enumerate() {
                    let (lij, lir) = (lj[a], lr[a]);
                    subtract_into(
                        &rows[i],
                        &idx,
                        |b| lij * cj[b] + lir * cr[b],
                        &eliminated,
                        &mut scratch,
                    );
                    std::mem::swap(&mut rows[i], &mut scratch);
                }
                l_cols.push(idx.iter().copied().zip(lj).collect());
                l_cols.push(idx.iter().copied().zip(lr).collect());
            }
        }
    }

    let q = symbolic.ordering.clone();
    let q_inv = q.inverse();
    let p_forward = order.iter().map(|&i| q_inv[i]).collect();
    Ok(LdlFactorization {
        n,
        p: Permutation::new(p_forward, PermutationRole::Stability)?,
        q,
        order,
        l_cols,
        blocks,
        inertia,
        pattern_id: s.pattern_id(),
    })
}

/// `ν_σ(A, B)`: the number of pencil eigenvalues strictly below `σ`.
pub fn inertia_below(
    pencil: &Pencil,
    sigma: f64,
    symbolic: &SymbolicFactorization,
) -> Result<usize> {
    Ok(numeric_factorize(&pencil.shifted(sigma), symbolic)?
        .inertia()
        .negative)
}

/// Factorizes `A − σB` for varying `σ` against one symbolic analysis and
/// keeps count of the work done.
#[derive(Debug)]
pub struct ShiftedFactorizer<'a> {
    pencil: &'a Pencil,
    symbolic: &'a SymbolicFactorization,
    count: Cell<usize>,
    elapsed: Cell<Duration>,
    max_nzf: Cell<usize>,
}

impl<'a> ShiftedFactorizer<'a> {
    pub fn new(pencil: &'a Pencil, symbolic: &'a SymbolicFactorization) -> Result<Self> {
        if symbolic.pattern_id != pencil.shifted_pattern_id() {
            return Err(Error::PatternMismatch {
                expected: symbolic.pattern_id.0,
                found: pencil.shifted_pattern_id().0,
            });
        }
        Ok(Self {
            pencil,
            symbolic,
            count: Cell::new(0),
            elapsed: Cell::new(Duration::ZERO),
            max_nzf: Cell::new(0),
        })
    }

    pub fn pencil(&self) -> &Pencil {
        self.pencil
    }

    pub fn symbolic(&self) -> &SymbolicFactorization {
        self.symbolic
    }

    pub fn factorize(&self, sigma: f64) -> Result<LdlFactorization> {
        let start = Instant::now();
        self.count.set(self.count.get() + 1);
        let result = numeric_factorize(&self.pencil.shifted(sigma), self.symbolic);
        self.elapsed.set(self.elapsed.get() + start.elapsed());
        if let Ok(f) = &result {
            self.max_nzf.set(self.max_nzf.get().max(f.nzf()));
        }
        result
    }

    pub fn inertia_below(&self, sigma: f64) -> Result<usize> {
        Ok(self.factorize(sigma)?.inertia().negative)
    }

    /// Factorization attempts so far, failed ones included.
    pub fn count(&self) -> usize {
        self.count.get()
    }

    pub fn elapsed(&self) -> Duration {
        self.elapsed.get()
    }

    /// Largest `nzf` over successful factorizations.
    pub fn max_nzf(&self) -> usize {
        self.max_nzf.get()
    }
}

use crate::error::{Error, Result};

use super::{PatternId, Permutation, SparseSymmetric};

/// Structure of the Cholesky-like factor of `Q S Qᵀ`, shared by every
/// matrix with the same pattern.
#[derive(Debug, Clone)]
pub struct SymbolicFactorization {
    pub ordering: Permutation,
    /// Elimination tree over permuted positions; `parent[i] > i` or `None`.
    pub parent: Vec<Option<usize>>,
    /// Nonzeros per column of `L` in permuted order, diagonal included.
    pub col_counts: Vec<usize>,
    /// Predicted nonzeros of `L` (strict lower part) plus the diagonal of `D`.
    pub nzf_estimate: usize,
    pub pattern_id: PatternId,
    pub n: usize,
}

impl SymbolicFactorization {
    /// Fill-reducing ordering followed by symbolic analysis.
    pub fn analyze(pattern: &SparseSymmetric) -> Self {
        let q = super::compute_ordering(pattern);
        symbolic_factorize(pattern, &q).expect("ordering has the pattern's size")
    }

    pub fn check_pattern(&self, s: &SparseSymmetric) -> Result<()> {
        if s.pattern_id() != self.pattern_id {
            return Err(Error::PatternMismatch {
                expected: self.pattern_id.0,
                found: s.pattern_id().0,
            });
        }
        Ok(())
    }
}

/// Elimination tree and column counts of `Q S Qᵀ`. Values of `pattern` are
/// never read.
pub fn symbolic_factorize(
    pattern: &SparseSymmetric,
    q: &Permutation,
) -> Result<SymbolicFactorization> {
    let n = pattern.n();
    if q.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: q.len(),
        });
    }
    let inv = q.inverse();

    // strictly-lower row patterns of the permuted matrix: rows[k] = { i < k }
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in pattern.iter() {
        let (pr, pc) = (inv[r], inv[c]);
        match pr.cmp(&pc) {
            std::cmp::Ordering::Greater => rows[pr].push(pc),
            std::cmp::Ordering::Less => rows[pc].push(pr),
            std::cmp::Ordering::Equal => {}
        }
    }

    let mut parent = vec![None; n];
    let mut ancestor: Vec<Option<usize>> = vec![None; n];
    for (k, row) in rows.iter().enumerate() {
        for &i in row {
            let mut i = i;
            // walk to the root of i's current subtree, compressing the path onto k
            loop {
                let next = ancestor[i];
                ancestor[i] = Some(k);
                match next {
                    None => {
                        parent[i] = Some(k);
                        break;
                    }
                    Some(a) if a == k => break,
                    Some(a) => i = a,
                }
            }
        }
    }

    // row k of L is the union of tree paths from each i in rows[k] up to k
    let mut col_counts = vec![1usize; n];
    let mut mark = vec![usize::MAX; n];
    for k in 0..n {
        mark[k] = k;
        for &i in &rows[k] {
            let mut i = i;
            while mark[i] != k {
                mark[i] = k;
                col_counts[i] += 1;
                i = parent[i].expect("row subtree stays below k");
            }
        }
    }

    Ok(SymbolicFactorization {
        ordering: q.clone(),
        parent,
        nzf_estimate: col_counts.iter().sum(),
        col_counts,
        pattern_id: pattern.pattern_id(),
        n,
    })
}

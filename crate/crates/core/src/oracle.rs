//! Dense reference eigensolver, kept separate from the sparse code paths.
//!
//! `B = L Lᵀ` by Cholesky, `C = L⁻¹ A L⁻ᵀ` is reduced to tridiagonal form by
//! Householder reflections and diagonalized by implicit symmetric QR with
//! Wilkinson shifts, and the eigenvectors are mapped back by `L⁻ᵀ`.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseSymmetric;

/// Largest dimension the oracle accepts.
pub const DEFAULT_ORACLE_CAP: usize = 2048;

/// Eigenvalues ascending with `B`-orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSpectrum {
    pub values: Vec<f64>,
    /// `vectors[i]` belongs to `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

impl DenseSpectrum {
    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        self.values.partition_point(|&l| l < sigma)
    }
}

pub fn dense_generalized_eigen(a: &SparseSymmetric, b: &SparseSymmetric) -> Result<DenseSpectrum> {
    dense_generalized_eigen_capped(a, b, DEFAULT_ORACLE_CAP)
}

pub fn dense_generalized_eigen_capped(
    a: &SparseSymmetric,
    b: &SparseSymmetric,
    cap: usize,
) -> Result<DenseSpectrum> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            actual: b.n(),
        });
    }
    let n = a.n();
    if n > cap {
        return Err(Error::InvalidArgument(format!(
            "dense oracle is limited to n <= {cap}, got {n}"
        )));
    }
    let l = cholesky(&b.to_dense())?;
    let a = a.to_dense();

    // Y = L⁻¹ A, then C = L⁻¹ Yᵀ
    let y = forward_substitute_columns(&l, &a);
    let mut c = forward_substitute_columns(&l, &y.transpose());
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = avg;
            c[(j, i)] = avg;
        }
    }
    let standard = dense_symmetric_eigen(&c)?;

    // x = L⁻ᵀ u
    let vectors = standard
        .vectors
        .iter()
        .map(|u| back_substitute_transposed(&l, u))
        .collect();
    Ok(DenseSpectrum {
        values: standard.values,
        vectors,
    })
}

/// `ν_σ(A, B)` from the dense spectrum.
pub fn dense_inertia(a: &SparseSymmetric, b: &SparseSymmetric, sigma: f64) -> Result<usize> {
    Ok(dense_generalized_eigen(a, b)?.count_below(sigma))
}

/// Eigenvalues ascending with orthonormal eigenvectors of a dense symmetric
/// matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn dense_symmetric_eigen(m: &DenseMatrix) -> Result<SymmetricEigen> {
    let n = m.n();
    let (mut d, mut e, mut q) = householder_tridiagonalize(m);
    symmetric_qr(&mut d, &mut e, &mut q, n)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    Ok(SymmetricEigen {
        values: idx.iter().map(|&i| d[i]).collect(),
        vectors: idx
            .iter()
            .map(|&i| (0..n).map(|r| q[(r, i)]).collect())
            .collect(),
    })
}

fn cholesky(b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = b.n();
    let mut l = DenseMatrix::zeros(n);
    for j in 0..n {
        let mut diag = b[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite {
                negative: usize::from(diag < 0.0),
                zero: usize::from(diag >= 0.0),
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut v = b[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

/// `L⁻¹ M` column by column.
fn forward_substitute_columns(l: &DenseMatrix, m: &DenseMatrix) -> DenseMatrix {
    let n = l.n();
    let mut out = m.clone();
    for c in 0..n {
        for i in 0..n {
            let mut v = out[(i, c)];
            for k in 0..i {
                v -= l[(i, k)] * out[(k, c)];
            }
            out[(i, c)] = v / l[(i, i)];
        }
    }
    out
}

/// `L⁻ᵀ u`.
fn back_substitute_transposed(l: &DenseMatrix, u: &[f64]) -> Vec<f64> {
    let n = l.n();
    let mut x = u.to_vec();
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in i + 1..n {
            v -= l[(k, i)] * x[k];
        }
        x[i] = v / l[(i, i)];
    }
    x
}

/// `Qᵀ M Q = T` with `T` returned as (diagonal, sub-diagonal).
fn householder_tridiagonalize(m: &DenseMatrix) -> (Vec<f64>, Vec<f64>, DenseMatrix) {
    let n = m.n();
    let mut a = m.clone();
    let mut q = DenseMatrix::identity(n);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n)
            .map(|i| a[(i, k)] * a[(i, k)])
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[(k + 1, k)] >= 0.0 { -norm } else { norm };
        v.iter_mut().for_each(|x| *x = 0.0);
        for i in k + 1..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] -= alpha;
        let vtv: f64 = v[k + 1..].iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;

        // A ← H A H with H = I − β v vᵀ, via w = p − (β vᵀp / 2) v
        for i in k..n {
            p[i] = beta * (k + 1..n).map(|j| a[(i, j)] * v[j]).sum::<f64>();
        }
        let kappa = 0.5 * beta * (k + 1..n).map(|i| v[i] * p[i]).sum::<f64>();
        for i in k..n {
            p[i] -= kappa * v[i];
        }
        for i in k..n {
            for j in k..n {
                a[(i, j)] -= v[i] * p[j] + p[i] * v[j];
            }
        }

        // Q ← Q H
        for r in 0..n {
            let qv: f64 = (k + 1..n).map(|j| q[(r, j)] * v[j]).sum();
            let f = beta * qv;
            for j in k + 1..n {
                q[(r, j)] -= f * v[j];
            }
        }
    }
    let d = (0..n).map(|i| a[(i, i)]).collect();
    let e = (0..n.saturating_sub(1)).map(|i| a[(i + 1, i)]).collect();
    (d, e, q)
}

/// Implicit symmetric QR with Wilkinson shifts; `q` accumulates the
/// rotations so that its columns become eigenvectors.
fn symmetric_qr(d: &mut [f64], e: &mut [f64], q: &mut DenseMatrix, n: usize) -> Result<()> {
    if n < 2 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut sweeps = 0usize;
    while hi > 0 {
        if e[hi - 1].abs() <= eps * (d[hi - 1].abs() + d[hi].abs()) {
            e[hi - 1] = 0.0;
            hi -= 1;
            continue;
        }
        sweeps += 1;
        if sweeps > 50 * n {
            return Err(Error::MaxIterations {
                stage: "oracle",
                iterations: sweeps,
                reason: "symmetric QR did not converge".into(),
            });
        }
        let mut lo = hi - 1;
        while lo > 0 && e[lo - 1].abs() > eps * (d[lo - 1].abs() + d[lo].abs()) {
            lo -= 1;
        }

        let delta = 0.5 * (d[hi - 1] - d[hi]);
        let b = e[hi - 1];
        let sign = if delta >= 0.0 { 1.0 } else { -1.0 };
        let mu = d[hi] - b * b / (delta + sign * delta.hypot(b));

        let mut x = d[lo] - mu;
        let mut z = e[lo];
        for k in lo..hi {
            let r = x.hypot(z);
            let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (x / r, z / r) };
            if k > lo {
                e[k - 1] = r;
            }
            let (a, bb, f) = (d[k], e[k], d[k + 1]);
            d[k] = c * c * a + 2.0 * c * s * bb + s * s * f;
            d[k + 1] = s * s * a - 2.0 * c * s * bb + c * c * f;
            e[k] = c * s * (f - a) + (c * c - s * s) * bb;
            if k + 1 < hi {
                z = s * e[k + 1];
                e[k + 1] *= c;
            }
            x = e[k];
            for row in 0..n {
                let (qk, qk1) = (q[(row, k)], q[(row, k + 1)]);
                q[(row, k)] = c * qk + s * qk1;
                q[(row, k + 1)] = -s * qk + c * qk1;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecops::{dot, norm2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn diagonal_standard_problem() {
        let a = SparseSymmetric::from_diagonal(&[3.0, 1.0, 2.0]);
        let s = dense_generalized_eigen(&a, &SparseSymmetric::identity(3)).unwrap();
        assert_close(&s.values, &[1.0, 2.0, 3.0], 1e-15);
        // eigenvectors are signed unit vectors e_1, e_2, e_0
        for (i, &pos) in [1usize, 2, 0].iter().enumerate() {
            assert!((s.vectors[i][pos].abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_by_two_analytic() {
        let a = SparseSymmetric::from_triplets(2, [(0, 0, 2.0), (1, 0, 1.0), (1, 1, 2.0)]).unwrap();
        let s = dense_generalized_eigen(&a, &SparseSymmetric::identity(2)).unwrap();
        assert_close(&s.values, &[1.0, 3.0], 1e-14);
    }

    #[test]
    fn inertia_of_diagonal() {
        let a = SparseSymmetric::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = SparseSymmetric::identity(5);
        assert_eq!(dense_inertia(&a, &b, 0.0).unwrap(), 0);
        assert_eq!(dense_inertia(&a, &b, 5.5).unwrap(), 5);
    }

    #[test]
    fn indefinite_b_rejected() {
        let b = SparseSymmetric::from_diagonal(&[1.0, -1.0]);
        let err = dense_generalized_eigen(&SparseSymmetric::identity(2), &b).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn random_pencil_self_residual_and_b_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let pencil = crate::generate::random_dense_pencil(100, &mut rng);
        let (a, b) = (pencil.a(), pencil.b());
        let s = dense_generalized_eigen(a, b).unwrap();
        for (i, x) in s.vectors.iter().enumerate() {
            let ax = a.mat_vec(x).unwrap();
            let bx = b.mat_vec(x).unwrap();
            let r: Vec<f64> = ax
                .iter()
                .zip(&bx)
                .map(|(p, q)| p - s.values[i] * q)
                .collect();
            assert!(norm2(&r) / norm2(x) < 1e-9);
            for (k, y) in s.vectors.iter().enumerate().take(i + 1) {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((dot(y, &bx) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn agrees_with_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 30;
        let m = DenseMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let sym = m.scaled_add(1.0, &m.transpose());
        let ours = dense_symmetric_eigen(&sym).unwrap();
        let theirs = nalgebra::DMatrix::from_row_slice(n, n, sym.as_slice()).symmetric_eigen();
        let mut expected: Vec<f64> = theirs.eigenvalues.iter().copied().collect();
        expected.sort_by(f64::total_cmp);
        assert_close(&ours.values, &expected, 1e-12);
    }
}

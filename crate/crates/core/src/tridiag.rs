//! Eigenpairs of a symmetric tridiagonal matrix by implicit QL iteration.

/// Ritz values of a tridiagonal `T_j`, ascending, with unit eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RitzSpectrum {
    pub theta: Vec<f64>,
    /// `vectors[i]` is the eigenvector for `theta[i]`.
    pub vectors: Vec<Vec<f64>>,
    pub j: usize,
}

impl RitzSpectrum {
    /// `e_jᵀ y_i` for every Ritz vector.
    pub fn last_components(&self) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|y| *y.last().unwrap_or(&0.0))
            .collect()
    }
}

/// Full eigendecomposition of the tridiagonal matrix with diagonal `alphas`
/// and off-diagonal `betas` (`betas.len() + 1 == alphas.len()`).
pub fn tridiag_eigen(alphas: &[f64], betas: &[f64]) -> RitzSpectrum {
    let n = alphas.len();
    assert!(
        n == 0 || betas.len() + 1 == n,
        "need {} off-diagonals, got {}",
        n.saturating_sub(1),
        betas.len()
    );
    let mut d = alphas.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&betas[..n.saturating_sub(1)]);
    // z is row-major; column i accumulates the i-th eigenvector
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(&mut d, &mut e, &mut z, n);

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    RitzSpectrum {
        theta: idx.iter().map(|&i| d[i]).collect(),
        vectors: idx
            .iter()
            .map(|&i| (0..n).map(|r| z[r * n + i]).collect())
            .collect(),
        j: n,
    }
}

/// EISPACK-style implicit QL with `e[i]` coupling rows `i` and `i + 1`.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) {
    if n == 0 {
        return;
    }
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            for _ in 0..60 {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zk = &mut z[k * n..(k + 1) * n];
                        h = zk[i + 1];
                        zk[i + 1] = s * zk[i] + c * h;
                        zk[i] = c * zk[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::oracle::dense_symmetric_eigen;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_by_one() {
        let s = tridiag_eigen(&[2.0], &[]);
        assert_eq!(s.theta, vec![2.0]);
        assert_eq!(s.vectors, vec![vec![1.0]]);
    }

    #[test]
    fn two_by_two_analytic() {
        let s = tridiag_eigen(&[0.0, 0.0], &[1.0]);
        assert!((s.theta[0] + 1.0).abs() < 1e-15);
        assert!((s.theta[1] - 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.vectors[1][0].abs() - h).abs() < 1e-15);
        assert!((s.last_components()[0].abs() - h).abs() < 1e-15);
    }

    #[test]
    fn empty() {
        assert!(tridiag_eigen(&[], &[]).theta.is_empty());
    }

    fn dense_of(alphas: &[f64], betas: &[f64]) -> DenseMatrix {
        DenseMatrix::from_fn(alphas.len(), |i, j| {
            if i == j {
                alphas[i]
            } else if i == j + 1 {
                betas[j]
            } else if j == i + 1 {
                betas[i]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn random_twelve_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let alphas: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let betas: Vec<f64> = (0..11).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s = tridiag_eigen(&alphas, &betas);
        let oracle = dense_symmetric_eigen(&dense_of(&alphas, &betas)).unwrap();
        for (a, b) in s.theta.iter().zip(&oracle.values) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn eigenpairs_are_orthonormal_and_sorted(
            alphas in proptest::collection::vec(-5.0f64..5.0, 1..30),
            seed: u64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let betas: Vec<f64> = (1..alphas.len()).map(|_| rng.gen_range(1e-3..2.0)).collect();
            let s = tridiag_eigen(&alphas, &betas);
            let t = dense_of(&alphas, &betas);
            for w in s.theta.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            for (i, y) in s.vectors.iter().enumerate() {
                let ty = t.mat_vec(y);
                let res: f64 = ty.iter().zip(y).map(|(a, b)| (a - s.theta[i] * b).powi(2)).sum::<f64>().sqrt();
                prop_assert!(res < 1e-12 * 10.0);
                for (k, x) in s.vectors.iter().enumerate() {
                    let d: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                    let expect = if i == k { 1.0 } else { 0.0 };
                    prop_assert!((d - expect).abs() < 1e-12);
                }
            }
        }
    }
}

//! Seeded test pencils.

use rand::Rng;

use crate::dense::DenseMatrix;
use crate::sparse::{Pencil, SparseSymmetric};

/// Dense pencil with `B = MᵀM + nI` and `A = S + B`, where `M` and the
/// symmetric `S` have entries uniform in `(−1, 1)`.
///
/// Adding `B` to `A` moves every eigenvalue up by one, which keeps the
/// spectrum clear of zero so relative eigenvalue errors stay meaningful.
pub fn random_dense_pencil<R: Rng>(n: usize, rng: &mut R) -> Pencil {
    let m = DenseMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let b = m
        .transpose()
        .matmul(&m)
        .scaled_add(n as f64, &DenseMatrix::identity(n));
    let mut s = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = rng.gen_range(-1.0..1.0);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let a = s.scaled_add(1.0, &b);
    Pencil::new(
        SparseSymmetric::from_dense(&a),
        SparseSymmetric::from_dense(&b),
    )
    .expect("same size")
}

/// `A = diag(values)`, `B = I`.
pub fn diagonal_pencil(values: &[f64]) -> Pencil {
    Pencil::new(
        SparseSymmetric::from_diagonal(values),
        SparseSymmetric::identity(values.len()),
    )
    .expect("same size")
}

/// Five-point grid operator with a random potential, paired with a
/// diagonally dominant mass-like `B` on the same pattern.
///
/// `A = L + V`, with `L` the `nx × ny` Laplacian and `V` diagonal, uniform
/// in `(−4, 4)`. `B = 4I + ½·adjacency`. Both are sparse and `A` is
/// indefinite.
pub fn grid_pencil<R: Rng>(nx: usize, ny: usize, rng: &mut R) -> Pencil {
    let n = nx * ny;
    let id = |x: usize, y: usize| y * nx + x;
    let mut ta = Vec::with_capacity(3 * n);
    let mut tb = Vec::with_capacity(3 * n);
    for y in 0..ny {
        for x in 0..nx {
            let i = id(x, y);
            ta.push((i, i, 4.0 + rng.gen_range(-4.0..4.0)));
            tb.push((i, i, 4.0));
            if x + 1 < nx {
                ta.push((id(x + 1, y), i, -1.0));
                tb.push((id(x + 1, y), i, 0.5));
            }
            if y + 1 < ny {
                ta.push((id(x, y + 1), i, -1.0));
                tb.push((id(x, y + 1), i, 0.5));
            }
        }
    }
    let a = SparseSymmetric::from_triplets(n, ta).expect("indices in range");
    let b = SparseSymmetric::from_triplets(n, tb).expect("indices in range");
    Pencil::new(a, b).expect("same size")
}

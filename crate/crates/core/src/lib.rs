//! Computes the k-th smallest eigenpair of a sparse generalized
//! symmetric-definite eigenproblem `A x = λ B x` and validates its index.
//!
//! The solver runs in three stages:
//!
//! 1. [`lanczos::find_initial_interval`] runs a few steps of Lanczos in the
//!    `B`-inner product and uses extreme Ritz values as candidate shifts until
//!    an interval `[σ_lower, σ_upper)` is certified, by inertia counts, to
//!    contain `λ_k`.
//! 2. [`bisection::narrow_interval`] bisects that interval, counting
//!    eigenvalues below each midpoint with a sparse `LDLᵀ` factorization, until
//!    at most `m_max` eigenvalues remain inside.
//! 3. [`si_lanczos::compute_kth_eigenpair`] runs shift-and-invert Lanczos at
//!    the interval midpoint and accepts the eigenpairs only once their error
//!    bounds are included in the interval and mutually disjoint, which fixes
//!    the index of every pair.
//!
//! [`driver::solve_kth`] wires the stages together and produces a
//! [`driver::SolveReport`].

// negated float comparisons are deliberate: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bisection;
pub mod dense;
pub mod driver;
pub mod error;
pub mod generate;
pub mod lanczos;
pub mod ldl;
pub mod oracle;
pub mod si_lanczos;
pub mod sparse;
pub mod tridiag;

mod vecops;

pub use bisection::{bisect_to_eigenvalue, narrow_interval, BisectionTolerance};
pub use driver::{emit_report, solve_kth, ReportFormat, SolveReport, SolveStatus, SolverConfig};
pub use error::{Error, Result};
pub use lanczos::{find_initial_interval, BracketInterval, LanczosState};
pub use ldl::{inertia_below, numeric_factorize, FactorOptions, Inertia, LdlFactorization};
pub use oracle::{dense_generalized_eigen, dense_inertia, DenseSpectrum};
pub use si_lanczos::{compute_kth_eigenpair, ApproxEigenpair, SiLanczosState};
pub use sparse::{
    compute_ordering, parse_matrix_market, shifted_combine, symbolic_factorize, Pencil,
    Permutation, SparseSymmetric, SymbolicFactorization,
};
pub use tridiag::{tridiag_eigen, RitzSpectrum};

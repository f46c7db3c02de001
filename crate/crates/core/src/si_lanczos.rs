//! Shift-and-invert Lanczos with error-bound validation of eigenpair
//! indices.
//!
//! The operator `B (A − σB)⁻¹` is self-adjoint in the `B⁻¹`-inner product.
//! Running Lanczos on it gives
//! `(A − σB)⁻¹ Ṽ_j = B⁻¹ Ṽ_j T̃_j + B⁻¹ ṽ_{j+1} β̃_j e_jᵀ`, and each Ritz pair
//! `(θ̃, ỹ)` of `T̃_j` yields `λ = σ + 1/θ̃` with `x₂ = (A − σB)⁻¹ Ṽ_j ỹ`. The
//! residual of `x₂` is `−ṽ_{j+1} s` with `s = β̃_j e_jᵀỹ / θ̃`, so an
//! eigenvalue lies within `η = |s| / (|θ̃| √(1 + s²))` of `λ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bisection::MIDPOINT_NUDGE;
use crate::error::{Error, Result};
use crate::lanczos::BracketInterval;
use crate::ldl::{LdlFactorization, ShiftedFactorizer};
use crate::sparse::SparseSymmetric;
use crate::tridiag::{tridiag_eigen, RitzSpectrum};
use crate::vecops::{axpy, combine, dot, norm2, scale};

/// `β̃_j` below this fraction of `‖B (A − σB)⁻¹ ṽ_j‖_{B⁻¹}` is a breakdown.
pub const BREAKDOWN_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Continued,
    /// `β̃_j` vanished: the basis spans an invariant subspace.
    Breakdown,
    /// `j = n`: the basis spans the whole space.
    Exhausted,
}

/// A `j`-step shift-and-invert Lanczos decomposition, with `ṽ_iᵀ B⁻¹ ṽ_m = δ_im`.
///
/// Alongside each basis vector `ṽ_i` the state keeps its companion
/// `w_i = B⁻¹ ṽ_i`, the solve `z_i = (A − σB)⁻¹ ṽ_i`, and the products
/// `A z_i`, `B z_i`, so eigenvectors and their residuals are linear
/// combinations of stored columns.
#[derive(Debug, Clone)]
pub struct SiLanczosState {
    n: usize,
    sigma: f64,
    v: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    az: Vec<Vec<f64>>,
    bz: Vec<Vec<f64>>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    v_next: Option<Vec<f64>>,
    w_next: Vec<f64>,
}

/// Bound data for one Ritz pair, cheap enough to compute for every pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RitzBound {
    pub ritz_index: usize,
    pub theta_tilde: f64,
    pub lambda: f64,
    pub s: f64,
    pub eta: f64,
}

impl RitzBound {
    pub fn lower(&self) -> f64 {
        self.lambda - self.eta
    }

    pub fn upper(&self) -> f64 {
        self.lambda + self.eta
    }
}

/// Ritz pair with its eigenvector approximation `x₂` and residual data.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxEigenpair {
    /// Position among the extracted pairs: by distance to `σ` during the
    /// iteration, by `λ` once accepted.
    pub index_in_interval: usize,
    pub ritz_index: usize,
    pub lambda: f64,
    pub x2: Vec<f64>,
    pub y: Vec<f64>,
    pub theta_tilde: f64,
    pub s: f64,
    pub eta: f64,
    pub bound: [f64; 2],
    pub rel_res_2norm: f64,
    pub rel_diff_2norm: Option<f64>,
}

impl SiLanczosState {
    /// Starts from `start` scaled to unit `B⁻¹`-norm.
    pub fn new(start: &[f64], b_factor: &LdlFactorization, sigma: f64) -> Result<Self> {
        let mut v = start.to_vec();
        let mut w = b_factor.solve(&v)?;
        let norm = dot(&v, &w).max(0.0).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument(
                "starting vector has zero B⁻¹-norm".into(),
            ));
        }
        scale(1.0 / norm, &mut v);
        scale(1.0 / norm, &mut w);
        Ok(Self {
            n: v.len(),
            sigma,
            v: Vec::new(),
            w: Vec::new(),
            z: Vec::new(),
            az: Vec::new(),
            bz: Vec::new(),
            alphas: Vec::new(),
            betas: Vec::new(),
            v_next: Some(v),
            w_next: w,
        })
    }

    pub fn step(
        &mut self,
        a: &SparseSymmetric,
        b: &SparseSymmetric,
        shift_factor: &LdlFactorization,
        b_factor: &LdlFactorization,
    ) -> Result<StepStatus> {
        let j = self.v.len() + 1;
        let v = self.v_next.take().ok_or(Error::Breakdown { step: j })?;
        let wv = std::mem::take(&mut self.w_next);

        let z = shift_factor.solve(&v)?;
        let u = b.mat_vec(&z)?;
        let az = a.mat_vec(&z)?;
        let alpha = dot(&v, &z);
        let reference = dot(&u, &z).abs().sqrt();

        let mut r = u.clone();
        axpy(-alpha, &v, &mut r);
        if let (Some(prev), Some(&beta)) = (self.v.last(), self.betas.last()) {
            axpy(-beta, prev, &mut r);
        }
        self.v.push(v);
        self.w.push(wv);
        self.z.push(z);
        self.az.push(az);
        self.bz.push(u);
        self.alphas.push(alpha);

        self.orthogonalize(&mut r);
        if j >= self.n {
            self.betas.push(0.0);
            return Ok(StepStatus::Exhausted);
        }
        let mut w_new = b_factor.solve(&r)?;
        let beta = dot(&r, &w_new).max(0.0).sqrt();
        if beta <= BREAKDOWN_TOLERANCE * reference {
            self.betas.push(0.0);
            return Ok(StepStatus::Breakdown);
        }
        scale(1.0 / beta, &mut r);
        scale(1.0 / beta, &mut w_new);
        self.betas.push(beta);
        self.v_next = Some(r);
        self.w_next = w_new;
        Ok(StepStatus::Continued)
    }

    /// Classical Gram–Schmidt, twice, in the `B⁻¹`-inner product.
    fn orthogonalize(&self, r: &mut [f64]) {
        for _ in 0..2 {
            let coeffs: Vec<f64> = self.w.iter().map(|wi| dot(wi, r)).collect();
            for (vi, c) in self.v.iter().zip(coeffs) {
                axpy(-c, vi, r);
            }
        }
    }

    /// After a breakdown, continues the decomposition with `fresh`
    /// orthogonalized against the basis and `β̃_j = 0`. Returns false if
    /// `fresh` lies in the span of the basis.
    pub fn continue_with(&mut self, fresh: &[f64], b_factor: &LdlFactorization) -> Result<bool> {
        if self.v_next.is_some() || self.v.len() >= self.n {
            return Ok(false);
        }
        let reference = dot(fresh, &b_factor.solve(fresh)?).max(0.0).sqrt();
        let mut r = fresh.to_vec();
        self.orthogonalize(&mut r);
        let mut w = b_factor.solve(&r)?;
        let norm = dot(&r, &w).max(0.0).sqrt();
        if norm <= 1e-8 * reference {
            return Ok(false);
        }
        scale(1.0 / norm, &mut r);
        scale(1.0 / norm, &mut w);
        self.v_next = Some(r);
        self.w_next = w;
        Ok(true)
    }

    pub fn j(&self) -> usize {
        self.v.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta_j(&self) -> f64 {
        self.betas.last().copied().unwrap_or(0.0)
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// `w_i = B⁻¹ ṽ_i`.
    pub fn companions(&self) -> &[Vec<f64>] {
        &self.w
    }

    /// `z_i = (A − σB)⁻¹ ṽ_i`.
    pub fn solves(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn v_next(&self) -> Option<&[f64]> {
        self.v_next.as_deref()
    }

    /// `B⁻¹ ṽ_{j+1}`, if a next vector exists.
    pub fn w_next(&self) -> Option<&[f64]> {
        self.v_next.as_ref().map(|_| self.w_next.as_slice())
    }

    pub fn ritz(&self) -> RitzSpectrum {
        let j = self.j();
        tridiag_eigen(&self.alphas, &self.betas[..j.saturating_sub(1)])
    }

    fn bound_of(&self, ritz: &RitzSpectrum, i: usize) -> RitzBound {
        let theta = ritz.theta[i];
        let y_last = ritz.vectors[i][ritz.j - 1];
        let s = self.beta_j() * y_last / theta;
        RitzBound {
            ritz_index: i,
            theta_tilde: theta,
            lambda: self.sigma + 1.0 / theta,
            s,
            eta: s.abs() / (1.0 + s * s).sqrt() / theta.abs(),
        }
    }

    /// Ritz indices ordered by `|λ − σ|` ascending, i.e. `|θ̃|` descending.
    fn nearest_first(ritz: &RitzSpectrum) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..ritz.j).filter(|&i| ritz.theta[i] != 0.0).collect();
        idx.sort_by(|&a, &b| {
            ritz.theta[b]
                .abs()
                .total_cmp(&ritz.theta[a].abs())
                .then(a.cmp(&b))
        });
        idx
    }

    /// Bounds of every Ritz pair, nearest to `σ` first.
    pub fn bounds(&self) -> Vec<RitzBound> {
        let ritz = self.ritz();
        Self::nearest_first(&ritz)
            .into_iter()
            .map(|i| self.bound_of(&ritz, i))
            .collect()
    }

    /// The `count` pairs nearest to `σ`, with `x₂` and relative residuals.
    pub fn extract(&self, count: usize) -> Vec<ApproxEigenpair> {
        let ritz = self.ritz();
        Self::nearest_first(&ritz)
            .into_iter()
            .take(count)
            .enumerate()
            .map(|(pos, i)| {
                let bound = self.bound_of(&ritz, i);
                let y = ritz.vectors[i].clone();
                let x2 = combine(&self.z, &y, self.n);
                let mut r = combine(&self.az, &y, self.n);
                axpy(-bound.lambda, &combine(&self.bz, &y, self.n), &mut r);
                ApproxEigenpair {
                    index_in_interval: pos,
                    ritz_index: i,
                    lambda: bound.lambda,
                    rel_res_2norm: norm2(&r) / norm2(&x2),
                    x2,
                    y,
                    theta_tilde: bound.theta_tilde,
                    s: bound.s,
                    eta: bound.eta,
                    bound: [bound.lower(), bound.upper()],
                    rel_diff_2norm: None,
                }
            })
            .collect()
    }

    /// `(A − λB) x₂` for an extracted pair.
    pub fn residual_vector(&self, pair: &ApproxEigenpair) -> Vec<f64> {
        let mut r = combine(&self.az, &pair.y, self.n);
        axpy(-pair.lambda, &combine(&self.bz, &pair.y, self.n), &mut r);
        r
    }

    /// `B x₂` for an extracted pair.
    pub fn b_times_x2(&self, pair: &ApproxEigenpair) -> Vec<f64> {
        combine(&self.bz, &pair.y, self.n)
    }

    /// `x₁ = B⁻¹ Ṽ_j ỹ` for Ritz pair `ritz_index`.
    pub fn compute_x1(&self, ritz_index: usize) -> Vec<f64> {
        let ritz = self.ritz();
        combine(&self.w, &ritz.vectors[ritz_index], self.n)
    }
}

/// `|x_lᵀ B x_m| / (‖x_l‖_B ‖x_m‖_B)` evaluated directly, and the closed
/// form `|s_l| |s_m| / (√(1 + s_l²) √(1 + s_m²))`.
pub fn pairwise_b_orthogonality(
    state: &SiLanczosState,
    l: &ApproxEigenpair,
    m: &ApproxEigenpair,
) -> (f64, f64) {
    let bl = state.b_times_x2(l);
    let bm = state.b_times_x2(m);
    let nl = dot(&l.x2, &bl).sqrt();
    let nm = dot(&m.x2, &bm).sqrt();
    assert!(nl > 0.0 && nm > 0.0, "zero-norm Ritz vector");
    let direct = dot(&l.x2, &bm).abs() / (nl * nm);
    let closed = l.s.abs() / (1.0 + l.s * l.s).sqrt() * m.s.abs() / (1.0 + m.s * m.s).sqrt();
    (direct, closed)
}

#[derive(Debug, Clone, Copy)]
pub struct SiOptions {
    pub tau_res: f64,
    pub tau_diff: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SiOptions {
    fn default() -> Self {
        Self {
            tau_res: 1e-10,
            tau_diff: 1e-10,
            max_iterations: 500,
            seed: 0,
        }
    }
}

/// Per-iteration convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiIteration {
    pub j: usize,
    pub bound_ok: bool,
    pub residual_ok: bool,
    pub difference_ok: bool,
    pub max_rel_residual: f64,
    pub max_rel_difference: Option<f64>,
    pub max_eta: f64,
    /// Bounds of the pairs nearest `σ`, ordered by `λ`.
    pub bounds: Vec<[f64; 2]>,
    /// Closed-form `B`-cosines between the target pair and the others.
    pub target_cosines: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiOutcome {
    pub sigma: f64,
    pub lambda: f64,
    /// Eigenvector approximation with unit `B`-norm.
    pub x: Vec<f64>,
    pub rel_residual: f64,
    pub eta: f64,
    pub bound: [f64; 2],
    /// `l = k − ν_lower`, 1-based position of the pair inside the interval.
    pub index_in_interval: usize,
    pub iterations: usize,
    pub first_bound: Option<usize>,
    pub first_residual: Option<usize>,
    pub first_difference: Option<usize>,
    pub breakdowns: usize,
    /// Eigenvalues of all accepted pairs, ascending.
    pub interval_lambdas: Vec<f64>,
    pub trace: Vec<SiIteration>,
}

/// Convergence checks of one iteration on pairs ordered nearest-first.
fn bounds_validated(pairs: &[ApproxEigenpair], m: usize, interval: &BracketInterval) -> bool {
    if pairs.len() < m {
        return false;
    }
    let included = pairs
        .iter()
        .all(|p| p.bound[0] >= interval.sigma_lower && p.bound[1] < interval.sigma_upper);
    let mut sorted: Vec<[f64; 2]> = pairs.iter().map(|p| p.bound).collect();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
    included && sorted.windows(2).all(|w| w[0][1] < w[1][0])
}

/// `‖x − c·x_prev‖₂ / ‖x‖₂`, with `c` scaling `x_prev` to the norm of `x`
/// and aligning its sign.
fn relative_difference(x: &[f64], prev: &[f64]) -> f64 {
    let nx = norm2(x);
    let np = norm2(prev);
    let sign = if dot(x, prev) >= 0.0 { 1.0 } else { -1.0 };
    let c = sign * nx / np;
    let diff: f64 = x
        .iter()
        .zip(prev)
        .map(|(a, b)| (a - c * b).powi(2))
        .sum::<f64>()
        .sqrt();
    diff / nx
}

fn random_start(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Factorizes at the interval midpoint, nudging off a singular shift.
fn factor_midpoint(
    fx: &ShiftedFactorizer,
    interval: &BracketInterval,
) -> Result<(f64, LdlFactorization)> {
    let mid = interval.midpoint();
    let delta = interval.length() * MIDPOINT_NUDGE;
    let mut last = None;
    for attempt in 0..17 {
        let m = ((attempt + 1) / 2) as f64;
        let sigma = if attempt % 2 == 1 {
            mid + m * delta
        } else {
            mid - m * delta
        };
        match fx.factorize(sigma) {
            Ok(f) => return Ok((sigma, f)),
            Err(e @ Error::ExactSingularity { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Runs shift-and-invert Lanczos at the midpoint of a narrowed interval and
/// returns the `k`-th eigenpair once every pair in the interval is validated.
pub fn compute_kth_eigenpair(
    fx: &ShiftedFactorizer,
    b_factor: &LdlFactorization,
    k: usize,
    interval: &BracketInterval,
    options: &SiOptions,
) -> Result<SiOutcome> {
    compute_kth_eigenpair_observed(fx, b_factor, k, interval, options, &mut |_, _, _| {})
}

/// Called after every step with the state, the bounds of all Ritz pairs and
/// the pairs extracted for validation.
pub type SiObserver<'o> = dyn FnMut(&SiLanczosState, &[RitzBound], &[ApproxEigenpair]) + 'o;

/// As [`compute_kth_eigenpair`], calling `observer` after every step.
pub fn compute_kth_eigenpair_observed(
    fx: &ShiftedFactorizer,
    b_factor: &LdlFactorization,
    k: usize,
    interval: &BracketInterval,
    options: &SiOptions,
    observer: &mut SiObserver<'_>,
) -> Result<SiOutcome> {
    if !interval.contains_index(k) || !(interval.sigma_lower < interval.sigma_upper) {
        return Err(Error::InvalidArgument(format!(
            "interval [{}, {}) with counts ({}, {}] does not bracket k = {k}",
            interval.sigma_lower, interval.sigma_upper, interval.nu_lower, interval.nu_upper
        )));
    }
    let pencil = fx.pencil();
    let (a, b) = (pencil.a(), pencil.b());
    let n = pencil.n();
    let m = interval.count();
    let l = k - interval.nu_lower;

    let (sigma, shift_factor) = factor_midpoint(fx, interval)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut state = SiLanczosState::new(&random_start(n, &mut rng), b_factor, sigma)?;

    let mut trace = Vec::new();
    let mut previous: Option<Vec<Vec<f64>>> = None;
    let (mut first_bound, mut first_residual, mut first_difference) = (None, None, None);
    let mut breakdowns = 0;

    for _ in 0..options.max_iterations {
        let status = state.step(a, b, &shift_factor, b_factor)?;
        if status == StepStatus::Breakdown {
            breakdowns += 1;
            let mut continued = false;
            for _ in 0..3 {
                if state.continue_with(&random_start(n, &mut rng), b_factor)? {
                    continued = true;
                    break;
                }
            }
            if !continued {
                return Err(Error::Breakdown { step: state.j() });
            }
        }
        let exhausted = status == StepStatus::Exhausted;
        let j = state.j();
        let bounds = state.bounds();
        if j < m {
            observer(&state, &bounds, &[]);
            continue;
        }

        let mut pairs = state.extract(m);
        if let Some(prev) = &previous {
            for (p, x_prev) in pairs.iter_mut().zip(prev) {
                p.rel_diff_2norm = Some(relative_difference(&p.x2, x_prev));
            }
        }
        let bound_ok = bounds_validated(&pairs, m, interval);
        let max_rel_residual = pairs.iter().map(|p| p.rel_res_2norm).fold(0.0, f64::max);
        let residual_ok = pairs.iter().all(|p| p.rel_res_2norm < options.tau_res);
        let max_rel_difference = pairs
            .iter()
            .map(|p| p.rel_diff_2norm)
            .try_fold(0.0_f64, |acc, d| d.map(|d| acc.max(d)));
        let difference_ok = max_rel_difference.is_some_and(|d| d < options.tau_diff);
        // a complete basis has no further iterate to compare with; its
        // pairs are exact up to rounding
        let difference_ok = difference_ok || exhausted;

        first_bound = first_bound.or(bound_ok.then_some(j));
        first_residual = first_residual.or(residual_ok.then_some(j));
        first_difference = first_difference.or(difference_ok.then_some(j));

        let mut by_lambda: Vec<&ApproxEigenpair> = pairs.iter().collect();
        by_lambda.sort_by(|p, q| p.lambda.total_cmp(&q.lambda));
        let target = by_lambda.get(l - 1).copied();
        let target_cosines = match target {
            Some(t) => by_lambda
                .iter()
                .filter(|p| p.ritz_index != t.ritz_index)
                .map(|p| {
                    t.s.abs() / (1.0 + t.s * t.s).sqrt() * p.s.abs() / (1.0 + p.s * p.s).sqrt()
                })
                .collect(),
            None => Vec::new(),
        };
        trace.push(SiIteration {
            j,
            bound_ok,
            residual_ok,
            difference_ok,
            max_rel_residual,
            max_rel_difference,
            max_eta: pairs.iter().map(|p| p.eta).fold(0.0, f64::max),
            bounds: by_lambda.iter().map(|p| p.bound).collect(),
            target_cosines,
        });
        observer(&state, &bounds, &pairs);

        if bound_ok && residual_ok && difference_ok {
            let chosen = by_lambda[l - 1];
            let bx = state.b_times_x2(chosen);
            let norm_b = dot(&chosen.x2, &bx).sqrt();
            let x: Vec<f64> = chosen.x2.iter().map(|v| v / norm_b).collect();
            return Ok(SiOutcome {
                sigma,
                lambda: chosen.lambda,
                x,
                rel_residual: chosen.rel_res_2norm,
                eta: chosen.eta,
                bound: chosen.bound,
                index_in_interval: l,
                iterations: j,
                first_bound,
                first_residual,
                first_difference,
                breakdowns,
                interval_lambdas: by_lambda.iter().map(|p| p.lambda).collect(),
                trace,
            });
        }
        if exhausted {
            return Err(Error::MaxIterations {
                stage: "shift-invert Lanczos",
                iterations: j,
                reason: "basis is complete but the pairs in the interval were not validated; suspected eigenvalue cluster"
                    .into(),
            });
        }
        previous = Some(pairs.into_iter().map(|p| p.x2).collect());
    }
    Err(Error::MaxIterations {
        stage: "shift-invert Lanczos",
        iterations: state.j(),
        reason:
            "pairs in the interval were not validated; suspected eigenvalue cluster or multiplicity"
                .into(),
    })
}

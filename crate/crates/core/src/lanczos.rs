//! Lanczos in the `B`-inner product and the search for an initial interval
//! certified to contain `λ_k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldl::{LdlFactorization, ShiftedFactorizer};
use crate::sparse::SparseSymmetric;
use crate::tridiag::{tridiag_eigen, RitzSpectrum};
use crate::vecops::{axpy, dot, scale};

/// `β_j` below this fraction of `‖B⁻¹A v_j‖_B` is an invariant subspace.
pub const BREAKDOWN_TOLERANCE: f64 = 1e-14;

/// Half-open interval `[sigma_lower, sigma_upper)` with the eigenvalue
/// counts `ν` at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketInterval {
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    pub nu_lower: usize,
    pub nu_upper: usize,
}

impl BracketInterval {
    /// `λ_k ∈ [σ_lower, σ_upper)`.
    pub fn contains_index(&self, k: usize) -> bool {
        self.nu_lower < k && k <= self.nu_upper
    }

    /// Number of eigenvalues inside.
    pub fn count(&self) -> usize {
        self.nu_upper.saturating_sub(self.nu_lower)
    }

    pub fn length(&self) -> f64 {
        self.sigma_upper - self.sigma_lower
    }

    pub fn midpoint(&self) -> f64 {
        self.sigma_lower + (self.sigma_upper - self.sigma_lower) / 2.0
    }

    fn from_pair(s1: f64, nu1: usize, s2: f64, nu2: usize) -> Self {
        if s1 <= s2 {
            Self {
                sigma_lower: s1,
                sigma_upper: s2,
                nu_lower: nu1,
                nu_upper: nu2,
            }
        } else {
            Self {
                sigma_lower: s2,
                sigma_upper: s1,
                nu_lower: nu2,
                nu_upper: nu1,
            }
        }
    }
}

/// A `j`-step Lanczos decomposition `A V_j = B V_j T_j + B v_{j+1} β_j e_jᵀ`
/// with `V_jᵀ B V_j = I`.
#[derive(Debug, Clone)]
pub struct LanczosState {
    n: usize,
    basis: Vec<Vec<f64>>,
    b_basis: Vec<Vec<f64>>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    v_next: Option<Vec<f64>>,
    b_v_next: Vec<f64>,
}

impl LanczosState {
    /// Starts from `start` scaled to unit `B`-norm.
    pub fn new(start: &[f64], b: &SparseSymmetric) -> Result<Self> {
        let mut v = start.to_vec();
        let mut bv = b.mat_vec(&v)?;
        let norm = dot(&v, &bv).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument(
                "starting vector has zero B-norm".into(),
            ));
        }
        scale(1.0 / norm, &mut v);
        scale(1.0 / norm, &mut bv);
        Ok(Self {
            n: b.n(),
            basis: Vec::new(),
            b_basis: Vec::new(),
            alphas: Vec::new(),
            betas: Vec::new(),
            v_next: Some(v),
            b_v_next: bv,
        })
    }

    /// Extends the decomposition by one column. After a breakdown, or once
    /// `j = n`, no next vector exists and further steps fail with
    /// [`Error::Breakdown`].
    pub fn step(
        &mut self,
        a: &SparseSymmetric,
        b: &SparseSymmetric,
        b_factor: &LdlFactorization,
    ) -> Result<()> {
        let j = self.basis.len() + 1;
        let v = self.v_next.take().ok_or(Error::Breakdown { step: j })?;
        let bv = std::mem::take(&mut self.b_v_next);

        let av = a.mat_vec(&v)?;
        let alpha = dot(&v, &av);
        let mut w = b_factor.solve(&av)?;
        let reference = dot(&av, &w).max(0.0).sqrt();
        axpy(-alpha, &v, &mut w);
        if let (Some(prev), Some(&beta)) = (self.basis.last(), self.betas.last()) {
            axpy(-beta, prev, &mut w);
        }
        self.basis.push(v);
        self.b_basis.push(bv);
        self.alphas.push(alpha);

        for _ in 0..2 {
            let coeffs: Vec<f64> = self.b_basis.iter().map(|bvi| dot(bvi, &w)).collect();
            for (vi, c) in self.basis.iter().zip(coeffs) {
                axpy(-c, vi, &mut w);
            }
        }
        let mut bw = b.mat_vec(&w)?;
        let beta = dot(&w, &bw).max(0.0).sqrt();
        if j >= self.n || beta <= BREAKDOWN_TOLERANCE * reference {
            self.betas.push(0.0);
            return Ok(());
        }
        scale(1.0 / beta, &mut w);
        scale(1.0 / beta, &mut bw);
        self.betas.push(beta);
        self.v_next = Some(w);
        self.b_v_next = bw;
        Ok(())
    }

    pub fn j(&self) -> usize {
        self.basis.len()
    }

    /// True once no further step is possible.
    pub fn terminated(&self) -> bool {
        self.v_next.is_none()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// `β_1 … β_j`; the last one couples `v_j` and `v_{j+1}`.
    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta_j(&self) -> f64 {
        self.betas.last().copied().unwrap_or(0.0)
    }

    pub fn v_next(&self) -> Option<&[f64]> {
        self.v_next.as_deref()
    }

    pub fn ritz(&self) -> RitzSpectrum {
        let j = self.j();
        tridiag_eigen(&self.alphas, &self.betas[..j.saturating_sub(1)])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntervalOptions {
    pub seed: u64,
    pub max_iterations: usize,
    pub max_restarts: usize,
}

impl Default for IntervalOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iterations: 200,
            max_restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStep {
    pub j: usize,
    pub sigma: f64,
    pub nu: usize,
    pub theta_min: f64,
    pub theta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct IntervalRecord {
    /// Lanczos steps of the run that produced the interval.
    pub iterations: usize,
    pub restarts: usize,
    /// Set when the interval was closed by stepping outward from an extreme
    /// Ritz value instead of by two Ritz shifts.
    pub fallback_used: bool,
    /// Shifts moved off a numerically singular `A − σB`.
    pub perturbations: usize,
    pub trace: Vec<IntervalStep>,
}

fn straddles(nu_a: usize, nu_b: usize, k: usize) -> bool {
    (nu_a < k && k <= nu_b) || (nu_b < k && k <= nu_a)
}

/// `ν` at `sigma`, nudging `sigma` when `A − σB` is numerically singular.
fn count_with_nudge(
    fx: &ShiftedFactorizer,
    sigma: f64,
    scale: f64,
    record: &mut IntervalRecord,
) -> Result<(f64, usize)> {
    match fx.inertia_below(sigma) {
        Ok(nu) => return Ok((sigma, nu)),
        Err(Error::ExactSingularity { .. }) => {}
        Err(e) => return Err(e),
    }
    let base = 1e-13 * sigma.abs().max(scale);
    let mut last = None;
    for t in 0..8 {
        for sign in [1.0, -1.0] {
            let shifted = sigma + sign * base * 4f64.powi(t);
            record.perturbations += 1;
            match fx.inertia_below(shifted) {
                Ok(nu) => return Ok((shifted, nu)),
                Err(e @ Error::ExactSingularity { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

fn random_start(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Runs Lanczos from a random start and uses the extreme Ritz values as
/// shifts until two consecutive inertia counts straddle `k`.
///
/// At step `j` the shift is `θ_1` while `λ_k` is known to lie below the
/// previous shift and `θ_j` otherwise. Interlacing moves these outward
/// monotonically, so the counts eventually straddle `k` for `1 < k < n`.
/// For `k = 1` going down (or `k = n` going up), and whenever the relevant
/// Ritz value has converged without straddling, the interval is closed by
/// stepping outward from the Ritz value in doubling steps.
pub fn find_initial_interval(
    fx: &ShiftedFactorizer,
    b_factor: &LdlFactorization,
    k: usize,
    options: &IntervalOptions,
) -> Result<(BracketInterval, IntervalRecord)> {
    let pencil = fx.pencil();
    let n = pencil.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} is outside 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut record = IntervalRecord::default();

    loop {
        let mut state = LanczosState::new(&random_start(n, &mut rng), pencil.b())?;
        let mut prev: Option<(f64, usize)> = None;
        record.trace.clear();

        loop {
            state.step(pencil.a(), pencil.b(), b_factor)?;
            let j = state.j();
            let ritz = state.ritz();
            let (theta_min, theta_max) = (ritz.theta[0], ritz.theta[j - 1]);
            let scale = theta_min
                .abs()
                .max(theta_max.abs())
                .max(theta_max - theta_min);
            let scale = if scale > 0.0 { scale } else { 1.0 };

            let down = prev.is_some_and(|(_, nu)| k <= nu);
            let (pick, theta) = if down {
                (0, theta_min)
            } else {
                (j - 1, theta_max)
            };
            let (sigma, nu) = count_with_nudge(fx, theta, scale, &mut record)?;
            record.iterations = j;
            record.trace.push(IntervalStep {
                j,
                sigma,
                nu,
                theta_min,
                theta_max,
            });

            if let Some((sigma_prev, nu_prev)) = prev {
                if straddles(nu_prev, nu, k) {
                    return Ok((
                        BracketInterval::from_pair(sigma_prev, nu_prev, sigma, nu),
                        record,
                    ));
                }
            }

            let rho = (state.beta_j() * ritz.vectors[pick][j - 1]).abs();
            let hopeless = j > 1 && ((k == 1 && nu >= 1) || (k == n && nu < n));
            let converged = rho <= 1e-6 * scale;
            let exhausted = state.terminated() && j >= n;
            if hopeless || converged || exhausted {
                record.fallback_used = true;
                let interval = step_outward(
                    fx,
                    sigma,
                    nu,
                    k,
                    (2.0 * rho).max(1e-8 * scale),
                    scale,
                    &mut record,
                )?;
                return Ok((interval, record));
            }
            if state.terminated() {
                if record.restarts < options.max_restarts {
                    record.restarts += 1;
                    break;
                }
                record.fallback_used = true;
                let interval = step_outward(
                    fx,
                    sigma,
                    nu,
                    k,
                    (2.0 * rho).max(1e-8 * scale),
                    scale,
                    &mut record,
                )?;
                return Ok((interval, record));
            }
            if j >= options.max_iterations {
                return Err(Error::MaxIterations {
                    stage: "initial interval",
                    iterations: j,
                    reason: "no pair of Ritz shifts straddled k".into(),
                });
            }
            prev = Some((sigma, nu));
        }
    }
}

/// Moves away from `(sigma, nu)` towards `λ_k` in doubling steps until the
/// count crosses `k`.
fn step_outward(
    fx: &ShiftedFactorizer,
    sigma: f64,
    nu: usize,
    k: usize,
    first_step: f64,
    scale: f64,
    record: &mut IntervalRecord,
) -> Result<BracketInterval> {
    let direction = if k <= nu { -1.0 } else { 1.0 };
    let mut step = first_step;
    for _ in 0..64 {
        let (candidate, nu_c) = count_with_nudge(fx, sigma + direction * step, scale, record)?;
        if straddles(nu, nu_c, k) {
            return Ok(BracketInterval::from_pair(sigma, nu, candidate, nu_c));
        }
        step *= 2.0;
    }
    Err(Error::MaxIterations {
        stage: "initial interval",
        iterations: 64,
        reason: "outward steps from the extreme Ritz value never crossed k".into(),
    })
}

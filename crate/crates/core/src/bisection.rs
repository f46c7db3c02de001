//! Spectral bisection on inertia counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::BracketInterval;
use crate::ldl::ShiftedFactorizer;

/// Relative size of the nudge applied to a singular midpoint.
pub const MIDPOINT_NUDGE: f64 = 1e-6;

/// Stopping rule for [`bisect_to_eigenvalue`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BisectionTolerance {
    /// Stop once `σ_upper − σ_lower < τ`.
    Absolute(f64),
    /// Stop once `(σ_upper − σ_lower) / max(|σ_lower|, |σ_upper|) < τ`.
    Relative(f64),
}

impl BisectionTolerance {
    fn satisfied(&self, interval: &BracketInterval) -> bool {
        let length = interval.length();
        match *self {
            BisectionTolerance::Absolute(tau) => length < tau,
            BisectionTolerance::Relative(tau) => {
                let scale = interval.sigma_lower.abs().max(interval.sigma_upper.abs());
                scale == 0.0 || length / scale < tau
            }
        }
    }

    fn value(&self) -> f64 {
        match *self {
            BisectionTolerance::Absolute(t) | BisectionTolerance::Relative(t) => t,
        }
    }
}

/// One bisection iteration: the shift tried and the interval kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub sigma: f64,
    pub nu: usize,
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    pub length: f64,
    pub count: usize,
    /// The midpoint was singular and `sigma` is a nudged replacement.
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    pub interval: BracketInterval,
    pub trace: Vec<BisectionStep>,
    /// Every shift near the last midpoint was numerically singular, so the
    /// midpoint itself is an eigenvalue to working accuracy.
    pub singular_stop: bool,
}

impl BisectionOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

fn check_bracket(interval: &BracketInterval, k: usize) -> Result<()> {
    if !(interval.sigma_lower < interval.sigma_upper) || !interval.contains_index(k) {
        return Err(Error::InvalidArgument(format!(
            "interval [{}, {}) with counts ({}, {}] does not bracket k = {k}",
            interval.sigma_lower, interval.sigma_upper, interval.nu_lower, interval.nu_upper
        )));
    }
    Ok(())
}

/// Splits `interval` at its midpoint and keeps the half containing `λ_k`.
/// `None` means every shift tried near the midpoint was singular.
fn halve(
    fx: &ShiftedFactorizer,
    interval: &mut BracketInterval,
    k: usize,
) -> Result<Option<BisectionStep>> {
    let (l, u) = (interval.sigma_lower, interval.sigma_upper);
    let mid = interval.midpoint();
    if !(l < mid && mid < u) {
        return Err(Error::MaxIterations {
            stage: "bisection",
            iterations: 0,
            reason: format!(
                "interval [{l}, {u}) cannot be split further; suspected eigenvalue cluster"
            ),
        });
    }
    let delta = (u - l) * MIDPOINT_NUDGE;
    let mut attempt = 0;
    let (sigma, nu) = loop {
        // midpoint, then ±δ, ±2δ, …; every candidate stays well inside (l, u)
        let offset = match attempt {
            0 => 0.0,
            a => {
                let m = ((a + 1) / 2) as f64;
                if a % 2 == 1 {
                    m * delta
                } else {
                    -m * delta
                }
            }
        };
        let sigma = mid + offset;
        match fx.inertia_below(sigma) {
            Ok(nu) => break (sigma, nu),
            Err(Error::ExactSingularity { .. }) if attempt < 16 => attempt += 1,
            Err(Error::ExactSingularity { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    };
    if nu < interval.nu_lower || nu > interval.nu_upper {
        return Err(Error::InvalidArgument(format!(
            "inertia {nu} at {sigma} is inconsistent with the bracket counts ({}, {}]",
            interval.nu_lower, interval.nu_upper
        )));
    }
    if k <= nu {
        interval.sigma_upper = sigma;
        interval.nu_upper = nu;
    } else {
        interval.sigma_lower = sigma;
        interval.nu_lower = nu;
    }
    Ok(Some(BisectionStep {
        sigma,
        nu,
        sigma_lower: interval.sigma_lower,
        sigma_upper: interval.sigma_upper,
        length: interval.length(),
        count: interval.count(),
        perturbed: attempt > 0,
    }))
}

/// Bisects until at most `m_max` eigenvalues remain in the interval.
pub fn narrow_interval(
    fx: &ShiftedFactorizer,
    interval: BracketInterval,
    k: usize,
    m_max: usize,
    max_iterations: usize,
) -> Result<BisectionOutcome> {
    check_bracket(&interval, k)?;
    if m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    let mut interval = interval;
    let mut trace = Vec::new();
    while interval.count() > m_max {
        if trace.len() >= max_iterations {
            return Err(Error::MaxIterations {
                stage: "bisection",
                iterations: trace.len(),
                reason: format!(
                    "{} eigenvalues remain in an interval of length {:e}; suspected eigenvalue cluster",
                    interval.count(),
                    interval.length()
                ),
            });
        }
        match halve(fx, &mut interval, k)? {
            Some(step) => trace.push(step),
            None => {
                return Err(Error::MaxIterations {
                    stage: "bisection",
                    iterations: trace.len(),
                    reason: format!(
                        "every shift near {} is numerically singular with {} eigenvalues in [{}, {}); suspected eigenvalue cluster",
                        interval.midpoint(),
                        interval.count(),
                        interval.sigma_lower,
                        interval.sigma_upper
                    ),
                })
            }
        }
    }
    Ok(BisectionOutcome {
        interval,
        trace,
        singular_stop: false,
    })
}

/// Classic bisection down to a tolerance; returns the final midpoint with
/// the trace.
pub fn bisect_to_eigenvalue(
    fx: &ShiftedFactorizer,
    interval: BracketInterval,
    k: usize,
    tolerance: BisectionTolerance,
    max_iterations: usize,
) -> Result<(f64, BisectionOutcome)> {
    check_bracket(&interval, k)?;
    if !(tolerance.value() > 0.0) {
        return Err(Error::InvalidArgument(
            "bisection tolerance must be positive".into(),
        ));
    }
    let mut interval = interval;
    let mut trace = Vec::new();
    while !tolerance.satisfied(&interval) {
        if trace.len() >= max_iterations {
            return Err(Error::MaxIterations {
                stage: "bisection",
                iterations: trace.len(),
                reason: format!(
                    "interval length {:e} still above tolerance",
                    interval.length()
                ),
            });
        }
        match halve(fx, &mut interval, k)? {
            Some(step) => trace.push(step),
            None => {
                let outcome = BisectionOutcome {
                    interval,
                    trace,
                    singular_stop: true,
                };
                return Ok((interval.midpoint(), outcome));
            }
        }
    }
    let outcome = BisectionOutcome {
        interval,
        trace,
        singular_stop: false,
    };
    Ok((interval.midpoint(), outcome))
}

//! End-to-end solve: interval, bisection, shift-and-invert Lanczos, report.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bisection::{narrow_interval, BisectionStep};
use crate::error::{Error, Result};
use crate::lanczos::{find_initial_interval, BracketInterval, IntervalOptions, IntervalStep};
use crate::ldl::{numeric_factorize, LdlFactorization, ShiftedFactorizer};
use crate::oracle::{dense_generalized_eigen_capped, DEFAULT_ORACLE_CAP};
use crate::si_lanczos::{compute_kth_eigenpair_observed, SiIteration, SiObserver, SiOptions};
use crate::sparse::{Pencil, SparseSymmetric, SymbolicFactorization};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// 1-based index of the wanted eigenvalue, counted from the smallest.
    pub k: usize,
    /// Bisection stops once at most this many eigenvalues remain.
    pub m_max: usize,
    pub tau_res: f64,
    pub tau_diff: f64,
    /// Absolute tolerance of plain bisection, used by `bisect-only`.
    pub tau_abs: f64,
    pub seed: u64,
    pub max_lanczos: usize,
    pub max_bisect: usize,
    pub max_si: usize,
    /// Cross-check against the dense solver (small problems only).
    pub verify: bool,
    /// Wall-clock timings make the report non-reproducible, so they are opt-in.
    pub record_timings: bool,
}

impl SolverConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            m_max: 20,
            tau_res: 1e-10,
            tau_diff: 1e-10,
            tau_abs: 1e-10,
            seed: 0,
            max_lanczos: 200,
            max_bisect: 128,
            max_si: 500,
            verify: false,
            record_timings: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(Error::InvalidArgument(format!(
                "k = {} is outside 1..={n}",
                self.k
            )));
        }
        if self.m_max == 0 {
            return Err(Error::InvalidArgument("m_max must be at least 1".into()));
        }
        for (name, v) in [
            ("tau_res", self.tau_res),
            ("tau_diff", self.tau_diff),
            ("tau_abs", self.tau_abs),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    ClusterSuspected,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInfo {
    pub n: usize,
    pub nnz_a: usize,
    pub nnz_b: usize,
    /// Stored entries of `A − σB`, lower triangle with the diagonal.
    pub nnz_shifted: usize,
    /// `B` reuses the symbolic analysis of `A − σB`.
    pub b_shares_symbolic: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Stage1Report {
    pub iterations: usize,
    pub restarts: usize,
    pub fallback_used: bool,
    pub perturbations: usize,
    pub interval: Option<BracketInterval>,
    pub length: Option<f64>,
    pub trace: Vec<IntervalStep>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Stage2Report {
    pub iterations: usize,
    pub interval: Option<BracketInterval>,
    pub count: Option<usize>,
    pub trace: Vec<BisectionStep>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Stage3Report {
    pub sigma: Option<f64>,
    pub iterations: usize,
    pub first_bound: Option<usize>,
    pub first_residual: Option<usize>,
    pub first_difference: Option<usize>,
    pub breakdowns: usize,
    /// All validated eigenvalues of the narrowed interval, ascending.
    pub interval_lambdas: Vec<f64>,
    pub trace: Vec<SiIteration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub k: usize,
    pub lambda: f64,
    pub rel_residual: f64,
    pub eta: f64,
    pub bound: [f64; 2],
    /// Unit `B`-norm.
    pub eigenvector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Resources {
    pub symbolic_analyses: usize,
    pub factorizations_b: usize,
    pub factorizations_stage1: usize,
    pub factorizations_stage2: usize,
    pub factorizations_stage3: usize,
    pub factorizations_total: usize,
    /// Predicted nonzeros of `L` and `D` for `A − σB`.
    pub nzf_estimate: usize,
    pub nzf_b: usize,
    /// Largest actual `nzf` over the shifted factorizations.
    pub nzf_max: usize,
}

/// Wall-clock seconds per task.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub symbolic_analysis: f64,
    pub factorization_b: f64,
    pub ritz_values: f64,
    pub factorizations_stage1: f64,
    pub factorizations_stage2: f64,
    pub factorization_stage3: f64,
    pub kth_eigenpair: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub oracle_lambda: f64,
    pub abs_error: Option<f64>,
    pub rel_error: Option<f64>,
    /// Angle to the oracle eigenvector in the `B`-geometry, in radians.
    pub eigenvector_angle: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `(λ_n − λ_1)` over the stage-1 interval length.
    pub spread_over_interval: Option<f64>,
    pub interval_contains_oracle: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub config: SolverConfig,
    pub problem: ProblemInfo,
    pub status: SolveStatus,
    pub error: Option<String>,
    pub stage1: Stage1Report,
    pub stage2: Stage2Report,
    pub stage3: Stage3Report,
    pub result: Option<SolveResult>,
    pub resources: Resources,
    pub timings: Option<Timings>,
    pub verification: Option<Verification>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

/// Symbolic analyses of `A − σB` and of `B`, shared when the patterns agree.
#[derive(Debug)]
pub struct Analysis {
    pub shifted: SymbolicFactorization,
    pub b: Option<SymbolicFactorization>,
    pub b_matrix: SparseSymmetric,
}

impl Analysis {
    pub fn new(pencil: &Pencil) -> Self {
        let shifted = SymbolicFactorization::analyze(&pencil.shifted(0.0));
        let b_matrix = pencil.b_with_diagonal();
        let b = (b_matrix.pattern_id() != shifted.pattern_id)
            .then(|| SymbolicFactorization::analyze(&b_matrix));
        Self {
            shifted,
            b,
            b_matrix,
        }
    }

    pub fn b_symbolic(&self) -> &SymbolicFactorization {
        self.b.as_ref().unwrap_or(&self.shifted)
    }

    pub fn count(&self) -> usize {
        1 + usize::from(self.b.is_some())
    }
}

/// Factorizes `B` and checks that every pivot is positive.
pub fn factor_b(analysis: &Analysis) -> Result<LdlFactorization> {
    let f = match numeric_factorize(&analysis.b_matrix, analysis.b_symbolic()) {
        Ok(f) => f,
        Err(Error::ExactSingularity { .. }) => {
            return Err(Error::NotPositiveDefinite {
                negative: 0,
                zero: 1,
            })
        }
        Err(e) => return Err(e),
    };
    let inertia = f.inertia();
    if inertia.negative > 0 || inertia.zero > 0 {
        return Err(Error::NotPositiveDefinite {
            negative: inertia.negative,
            zero: inertia.zero,
        });
    }
    Ok(f)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn classify(e: &Error) -> SolveStatus {
    match e {
        Error::MaxIterations { stage, .. } if *stage != "initial interval" => {
            SolveStatus::ClusterSuspected
        }
        _ => SolveStatus::Failed,
    }
}

/// Runs the three stages and reports the `k`-th eigenpair.
///
/// Invalid input (bad `k`, size mismatch, `B` not positive definite) is an
/// error. Failures inside a stage produce a report whose status says why.
pub fn solve_kth(
    a: &SparseSymmetric,
    b: &SparseSymmetric,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve_kth_observed(a, b, config, &mut |_, _, _| {})
}

/// As [`solve_kth`], passing `observer` to the shift-and-invert stage.
pub fn solve_kth_observed(
    a: &SparseSymmetric,
    b: &SparseSymmetric,
    config: &SolverConfig,
    observer: &mut SiObserver<'_>,
) -> Result<SolveReport> {
    let total_start = Instant::now();
    let pencil = Pencil::new(a.clone(), b.clone())?;
    let n = pencil.n();
    config.validate(n)?;
    let mut timings = Timings::default();

    let t = Instant::now();
    let analysis = Analysis::new(&pencil);
    timings.symbolic_analysis = secs(t.elapsed());

    let t = Instant::now();
    let b_factor = factor_b(&analysis)?;
    timings.factorization_b = secs(t.elapsed());

    let mut report = SolveReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        problem: ProblemInfo {
            n,
            nnz_a: a.nnz(),
            nnz_b: b.nnz(),
            nnz_shifted: pencil.shifted(0.0).nnz(),
            b_shares_symbolic: analysis.b.is_none(),
        },
        status: SolveStatus::Failed,
        error: None,
        stage1: Stage1Report::default(),
        stage2: Stage2Report::default(),
        stage3: Stage3Report::default(),
        result: None,
        resources: Resources {
            symbolic_analyses: analysis.count(),
            factorizations_b: 1,
            nzf_estimate: analysis.shifted.nzf_estimate,
            nzf_b: b_factor.nzf(),
            ..Resources::default()
        },
        timings: None,
        verification: None,
        diagnostics: Vec::new(),
    };

    let fx = ShiftedFactorizer::new(&pencil, &analysis.shifted)?;
    let outcome = run_stages(&fx, &b_factor, config, &mut report, &mut timings, observer);

    let r = &mut report.resources;
    r.factorizations_total = r.factorizations_b
        + r.factorizations_stage1
        + r.factorizations_stage2
        + r.factorizations_stage3;
    r.nzf_max = fx.max_nzf();

    match outcome {
        Ok(()) => report.status = SolveStatus::Converged,
        Err(e) => {
            report.status = classify(&e);
            report.error = Some(e.to_string());
        }
    }
    if report.stage1.perturbations > 0 {
        report.diagnostics.push(format!(
            "{} stage-1 shifts were moved off a singular A - σB",
            report.stage1.perturbations
        ));
    }
    let nudged = report.stage2.trace.iter().filter(|s| s.perturbed).count();
    if nudged > 0 {
        report.diagnostics.push(format!(
            "{nudged} bisection midpoints were nudged off a singular A - σB"
        ));
    }
    if report.stage1.fallback_used {
        report.diagnostics.push(
            "stage-1 interval was closed by stepping outward from an extreme Ritz value".into(),
        );
    }
    if report.stage3.breakdowns > 0 {
        report.diagnostics.push(format!(
            "shift-invert Lanczos met {} invariant subspaces and continued with fresh vectors",
            report.stage3.breakdowns
        ));
    }

    if config.verify {
        match verify(&pencil, &report) {
            Ok(v) => report.verification = Some(v),
            Err(e) => report
                .diagnostics
                .push(format!("verification skipped: {e}")),
        }
    }
    timings.total = secs(total_start.elapsed());
    if config.record_timings {
        report.timings = Some(timings);
    }
    Ok(report)
}

fn run_stages(
    fx: &ShiftedFactorizer,
    b_factor: &LdlFactorization,
    config: &SolverConfig,
    report: &mut SolveReport,
    timings: &mut Timings,
    observer: &mut SiObserver<'_>,
) -> Result<()> {
    let k = config.k;

    let (t, c, f) = (Instant::now(), fx.count(), fx.elapsed());
    let options = IntervalOptions {
        seed: config.seed,
        max_iterations: config.max_lanczos,
        ..IntervalOptions::default()
    };
    let stage1 = find_initial_interval(fx, b_factor, k, &options);
    report.resources.factorizations_stage1 = fx.count() - c;
    timings.factorizations_stage1 = secs(fx.elapsed() - f);
    timings.ritz_values = secs(t.elapsed()) - timings.factorizations_stage1;
    let (interval, record) = stage1?;
    report.stage1 = Stage1Report {
        iterations: record.iterations,
        restarts: record.restarts,
        fallback_used: record.fallback_used,
        perturbations: record.perturbations,
        interval: Some(interval),
        length: Some(interval.length()),
        trace: record.trace,
    };

    let (c, f) = (fx.count(), fx.elapsed());
    let stage2 = narrow_interval(fx, interval, k, config.m_max, config.max_bisect);
    report.resources.factorizations_stage2 = fx.count() - c;
    timings.factorizations_stage2 = secs(fx.elapsed() - f);
    let narrowed = stage2?;
    report.stage2 = Stage2Report {
        iterations: narrowed.iterations(),
        interval: Some(narrowed.interval),
        count: Some(narrowed.interval.count()),
        trace: narrowed.trace,
    };

    let (t, c, f) = (Instant::now(), fx.count(), fx.elapsed());
    let options = SiOptions {
        tau_res: config.tau_res,
        tau_diff: config.tau_diff,
        max_iterations: config.max_si,
        // an independent stream from the stage-1 start vector
        seed: config.seed ^ 0x9e37_79b9_7f4a_7c15,
    };
    let stage3 =
        compute_kth_eigenpair_observed(fx, b_factor, k, &narrowed.interval, &options, observer);
    report.resources.factorizations_stage3 = fx.count() - c;
    timings.factorization_stage3 = secs(fx.elapsed() - f);
    timings.kth_eigenpair = secs(t.elapsed()) - timings.factorization_stage3;
    let out = stage3?;
    report.stage3 = Stage3Report {
        sigma: Some(out.sigma),
        iterations: out.iterations,
        first_bound: out.first_bound,
        first_residual: out.first_residual,
        first_difference: out.first_difference,
        breakdowns: out.breakdowns,
        interval_lambdas: out.interval_lambdas,
        trace: out.trace,
    };
    report.result = Some(SolveResult {
        k,
        lambda: out.lambda,
        rel_residual: out.rel_residual,
        eta: out.eta,
        bound: out.bound,
        eigenvector: out.x,
    });
    Ok(())
}

fn verify(pencil: &Pencil, report: &SolveReport) -> Result<Verification> {
    let spectrum = dense_generalized_eigen_capped(pencil.a(), pencil.b(), DEFAULT_ORACLE_CAP)?;
    let k = report.config.k;
    let n = pencil.n();
    let oracle_lambda = spectrum.values[k - 1];
    let mut v = Verification {
        oracle_lambda,
        abs_error: None,
        rel_error: None,
        eigenvector_angle: None,
        lambda_min: spectrum.values[0],
        lambda_max: spectrum.values[n - 1],
        spread_over_interval: None,
        interval_contains_oracle: None,
    };
    if let Some(interval) = &report.stage1.interval {
        let length = interval.length();
        if length > 0.0 {
            v.spread_over_interval = Some((v.lambda_max - v.lambda_min) / length);
        }
        v.interval_contains_oracle =
            Some(interval.sigma_lower <= oracle_lambda && oracle_lambda < interval.sigma_upper);
    }
    if let Some(result) = &report.result {
        let abs = (result.lambda - oracle_lambda).abs();
        v.abs_error = Some(abs);
        v.rel_error = Some(if oracle_lambda == 0.0 {
            abs
        } else {
            abs / oracle_lambda.abs()
        });
        let xo = &spectrum.vectors[k - 1];
        v.eigenvector_angle = Some(b_angle(pencil.b(), &result.eigenvector, xo)?);
    }
    Ok(v)
}

/// Angle between the lines spanned by `x` and `y` in the `B`-inner product.
pub fn b_angle(b: &SparseSymmetric, x: &[f64], y: &[f64]) -> Result<f64> {
    let bx = b.mat_vec(x)?;
    let by = b.mat_vec(y)?;
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let nx = dot(x, &bx).sqrt();
    let ny = dot(y, &by).sqrt();
    let sign = if dot(x, &by) >= 0.0 { 1.0 } else { -1.0 };
    // ‖x̂ − ŷ‖_B for unit vectors is 2 sin(angle / 2), accurate for tiny angles
    let d: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a / nx - sign * b / ny)
        .collect();
    let bd = b.mat_vec(&d)?;
    let dist = dot(&d, &bd).max(0.0).sqrt();
    Ok(2.0 * (dist / 2.0).min(1.0).asin())
}

/// Writes `report` as pretty JSON or as a short text summary.
pub fn emit_report<W: Write>(
    report: &SolveReport,
    format: ReportFormat,
    mut writer: W,
) -> Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut writer, report)?;
            writeln!(writer)?;
        }
        ReportFormat::Text => write_text(report, &mut writer)?,
    }
    Ok(())
}

fn write_text<W: Write>(r: &SolveReport, w: &mut W) -> std::io::Result<()> {
    let status = match r.status {
        SolveStatus::Converged => "converged",
        SolveStatus::ClusterSuspected => "cluster suspected",
        SolveStatus::Failed => "failed",
    };
    writeln!(w, "status: {status}")?;
    if let Some(e) = &r.error {
        writeln!(w, "error: {e}")?;
    }
    writeln!(
        w,
        "n = {}, k = {}, seed = {}",
        r.problem.n, r.config.k, r.config.seed
    )?;
    if let Some(res) = &r.result {
        writeln!(w, "lambda_{} = {:.16e}", res.k, res.lambda)?;
        writeln!(w, "relative residual = {:.3e}", res.rel_residual)?;
        writeln!(
            w,
            "error bound = [{:.16e}, {:.16e}]",
            res.bound[0], res.bound[1]
        )?;
    }
    if let Some(i) = &r.stage1.interval {
        writeln!(
            w,
            "stage 1: {} Lanczos steps, [{:.6e}, {:.6e}) with nu = ({}, {}]",
            r.stage1.iterations, i.sigma_lower, i.sigma_upper, i.nu_lower, i.nu_upper
        )?;
    }
    if let Some(i) = &r.stage2.interval {
        writeln!(
            w,
            "stage 2: {} bisection steps, [{:.6e}, {:.6e}) holding {} eigenvalues",
            r.stage2.iterations,
            i.sigma_lower,
            i.sigma_upper,
            i.count()
        )?;
    }
    if let Some(s) = r.stage3.sigma {
        let show = |v: Option<usize>| v.map_or_else(|| "-".to_string(), |j| j.to_string());
        writeln!(
            w,
            "stage 3: sigma = {:.6e}, {} steps (bound {}, residual {}, difference {})",
            s,
            r.stage3.iterations,
            show(r.stage3.first_bound),
            show(r.stage3.first_residual),
            show(r.stage3.first_difference)
        )?;
    }
    let res = &r.resources;
    writeln!(
        w,
        "factorizations: {} (B {}, stage 1 {}, stage 2 {}, stage 3 {}), nzf estimate {}",
        res.factorizations_total,
        res.factorizations_b,
        res.factorizations_stage1,
        res.factorizations_stage2,
        res.factorizations_stage3,
        res.nzf_estimate
    )?;
    if let Some(t) = &r.timings {
        writeln!(
            w,
            "time [s]: symbolic {:.3e}, B {:.3e}, ritz {:.3e}, stage 1 {:.3e}, stage 2 {:.3e}, stage 3 {:.3e}, eigenpair {:.3e}, total {:.3e}",
            t.symbolic_analysis,
            t.factorization_b,
            t.ritz_values,
            t.factorizations_stage1,
            t.factorizations_stage2,
            t.factorization_stage3,
            t.kth_eigenpair,
            t.total
        )?;
    }
    if let Some(v) = &r.verification {
        writeln!(w, "oracle lambda = {:.16e}", v.oracle_lambda)?;
        if let Some(e) = v.rel_error {
            writeln!(w, "relative error = {e:.3e}")?;
        }
        if let Some(a) = v.eigenvector_angle {
            writeln!(w, "eigenvector angle = {a:.3e}")?;
        }
    }
    for d in &r.diagnostics {
        writeln!(w, "note: {d}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{diagonal_pencil, random_dense_pencil};
    use crate::oracle::dense_generalized_eigen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn solve(pencil: &Pencil, config: &SolverConfig) -> SolveReport {
        solve_kth(pencil.a(), pencil.b(), config).unwrap()
    }

    #[test]
    fn diagonal_two_hundred_k_101() {
        let values: Vec<f64> = (1..=200).map(f64::from).collect();
        let p = diagonal_pencil(&values);
        let report = solve(&p, &SolverConfig::new(101));
        assert_eq!(report.status, SolveStatus::Converged, "{:?}", report.error);
        let lambda = report.result.as_ref().unwrap().lambda;
        assert!((lambda - 101.0).abs() < 1e-10);
        assert!(report.stage2.count.unwrap() <= 20);
    }

    #[test]
    fn three_by_three_k_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_dense_pencil(3, &mut rng);
        let oracle = dense_generalized_eigen(p.a(), p.b()).unwrap();
        for k in 1..=3 {
            let report = solve(&p, &SolverConfig::new(k));
            assert_eq!(
                report.status,
                SolveStatus::Converged,
                "k = {k}: {:?}",
                report.error
            );
            let lambda = report.result.unwrap().lambda;
            assert!((lambda - oracle.values[k - 1]).abs() <= 1e-12 * oracle.values[k - 1].abs());
        }
    }

    #[test]
    fn factorization_counts_add_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_dense_pencil(60, &mut rng);
        let report = solve(&p, &SolverConfig::new(30));
        let r = &report.resources;
        assert_eq!(report.status, SolveStatus::Converged);
        assert_eq!(r.factorizations_b, 1);
        assert_eq!(r.symbolic_analyses, 1);
        assert!(report.problem.b_shares_symbolic);
        let perturbed = report.stage2.trace.iter().filter(|s| s.perturbed).count();
        if report.stage1.perturbations == 0 && perturbed == 0 && !report.stage1.fallback_used {
            assert_eq!(r.factorizations_stage1, report.stage1.iterations);
            assert_eq!(r.factorizations_stage2, report.stage2.iterations);
            assert_eq!(r.factorizations_stage3, 1);
        }
        assert_eq!(
            r.factorizations_total,
            1 + r.factorizations_stage1 + r.factorizations_stage2 + r.factorizations_stage3
        );
    }

    #[test]
    fn rejects_bad_input() {
        let p = diagonal_pencil(&[1.0, 2.0]);
        assert!(matches!(
            solve_kth(p.a(), p.b(), &SolverConfig::new(0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            solve_kth(p.a(), p.b(), &SolverConfig::new(3)),
            Err(Error::InvalidArgument(_))
        ));
        let indefinite = SparseSymmetric::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            solve_kth(p.a(), &indefinite, &SolverConfig::new(1)),
            Err(Error::NotPositiveDefinite { negative: 1, .. })
        ));
    }

    #[test]
    fn repeated_eigenvalue_is_reported_as_cluster() {
        let mut values = vec![5.0; 30];
        values.extend((1..=10).map(f64::from));
        let p = diagonal_pencil(&values);
        let mut config = SolverConfig::new(15);
        config.m_max = 4;
        let report = solve(&p, &config);
        assert_eq!(report.status, SolveStatus::ClusterSuspected);
        assert!(report.result.is_none());
        assert!(report.error.is_some());
    }

    #[test]
    fn verification_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_dense_pencil(40, &mut rng);
        let mut config = SolverConfig::new(10);
        config.verify = true;
        let report = solve(&p, &config);
        let v = report.verification.unwrap();
        assert!(v.rel_error.unwrap() <= 1e-12);
        assert!(v.eigenvector_angle.unwrap() <= 1e-8);
        assert_eq!(v.interval_contains_oracle, Some(true));
    }

    #[test]
    fn json_round_trip_and_empty_arrays() {
        let p = diagonal_pencil(&[1.0, 2.0, 3.0, 4.0]);
        let report = solve(&p, &SolverConfig::new(2));
        let mut buf = Vec::new();
        emit_report(&report, ReportFormat::Json, &mut buf).unwrap();
        let back: SolveReport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, report);

        let failed = SolveReport {
            stage1: Stage1Report::default(),
            stage2: Stage2Report::default(),
            stage3: Stage3Report::default(),
            result: None,
            ..report
        };
        let json = serde_json::to_value(&failed).unwrap();
        assert_eq!(json["stage2"]["trace"], serde_json::json!([]));
        assert_eq!(json["stage3"]["trace"], serde_json::json!([]));
        assert_eq!(json["diagnostics"], serde_json::json!([]));
    }

    #[test]
    fn text_report_mentions_result() {
        let p = diagonal_pencil(&[1.0, 2.0, 3.0, 4.0]);
        let report = solve(&p, &SolverConfig::new(3));
        let mut buf = Vec::new();
        emit_report(&report, ReportFormat::Text, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("status: converged"));
        assert!(text.contains("lambda_3 = 3.0000000000000"));
    }

    #[test]
    fn nzf_estimate_matches_symbolic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = crate::generate::grid_pencil(8, 7, &mut rng);
        let report = solve(&p, &SolverConfig::new(20));
        let symbolic = SymbolicFactorization::analyze(&p.shifted(0.0));
        assert_eq!(report.resources.nzf_estimate, symbolic.nzf_estimate);
    }

    #[test]
    fn b_angle_is_sign_and_scale_free() {
        let b = SparseSymmetric::from_diagonal(&[1.0, 4.0]);
        assert_eq!(b_angle(&b, &[1.0, 0.0], &[-3.0, 0.0]).unwrap(), 0.0);
        let a = b_angle(&b, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}

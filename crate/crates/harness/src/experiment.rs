//! Builds a configured run, executes it, and summarizes the outcome.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use pclm_core::certify::{CertificateRecord, Certifier};
use pclm_core::linalg::{concat, read_matrix, read_vector, relative_deviation, split};
use pclm_core::oracle::{BoxIndicator, ElasticNet, L1Norm, ObjectiveOracle, Quadratic};
use pclm_core::reference::quadratic_reference;
use pclm_core::schedule::validate_params;
use pclm_core::{
    build_method, Block, BlockProblem, Method, PenaltySchedule, ProblemKind, Rate, Schedules, SolverParams,
    StartPoint, TauSchedule, Vector,
};

use crate::config::{Config, FileBlock, FileProblem, ProblemSpec};
use crate::error::{HarnessError, Result};
use crate::fit::{fit_rate, RateFit};
use crate::generators::{self, Instance};
use crate::metrics::{write_certificates, write_metrics, MetricsRow, MetricsTracker};

/// Series fitted in every summary.
pub const FITTED: [&str; 4] = ["gap_ball", "feasibility", "min_residue", "ergodic_gap"];

pub const CC1_TOL: f64 = 1e-12;
pub const G_EIG_TOL: f64 = 1e-10;
pub const CC3_TOL: f64 = 1e-8;
pub const G_BOUND_TOL: f64 = 1e-9;
pub const LYAPUNOV_TOL: f64 = 1e-8;

fn read_matrix_file(path: &Path) -> Result<pclm_core::Matrix> {
    Ok(read_matrix(File::open(path)?)?)
}

fn read_vector_file(path: &Path) -> Result<Vector> {
    Ok(read_vector(File::open(path)?)?)
}

fn file_block(fb: &FileBlock) -> Result<Block> {
    let a = read_matrix_file(&fb.a)?;
    let n = a.ncols();
    let oracle: Arc<dyn ObjectiveOracle> = match fb.kind.as_str() {
        "quadratic" => {
            let p = match &fb.p {
                Some(path) => read_matrix_file(path)?,
                None => pclm_core::Matrix::zeros(n, n),
            };
            let q = match &fb.q {
                Some(path) => read_vector_file(path)?,
                None => Vector::zeros(n),
            };
            Arc::new(Quadratic::new(p, q)?)
        }
        "l1" => Arc::new(L1Norm::new(n, fb.mu)?),
        "elastic_net" => Arc::new(ElasticNet::new(n, fb.mu, fb.sigma)?),
        "box" => {
            let need = |p: &Option<std::path::PathBuf>, what: &str| {
                p.clone()
                    .ok_or_else(|| HarnessError::Config(format!("box block needs {what}")))
            };
            let lo = read_vector_file(&need(&fb.lo, "lo")?)?;
            let hi = read_vector_file(&need(&fb.hi, "hi")?)?;
            Arc::new(BoxIndicator::new(lo, hi)?)
        }
        o => return Err(HarnessError::Config(format!("unknown block kind '{o}'"))),
    };
    Ok(Block::new(oracle, a)?)
}

fn file_problem(fp: &FileProblem) -> Result<Instance> {
    let blocks = fp.blocks.iter().map(file_block).collect::<Result<Vec<_>>>()?;
    let b = read_vector_file(&fp.b)?;
    let kind = match blocks.len() {
        1 => ProblemKind::P1,
        2 => ProblemKind::P2,
        _ => ProblemKind::P3,
    };
    let problem = BlockProblem::new(blocks, b, kind)?;
    let reference = match quadratic_reference(&problem) {
        Ok(r) => Some(r),
        Err(e) => {
            info!("no reference solution for file problem: {e}");
            None
        }
    };
    Ok(Instance {
        name: "files".into(),
        problem,
        reference,
    })
}

pub fn build_instance(cfg: &Config) -> Result<Instance> {
    let mut inst = generate(cfg)?;
    if cfg.multi_block {
        if inst.problem.m() != 2 {
            return Err(HarnessError::Config(format!(
                "multi_block applies to two-block problems, this one has m={}",
                inst.problem.m()
            )));
        }
        inst.problem = inst.problem.with_kind(ProblemKind::P3)?;
    }
    Ok(inst)
}

fn generate(cfg: &Config) -> Result<Instance> {
    match &cfg.problem {
        ProblemSpec::ScalarQp => generators::scalar_qp(),
        ProblemSpec::Qp { n, l } => generators::random_qp(*n, *l, cfg.seed),
        ProblemSpec::TwoBlockQp { n1, n2, l, sigma2 } => generators::two_block_qp(*n1, *n2, *l, *sigma2, cfg.seed),
        ProblemSpec::ChainQp { m, dim, l } => generators::chain_qp(*m, *dim, *l, cfg.seed),
        ProblemSpec::ElasticNet { n, rows, mu, sigma } => generators::elastic_net(*n, *rows, *mu, *sigma, cfg.seed),
        ProblemSpec::Files(fp) => file_problem(fp),
    }
}

/// Everything needed to start a method.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub instance: Instance,
    pub params: SolverParams,
    pub schedules: Schedules,
    pub start: StartPoint,
}

pub fn prepare(cfg: &Config) -> Result<Prepared> {
    let instance = build_instance(cfg)?;
    let params = SolverParams::new(cfg.gamma, cfg.sigma, cfg.metric, cfg.rate);
    let schedules = Schedules::new(
        TauSchedule::new(cfg.schedule, cfg.tau_init)?,
        PenaltySchedule::new(cfg.beta_rule, cfg.beta)?,
    );
    let problem = &instance.problem;
    let mut start = StartPoint::zeros(problem);
    if let Some(path) = &cfg.start_x {
        let x = read_vector_file(path)?;
        if x.len() != problem.n() {
            return Err(HarnessError::Config(format!(
                "start_x has length {}, problem has n={}",
                x.len(),
                problem.n()
            )));
        }
        start.x = split(&x, &problem.dims());
    }
    if let Some(path) = &cfg.start_lambda {
        start.lambda = read_vector_file(path)?;
    }
    Ok(Prepared {
        instance,
        params,
        schedules,
        start,
    })
}

/// Violated parameter conditions over the configured horizon, as messages.
pub fn validate(cfg: &Config) -> Result<Vec<String>> {
    let prep = prepare(cfg)?;
    validate_prepared(cfg, &prep)
}

fn validate_prepared(cfg: &Config, prep: &Prepared) -> Result<Vec<String>> {
    let reports = validate_params(
        &prep.instance.problem,
        &prep.params,
        &prep.schedules.tau,
        &prep.schedules.penalty,
        cfg.iters,
    )?;
    Ok(reports.iter().map(|r| r.to_string()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Worst certificate values over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateSummary {
    pub max_cc1_residual: f64,
    /// min over k of g_min_eig against the size of the terms forming G
    pub min_g_eig_relative: f64,
    /// against ‖G‖ itself; informational, since G can vanish in exact arithmetic
    pub min_g_eig_over_norm: f64,
    pub min_cc3_slack: f64,
    pub min_g_bound_slack: f64,
    /// min over k of ΔΦ / (1 + |Φ|)
    pub min_lyapunov_increment: f64,
    pub negative_theta: bool,
}

impl CertificateSummary {
    pub fn from_records(records: &[CertificateRecord], negative_theta: bool) -> Self {
        let mut s = CertificateSummary {
            max_cc1_residual: 0.0,
            min_g_eig_relative: f64::INFINITY,
            min_g_eig_over_norm: f64::INFINITY,
            min_cc3_slack: f64::INFINITY,
            min_g_bound_slack: f64::INFINITY,
            min_lyapunov_increment: f64::INFINITY,
            negative_theta,
        };
        for r in records {
            s.max_cc1_residual = s.max_cc1_residual.max(r.cc1_residual);
            let rel = if r.g_scale > 0.0 { r.g_min_eig / r.g_scale } else { r.g_min_eig };
            s.min_g_eig_relative = s.min_g_eig_relative.min(rel);
            let over_norm = if r.g_norm > 0.0 { r.g_min_eig / r.g_norm } else { r.g_min_eig };
            s.min_g_eig_over_norm = s.min_g_eig_over_norm.min(over_norm);
            s.min_cc3_slack = s.min_cc3_slack.min(r.cc3_slack);
            s.min_g_bound_slack = s.min_g_bound_slack.min(r.g_bound_slack);
            let lyap = r.lyapunov_increment / (1.0 + r.lyapunov_value.abs());
            s.min_lyapunov_increment = s.min_lyapunov_increment.min(lyap);
        }
        s
    }

    pub fn checks(&self, lyapunov: bool) -> Vec<Check> {
        let mut out = vec![
            Check {
                name: "cc1".into(),
                passed: self.max_cc1_residual <= CC1_TOL,
                detail: format!("max residual {:e}", self.max_cc1_residual),
            },
            Check {
                name: "g-min-eig".into(),
                passed: self.min_g_eig_relative >= -G_EIG_TOL,
                detail: format!(
                    "min relative eigenvalue {:e} (over ‖G‖: {:e})",
                    self.min_g_eig_relative, self.min_g_eig_over_norm
                ),
            },
            Check {
                name: "cc3".into(),
                passed: self.min_cc3_slack >= -CC3_TOL,
                detail: format!("min slack {:e}", self.min_cc3_slack),
            },
            Check {
                name: "g-norm-bound".into(),
                passed: self.min_g_bound_slack >= -G_BOUND_TOL,
                detail: format!("min slack {:e}", self.min_g_bound_slack),
            },
        ];
        if lyapunov {
            out.push(Check {
                name: "lyapunov-monotone".into(),
                passed: self.min_lyapunov_increment >= -LYAPUNOV_TOL,
                detail: format!("min relative increment {:e}", self.min_lyapunov_increment),
            });
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub name: String,
    pub iters: usize,
    pub fits: Vec<(String, std::result::Result<RateFit, String>)>,
    pub certificates: Option<CertificateSummary>,
    pub certificates_skipped: Option<String>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn fit(&self, series: &str) -> Option<&RateFit> {
        self.fits
            .iter()
            .find(|(s, _)| s == series)
            .and_then(|(_, f)| f.as_ref().ok())
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "name: {}", self.name)?;
        writeln!(w, "iters: {}", self.iters)?;
        for (series, fit) in &self.fits {
            match fit {
                Ok(f) => writeln!(
                    w,
                    "fit {series}: slope {:.4} r2 {:.4} window {}..{}{}",
                    f.slope,
                    f.r_squared,
                    f.window.0,
                    f.window.1,
                    if f.clipped { " (clipped)" } else { "" }
                )?,
                Err(e) => writeln!(w, "fit {series}: unavailable ({e})")?,
            }
        }
        if let Some(reason) = &self.certificates_skipped {
            writeln!(w, "certificates: skipped ({reason})")?;
        }
        if let Some(c) = &self.certificates {
            writeln!(w, "theta negative: {}", c.negative_theta)?;
        }
        for c in &self.checks {
            writeln!(w, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Vec<MetricsRow>,
    pub certificates: Vec<CertificateRecord>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub override_validation: bool,
}

/// Runs one configuration end to end. Validation failures abort the run
/// unless overridden.
pub fn run_experiment(cfg: &Config, opts: RunOptions) -> Result<RunOutput> {
    let prep = prepare(cfg)?;
    let violations = validate_prepared(cfg, &prep)?;
    if !violations.is_empty() {
        if opts.override_validation {
            for v in &violations {
                warn!("{}: running despite {v}", cfg.name);
            }
        } else {
            return Err(HarnessError::Validation(violations));
        }
    }
    let Prepared {
        instance,
        params,
        schedules,
        start,
    } = prep;
    let problem = &instance.problem;
    let mut method = build_method(problem, params, schedules.clone(), cfg.variant, Some(start.clone()))?;
    let mut tracker = MetricsTracker::new(problem, instance.reference.as_ref(), cfg.rho, &start.x);

    let mut skipped = None;
    let mut certifier = match (&instance.reference, cfg.certify) {
        (_, false) => {
            skipped = Some("disabled by configuration".to_string());
            None
        }
        (None, true) => {
            skipped = Some("no reference solution".to_string());
            None
        }
        (Some(reference), true) => match Certifier::new(problem, &params, &schedules.penalty, reference) {
            Ok(c) => Some(c),
            Err(e) => {
                info!("{}: certificates skipped: {e}", cfg.name);
                skipped = Some(e.to_string());
                None
            }
        },
    };

    let mut metrics = Vec::with_capacity(cfg.iters);
    let mut certificates = Vec::new();
    for _ in 0..cfg.iters {
        let t0 = Instant::now();
        let art = method.step()?;
        let elapsed = if cfg.record_wall_time { t0.elapsed().as_nanos() } else { 0 };
        let weight = match cfg.rate {
            Rate::RateK => 1.0,
            Rate::RateK2 => 1.0 / art.tau,
        };
        metrics.push(tracker.record(art.k + 1, method.x(), weight, elapsed)?);
        if let Some(c) = certifier.as_mut() {
            certificates.push(c.observe(&art)?);
        }
    }

    let fits = FITTED
        .iter()
        .map(|s| {
            let series: Vec<(usize, f64)> = metrics
                .iter()
                .map(|r| (r.k, r.series(s).expect("known series")))
                .collect();
            (s.to_string(), fit_rate(&series, cfg.window).map_err(|e| e.to_string()))
        })
        .collect::<Vec<_>>();

    let mut checks = Vec::new();
    if let Some(target) = cfg.expect_slope {
        let series: Vec<(usize, f64)> = metrics
            .iter()
            .map(|r| (r.k, r.series(&cfg.expect_series).expect("validated series name")))
            .collect();
        checks.push(match fit_rate(&series, cfg.window) {
            Ok(f) => Check {
                name: format!("slope {}", cfg.expect_series),
                passed: f.meets(target, cfg.min_r_squared),
                detail: format!(
                    "slope {:.4} (need ≤ {target}), r2 {:.4} (need ≥ {})",
                    f.slope, f.r_squared, cfg.min_r_squared
                ),
            },
            Err(e) => Check {
                name: format!("slope {}", cfg.expect_series),
                passed: false,
                detail: e.to_string(),
            },
        });
    }
    let cert_summary = certifier.as_ref().map(|c| {
        let s = CertificateSummary::from_records(&certificates, c.negative_theta_seen());
        let lyapunov = problem.kind() == ProblemKind::P1 && cfg.rate == Rate::RateK && cfg.gamma == 1.0;
        checks.extend(s.checks(lyapunov));
        s
    });
    Ok(RunOutput {
        metrics,
        certificates,
        summary: Summary {
            name: cfg.name.clone(),
            iters: cfg.iters,
            fits,
            certificates: cert_summary,
            certificates_skipped: skipped,
            checks,
        },
    })
}

/// Writes `<name>_metrics.csv`, `<name>_certificates.csv` (when certified)
/// and `<name>_summary.txt` into `dir`.
pub fn write_outputs(dir: &Path, name: &str, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_metrics(BufWriter::new(File::create(dir.join(format!("{name}_metrics.csv")))?), &out.metrics)?;
    if out.summary.certificates.is_some() {
        write_certificates(
            BufWriter::new(File::create(dir.join(format!("{name}_certificates.csv")))?),
            &out.certificates,
        )?;
    }
    out.summary
        .write(BufWriter::new(File::create(dir.join(format!("{name}_summary.txt")))?))?;
    Ok(())
}

/// One iterate of a run, in comparable coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub x: Vector,
    pub lambda: Vector,
    /// v with two-block primal components mapped to constraint space
    pub v: Vector,
}

/// v expressed in constraint space: (x̄₂, λ) becomes (A₂x̄₂, λ) for two-block
/// problems; other kinds are already there or have no such mapping.
pub fn v_image(problem: &BlockProblem, v: &Vector) -> Vector {
    match problem.kind() {
        ProblemKind::P2 => {
            let n2 = problem.block(1).dim();
            let l = problem.l();
            concat(&[problem.block(1).a() * v.rows(0, n2), v.rows(n2, l).into_owned()])
        }
        _ => v.clone(),
    }
}

/// Iterates after each of `iters` steps (validation not enforced).
pub fn trajectory(cfg: &Config, iters: usize) -> Result<Vec<TrajectoryPoint>> {
    let prep = prepare(cfg)?;
    let problem = &prep.instance.problem;
    let mut method: Box<dyn Method> =
        build_method(problem, prep.params, prep.schedules, cfg.variant, Some(prep.start))?;
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        method.step()?;
        out.push(TrajectoryPoint {
            x: concat(method.x()),
            lambda: method.lambda().clone(),
            v: v_image(problem, &method.v()),
        });
    }
    Ok(out)
}

/// Largest per-iterate relative deviations between two runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub iters: usize,
    /// on the joint iterate (x, λ)
    pub max_u: f64,
    pub max_x: f64,
    pub max_lambda: f64,
    /// largest absolute multiplier difference
    pub max_lambda_abs: f64,
    pub max_v: f64,
}

pub fn compare(a: &Config, b: &Config, iters: usize) -> Result<Comparison> {
    let ta = trajectory(a, iters)?;
    let tb = trajectory(b, iters)?;
    let mut c = Comparison {
        iters,
        max_u: 0.0,
        max_x: 0.0,
        max_lambda: 0.0,
        max_lambda_abs: 0.0,
        max_v: 0.0,
    };
    for (p, q) in ta.iter().zip(&tb) {
        if p.x.len() != q.x.len() || p.v.len() != q.v.len() {
            return Err(HarnessError::Config("compared runs have different dimensions".into()));
        }
        let u = |t: &TrajectoryPoint| concat(&[t.x.clone(), t.lambda.clone()]);
        c.max_u = c.max_u.max(relative_deviation(&u(p), &u(q)));
        c.max_lambda_abs = c.max_lambda_abs.max((&p.lambda - &q.lambda).amax());
        c.max_x = c.max_x.max(relative_deviation(&p.x, &q.x));
        c.max_lambda = c.max_lambda.max(relative_deviation(&p.lambda, &q.lambda));
        c.max_v = c.max_v.max(relative_deviation(&p.v, &q.v));
    }
    Ok(c)
}

//! Accelerated prediction-correction Lagrangian methods.
//!
//! All methods share the momentum point
//! `x̂^k = x^k + τ^k(1−τ^{k−1})/τ^{k−1}·(x^k − x^{k−1}) = (1−τ^k)x^k + τ^k x̄^k`
//! and the aggressive sequence `x̄^{k+1} = (x^{k+1} − (1−τ^k)x^k)/τ^k`.

mod p1;
mod p2;
mod p3;

use std::sync::Arc;

pub use p1::P1Solver;
pub use p2::P2Solver;
pub use p3::{chain_correction, P3Solver};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::problem::{BlockProblem, ProblemKind};
use crate::schedule::{
    beta_at, gamma_upper, PenaltyRule, PenaltySchedule, Rate, SolverParams, TauRule, TauSchedule,
};

/// How the multiplier is corrected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// single dual correction; the ambient multiplier moves every step
    Once,
    /// two corrections through λ̄; the ambient multiplier stays fixed
    Twice,
    /// the multiplier-free penalty recursion (two and multi block)
    Penalty,
}

#[derive(Debug, Clone)]
pub struct Schedules {
    pub tau: Arc<TauSchedule>,
    pub penalty: PenaltySchedule,
}

impl Schedules {
    pub fn new(tau: TauSchedule, penalty: PenaltySchedule) -> Self {
        Schedules {
            tau: Arc::new(tau),
            penalty,
        }
    }

    /// (τ^{k−1}, τ^k, τ^{k+1}, β^k, β^{k+1})
    pub(crate) fn at(&self, k: usize) -> StepScalars {
        let tau = self.tau.tau(k);
        let tau_next = self.tau.tau(k + 1);
        StepScalars {
            tau_prev: self.tau.tau_before(k),
            tau,
            tau_next,
            beta: beta_at(&self.penalty, tau),
            beta_next: beta_at(&self.penalty, tau_next),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepScalars {
    pub tau_prev: f64,
    pub tau: f64,
    pub tau_next: f64,
    pub beta: f64,
    pub beta_next: f64,
}

impl StepScalars {
    /// τ^k(1−τ^{k−1})/τ^{k−1}
    pub fn momentum(&self) -> f64 {
        self.tau * (1.0 - self.tau_prev) / self.tau_prev
    }
}

/// Starting point `(x⁰, λ⁰)`; zeros by default.
#[derive(Debug, Clone, PartialEq)]
pub struct StartPoint {
    pub x: Vec<Vector>,
    pub lambda: Vector,
}

impl StartPoint {
    pub fn zeros(problem: &BlockProblem) -> Self {
        StartPoint {
            x: problem.dims().into_iter().map(Vector::zeros).collect(),
            lambda: Vector::zeros(problem.l()),
        }
    }

    pub(crate) fn check(&self, problem: &BlockProblem) -> Result<()> {
        check_dim("start blocks", problem.m(), self.x.len())?;
        for (x, n) in self.x.iter().zip(problem.dims()) {
            check_dim("start block", n, x.len())?;
        }
        check_dim("start multiplier", problem.l(), self.lambda.len())
    }
}

/// What one iteration exposes for certificates and metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepArtifacts {
    /// index of the step that produced these artifacts
    pub k: usize,
    pub tau_prev: f64,
    pub tau: f64,
    pub tau_next: f64,
    pub beta: f64,
    pub beta_next: f64,
    /// x̆^{k−1} = x^k
    pub x_prev: Vec<Vector>,
    /// x̆^k = x^{k+1}
    pub x_next: Vec<Vector>,
    pub x_tilde: Vec<Vector>,
    pub lambda_tilde: Vector,
    /// ambient multiplier λ^{k+1}
    pub lambda_next: Vector,
    pub v_k: Vector,
    pub v_tilde: Vector,
    pub v_next: Vector,
    /// ‖Ax̆^k − b‖
    pub feasibility: f64,
}

/// A running method instance.
pub trait Method: Send {
    fn problem(&self) -> &BlockProblem;
    fn variant(&self) -> Variant;
    /// number of steps taken
    fn k(&self) -> usize;
    /// current primal iterate x^k (= x̆^{k−1})
    fn x(&self) -> &[Vector];
    /// current ambient multiplier λ^k
    fn lambda(&self) -> &Vector;
    /// current essential vector v^k
    fn v(&self) -> Vector;
    fn step(&mut self) -> Result<StepArtifacts>;
}

pub(crate) fn check_schedules(kind: ProblemKind, params: &SolverParams, schedules: &Schedules) -> Result<()> {
    let upper = gamma_upper(kind);
    if !(params.gamma > 0.0 && params.gamma <= upper) {
        return Err(Error::Configuration(format!(
            "gamma={} outside (0,{upper}] for {kind:?}",
            params.gamma
        )));
    }
    if !(params.sigma >= 0.0) || !params.sigma.is_finite() {
        return Err(Error::Configuration(format!("sigma must be ≥ 0, got {}", params.sigma)));
    }
    let (want_tau, want_penalty) = match (params.rate, kind) {
        (Rate::RateK, _) => (TauRule::C1, PenaltyRule::BetaOverTau),
        (Rate::RateK2, ProblemKind::P3) => (TauRule::C2, PenaltyRule::Constant),
        (Rate::RateK2, _) => (TauRule::C2, PenaltyRule::BetaOverTauSq),
    };
    if schedules.tau.kind() != want_tau || schedules.penalty.kind != want_penalty {
        return Err(Error::Configuration(format!(
            "{:?} for {kind:?} needs {want_tau:?} with {want_penalty:?}, got {:?} with {:?}",
            params.rate,
            schedules.tau.kind(),
            schedules.penalty.kind
        )));
    }
    Ok(())
}

/// Builds the method matching the problem kind.
pub fn build_method(
    problem: &BlockProblem,
    params: SolverParams,
    schedules: Schedules,
    variant: Variant,
    start: Option<StartPoint>,
) -> Result<Box<dyn Method>> {
    Ok(match problem.kind() {
        ProblemKind::P1 => Box::new(P1Solver::new(problem.clone(), params, schedules, variant, start)?),
        ProblemKind::P2 => Box::new(P2Solver::new(problem.clone(), params, schedules, variant, start)?),
        ProblemKind::P3 => Box::new(P3Solver::new(problem.clone(), params, schedules, variant, start)?),
    })
}

/// (x^{k+1} − (1−τ)x^k)/τ
pub(crate) fn aggressive(x_next: &Vector, x: &Vector, tau: f64) -> Vector {
    (x_next - x * (1.0 - tau)) / tau
}

//! Momentum sequences τ^k, penalty sequences β^k and the parameter
//! inequalities the convergence theory needs.

use std::fmt;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::problem::{BlockProblem, ProblemKind};

pub const DEFAULT_TAU_INIT: f64 = 0.5;

/// Recurrence linking consecutive momentum weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauRule {
    /// `1/τ^{k−1} = (1 − τ^k)/τ^k`, giving τ^k ~ 1/k.
    C1,
    /// `1/(τ^{k−1})² = (1 − τ^k)/(τ^k)²`, giving τ^k ~ 2/k.
    C2,
}

/// One step of the recurrence.
///
/// C1 returns `t/(1+t)`; C2 returns the positive root of `τ²/t² + τ − 1 = 0`
/// in the cancellation-free form `2/(1 + √(1 + 4/t²))`.
pub fn next_tau(kind: TauRule, tau_prev: f64) -> Result<f64> {
    if !(tau_prev > 0.0 && tau_prev < 1.0) {
        return Err(Error::InvalidInput(format!(
            "previous tau must lie in (0,1), got {tau_prev}"
        )));
    }
    Ok(match kind {
        TauRule::C1 => tau_prev / (1.0 + tau_prev),
        TauRule::C2 => 2.0 / (1.0 + (1.0 + 4.0 / (tau_prev * tau_prev)).sqrt()),
    })
}

/// Memoized τ^{-1}, τ⁰, τ¹, …
///
/// C1 is generated in reciprocal form `1/τ^k = 1/τ^{k−1} + 1`, which is
/// exact whenever the reciprocals are representable (for example τ^{-1} = 1/2
/// gives τ^k = 1/(k+3) correctly rounded). Reads are lock-shared; the cache
/// is extended under a write lock and never rewritten.
#[derive(Debug)]
pub struct TauSchedule {
    kind: TauRule,
    tau_init: f64,
    // C1: reciprocals 1/τ^k; C2: τ^k
    cache: RwLock<Vec<f64>>,
}

impl Clone for TauSchedule {
    fn clone(&self) -> Self {
        let cache = self.cache.read().map(|c| c.clone()).unwrap_or_default();
        TauSchedule {
            kind: self.kind,
            tau_init: self.tau_init,
            cache: RwLock::new(cache),
        }
    }
}

impl TauSchedule {
    pub fn new(kind: TauRule, tau_init: f64) -> Result<Self> {
        if !(tau_init > 0.0 && tau_init < 1.0) {
            return Err(Error::InvalidInput(format!(
                "tau_init must lie in (0,1), got {tau_init}"
            )));
        }
        Ok(TauSchedule {
            kind,
            tau_init,
            cache: RwLock::new(Vec::new()),
        })
    }

    pub fn kind(&self) -> TauRule {
        self.kind
    }

    /// τ^{-1}
    pub fn tau_init(&self) -> f64 {
        self.tau_init
    }

    /// τ^k for k ≥ 0.
    pub fn tau(&self, k: usize) -> f64 {
        if let Ok(cache) = self.cache.read() {
            if let Some(v) = cache.get(k) {
                return self.decode(*v);
            }
        }
        let mut cache = match self.cache.write() {
            Ok(c) => c,
            Err(poisoned) => poisoned.into_inner(),
        };
        while cache.len() <= k {
            let next = match (self.kind, cache.last()) {
                (TauRule::C1, Some(r)) => r + 1.0,
                (TauRule::C1, None) => 1.0 / self.tau_init + 1.0,
                (TauRule::C2, prev) => {
                    let t = prev.copied().unwrap_or(self.tau_init);
                    2.0 / (1.0 + (1.0 + 4.0 / (t * t)).sqrt())
                }
            };
            cache.push(next);
        }
        self.decode(cache[k])
    }

    /// τ^{k−1}, with τ^{-1} = `tau_init`.
    pub fn tau_before(&self, k: usize) -> f64 {
        if k == 0 {
            self.tau_init
        } else {
            self.tau(k - 1)
        }
    }

    fn decode(&self, v: f64) -> f64 {
        match self.kind {
            TauRule::C1 => 1.0 / v,
            TauRule::C2 => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyRule {
    BetaOverTau,
    BetaOverTauSq,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySchedule {
    pub kind: PenaltyRule,
    pub beta: f64,
}

impl PenaltySchedule {
    pub fn new(kind: PenaltyRule, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidInput(format!("beta must be > 0, got {beta}")));
        }
        Ok(PenaltySchedule { kind, beta })
    }
}

pub fn beta_at(schedule: &PenaltySchedule, tau_k: f64) -> f64 {
    match schedule.kind {
        PenaltyRule::BetaOverTau => schedule.beta / tau_k,
        PenaltyRule::BetaOverTauSq => schedule.beta / (tau_k * tau_k),
        PenaltyRule::Constant => schedule.beta,
    }
}

/// The proximal metric D of the x-subproblems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// D = AᵀA (exact block solve)
    Gram,
    /// D = ‖A‖²I (linearized block solve)
    ScaledIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rate {
    /// O(1/k): C1 with β^k = β/τ^k
    RateK,
    /// O(1/k²): C2 with β^k = β/(τ^k)² (single and two block) or β^k = β (multi block)
    RateK2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub gamma: f64,
    pub sigma: f64,
    pub metric: Metric,
    pub rate: Rate,
}

impl SolverParams {
    pub fn new(gamma: f64, sigma: f64, metric: Metric, rate: Rate) -> Self {
        SolverParams {
            gamma,
            sigma,
            metric,
            rate,
        }
    }
}

/// Allowed relaxation interval for a problem family.
pub fn gamma_upper(kind: ProblemKind) -> f64 {
    match kind {
        ProblemKind::P1 => 2.0,
        ProblemKind::P2 | ProblemKind::P3 => 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    GammaRange,
    ScheduleConsistency,
    MetricChoice,
    StrongConvexityModulus,
    /// β‖A‖²/(τ^k)² + σ/τ^k ≥ β‖A‖²/(τ^{k+1})²
    ScaledMetricGrowth,
    /// (1/τ^k)(β/τ^k + σ/σ_max(D)) ≥ β/(τ^{k+1})²
    StrongConvexityGrowth,
    /// 1/(β(τ^k)²) + σ''/τ^k ≥ 1/(β(τ^{k+1})²) + σ''(1−γ)/τ^{k+1}
    SmoothLastBlockGrowth,
    /// (1−γ)β ≤ 1
    RelaxedPenaltyBound,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::GammaRange => "gamma-range",
            Condition::ScheduleConsistency => "schedule-consistency",
            Condition::MetricChoice => "metric-choice",
            Condition::StrongConvexityModulus => "strong-convexity-modulus",
            Condition::ScaledMetricGrowth => "scaled-metric-growth",
            Condition::StrongConvexityGrowth => "strong-convexity-growth",
            Condition::SmoothLastBlockGrowth => "smooth-last-block-growth",
            Condition::RelaxedPenaltyBound => "relaxed-penalty-bound",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition: Condition,
    /// First iteration index at which an iteration-dependent inequality fails.
    pub first_violation: Option<usize>,
    pub detail: String,
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.first_violation {
            Some(k) => write!(f, "{} violated at k={}: {}", self.condition, k, self.detail),
            None => write!(f, "{} violated: {}", self.condition, self.detail),
        }
    }
}

fn growth_check(
    condition: Condition,
    horizon: usize,
    tau: &TauSchedule,
    mut sides: impl FnMut(f64, f64) -> (f64, f64),
) -> Option<ConditionReport> {
    for k in 0..=horizon {
        let (t, t_next) = (tau.tau(k), tau.tau(k + 1));
        let (lhs, rhs) = sides(t, t_next);
        if lhs < rhs - 1e-12 * rhs.abs() {
            return Some(ConditionReport {
                condition,
                first_violation: Some(k),
                detail: format!("left side {lhs:e} < right side {rhs:e}"),
            });
        }
    }
    None
}

/// Evaluates every inequality that applies to this (problem, parameters,
/// schedules) combination for k = 0..=horizon and reports each violated
/// condition once, with the first failing index where it is iteration-dependent.
pub fn validate_params(
    problem: &BlockProblem,
    params: &SolverParams,
    tau: &TauSchedule,
    penalty: &PenaltySchedule,
    horizon: usize,
) -> Result<Vec<ConditionReport>> {
    if horizon == 0 {
        return Err(Error::InvalidInput("validation horizon must be ≥ 1".into()));
    }
    let kind = problem.kind();
    let mut reports = Vec::new();
    let beta = penalty.beta;

    let upper = gamma_upper(kind);
    if !(params.gamma > 0.0 && params.gamma <= upper) {
        reports.push(ConditionReport {
            condition: Condition::GammaRange,
            first_violation: None,
            detail: format!("gamma={} outside (0,{upper}] for {kind:?}", params.gamma),
        });
    }
    if !(params.sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("sigma must be ≥ 0, got {}", params.sigma)));
    }

    let (want_tau, want_penalty) = match (params.rate, kind) {
        (Rate::RateK, _) => (TauRule::C1, PenaltyRule::BetaOverTau),
        (Rate::RateK2, ProblemKind::P3) => (TauRule::C2, PenaltyRule::Constant),
        (Rate::RateK2, _) => (TauRule::C2, PenaltyRule::BetaOverTauSq),
    };
    if tau.kind() != want_tau || penalty.kind != want_penalty {
        reports.push(ConditionReport {
            condition: Condition::ScheduleConsistency,
            first_violation: None,
            detail: format!(
                "{:?} for {kind:?} needs {want_tau:?} with {want_penalty:?}, got {:?} with {:?}",
                params.rate,
                tau.kind(),
                penalty.kind
            ),
        });
    }

    if kind == ProblemKind::P3 && params.metric != Metric::Gram {
        reports.push(ConditionReport {
            condition: Condition::MetricChoice,
            first_violation: None,
            detail: "multi-block methods use the Gram metric for every block".into(),
        });
    }

    let sigma_block = match kind {
        ProblemKind::P1 => Some(problem.block(0)),
        ProblemKind::P2 => Some(problem.block(1)),
        ProblemKind::P3 => None,
    };
    if let Some(block) = sigma_block {
        if params.sigma > block.sigma() * (1.0 + 1e-12) + 1e-15 {
            reports.push(ConditionReport {
                condition: Condition::StrongConvexityModulus,
                first_violation: None,
                detail: format!(
                    "sigma={} exceeds the block's strong-convexity modulus {}",
                    params.sigma,
                    block.sigma()
                ),
            });
        }
    }

    if params.rate == Rate::RateK2 {
        match kind {
            ProblemKind::P1 => {
                if params.metric == Metric::ScaledIdentity {
                    let a2 = problem.block(0).norm_sq();
                    let s = params.sigma;
                    reports.extend(growth_check(Condition::ScaledMetricGrowth, horizon, tau, |t, tn| {
                        (beta * a2 / (t * t) + s / t, beta * a2 / (tn * tn))
                    }));
                }
            }
            ProblemKind::P2 => {
                let smax = problem.block(1).norm_sq();
                let s = params.sigma;
                reports.extend(growth_check(Condition::StrongConvexityGrowth, horizon, tau, |t, tn| {
                    ((beta / t + s / smax) / t, beta / (tn * tn))
                }));
            }
            ProblemKind::P3 => {
                let last = problem.block(problem.m() - 1);
                let l = last.lipschitz().ok_or_else(|| {
                    Error::ModulusRequired(
                        "the O(1/k²) multi-block method needs a gradient-Lipschitz last block".into(),
                    )
                })?;
                let sp = problem.last_block_row_gram_min_eig() / l;
                let spp = sp - sp * sp / (sp + 1.0);
                let g = params.gamma;
                reports.extend(growth_check(Condition::SmoothLastBlockGrowth, horizon, tau, |t, tn| {
                    (
                        1.0 / (beta * t * t) + spp / t,
                        1.0 / (beta * tn * tn) + spp * (1.0 - g) / tn,
                    )
                }));
                if (1.0 - g) * beta > 1.0 + 1e-12 {
                    reports.push(ConditionReport {
                        condition: Condition::RelaxedPenaltyBound,
                        first_violation: None,
                        detail: format!("(1-gamma)*beta = {} > 1", (1.0 - g) * beta),
                    });
                }
            }
        }
    }
    Ok(reports)
}

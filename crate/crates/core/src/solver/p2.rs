//! Two-block methods for `min f₁(x₁) + f₂(x₂) s.t. A₁x₁ + A₂x₂ = b`.
//!
//! The x₁-step always uses the A₁ᵀA₁ metric (an exact residual solve); the
//! x₂-step uses D = A₂ᵀA₂ or D = ‖A₂‖²I plus the strong-convexity term
//! `σ(1−τ)/(2τ)·‖x₂ − x₂^k‖²_{D/σ_max(D)}`.

use crate::error::{Error, Result};
use crate::linalg::{concat, Vector};
use crate::problem::{BlockProblem, ProblemKind};
use crate::schedule::{Metric, SolverParams};
use crate::subproblem::{solve_residual, ExtraProx, ProxMetric, SubproblemMode, SubproblemSpec};

use super::{aggressive, check_schedules, Method, Schedules, StartPoint, StepArtifacts, Variant};

#[derive(Debug, Clone)]
pub struct P2Solver {
    problem: BlockProblem,
    params: SolverParams,
    schedules: Schedules,
    variant: Variant,
    k: usize,
    x: Vec<Vector>,
    x_prev: Vec<Vector>,
    x2_bar: Vector,
    lambda: Vector,
    lambda_bar: Vector,
}

impl P2Solver {
    pub fn new(
        problem: BlockProblem,
        params: SolverParams,
        schedules: Schedules,
        variant: Variant,
        start: Option<StartPoint>,
    ) -> Result<Self> {
        if problem.kind() != ProblemKind::P2 {
            return Err(Error::Configuration("two-block solver needs a P2 problem".into()));
        }
        check_schedules(ProblemKind::P2, &params, &schedules)?;
        problem.block(0).require_gram_metric()?;
        if params.metric == Metric::Gram {
            problem.block(1).require_gram_metric()?;
        }
        let mut start = start.unwrap_or_else(|| StartPoint::zeros(&problem));
        start.check(&problem)?;
        if variant == Variant::Penalty {
            start.lambda.fill(0.0);
        }
        let s = schedules.at(0);
        let r0 = problem.residual(&start.x)?;
        let lambda_bar = &start.lambda - r0 * (params.gamma * (1.0 - s.tau) * s.beta);
        Ok(P2Solver {
            params,
            schedules,
            variant,
            k: 0,
            x_prev: start.x.clone(),
            x2_bar: start.x[1].clone(),
            x: start.x,
            lambda: start.lambda,
            lambda_bar,
            problem,
        })
    }

    pub fn x2_bar(&self) -> &Vector {
        &self.x2_bar
    }

    pub fn lambda_bar(&self) -> &Vector {
        &self.lambda_bar
    }

    /// x₂-step of the explicit penalty recursion, written directly as
    /// `f₂ + (β/2)‖A₁x₁ + A₂x₂ − b‖² + (β/2)‖x₂ − x̂₂‖²_{D−A₂ᵀA₂} + (s/2)‖x₂ − x₂^k‖²_{D/σmax}`.
    fn penalty_x2(&self, x1: &Vector, x2_hat: &Vector, beta: f64, s: f64) -> Result<Vector> {
        let block = self.problem.block(1);
        let a2 = block.a();
        let r1 = self.problem.block(0).a() * x1 - self.problem.b();
        let delta = block.norm_sq();
        let base = -a2.tr_mul(&r1) * beta;
        match self.params.metric {
            Metric::Gram => {
                let sp = s / delta;
                let h = base + block.gram() * &self.x[1] * sp;
                block.objective().minimize(&block.curvature(0.0, beta + sp), &h)
            }
            Metric::ScaledIdentity => {
                let correction = x2_hat * delta - block.gram() * x2_hat;
                let h = base + correction * beta + &self.x[1] * s;
                block.objective().minimize(&block.curvature(beta * delta + s, 0.0), &h)
            }
        }
    }
}

impl Method for P2Solver {
    fn problem(&self) -> &BlockProblem {
        &self.problem
    }

    fn variant(&self) -> Variant {
        self.variant
    }

    fn k(&self) -> usize {
        self.k
    }

    fn x(&self) -> &[Vector] {
        &self.x
    }

    fn lambda(&self) -> &Vector {
        &self.lambda
    }

    fn v(&self) -> Vector {
        match self.variant {
            Variant::Once => concat(&[self.x2_bar.clone(), self.lambda.clone()]),
            _ => concat(&[self.x2_bar.clone(), self.lambda_bar.clone()]),
        }
    }

    fn step(&mut self) -> Result<StepArtifacts> {
        let st = self.schedules.at(self.k);
        let (tau, beta, gamma) = (st.tau, st.beta, self.params.gamma);
        let (b1, b2) = (self.problem.block(0), self.problem.block(1));
        let (a1, a2) = (b1.a(), b2.a());
        let b = self.problem.b();
        let r_k = self.problem.residual(&self.x)?;
        let x2_hat = &self.x[1] + (&self.x[1] - &self.x_prev[1]) * st.momentum();
        let lambda_used = match self.variant {
            Variant::Once => &self.lambda + &r_k * (gamma * (1.0 - tau) * beta),
            _ => self.lambda.clone(),
        };
        let s = self.params.sigma * (1.0 - tau) / tau;

        let x1 = match self.variant {
            Variant::Penalty => solve_residual(b1, beta, &(b - a2 * &x2_hat))?,
            _ => solve_residual(b1, beta, &(b - a2 * &x2_hat + &lambda_used / beta))?,
        };
        let x2 = match self.variant {
            Variant::Penalty => self.penalty_x2(&x1, &x2_hat, beta, s)?,
            _ => {
                // ∇_{x₂}φ(x₁^{k+1}, x̂₂, λ) = A₂ᵀc
                let c = (a1 * &x1 + a2 * &x2_hat - b) * beta - &lambda_used;
                let delta = b2.norm_sq();
                let (mode, rho, linear, metric) = match self.params.metric {
                    Metric::Gram => (
                        SubproblemMode::Exact,
                        beta,
                        c,
                        ProxMetric::Gram { scale: 1.0 / delta },
                    ),
                    Metric::ScaledIdentity => (
                        SubproblemMode::Linearized,
                        beta * delta,
                        a2.tr_mul(&c),
                        ProxMetric::Identity,
                    ),
                };
                SubproblemSpec {
                    mode,
                    rho,
                    linear,
                    center: x2_hat,
                    extra_prox: (s > 0.0).then(|| ExtraProx {
                        mu: s,
                        center: self.x[1].clone(),
                        metric,
                    }),
                }
                .solve(b2)?
            }
        };

        let x_next = vec![x1, x2];
        let x_tilde: Vec<Vector> = x_next
            .iter()
            .zip(&self.x)
            .map(|(n, o)| aggressive(n, o, tau))
            .collect();
        let r_tilde = self.problem.residual(&x_tilde)?;
        // A₁x̃₁ + A₂x̄₂ − b
        let r_pred = a1 * &x_tilde[0] + a2 * &self.x2_bar - b;

        let (lambda_tilde, lambda_next, v_k, v_next) = match self.variant {
            Variant::Once => {
                let lambda_tilde = &self.lambda - &r_pred * (tau * beta);
                let lambda_next = &self.lambda - &r_tilde * (gamma * tau * beta);
                let v_k = concat(&[self.x2_bar.clone(), self.lambda.clone()]);
                let v_next = concat(&[x_tilde[1].clone(), lambda_next.clone()]);
                (lambda_tilde, lambda_next, v_k, v_next)
            }
            _ => {
                let lambda_tilde = &self.lambda_bar - &r_pred * (tau * beta);
                let bar_next = &self.lambda_bar - &r_tilde * (gamma * tau * beta);
                let v_k = concat(&[self.x2_bar.clone(), self.lambda_bar.clone()]);
                let v_next = concat(&[x_tilde[1].clone(), bar_next.clone()]);
                self.lambda_bar = bar_next;
                (lambda_tilde, self.lambda.clone(), v_k, v_next)
            }
        };
        let v_tilde = concat(&[x_tilde[1].clone(), lambda_tilde.clone()]);
        let feasibility = self.problem.residual(&x_next)?.norm();
        let art = StepArtifacts {
            k: self.k,
            tau_prev: st.tau_prev,
            tau,
            tau_next: st.tau_next,
            beta,
            beta_next: st.beta_next,
            x_prev: self.x.clone(),
            x_next: x_next.clone(),
            x_tilde: x_tilde.clone(),
            lambda_tilde,
            lambda_next: lambda_next.clone(),
            v_k,
            v_tilde,
            v_next,
            feasibility,
        };
        self.x_prev = std::mem::replace(&mut self.x, x_next);
        self.x2_bar = x_tilde[1].clone();
        self.lambda = lambda_next;
        self.k += 1;
        Ok(art)
    }
}

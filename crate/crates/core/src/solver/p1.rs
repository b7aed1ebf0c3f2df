//! Single-block methods for `min f(x) s.t. Ax = b`.

use crate::error::{Error, Result};
use crate::linalg::{concat, Vector};
use crate::problem::{BlockProblem, ProblemKind};
use crate::schedule::{Metric, Rate, SolverParams};
use crate::subproblem::{ExtraProx, ProxMetric, SubproblemMode, SubproblemSpec};

use super::{aggressive, check_schedules, Method, Schedules, StartPoint, StepArtifacts, Variant};

#[derive(Debug, Clone)]
pub struct P1Solver {
    problem: BlockProblem,
    params: SolverParams,
    schedules: Schedules,
    variant: Variant,
    k: usize,
    x: Vector,
    x_prev: Vector,
    x_bar: Vector,
    lambda: Vector,
    /// λ̄^k (twice variant)
    lambda_bar: Vector,
}

impl P1Solver {
    pub fn new(
        problem: BlockProblem,
        params: SolverParams,
        schedules: Schedules,
        variant: Variant,
        start: Option<StartPoint>,
    ) -> Result<Self> {
        if problem.kind() != ProblemKind::P1 {
            return Err(Error::Configuration("single-block solver needs a P1 problem".into()));
        }
        if variant == Variant::Penalty {
            return Err(Error::Configuration(
                "the single-block methods come in once and twice variants".into(),
            ));
        }
        check_schedules(ProblemKind::P1, &params, &schedules)?;
        if params.metric == Metric::Gram {
            problem.block(0).require_gram_metric()?;
        }
        let start = start.unwrap_or_else(|| StartPoint::zeros(&problem));
        start.check(&problem)?;
        let x = start.x[0].clone();
        let lambda = start.lambda;
        let s = schedules.at(0);
        let r0 = problem.residual(std::slice::from_ref(&x))?;
        let lambda_bar = &lambda - r0 * (params.gamma * (1.0 - s.tau) * s.beta);
        Ok(P1Solver {
            problem,
            params,
            schedules,
            variant,
            k: 0,
            x_prev: x.clone(),
            x_bar: x.clone(),
            x,
            lambda,
            lambda_bar,
        })
    }

    pub fn x_bar(&self) -> &Vector {
        &self.x_bar
    }

    pub fn lambda_bar(&self) -> &Vector {
        &self.lambda_bar
    }
}

impl Method for P1Solver {
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
        std::slice::from_ref(&self.x)
    }

    fn lambda(&self) -> &Vector {
        &self.lambda
    }

    fn v(&self) -> Vector {
        match self.variant {
            Variant::Twice => concat(&[self.x_bar.clone(), self.lambda_bar.clone()]),
            _ => concat(&[self.x_bar.clone(), self.lambda.clone()]),
        }
    }

    fn step(&mut self) -> Result<StepArtifacts> {
        let s = self.schedules.at(self.k);
        let (tau, beta, gamma) = (s.tau, s.beta, self.params.gamma);
        let block = self.problem.block(0);
        let a = block.a();
        let b = self.problem.b();
        let r_k = a * &self.x - b;
        let x_hat = &self.x + (&self.x - &self.x_prev) * s.momentum();
        let lambda_hat = match self.variant {
            Variant::Once => &self.lambda - &r_k * ((1.0 - gamma) * (1.0 - tau) * beta),
            _ => &self.lambda - &r_k * ((1.0 - tau) * beta),
        };
        let mu = match self.params.rate {
            Rate::RateK => 0.0,
            Rate::RateK2 => self.params.sigma * (1.0 - tau) / tau,
        };
        // ∇ₓφ(x̂, λ̂) = Aᵀc
        let c = (a * &x_hat - b) * beta - &lambda_hat;
        let extra = (mu > 0.0).then(|| ExtraProx {
            mu,
            center: self.x.clone(),
            metric: ProxMetric::Identity,
        });
        let spec = match self.params.metric {
            Metric::Gram => SubproblemSpec {
                mode: SubproblemMode::Exact,
                rho: beta,
                linear: c,
                center: x_hat,
                extra_prox: extra,
            },
            Metric::ScaledIdentity => SubproblemSpec {
                mode: SubproblemMode::Linearized,
                rho: beta * block.norm_sq(),
                linear: a.tr_mul(&c),
                center: x_hat,
                extra_prox: extra,
            },
        };
        let x_next = spec.solve(block)?;
        let x_tilde = aggressive(&x_next, &self.x, tau);
        let r_tilde = a * &x_tilde - b;

        let (lambda_tilde, lambda_next, v_k, v_next) = match self.variant {
            Variant::Twice => {
                let lambda_tilde = &self.lambda_bar - &r_tilde * (tau * beta);
                let bar_next = &self.lambda_bar - &r_tilde * (gamma * tau * beta);
                let v_k = concat(&[self.x_bar.clone(), self.lambda_bar.clone()]);
                let v_next = concat(&[x_tilde.clone(), bar_next.clone()]);
                self.lambda_bar = bar_next;
                (lambda_tilde, self.lambda.clone(), v_k, v_next)
            }
            _ => {
                let lambda_tilde = &self.lambda - &r_tilde * (tau * beta);
                let lambda_next = &self.lambda - &r_tilde * (gamma * tau * beta);
                let v_k = concat(&[self.x_bar.clone(), self.lambda.clone()]);
                let v_next = concat(&[x_tilde.clone(), lambda_next.clone()]);
                (lambda_tilde, lambda_next, v_k, v_next)
            }
        };
        let v_tilde = concat(&[x_tilde.clone(), lambda_tilde.clone()]);
        let feasibility = (a * &x_next - b).norm();
        let art = StepArtifacts {
            k: self.k,
            tau_prev: s.tau_prev,
            tau,
            tau_next: s.tau_next,
            beta,
            beta_next: s.beta_next,
            x_prev: vec![self.x.clone()],
            x_next: vec![x_next.clone()],
            x_tilde: vec![x_tilde.clone()],
            lambda_tilde,
            lambda_next: lambda_next.clone(),
            v_k,
            v_tilde,
            v_next,
            feasibility,
        };
        self.x_prev = std::mem::replace(&mut self.x, x_next);
        self.x_bar = x_tilde;
        self.lambda = lambda_next;
        self.k += 1;
        Ok(art)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linalg::Matrix;
    use crate::oracle::Quadratic;
    use crate::problem::Block;
    use crate::schedule::{PenaltyRule, PenaltySchedule, TauRule, TauSchedule};

    fn scalar_qp() -> BlockProblem {
        let f = Arc::new(Quadratic::new(Matrix::from_element(1, 1, 1.0), Vector::zeros(1)).unwrap());
        let block = Block::new(f, Matrix::from_element(1, 1, 1.0)).unwrap();
        BlockProblem::single(block, Vector::from_element(1, 1.0)).unwrap()
    }

    fn rate_k(gamma: f64, metric: Metric) -> (SolverParams, Schedules) {
        (
            SolverParams::new(gamma, 0.0, metric, Rate::RateK),
            Schedules::new(
                TauSchedule::new(TauRule::C1, 0.5).unwrap(),
                PenaltySchedule::new(PenaltyRule::BetaOverTau, 1.0).unwrap(),
            ),
        )
    }

    #[test]
    fn worked_first_step_once() {
        let (params, sched) = rate_k(1.0, Metric::Gram);
        let mut s = P1Solver::new(scalar_qp(), params, sched, Variant::Once, None).unwrap();
        let art = s.step().unwrap();
        assert!((art.x_next[0][0] - 0.75).abs() < 1e-15);
        assert!((art.x_tilde[0][0] - 2.25).abs() < 1e-14);
        assert!((art.lambda_next[0] + 1.25).abs() < 1e-14);
    }

    #[test]
    fn worked_first_step_twice() {
        let (params, sched) = rate_k(1.0, Metric::Gram);
        let mut s = P1Solver::new(scalar_qp(), params, sched, Variant::Twice, None).unwrap();
        let art = s.step().unwrap();
        // λ̂⁰ = −(1−τ⁰)β⁰(Ax⁰−b) = 2, so (1+3)x = 3 + 2
        assert!((art.x_next[0][0] - 1.25).abs() < 1e-15);
        assert_eq!(art.lambda_next[0], 0.0);
    }

    #[test]
    fn rejects_wrong_schedule() {
        let params = SolverParams::new(1.0, 0.0, Metric::Gram, Rate::RateK);
        let sched = Schedules::new(
            TauSchedule::new(TauRule::C2, 0.5).unwrap(),
            PenaltySchedule::new(PenaltyRule::BetaOverTau, 1.0).unwrap(),
        );
        let err = P1Solver::new(scalar_qp(), params, sched, Variant::Once, None).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn saddle_point_is_fixed() {
        for variant in [Variant::Once, Variant::Twice] {
            for metric in [Metric::Gram, Metric::ScaledIdentity] {
                let (params, sched) = rate_k(1.0, metric);
                let start = StartPoint {
                    x: vec![Vector::from_element(1, 1.0)],
                    lambda: Vector::from_element(1, 1.0),
                };
                let mut s = P1Solver::new(scalar_qp(), params, sched, variant, Some(start)).unwrap();
                for _ in 0..5 {
                    let art = s.step().unwrap();
                    assert!((art.x_next[0][0] - 1.0).abs() < 1e-14);
                    assert!((art.lambda_next[0] - 1.0).abs() < 1e-14);
                }
            }
        }
    }
}

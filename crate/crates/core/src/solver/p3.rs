//! Multi-block Gauss-Seidel methods for `min Σfᵢ(xᵢ) s.t. ΣAᵢxᵢ = b`.
//!
//! Every block is solved in residual form, so the momentum point enters only
//! through `Aᵢx̂ᵢ = (1−τ)Aᵢx̆ᵢ^{k−1} + τȳᵢ`. The bar variables of blocks 2..m
//! are therefore kept in constraint space (ȳᵢ = Aᵢx̄ᵢ, length l each) and the
//! correction acts there.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{concat, Vector};
use crate::problem::{BlockProblem, ProblemKind};
use crate::schedule::{Rate, SolverParams};
use crate::subproblem::solve_residual;

use super::{aggressive, check_schedules, Method, Schedules, StartPoint, StepArtifacts, Variant};

#[derive(Debug, Clone)]
pub struct P3Solver {
    problem: BlockProblem,
    params: SolverParams,
    schedules: Schedules,
    variant: Variant,
    k: usize,
    x: Vec<Vector>,
    /// ȳ₂..ȳ_m
    y_bar: Vec<Vector>,
    lambda: Vector,
    lambda_bar: Vector,
}

/// `ȳ − γJ⁻ᵀ(ȳ − ỹ)` where `(J⁻ᵀd)ᵢ = dᵢ − dᵢ₊₁` and `(J⁻ᵀd)_last = d_last`.
pub fn chain_correction(y_bar: &[Vector], y_tilde: &[Vector], gamma: f64) -> Result<Vec<Vector>> {
    check_dim("chain correction blocks", y_bar.len(), y_tilde.len())?;
    let d: Vec<Vector> = y_bar.iter().zip(y_tilde).map(|(a, b)| a - b).collect();
    Ok((0..d.len())
        .map(|i| {
            let step = match d.get(i + 1) {
                Some(next) => &d[i] - next,
                None => d[i].clone(),
            };
            &y_bar[i] - step * gamma
        })
        .collect())
}

impl P3Solver {
    pub fn new(
        problem: BlockProblem,
        params: SolverParams,
        schedules: Schedules,
        variant: Variant,
        start: Option<StartPoint>,
    ) -> Result<Self> {
        if problem.kind() != ProblemKind::P3 {
            return Err(Error::Configuration("multi-block solver needs a P3 problem".into()));
        }
        check_schedules(ProblemKind::P3, &params, &schedules)?;
        if variant == Variant::Penalty && params.rate != Rate::RateK {
            return Err(Error::Configuration(
                "the multi-block penalty form is defined for rate-k schedules only".into(),
            ));
        }
        for block in problem.blocks() {
            block.require_gram_metric()?;
        }
        let mut start = start.unwrap_or_else(|| StartPoint::zeros(&problem));
        start.check(&problem)?;
        if variant == Variant::Penalty {
            start.lambda.fill(0.0);
        }
        let s = schedules.at(0);
        let r0 = problem.residual(&start.x)?;
        let lambda_bar = &start.lambda - r0 * (params.gamma * (1.0 - s.tau) * s.beta);
        let y_bar = problem.blocks()[1..]
            .iter()
            .zip(&start.x[1..])
            .map(|(blk, x)| blk.a() * x)
            .collect();
        Ok(P3Solver {
            problem,
            params,
            schedules,
            variant,
            k: 0,
            x: start.x,
            y_bar,
            lambda: start.lambda,
            lambda_bar,
        })
    }

    pub fn y_bar(&self) -> &[Vector] {
        &self.y_bar
    }

    pub fn lambda_bar(&self) -> &Vector {
        &self.lambda_bar
    }

    fn dual_base(&self) -> &Vector {
        match self.variant {
            Variant::Once => &self.lambda,
            _ => &self.lambda_bar,
        }
    }
}

impl Method for P3Solver {
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
        let mut parts = self.y_bar.clone();
        parts.push(self.dual_base().clone());
        concat(&parts)
    }

    fn step(&mut self) -> Result<StepArtifacts> {
        let st = self.schedules.at(self.k);
        let (tau, beta, gamma) = (st.tau, st.beta, self.params.gamma);
        let blocks = self.problem.blocks();
        let m = blocks.len();
        let b = self.problem.b();
        let r_prev = self.problem.residual(&self.x)?;
        let lambda_used = match self.variant {
            Variant::Once => &self.lambda + &r_prev * (gamma * (1.0 - tau) * beta),
            _ => self.lambda.clone(),
        };

        // Aᵢx̂ᵢ for i ≥ 2
        let y_hat: Vec<Vector> = blocks[1..]
            .iter()
            .zip(&self.x[1..])
            .zip(&self.y_bar)
            .map(|((blk, x), yb)| blk.a() * x * (1.0 - tau) + yb * tau)
            .collect();
        let mut ahead: Vector = y_hat.iter().fold(Vector::zeros(b.len()), |acc, y| acc + y);
        let mut done = Vector::zeros(b.len());
        let shift = match self.variant {
            Variant::Penalty => b.clone(),
            _ => b + &lambda_used / beta,
        };
        let mut x_next = Vec::with_capacity(m);
        for (j, blk) in blocks.iter().enumerate() {
            if j > 0 {
                ahead -= &y_hat[j - 1];
            }
            let target = &shift - &done - &ahead;
            let xj = solve_residual(blk, beta, &target)?;
            done += blk.a() * &xj;
            x_next.push(xj);
        }

        let x_tilde: Vec<Vector> = x_next
            .iter()
            .zip(&self.x)
            .map(|(n, o)| aggressive(n, o, tau))
            .collect();
        let y_tilde: Vec<Vector> = blocks[1..]
            .iter()
            .zip(&x_tilde[1..])
            .map(|(blk, x)| blk.a() * x)
            .collect();
        let r_tilde = self.problem.residual(&x_tilde)?;
        let r_new = self.problem.residual(&x_next)?;
        let bar_sum = self.y_bar.iter().fold(Vector::zeros(b.len()), |acc, y| acc + y);
        // A₁x̃₁ + Σᵢ≥₂ ȳᵢ − b
        let r_pred = blocks[0].a() * &x_tilde[0] + &bar_sum - b;
        let base = self.dual_base().clone();
        let lambda_tilde = &base - &r_pred * (tau * beta);
        let y_next = chain_correction(&self.y_bar, &y_tilde, gamma)?;

        let (dual_next, lambda_next) = match self.variant {
            Variant::Once => {
                let l = &self.lambda - &r_tilde * (gamma * tau * beta);
                (l.clone(), l)
            }
            _ => {
                let drift = y_tilde.iter().fold(-&bar_sum, |acc, y| acc + y);
                let bar_next =
                    &self.lambda_bar - (drift * (tau * beta) + (&self.lambda_bar - &lambda_tilde)) * gamma;
                let ambient = if self.variant == Variant::Penalty {
                    self.lambda.clone()
                } else {
                    let shift = &r_prev * ((1.0 - tau) * beta) - &r_new * ((1.0 - st.tau_next) * st.beta_next);
                    &self.lambda - shift * gamma - &r_tilde * (gamma * tau * beta)
                };
                (bar_next, ambient)
            }
        };

        let mut vk = self.y_bar.clone();
        vk.push(base);
        let mut vt = y_tilde.clone();
        vt.push(lambda_tilde.clone());
        let mut vn = y_next.clone();
        vn.push(dual_next.clone());

        let art = StepArtifacts {
            k: self.k,
            tau_prev: st.tau_prev,
            tau,
            tau_next: st.tau_next,
            beta,
            beta_next: st.beta_next,
            x_prev: self.x.clone(),
            x_next: x_next.clone(),
            x_tilde,
            lambda_tilde,
            lambda_next: lambda_next.clone(),
            v_k: concat(&vk),
            v_tilde: concat(&vt),
            v_next: concat(&vn),
            feasibility: r_new.norm(),
        };
        self.x = x_next;
        self.y_bar = y_next;
        if self.variant != Variant::Once {
            self.lambda_bar = dual_next;
        }
        self.lambda = lambda_next;
        self.k += 1;
        Ok(art)
    }
}

//! Prediction-correction matrices and per-iteration convergence certificates.
//!
//! For each method the iteration is written as a prediction ṽ^k followed by
//! the correction `v^{k+1} = v^k − M^k(v^k − ṽ^k)`. The certificates check
//!
//! * CC1: `Q^k = H^k M^k`,
//! * CC2: `G^k = (Q^k)ᵀ + Q^k − (M^k)ᵀ H^k M^k ⪰ 0`,
//! * CC3: the Lyapunov-transfer inequality
//!   `r(‖v^{k+1}−v'‖²_H + σ‖z^k−z'‖²_R − ‖v^k−v'‖²_H + ‖v^k−ṽ^k‖²_G)
//!    ≥ ‖v^{k+1}−v'‖²_{H0^{k+1}} − ‖v^k−v'‖²_{H0^k} + Θ^{k+1} − Θ^k`.

use log::debug;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{block_diag, concat, quad_form, spectral_norm, sym_eigenvalues, Matrix, Vector};
use crate::problem::{Block, BlockProblem, ProblemKind};
use crate::reference::ReferenceSolution;
use crate::schedule::{Metric, PenaltySchedule, Rate, SolverParams};
use crate::solver::StepArtifacts;

/// Extra structure of the multi-block matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrices {
    pub p: Matrix,
    pub n: Matrix,
    /// block lower-triangular matrix of identities
    pub j: Matrix,
    /// J^{-T}, the nonzero block of J̄ = blkdiag(0, J^{-T})
    pub j_inv_t: Matrix,
    /// [I … I]
    pub i_tilde: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcMatrices {
    pub q: Matrix,
    pub m: Matrix,
    pub h: Matrix,
    pub g: Matrix,
    /// ‖Qᵀ + Q‖_F + ‖MᵀHM‖_F, the size of the two terms whose difference is G
    pub g_scale: f64,
    /// Lyapunov weight; equals H unless replaced for an O(1/k²) analysis.
    pub h0: Matrix,
    pub chain: Option<ChainMatrices>,
}

impl PcMatrices {
    /// Takes Q, M, H built with τβ = 1 and returns the matrices for τβ = `tb`.
    ///
    /// Every family satisfies `Q = SQ₁S`, `M = S⁻¹M₁S`, `H = SH₁S` with
    /// `S = blkdiag(√τβ·I_top, I/√τβ)`, hence `G = SG₁S`. Forming G₁ at unit
    /// scale lets exact cancellations stay exact, where a direct product would
    /// leave rounding of size ulp(τβ) next to eigenvalues of size 1/τβ.
    fn from_unit(q1: Matrix, m1: Matrix, h1: Matrix, tb: f64, top: usize, chain: Option<ChainMatrices>) -> Self {
        let sym_q1 = q1.transpose() + &q1;
        let mhm1 = m1.transpose() * &h1 * &m1;
        let g1 = &sym_q1 - &mhm1;
        let congruent = |mut x: Matrix| {
            let dim = x.nrows();
            for (i, j) in (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))) {
                match (i < top, j < top) {
                    (true, true) => x[(i, j)] *= tb,
                    (false, false) => x[(i, j)] /= tb,
                    _ => {}
                }
            }
            x
        };
        let mut m = m1;
        let dim = m.nrows();
        for i in 0..dim {
            for j in 0..dim {
                match (i < top, j < top) {
                    (false, true) => m[(i, j)] *= tb,
                    (true, false) => m[(i, j)] /= tb,
                    _ => {}
                }
            }
        }
        let h = congruent(h1);
        let g_scale = congruent(sym_q1).norm() + congruent(mhm1).norm();
        PcMatrices {
            h0: h.clone(),
            g_scale,
            q: congruent(q1),
            m,
            h,
            g: congruent(g1),
            chain,
        }
    }

    /// ‖Q − HM‖_F / (1 + ‖Q‖_F)
    pub fn cc1_residual(&self) -> f64 {
        (&self.q - &self.h * &self.m).norm() / (1.0 + self.q.norm())
    }
}

fn metric_matrix(metric: Metric, a: &Matrix) -> Matrix {
    match metric {
        Metric::Gram => a.tr_mul(a),
        Metric::ScaledIdentity => {
            let n = a.ncols();
            Matrix::identity(n, n) * spectral_norm(a).powi(2)
        }
    }
}

/// D for a block, using the block's cached Gram matrix and ‖A‖² so that
/// certificates see exactly the metric the solvers use.
fn block_metric(metric: Metric, block: &Block) -> Matrix {
    match metric {
        Metric::Gram => block.gram().clone(),
        Metric::ScaledIdentity => Matrix::identity(block.dim(), block.dim()) * block.norm_sq(),
    }
}

fn check_gamma(gamma: f64, upper: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= upper {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("gamma={gamma} outside (0,{upper}]")))
    }
}

/// Single-block matrices with `v = (x̄, λ)`.
pub fn build_matrices_p1(tau: f64, beta_k: f64, gamma: f64, metric: Metric, a: &Matrix) -> Result<PcMatrices> {
    check_gamma(gamma, 2.0)?;
    let d = metric_matrix(metric, a);
    build_p1_with_d(tau * beta_k, gamma, &d, a)
}

fn build_p1_with_d(tb: f64, gamma: f64, d: &Matrix, a: &Matrix) -> Result<PcMatrices> {
    let (n, l) = (a.ncols(), a.nrows());
    let top = d - a.tr_mul(a);
    let il = Matrix::identity(l, l);
    let q = block_diag(&[&top, &il]);
    let m = block_diag(&[&Matrix::identity(n, n), &(&il * gamma)]);
    let h = block_diag(&[&top, &(&il / gamma)]);
    Ok(PcMatrices::from_unit(q, m, h, tb, n, None))
}

/// Two-block matrices with `v = (x̄₂, λ)`.
pub fn build_matrices_p2(tau: f64, beta_k: f64, gamma: f64, metric: Metric, a2: &Matrix) -> Result<PcMatrices> {
    check_gamma(gamma, 1.0)?;
    let d = metric_matrix(metric, a2);
    build_p2_with_d(tau * beta_k, gamma, &d, a2)
}

fn build_p2_with_d(tb: f64, gamma: f64, d: &Matrix, a2: &Matrix) -> Result<PcMatrices> {
    let (n, l) = (a2.ncols(), a2.nrows());
    let il = Matrix::identity(l, l);
    let mut q = Matrix::zeros(n + l, n + l);
    q.view_mut((0, 0), (n, n)).copy_from(d);
    q.view_mut((n, 0), (l, n)).copy_from(&(-a2));
    q.view_mut((n, n), (l, l)).copy_from(&il);
    let mut m = Matrix::zeros(n + l, n + l);
    m.view_mut((0, 0), (n, n)).fill_with_identity();
    m.view_mut((n, 0), (l, n)).copy_from(&(a2 * -gamma));
    m.view_mut((n, n), (l, l)).copy_from(&(&il * gamma));
    let h = block_diag(&[d, &(&il / gamma)]);
    Ok(PcMatrices::from_unit(q, m, h, tb, n, None))
}

/// Block lower-triangular J with identity blocks.
pub fn chain_j(m: usize, l: usize) -> Matrix {
    let k = m - 1;
    let mut j = Matrix::zeros(k * l, k * l);
    for r in 0..k {
        for c in 0..=r {
            j.view_mut((r * l, c * l), (l, l)).fill_with_identity();
        }
    }
    j
}

/// J^{-T}: identity blocks on the diagonal, −I on the first superdiagonal.
pub fn chain_j_inv_t(m: usize, l: usize) -> Matrix {
    let k = m - 1;
    let mut out = Matrix::identity(k * l, k * l);
    for r in 0..k.saturating_sub(1) {
        out.view_mut((r * l, (r + 1) * l), (l, l))
            .copy_from(&(-Matrix::identity(l, l)));
    }
    out
}

/// Multi-block matrices in v-space, `v = (A₂x̄₂, …, A_m x̄_m, λ)`.
pub fn build_matrices_p3(tau: f64, beta_k: f64, gamma: f64, m: usize, l: usize) -> Result<PcMatrices> {
    check_gamma(gamma, 1.0)?;
    if m < 2 {
        return Err(Error::InvalidInput(format!("multi-block matrices need m ≥ 2, got {m}")));
    }
    let tb = tau * beta_k;
    let s = tb.sqrt();
    let k = (m - 1) * l;
    let j = chain_j(m, l);
    let j_inv_t = chain_j_inv_t(m, l);
    let mut i_tilde = Matrix::zeros(l, k);
    for c in 0..m - 1 {
        i_tilde.view_mut((0, c * l), (l, l)).fill_with_identity();
    }
    let il = Matrix::identity(l, l);
    let p = block_diag(&[&(&j * s), &(&il / s)]);
    let mut n = Matrix::zeros(k + l, k + l);
    n.view_mut((0, 0), (k, k)).copy_from(&(Matrix::identity(k, k) * (gamma * s)));
    n.view_mut((k, 0), (l, k)).copy_from(&(&i_tilde * (-gamma * s)));
    n.view_mut((k, k), (l, l)).copy_from(&(&il * (gamma / s)));
    let mut q = Matrix::zeros(k + l, k + l);
    q.view_mut((0, 0), (k, k)).copy_from(&j);
    q.view_mut((k, 0), (l, k)).copy_from(&(-&i_tilde));
    q.view_mut((k, k), (l, l)).copy_from(&il);
    // M = P^{-T}N = γ[[J⁻ᵀ, 0], [−τβĨ, I]] and H = PPᵀ/γ, in closed form
    let mut m_mat = Matrix::zeros(k + l, k + l);
    m_mat.view_mut((0, 0), (k, k)).copy_from(&(&j_inv_t * gamma));
    m_mat.view_mut((k, 0), (l, k)).copy_from(&(&i_tilde * -gamma));
    m_mat.view_mut((k, k), (l, l)).copy_from(&(&il * gamma));
    let h = block_diag(&[&(&j * j.transpose() / gamma), &(&il / gamma)]);
    Ok(PcMatrices::from_unit(
        q,
        m_mat,
        h,
        tb,
        k,
        Some(ChainMatrices {
            p,
            n,
            j,
            j_inv_t,
            i_tilde,
        }),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cc3Outcome {
    /// left side minus right side
    pub slack: f64,
    /// sum of the magnitudes of the individual terms
    pub scale: f64,
}

impl Cc3Outcome {
    /// slack / (1 + scale)
    pub fn relative(&self) -> f64 {
        self.slack / (1.0 + self.scale)
    }
}

/// Everything one CC3 evaluation needs.
#[derive(Debug, Clone, Copy)]
pub struct Cc3Inputs<'a> {
    pub h_k: &'a Matrix,
    pub h0_k: &'a Matrix,
    pub h0_next: &'a Matrix,
    pub g_k: &'a Matrix,
    pub r_k: f64,
    pub sigma: f64,
    /// R; `None` means the identity
    pub r_metric: Option<&'a Matrix>,
    pub v_k: &'a Vector,
    pub v_next: &'a Vector,
    pub v_tilde: &'a Vector,
    pub v_prime: Option<&'a Vector>,
    pub z_k: Option<&'a Vector>,
    pub z_prime: Option<&'a Vector>,
    pub theta_k: f64,
    pub theta_next: f64,
}

/// Left side minus right side of CC3, with the H and H0 terms grouped as
/// `‖v^{k+1}−v'‖²_{rH−H0^{k+1}} − ‖v^k−v'‖²_{rH−H0^k}` to limit cancellation.
pub fn check_cc3_step(inp: &Cc3Inputs<'_>) -> Result<Cc3Outcome> {
    let v_prime = inp
        .v_prime
        .ok_or_else(|| Error::ReferenceRequired("CC3 needs the reference point v'".into()))?;
    let dim = inp.v_k.len();
    check_dim("CC3 v^{k+1}", dim, inp.v_next.len())?;
    check_dim("CC3 ṽ^k", dim, inp.v_tilde.len())?;
    check_dim("CC3 v'", dim, v_prime.len())?;
    let d_next = inp.v_next - v_prime;
    let d_k = inp.v_k - v_prime;
    let d_pred = inp.v_k - inp.v_tilde;
    let rh = inp.h_k * inp.r_k;
    let t_next = quad_form(&d_next, &(&rh - inp.h0_next));
    let t_k = quad_form(&d_k, &(&rh - inp.h0_k));
    let t_g = inp.r_k * quad_form(&d_pred, inp.g_k);
    let t_z = if inp.sigma > 0.0 {
        let (z, zp) = match (inp.z_k, inp.z_prime) {
            (Some(z), Some(zp)) => (z, zp),
            _ => {
                return Err(Error::ReferenceRequired(
                    "CC3 with sigma > 0 needs z^k and z'".into(),
                ))
            }
        };
        let dz = z - zp;
        let w = match inp.r_metric {
            Some(r) => quad_form(&dz, r),
            None => dz.norm_squared(),
        };
        inp.r_k * inp.sigma * w
    } else {
        0.0
    };
    let d_theta = inp.theta_next - inp.theta_k;
    let slack = t_next - t_k + t_z + t_g - d_theta;
    // magnitudes of the ungrouped terms
    let scale = inp.r_k * (quad_form(&d_next, inp.h_k).abs() + quad_form(&d_k, inp.h_k).abs())
        + quad_form(&d_next, inp.h0_next).abs()
        + quad_form(&d_k, inp.h0_k).abs()
        + t_z.abs()
        + t_g.abs()
        + d_theta.abs();
    Ok(Cc3Outcome { slack, scale })
}

/// Constant c in the G-norm lower bound `‖v − ṽ‖²_G ≥ c τβ ‖Ax̃ − b‖²`.
pub fn g_bound_constant(kind: ProblemKind, gamma: f64) -> f64 {
    match kind {
        ProblemKind::P1 => 2.0 - gamma,
        ProblemKind::P2 | ProblemKind::P3 => 1.0 - gamma,
    }
}

/// `(‖v−ṽ‖²_G − cτβ‖Ax̃−b‖²) / (1 + |‖v−ṽ‖²_G| + cτβ‖Ax̃−b‖²)`
#[allow(clippy::too_many_arguments)]
pub fn g_norm_bound_slack(
    v_k: &Vector,
    v_tilde: &Vector,
    g: &Matrix,
    tau: f64,
    beta_k: f64,
    gamma: f64,
    a: &Matrix,
    x_tilde: &Vector,
    b: &Vector,
    family: ProblemKind,
) -> f64 {
    let lhs = quad_form(&(v_k - v_tilde), g);
    let rhs = g_bound_constant(family, gamma) * tau * beta_k * (a * x_tilde - b).norm_squared();
    (lhs - rhs) / (1.0 + lhs.abs() + rhs.abs())
}

/// True iff the family's G-norm lower bound holds to 1e−9 relative.
#[allow(clippy::too_many_arguments)]
pub fn g_norm_lower_bound_check(
    v_k: &Vector,
    v_tilde: &Vector,
    g: &Matrix,
    tau: f64,
    beta_k: f64,
    gamma: f64,
    a: &Matrix,
    x_tilde: &Vector,
    b: &Vector,
    family: ProblemKind,
) -> bool {
    g_norm_bound_slack(v_k, v_tilde, g, tau, beta_k, gamma, a, x_tilde, b, family) >= -1e-9
}

/// One row of the certificate log.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRecord {
    pub k: usize,
    pub cc1_residual: f64,
    pub g_min_eig: f64,
    /// size of the terms that cancel to form G; rounding in `g_min_eig` is
    /// relative to this, not to ‖G‖, which can be far smaller
    pub g_scale: f64,
    /// spectral norm of sym(G)
    pub g_norm: f64,
    /// CC3 slack relative to the magnitude of its terms
    pub cc3_slack: f64,
    pub cc3_slack_abs: f64,
    pub g_bound_slack: f64,
    pub theta_increment: f64,
    pub theta: f64,
    /// Lyapunov value after the step
    pub lyapunov_value: f64,
    pub lyapunov_increment: f64,
}

impl CertificateRecord {
    pub fn values_finite(&self) -> bool {
        [
            self.cc1_residual,
            self.g_min_eig,
            self.cc3_slack,
            self.theta_increment,
            self.lyapunov_value,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Per-run certificate evaluator (single writer).
#[derive(Debug)]
pub struct Certifier {
    problem: BlockProblem,
    params: SolverParams,
    beta: f64,
    reference: ReferenceSolution,
    v_prime: Vector,
    z_prime: Option<Vector>,
    /// multi-block: σ'' from the smooth last block
    sigma_pp: f64,
    theta: f64,
    negative_theta_flagged: bool,
    d_cache: Option<Matrix>,
}

impl Certifier {
    pub fn new(
        problem: &BlockProblem,
        params: &SolverParams,
        penalty: &PenaltySchedule,
        reference: &ReferenceSolution,
    ) -> Result<Self> {
        let xs = reference.blocks(problem)?;
        check_dim("reference multiplier", problem.l(), reference.lambda_star.len())?;
        let lam = reference.lambda_star.clone();
        let (v_prime, z_prime, sigma_pp, d_cache) = match problem.kind() {
            ProblemKind::P1 => {
                let d = block_metric(params.metric, problem.block(0));
                (concat(&[xs[0].clone(), lam]), Some(xs[0].clone()), 0.0, Some(d))
            }
            ProblemKind::P2 => {
                let d = block_metric(params.metric, problem.block(1));
                (concat(&[xs[1].clone(), lam]), Some(xs[1].clone()), 0.0, Some(d))
            }
            ProblemKind::P3 => {
                let mut parts: Vec<Vector> = (1..problem.m())
                    .map(|i| problem.block(i).a() * &xs[i])
                    .collect();
                parts.push(lam);
                let last = problem.block(problem.m() - 1);
                let (z, spp) = if params.rate == Rate::RateK2 {
                    let l = last.lipschitz().ok_or_else(|| {
                        Error::ModulusRequired("certificate needs L of the last block".into())
                    })?;
                    let z = last.objective().gradient(&xs[problem.m() - 1]).ok_or_else(|| {
                        Error::Unsupported("last block has no gradient".into())
                    })?;
                    let sp = problem.last_block_row_gram_min_eig() / l;
                    (Some(z), sp - sp * sp / (sp + 1.0))
                } else {
                    (None, 0.0)
                };
                (concat(&parts), z, spp, None)
            }
        };
        Ok(Certifier {
            problem: problem.clone(),
            params: *params,
            beta: penalty.beta,
            reference: reference.clone(),
            v_prime,
            z_prime,
            sigma_pp,
            theta: 0.0,
            negative_theta_flagged: false,
            d_cache,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn v_prime(&self) -> &Vector {
        &self.v_prime
    }

    fn matrices(&self, tau: f64, beta_k: f64) -> Result<PcMatrices> {
        let gamma = self.params.gamma;
        match self.problem.kind() {
            ProblemKind::P1 => build_p1_with_d(
                tau * beta_k,
                gamma,
                self.d_cache.as_ref().expect("metric cached"),
                self.problem.block(0).a(),
            ),
            ProblemKind::P2 => build_p2_with_d(
                tau * beta_k,
                gamma,
                self.d_cache.as_ref().expect("metric cached"),
                self.problem.block(1).a(),
            ),
            ProblemKind::P3 => build_matrices_p3(tau, beta_k, gamma, self.problem.m(), self.problem.l()),
        }
    }

    /// H0 at an iteration whose momentum weight is `tau`.
    pub fn h0(&self, tau: f64) -> Matrix {
        let (beta, gamma) = (self.beta, self.params.gamma);
        let l = self.problem.l();
        let il = Matrix::identity(l, l);
        match (self.problem.kind(), self.params.rate) {
            (ProblemKind::P1, rate) => {
                let a = self.problem.block(0).a();
                let d = self.d_cache.as_ref().expect("metric cached");
                let w = match rate {
                    Rate::RateK => beta,
                    Rate::RateK2 => beta / (tau * tau),
                };
                block_diag(&[&((d - a.tr_mul(a)) * w), &(&il / (gamma * beta))])
            }
            (ProblemKind::P2, rate) => {
                let d = self.d_cache.as_ref().expect("metric cached");
                let w = match rate {
                    Rate::RateK => beta,
                    Rate::RateK2 => beta / (tau * tau),
                };
                block_diag(&[&(d * w), &(&il / (gamma * beta))])
            }
            (ProblemKind::P3, rate) => {
                let j = chain_j(self.problem.m(), l);
                let top = &j * j.transpose() * (beta / gamma);
                let bottom = match rate {
                    Rate::RateK => 1.0 / beta,
                    Rate::RateK2 => {
                        1.0 / (beta * tau * tau) + self.sigma_pp * (1.0 - gamma) / tau
                    }
                } / gamma;
                block_diag(&[&top, &(&il * bottom)])
            }
        }
    }

    fn r_sigma(&self, tau: f64) -> (f64, f64, Option<Matrix>) {
        match (self.problem.kind(), self.params.rate) {
            (_, Rate::RateK) => (1.0, 0.0, None),
            (ProblemKind::P1, Rate::RateK2) => {
                let sigma = match self.params.metric {
                    Metric::ScaledIdentity => self.params.sigma,
                    Metric::Gram => 0.0,
                };
                (1.0 / tau, sigma, None)
            }
            (ProblemKind::P2, Rate::RateK2) => {
                let d = self.d_cache.as_ref().expect("metric cached");
                let smax = self.problem.block(1).norm_sq();
                (1.0 / tau, self.params.sigma, Some(d / smax))
            }
            (ProblemKind::P3, Rate::RateK2) => {
                let l = self.problem.block(self.problem.m() - 1).lipschitz().unwrap_or(f64::INFINITY);
                (1.0 / tau, 1.0 / l, None)
            }
        }
    }

    fn c_const(&self) -> f64 {
        g_bound_constant(self.problem.kind(), self.params.gamma)
    }

    fn theta_increment(&self, art: &StepArtifacts) -> Result<f64> {
        let c = self.c_const();
        let r_tilde = self.problem.residual(&art.x_tilde)?.norm_squared();
        Ok(match (self.problem.kind(), self.params.rate) {
            (_, Rate::RateK) => c * art.tau * art.beta * r_tilde,
            (ProblemKind::P3, Rate::RateK2) => {
                let r_prev = self.problem.residual(&art.x_prev)?.norm_squared();
                c * art.beta * (r_tilde - art.tau / (art.tau_prev * art.tau_prev) * r_prev)
            }
            (_, Rate::RateK2) => c * art.beta * r_tilde,
        })
    }

    /// Lyapunov value Φ at the point (x̆^{k−1}, v^k) with momentum τ^{k−1}.
    fn lyapunov(&self, x_prev: &[Vector], tau_p: f64, v: &Vector, h0: &Matrix) -> Result<f64> {
        let r = self.problem.residual(x_prev)?;
        let s = self.reference.f_star - self.problem.objective(x_prev)?
            + self.reference.lambda_star.dot(&r);
        let c = self.c_const();
        let (outer, inner) = match (self.problem.kind(), self.params.rate) {
            (_, Rate::RateK) => (1.0 / tau_p, 1.0 / tau_p),
            (ProblemKind::P3, Rate::RateK2) => (1.0 / (tau_p * tau_p), 1.0),
            (_, Rate::RateK2) => (1.0 / (tau_p * tau_p), 1.0 / (tau_p * tau_p)),
        };
        let d = v - &self.v_prime;
        Ok(outer * (s - 0.5 * c * self.beta * inner * r.norm_squared()) - 0.5 * quad_form(&d, h0))
    }

    fn z_of(&self, art: &StepArtifacts) -> Result<Option<Vector>> {
        Ok(match (self.problem.kind(), self.params.rate) {
            (_, Rate::RateK) => None,
            (ProblemKind::P1, _) => Some(art.x_tilde[0].clone()),
            (ProblemKind::P2, _) => Some(art.x_tilde[1].clone()),
            (ProblemKind::P3, _) => {
                let m = self.problem.m();
                let g = self.problem.block(m - 1).objective().gradient(&art.x_next[m - 1]);
                Some(g.ok_or_else(|| Error::Unsupported("last block has no gradient".into()))?)
            }
        })
    }

    pub fn observe(&mut self, art: &StepArtifacts) -> Result<CertificateRecord> {
        let mats = self.matrices(art.tau, art.beta)?;
        let eig = sym_eigenvalues(&mats.g);
        let g_min_eig = eig.first().copied().unwrap_or(0.0);
        let g_norm = eig.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let h0_k = self.h0(art.tau_prev);
        let h0_next = self.h0(art.tau);
        let (r_k, sigma, r_metric) = self.r_sigma(art.tau);
        let z = self.z_of(art)?;
        let d_theta = self.theta_increment(art)?;
        let cc3 = check_cc3_step(&Cc3Inputs {
            h_k: &mats.h,
            h0_k: &h0_k,
            h0_next: &h0_next,
            g_k: &mats.g,
            r_k,
            sigma,
            r_metric: r_metric.as_ref(),
            v_k: &art.v_k,
            v_next: &art.v_next,
            v_tilde: &art.v_tilde,
            v_prime: Some(&self.v_prime),
            z_k: z.as_ref(),
            z_prime: self.z_prime.as_ref(),
            theta_k: self.theta,
            theta_next: self.theta + d_theta,
        })?;
        self.theta += d_theta;
        if self.theta < 0.0 && !self.negative_theta_flagged {
            debug!("running Theta became negative at k={}: {:e}", art.k, self.theta);
            self.negative_theta_flagged = true;
        }
        let a_full = self.problem.a_full();
        let x_tilde = concat(&art.x_tilde);
        let g_bound_slack = g_norm_bound_slack(
            &art.v_k,
            &art.v_tilde,
            &mats.g,
            art.tau,
            art.beta,
            self.params.gamma,
            &a_full,
            &x_tilde,
            self.problem.b(),
            self.problem.kind(),
        );
        let phi_k = self.lyapunov(&art.x_prev, art.tau_prev, &art.v_k, &h0_k)?;
        let phi_next = self.lyapunov(&art.x_next, art.tau, &art.v_next, &h0_next)?;
        Ok(CertificateRecord {
            k: art.k,
            cc1_residual: mats.cc1_residual(),
            g_min_eig,
            g_scale: mats.g_scale,
            g_norm,
            cc3_slack: cc3.relative(),
            cc3_slack_abs: cc3.slack,
            g_bound_slack,
            theta_increment: d_theta,
            theta: self.theta,
            lyapunov_value: phi_next,
            lyapunov_increment: phi_next - phi_k,
        })
    }

    /// True once the running Θ has been observed below zero.
    pub fn negative_theta_seen(&self) -> bool {
        self.negative_theta_flagged
    }
}

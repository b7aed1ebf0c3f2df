//! Reference saddle points used to measure gaps and evaluate certificates.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{block_diag, concat, sym_min_eig, Matrix, Vector};
use crate::problem::BlockProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: Vector,
    pub lambda_star: Vector,
    pub f_star: f64,
}

impl ReferenceSolution {
    pub fn new(x_star: Vector, lambda_star: Vector, f_star: f64) -> Self {
        ReferenceSolution {
            x_star,
            lambda_star,
            f_star,
        }
    }

    pub fn blocks(&self, problem: &BlockProblem) -> Result<Vec<Vector>> {
        problem.split(&self.x_star)
    }
}

/// Solves the KKT system of `min ½xᵀPx + qᵀx s.t. Ax = b`:
///
/// ```text
/// [P  Aᵀ] [x]   [−q]
/// [A  0 ] [μ] = [ b],    λ = −μ
/// ```
///
/// With this sign convention `Px + q = Aᵀλ`, matching the Lagrangian
/// `f(x) − λᵀ(Ax − b)`.
pub fn kkt_reference_qp(p: &Matrix, q: &Vector, a: &Matrix, b: &Vector) -> Result<ReferenceSolution> {
    let n = q.len();
    let l = b.len();
    check_dim("KKT P rows", n, p.nrows())?;
    check_dim("KKT P cols", n, p.ncols())?;
    check_dim("KKT A rows", l, a.nrows())?;
    check_dim("KKT A cols", n, a.ncols())?;
    if l == 0 {
        return Err(Error::InvalidInput(
            "the constraint has no rows; unconstrained problems are not supported".into(),
        ));
    }
    let aat = a * a.transpose();
    let scale = aat.amax().max(1.0);
    if sym_min_eig(&aat) <= 1e-12 * scale {
        return Err(Error::Degenerate("A does not have full row rank".into()));
    }
    let mut k = Matrix::zeros(n + l, n + l);
    k.view_mut((0, 0), (n, n)).copy_from(p);
    k.view_mut((0, n), (n, l)).copy_from(&a.transpose());
    k.view_mut((n, 0), (l, n)).copy_from(a);
    let rhs = concat(&[-q, b.clone()]);
    let sol = k
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("singular KKT matrix".into()))?;
    let res = (&k * &sol - &rhs).norm();
    if !sol.iter().all(|v| v.is_finite()) || res > 1e-8 * (1.0 + rhs.norm()) {
        return Err(Error::Degenerate(format!(
            "KKT matrix is numerically singular (solve residual {res:e})"
        )));
    }
    let x = sol.rows(0, n).into_owned();
    let lambda = -sol.rows(n, l).into_owned();
    let f = 0.5 * x.dot(&(p * &x)) + q.dot(&x);
    Ok(ReferenceSolution::new(x, lambda, f))
}

/// KKT reference for a block problem whose blocks are all quadratic.
pub fn quadratic_reference(problem: &BlockProblem) -> Result<ReferenceSolution> {
    let mut ps = Vec::new();
    let mut qs = Vec::new();
    for (i, block) in problem.blocks().iter().enumerate() {
        let (p, q) = block.objective().as_quadratic().ok_or_else(|| {
            Error::ReferenceRequired(format!(
                "block {i} is not quadratic; supply a reference solution"
            ))
        })?;
        ps.push(p.clone());
        qs.push(q.clone());
    }
    let refs: Vec<&Matrix> = ps.iter().collect();
    kkt_reference_qp(&block_diag(&refs), &concat(&qs), &problem.a_full(), problem.b())
}

/// ‖∇f(x*) − Aᵀλ*‖ + ‖Ax* − b‖ for problems whose blocks expose gradients.
pub fn kkt_residual(problem: &BlockProblem, reference: &ReferenceSolution) -> Result<f64> {
    let xs = reference.blocks(problem)?;
    let mut grads = Vec::with_capacity(xs.len());
    for (i, (block, x)) in problem.blocks().iter().zip(&xs).enumerate() {
        grads.push(block.objective().gradient(x).ok_or_else(|| {
            Error::Unsupported(format!("block {i} has no gradient"))
        })?);
    }
    let stationarity = concat(&grads) - problem.a_full().tr_mul(&reference.lambda_star);
    Ok(stationarity.norm() + problem.residual(&xs)?.norm())
}

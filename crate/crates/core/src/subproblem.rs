//! Block x-subproblems, reduced to the oracle's canonical form.
//!
//! With the Gram metric, the linearized term and the proximal term combine:
//! for g = Aᵀc,
//!
//! ```text
//! gᵀx + (ρ/2)‖x − ŷ‖²_{AᵀA} = (ρ/2)‖Ax − (Aŷ − c/ρ)‖² + const,
//! ```
//!
//! so every exact block solve is a residual solve `min f + (ρ/2)‖Ax − r‖²`.

use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::oracle::{Curvature, ObjectiveOracle};
use crate::problem::Block;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemMode {
    /// D = ‖A‖²I; `linear` is the gradient g ∈ ℝⁿ.
    Linearized,
    /// D = AᵀA; `linear` is the constraint-space vector c with g = Aᵀc.
    Exact,
}

/// Metric R of the extra proximal term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxMetric {
    Identity,
    /// R = scale·AᵀA
    Gram { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtraProx {
    pub mu: f64,
    pub center: Vector,
    pub metric: ProxMetric,
}

/// `argmin f(x) + gᵀx + (ρ/2)‖x − ŷ‖²_D + (μ/2)‖x − w‖²_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSpec {
    pub mode: SubproblemMode,
    pub rho: f64,
    pub linear: Vector,
    pub center: Vector,
    pub extra_prox: Option<ExtraProx>,
}

impl SubproblemSpec {
    pub fn solve(&self, block: &Block) -> Result<Vector> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidInput(format!("rho must be > 0, got {}", self.rho)));
        }
        check_dim("subproblem center", block.dim(), self.center.len())?;
        let a = block.a();
        let (mut identity, mut weight, mut h) = match self.mode {
            SubproblemMode::Linearized => {
                check_dim("linearized gradient", block.dim(), self.linear.len())?;
                (self.rho, 0.0, &self.center * self.rho - &self.linear)
            }
            SubproblemMode::Exact => {
                check_dim("exact-mode linear term", block.rows(), self.linear.len())?;
                let r = a * &self.center - &self.linear / self.rho;
                (0.0, self.rho, a.tr_mul(&r) * self.rho)
            }
        };
        if let Some(extra) = &self.extra_prox {
            if !(extra.mu >= 0.0) {
                return Err(Error::InvalidInput(format!("mu must be ≥ 0, got {}", extra.mu)));
            }
            check_dim("extra proximal center", block.dim(), extra.center.len())?;
            if extra.mu > 0.0 {
                match extra.metric {
                    ProxMetric::Identity => {
                        identity += extra.mu;
                        h += &extra.center * extra.mu;
                    }
                    ProxMetric::Gram { scale } => {
                        weight += extra.mu * scale;
                        h += block.gram() * &extra.center * (extra.mu * scale);
                    }
                }
            }
        }
        block.objective().minimize(&block.curvature(identity, weight), &h)
    }
}

/// `argmin f(x) + gᵀx + (ρ/2)‖x − ŷ‖² + (μ/2)‖x − w‖²`, the proximal
/// operator of f/(ρ+μ) at (ρŷ + μw − g)/(ρ+μ).
pub fn solve_linearized(
    oracle: &dyn ObjectiveOracle,
    g: &Vector,
    rho: f64,
    y_hat: &Vector,
    mu: f64,
    w: &Vector,
) -> Result<Vector> {
    if !(rho > 0.0) {
        return Err(Error::InvalidInput(format!("rho must be > 0, got {rho}")));
    }
    if !(mu >= 0.0) {
        return Err(Error::InvalidInput(format!("mu must be ≥ 0, got {mu}")));
    }
    check_dim("linearized gradient", oracle.dim(), g.len())?;
    check_dim("linearized center", oracle.dim(), y_hat.len())?;
    check_dim("extra proximal center", oracle.dim(), w.len())?;
    let h = y_hat * rho + w * mu - g;
    oracle.minimize(&Curvature::scaled_identity(rho + mu), &h)
}

/// `argmin f(x) + (ρ/2)‖Ax − r‖²`.
pub fn solve_residual(block: &Block, rho: f64, r: &Vector) -> Result<Vector> {
    solve_residual_prox(block, rho, r, 0.0, None)
}

/// `argmin f(x) + (ρ/2)‖Ax − r‖² + (μ/2)‖x − w‖²`.
pub fn solve_residual_prox(
    block: &Block,
    rho: f64,
    r: &Vector,
    mu: f64,
    w: Option<&Vector>,
) -> Result<Vector> {
    if !(rho > 0.0) {
        return Err(Error::InvalidInput(format!("rho must be > 0, got {rho}")));
    }
    check_dim("residual target", block.rows(), r.len())?;
    let mut h = block.a().tr_mul(r) * rho;
    let mut identity = 0.0;
    if mu > 0.0 {
        let w = w.ok_or_else(|| Error::InvalidInput("proximal center missing".into()))?;
        check_dim("extra proximal center", block.dim(), w.len())?;
        h += w * mu;
        identity = mu;
    }
    block.objective().minimize(&block.curvature(identity, rho), &h)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linalg::Matrix;
    use crate::oracle::{L1Norm, Quadratic};

    fn half_sq(n: usize) -> Arc<dyn ObjectiveOracle> {
        Arc::new(Quadratic::new(Matrix::identity(n, n), Vector::zeros(n)).unwrap())
    }

    #[test]
    fn linearized_scalar_example() {
        let f = half_sq(1);
        let x = solve_linearized(
            f.as_ref(),
            &Vector::from_element(1, -3.0),
            3.0,
            &Vector::zeros(1),
            0.0,
            &Vector::zeros(1),
        )
        .unwrap();
        assert!((x[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn linearized_l1_soft_threshold() {
        let f = L1Norm::new(2, 1.0).unwrap();
        let x = solve_linearized(
            &f,
            &Vector::zeros(2),
            1.0,
            &Vector::from_vec(vec![2.0, -0.3]),
            0.0,
            &Vector::zeros(2),
        )
        .unwrap();
        assert_eq!(x, Vector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn residual_scalar_example() {
        let block = Block::new(half_sq(1), Matrix::from_element(1, 1, 1.0)).unwrap();
        let x = solve_residual(&block, 3.0, &Vector::from_element(1, 1.0)).unwrap();
        assert!((x[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn residual_l1_rejects_non_orthogonal() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let block = Block::new(Arc::new(L1Norm::new(2, 1.0).unwrap()), a).unwrap();
        let err = solve_residual(&block, 1.0, &Vector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn rho_must_be_positive() {
        let block = Block::new(half_sq(1), Matrix::from_element(1, 1, 1.0)).unwrap();
        assert!(solve_residual(&block, 0.0, &Vector::zeros(1)).is_err());
    }
}

//! Per-block objective oracles.
//!
//! Every x-subproblem in the solvers is reduced to the canonical form
//!
//! ```text
//! argmin_x  f(x) + ½ xᵀ W x − hᵀ x,      W = a·I + c·AᵀA
//! ```
//!
//! where `a, c ≥ 0` and `AᵀA` is the Gram matrix of the block's constraint
//! matrix. Nonsmooth oracles only accept curvatures that collapse to a
//! scaled identity (either `c = 0` or `AᵀA = κI`).

use std::fmt::Debug;
use std::sync::OnceLock;

use nalgebra::{Cholesky, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{Matrix, Vector};

/// Gram part of a subproblem curvature: `weight · AᵀA`.
#[derive(Debug, Clone, Copy)]
pub struct GramTerm<'a> {
    pub weight: f64,
    pub gram: &'a Matrix,
    /// `Some(κ)` when `AᵀA = κI`.
    pub isotropic: Option<f64>,
}

/// The curvature `W = identity·I + weight·AᵀA` of a canonical subproblem.
#[derive(Debug, Clone, Copy)]
pub struct Curvature<'a> {
    pub identity: f64,
    pub gram: Option<GramTerm<'a>>,
}

impl<'a> Curvature<'a> {
    pub fn scaled_identity(s: f64) -> Self {
        Curvature {
            identity: s,
            gram: None,
        }
    }

    pub fn with_gram(identity: f64, weight: f64, gram: &'a Matrix, isotropic: Option<f64>) -> Self {
        Curvature {
            identity,
            gram: Some(GramTerm {
                weight,
                gram,
                isotropic,
            }),
        }
    }

    /// `Some(s)` when `W = sI`.
    pub fn as_scalar(&self) -> Option<f64> {
        match self.gram {
            None => Some(self.identity),
            Some(g) if g.weight == 0.0 => Some(self.identity),
            Some(g) => g.isotropic.map(|k| self.identity + g.weight * k),
        }
    }

    pub fn to_matrix(&self, n: usize) -> Matrix {
        let mut w = Matrix::identity(n, n) * self.identity;
        if let Some(g) = self.gram {
            w += g.gram * g.weight;
        }
        w
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        let mut out = x * self.identity;
        if let Some(g) = self.gram {
            out += (g.gram * x) * g.weight;
        }
        out
    }
}

/// A closed proper convex block objective together with the argmin oracle
/// used by every algorithm.
pub trait ObjectiveOracle: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> f64;

    /// argmin f(x) + ½xᵀWx − hᵀx.
    fn minimize(&self, curvature: &Curvature<'_>, h: &Vector) -> Result<Vector>;

    fn gradient(&self, _x: &Vector) -> Option<Vector> {
        None
    }

    /// Strong-convexity modulus (0 if none is known).
    fn strong_convexity(&self) -> f64 {
        0.0
    }

    /// Gradient-Lipschitz constant, when smooth.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// `(P, q)` for oracles of the form ½xᵀPx + qᵀx.
    fn as_quadratic(&self) -> Option<(&Matrix, &Vector)> {
        None
    }
}

/// f(x) = ½xᵀPx + qᵀx with P symmetric PSD.
#[derive(Debug)]
pub struct Quadratic {
    p: Matrix,
    q: Vector,
    min_eig: f64,
    max_eig: f64,
    eigen: OnceLock<SymmetricEigen<f64, nalgebra::Dyn>>,
}

impl Quadratic {
    pub fn new(p: Matrix, q: Vector) -> Result<Self> {
        check_dim("quadratic P rows", p.ncols(), p.nrows())?;
        check_dim("quadratic q", p.nrows(), q.len())?;
        let asym = (&p - p.transpose()).amax();
        if asym > 1e-12 * (1.0 + p.amax()) {
            return Err(Error::InvalidInput(format!(
                "quadratic P is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let eig = SymmetricEigen::new(p.clone());
        let min_eig = eig.eigenvalues.min();
        let max_eig = eig.eigenvalues.max();
        if min_eig < -1e-10 * (1.0 + max_eig.abs()) {
            return Err(Error::InvalidInput(format!(
                "quadratic P is not PSD (min eigenvalue {min_eig:e})"
            )));
        }
        let eigen = OnceLock::new();
        let _ = eigen.set(eig);
        Ok(Quadratic {
            p,
            q,
            min_eig: min_eig.max(0.0),
            max_eig: max_eig.max(0.0),
            eigen,
        })
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    pub fn q(&self) -> &Vector {
        &self.q
    }

    fn eigen(&self) -> &SymmetricEigen<f64, nalgebra::Dyn> {
        self.eigen.get_or_init(|| SymmetricEigen::new(self.p.clone()))
    }
}

impl ObjectiveOracle for Quadratic {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    fn minimize(&self, curvature: &Curvature<'_>, h: &Vector) -> Result<Vector> {
        check_dim("quadratic subproblem rhs", self.dim(), h.len())?;
        let rhs = h - &self.q;
        if let Some(s) = curvature.as_scalar() {
            // (P + sI)x = rhs through the cached eigendecomposition of P
            let eig = self.eigen();
            let mut coeffs = eig.eigenvectors.tr_mul(&rhs);
            for (c, lam) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
                let d = lam + s;
                if d <= 1e-12 * (1.0 + lam.abs() + s.abs()) {
                    return Err(Error::IllPosedBlock(format!(
                        "P + {s:e}·I is singular"
                    )));
                }
                *c /= d;
            }
            return Ok(&eig.eigenvectors * coeffs);
        }
        let system = &self.p + curvature.to_matrix(self.dim());
        let chol = Cholesky::new(system).ok_or_else(|| {
            Error::IllPosedBlock("P + W is not positive definite".into())
        })?;
        Ok(chol.solve(&rhs))
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        Some(&self.p * x + &self.q)
    }

    fn strong_convexity(&self) -> f64 {
        self.min_eig
    }

    fn lipschitz(&self) -> Option<f64> {
        (self.max_eig > 0.0).then_some(self.max_eig)
    }

    fn as_quadratic(&self) -> Option<(&Matrix, &Vector)> {
        Some((&self.p, &self.q))
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn require_scalar(curvature: &Curvature<'_>, name: &str) -> Result<f64> {
    let s = curvature.as_scalar().ok_or_else(|| {
        Error::Unsupported(format!(
            "{name} needs a scaled-identity metric (AᵀA must be a multiple of I)"
        ))
    })?;
    if s <= 0.0 {
        return Err(Error::IllPosedBlock(format!(
            "{name} subproblem needs positive curvature, got {s:e}"
        )));
    }
    Ok(s)
}

/// f(x) = μ‖x‖₁.
#[derive(Debug, Clone)]
pub struct L1Norm {
    dim: usize,
    mu: f64,
}

impl L1Norm {
    pub fn new(dim: usize, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(Error::InvalidInput(format!("l1 weight must be ≥ 0, got {mu}")));
        }
        Ok(L1Norm { dim, mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl ObjectiveOracle for L1Norm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        self.mu * x.lp_norm(1)
    }

    fn minimize(&self, curvature: &Curvature<'_>, h: &Vector) -> Result<Vector> {
        check_dim("l1 subproblem rhs", self.dim, h.len())?;
        let s = require_scalar(curvature, "l1")?;
        Ok(h.map(|v| soft_threshold(v / s, self.mu / s)))
    }
}

/// f(x) = μ‖x‖₁ + (σ/2)‖x‖².
#[derive(Debug, Clone)]
pub struct ElasticNet {
    dim: usize,
    mu: f64,
    sigma: f64,
}

impl ElasticNet {
    pub fn new(dim: usize, mu: f64, sigma: f64) -> Result<Self> {
        if !(mu >= 0.0) || !(sigma >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "elastic net weights must be ≥ 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(ElasticNet { dim, mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl ObjectiveOracle for ElasticNet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        self.mu * x.lp_norm(1) + 0.5 * self.sigma * x.norm_squared()
    }

    fn minimize(&self, curvature: &Curvature<'_>, h: &Vector) -> Result<Vector> {
        check_dim("elastic net subproblem rhs", self.dim, h.len())?;
        let s = require_scalar(curvature, "elastic net")? + self.sigma;
        Ok(h.map(|v| soft_threshold(v / s, self.mu / s)))
    }

    fn strong_convexity(&self) -> f64 {
        self.sigma
    }
}

/// Indicator of the box `lo ≤ x ≤ hi`.
#[derive(Debug, Clone)]
pub struct BoxIndicator {
    lo: Vector,
    hi: Vector,
}

impl BoxIndicator {
    pub fn new(lo: Vector, hi: Vector) -> Result<Self> {
        check_dim("box bounds", lo.len(), hi.len())?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidInput("box has lo > hi".into()));
        }
        Ok(BoxIndicator { lo, hi })
    }
}

impl ObjectiveOracle for BoxIndicator {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        let inside = x
            .iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(v, (l, h))| *v >= l - 1e-12 && *v <= h + 1e-12);
        if inside {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn minimize(&self, curvature: &Curvature<'_>, h: &Vector) -> Result<Vector> {
        check_dim("box subproblem rhs", self.dim(), h.len())?;
        let s = require_scalar(curvature, "box indicator")?;
        Ok(Vector::from_fn(h.len(), |i, _| {
            (h[i] / s).clamp(self.lo[i], self.hi[i])
        }))
    }
}

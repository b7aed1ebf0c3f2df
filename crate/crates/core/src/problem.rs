//! Linearly constrained block-separable convex programs
//! `min Σ fᵢ(xᵢ) s.t. Σ Aᵢxᵢ = b`.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{spectral_norm, split, sym_eigenvalues, Matrix, Vector};
use crate::oracle::{Curvature, ObjectiveOracle};

/// Relative tolerance used to decide whether `AᵀA` is a multiple of `I`.
const ISOTROPY_TOL: f64 = 1e-12;

/// One block `(fᵢ, Aᵢ)` together with its convexity and smoothness moduli.
#[derive(Debug, Clone)]
pub struct Block {
    objective: Arc<dyn ObjectiveOracle>,
    a: Matrix,
    sigma: f64,
    lipschitz: Option<f64>,
    gram: Matrix,
    isotropic: Option<f64>,
    norm_sq: f64,
}

impl Block {
    /// Moduli default to what the oracle reports.
    pub fn new(objective: Arc<dyn ObjectiveOracle>, a: Matrix) -> Result<Self> {
        check_dim("block matrix columns", objective.dim(), a.ncols())?;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("block matrix has non-finite entries".into()));
        }
        let gram = a.tr_mul(&a);
        let isotropic = isotropic_scale(&gram);
        let norm_sq = match isotropic {
            Some(k) => k,
            None => spectral_norm(&a).powi(2),
        };
        let sigma = objective.strong_convexity();
        let lipschitz = objective.lipschitz();
        Ok(Block {
            objective,
            a,
            sigma,
            lipschitz,
            gram,
            isotropic,
            norm_sq,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be ≥ 0, got {sigma}")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_lipschitz(mut self, l: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidInput(format!("L must be > 0, got {l}")));
        }
        self.lipschitz = Some(l);
        Ok(self)
    }

    pub fn objective(&self) -> &dyn ObjectiveOracle {
        self.objective.as_ref()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    /// `AᵀA`
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    /// `Some(κ)` when `AᵀA = κI`.
    pub fn isotropic(&self) -> Option<f64> {
        self.isotropic
    }

    /// ‖A‖²
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// Curvature `identity·I + weight·AᵀA` bound to this block's Gram matrix.
    pub fn curvature(&self, identity: f64, weight: f64) -> Curvature<'_> {
        if weight == 0.0 {
            Curvature::scaled_identity(identity)
        } else {
            Curvature::with_gram(identity, weight, &self.gram, self.isotropic)
        }
    }

    /// The Gram metric `AᵀA` is only a metric when A has no zero column.
    pub fn require_gram_metric(&self) -> Result<()> {
        for j in 0..self.a.ncols() {
            if self.a.column(j).iter().all(|v| *v == 0.0) {
                return Err(Error::IllPosedBlock(format!(
                    "column {j} of the block matrix is zero, so AᵀA is not a metric"
                )));
            }
        }
        Ok(())
    }
}

fn isotropic_scale(gram: &Matrix) -> Option<f64> {
    let n = gram.nrows();
    if n == 0 {
        return None;
    }
    let k = gram.diagonal().mean();
    if k <= 0.0 {
        return None;
    }
    let dev = (gram - Matrix::identity(n, n) * k).amax();
    (dev <= ISOTROPY_TOL * k).then_some(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// single block
    P1,
    /// two blocks
    P2,
    /// m ≥ 2 blocks, Gauss–Seidel sweep
    P3,
}

#[derive(Debug, Clone)]
pub struct BlockProblem {
    blocks: Vec<Block>,
    b: Vector,
    kind: ProblemKind,
}

impl BlockProblem {
    pub fn new(blocks: Vec<Block>, b: Vector, kind: ProblemKind) -> Result<Self> {
        let m = blocks.len();
        let ok = match kind {
            ProblemKind::P1 => m == 1,
            ProblemKind::P2 => m == 2,
            ProblemKind::P3 => m >= 2,
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "{kind:?} is inconsistent with {m} block(s)"
            )));
        }
        if b.is_empty() {
            return Err(Error::InvalidInput(
                "the constraint has no rows; unconstrained problems are not supported".into(),
            ));
        }
        for block in &blocks {
            check_dim("block matrix rows", b.len(), block.rows())?;
        }
        Ok(BlockProblem { blocks, b, kind })
    }

    pub fn single(block: Block, b: Vector) -> Result<Self> {
        Self::new(vec![block], b, ProblemKind::P1)
    }

    pub fn two_block(first: Block, second: Block, b: Vector) -> Result<Self> {
        Self::new(vec![first, second], b, ProblemKind::P2)
    }

    pub fn multi_block(blocks: Vec<Block>, b: Vector) -> Result<Self> {
        Self::new(blocks, b, ProblemKind::P3)
    }

    /// Same blocks and right-hand side, different kind.
    pub fn with_kind(&self, kind: ProblemKind) -> Result<Self> {
        Self::new(self.blocks.clone(), self.b.clone(), kind)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Block {
        &self.blocks[i]
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn l(&self) -> usize {
        self.b.len()
    }

    pub fn n(&self) -> usize {
        self.blocks.iter().map(Block::dim).sum()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(Block::dim).collect()
    }

    /// The full `l × n` matrix `[A₁ … A_m]`.
    pub fn a_full(&self) -> Matrix {
        let mut out = Matrix::zeros(self.l(), self.n());
        let mut off = 0;
        for block in &self.blocks {
            out.columns_mut(off, block.dim()).copy_from(block.a());
            off += block.dim();
        }
        out
    }

    pub fn split(&self, x: &Vector) -> Result<Vec<Vector>> {
        check_dim("stacked primal vector", self.n(), x.len())?;
        Ok(split(x, &self.dims()))
    }

    /// Σ Aᵢxᵢ
    pub fn apply(&self, xs: &[Vector]) -> Result<Vector> {
        check_dim("number of primal blocks", self.m(), xs.len())?;
        let mut out = Vector::zeros(self.l());
        for (block, x) in self.blocks.iter().zip(xs) {
            check_dim("primal block", block.dim(), x.len())?;
            out += block.a() * x;
        }
        Ok(out)
    }

    /// Ax − b
    pub fn residual(&self, xs: &[Vector]) -> Result<Vector> {
        Ok(self.apply(xs)? - &self.b)
    }

    /// Σ fᵢ(xᵢ)
    pub fn objective(&self, xs: &[Vector]) -> Result<f64> {
        check_dim("number of primal blocks", self.m(), xs.len())?;
        Ok(self
            .blocks
            .iter()
            .zip(xs)
            .map(|(block, x)| block.objective().value(x))
            .sum())
    }

    /// σ_min(A_m A_mᵀ) of the last block.
    pub fn last_block_row_gram_min_eig(&self) -> f64 {
        let a = self.blocks[self.m() - 1].a();
        sym_eigenvalues(&(a * a.transpose()))
            .first()
            .copied()
            .unwrap_or(0.0)
            .max(0.0)
    }
}

/// ∇ₓφ(x, λ) = −Aᵀλ + βAᵀ(Ax − b) for the stacked primal vector `x`.
pub fn build_phi_gradient(
    problem: &BlockProblem,
    x: &Vector,
    lambda: &Vector,
    beta: f64,
) -> Result<Vector> {
    check_dim("multiplier", problem.l(), lambda.len())?;
    let xs = problem.split(x)?;
    let c = problem.residual(&xs)? * beta - lambda;
    Ok(problem.a_full().tr_mul(&c))
}

/// Largest violation of the saddle-point variational inequality with `u = (x, λ)`
/// playing the solution role:
///
/// ```text
/// max over (x', λ') of  max(0, −[f(x') − f(x) + (x' − x)ᵀ(−Aᵀλ) + (λ' − λ)ᵀ(Ax − b)])
/// ```
pub fn vi_residual(
    problem: &BlockProblem,
    x: &Vector,
    lambda: &Vector,
    samples: &[(Vector, Vector)],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("vi_residual needs at least one sample".into()));
    }
    check_dim("multiplier", problem.l(), lambda.len())?;
    let a = problem.a_full();
    let xs = problem.split(x)?;
    let fx = problem.objective(&xs)?;
    let r = &a * x - problem.b();
    let grad_x = -a.tr_mul(lambda);
    let mut worst = 0.0_f64;
    for (xp, lp) in samples {
        check_dim("sample multiplier", problem.l(), lp.len())?;
        let fxp = problem.objective(&problem.split(xp)?)?;
        let lhs = fxp - fx + (xp - x).dot(&grad_x) + (lp - lambda).dot(&r);
        worst = worst.max(-lhs);
    }
    Ok(worst)
}

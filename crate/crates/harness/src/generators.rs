//! Seeded problem families with reference solutions.
//!
//! Every constraint matrix is scaled to unit spectral norm so that one set of
//! step parameters works across seeds and sizes.

use std::sync::Arc;

use pclm_core::linalg::spectral_norm;
use pclm_core::oracle::{ElasticNet, ObjectiveOracle, Quadratic};
use pclm_core::reference::{kkt_reference_qp, quadratic_reference};
use pclm_core::{Block, BlockProblem, Matrix, ReferenceSolution, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub problem: BlockProblem,
    pub reference: Option<ReferenceSolution>,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut impl Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Gaussian matrix scaled to spectral norm 1.
pub fn unit_norm_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let a = gaussian_matrix(rng, rows, cols);
    let s = spectral_norm(&a);
    a / s
}

/// Random symmetric matrix with eigenvalues spread over `[lo, hi]`, both
/// endpoints attained (n ≥ 2).
pub fn spd_matrix(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Matrix {
    let q = gaussian_matrix(rng, n, n).qr().q();
    let eig = Vector::from_fn(n, |i, _| match i {
        0 => lo,
        1 => hi,
        _ => rng.random_range(lo..=hi),
    });
    let eig = if n == 1 { Vector::from_element(1, lo) } else { eig };
    &q * Matrix::from_diagonal(&eig) * q.transpose()
}

fn quadratic_block(rng: &mut impl Rng, n: usize, l: usize, lo: f64, hi: f64) -> Result<Block> {
    let p = spd_matrix(rng, n, lo, hi);
    let q = gaussian_vector(rng, n);
    let a = unit_norm_matrix(rng, l, n);
    Ok(Block::new(Arc::new(Quadratic::new(p, q)?), a)?)
}

/// `min ½x² s.t. x = 1`; saddle point (1, 1), f* = ½.
pub fn scalar_qp() -> Result<Instance> {
    let p = Matrix::from_element(1, 1, 1.0);
    let q = Vector::zeros(1);
    let a = Matrix::from_element(1, 1, 1.0);
    let b = Vector::from_element(1, 1.0);
    let reference = kkt_reference_qp(&p, &q, &a, &b)?;
    let block = Block::new(Arc::new(Quadratic::new(p, q)?), a)?;
    Ok(Instance {
        name: "scalar_qp".into(),
        problem: BlockProblem::single(block, b)?,
        reference: Some(reference),
    })
}

/// Single-block QP: P with eigenvalues in [1, 100], Gaussian A (l×n, unit
/// norm), b = A·x₀ for a Gaussian x₀.
pub fn random_qp(n: usize, l: usize, seed: u64) -> Result<Instance> {
    let mut rng = rng(seed);
    let block = quadratic_block(&mut rng, n, l, 1.0, 100.0)?;
    let x0 = gaussian_vector(&mut rng, n);
    let b = block.a() * x0;
    let problem = BlockProblem::single(block, b)?;
    let reference = quadratic_reference(&problem)?;
    Ok(Instance {
        name: format!("qp_n{n}_l{l}_s{seed}"),
        problem,
        reference: Some(reference),
    })
}

/// Two quadratic blocks; the second has eigenvalues in [σ₂, 10σ₂] so it is
/// σ₂-strongly convex.
pub fn two_block_qp(n1: usize, n2: usize, l: usize, sigma2: f64, seed: u64) -> Result<Instance> {
    let mut rng = rng(seed);
    let first = quadratic_block(&mut rng, n1, l, 1.0, 100.0)?;
    let second = quadratic_block(&mut rng, n2, l, sigma2, 10.0 * sigma2)?;
    let x0 = gaussian_vector(&mut rng, n1 + n2);
    let b = first.a() * x0.rows(0, n1) + second.a() * x0.rows(n1, n2);
    let problem = BlockProblem::two_block(first, second, b)?;
    let reference = quadratic_reference(&problem)?;
    Ok(Instance {
        name: format!("two_block_qp_s{seed}"),
        problem,
        reference: Some(reference),
    })
}

/// m quadratic blocks of size `dim` sharing l rows. The last block has
/// eigenvalues in [1, 2] (so L = 2) and, when dim ≥ l, orthonormal
/// constraint rows (A_mA_mᵀ = I).
pub fn chain_qp(m: usize, dim: usize, l: usize, seed: u64) -> Result<Instance> {
    if m < 2 {
        return Err(crate::error::HarnessError::Config(format!("chain needs m ≥ 2, got {m}")));
    }
    let mut rng = rng(seed);
    let mut blocks = Vec::with_capacity(m);
    for _ in 0..m - 1 {
        blocks.push(quadratic_block(&mut rng, dim, l, 1.0, 100.0)?);
    }
    let p = spd_matrix(&mut rng, dim, 1.0, 2.0);
    let q = gaussian_vector(&mut rng, dim);
    let a = if dim >= l {
        gaussian_matrix(&mut rng, dim, l).qr().q().transpose()
    } else {
        unit_norm_matrix(&mut rng, l, dim)
    };
    blocks.push(Block::new(Arc::new(Quadratic::new(p, q)?), a)?);
    let mut b = Vector::zeros(l);
    for blk in &blocks {
        b += blk.a() * gaussian_vector(&mut rng, dim);
    }
    let problem = if m == 2 {
        BlockProblem::new(blocks, b, pclm_core::ProblemKind::P3)?
    } else {
        BlockProblem::multi_block(blocks, b)?
    };
    let reference = quadratic_reference(&problem)?;
    Ok(Instance {
        name: format!("chain_qp_m{m}_s{seed}"),
        problem,
        reference: Some(reference),
    })
}

pub const ISTA_ITERATIONS: usize = 100_000;

/// Elastic-net splitting `min ½‖Cx₁ − d‖² + μ‖x₂‖₁ + (σ/2)‖x₂‖² s.t. x₁ − x₂ = 0`,
/// with the reference from a long proximal-gradient run.
pub fn elastic_net(n: usize, rows: usize, mu: f64, sigma: f64, seed: u64) -> Result<Instance> {
    let mut rng = rng(seed);
    let c = gaussian_matrix(&mut rng, rows, n) / (rows as f64).sqrt();
    let d = gaussian_vector(&mut rng, rows);
    let p = c.tr_mul(&c);
    let q = -c.tr_mul(&d);
    let f1 = Arc::new(Quadratic::new(p, q)?);
    let f2 = Arc::new(ElasticNet::new(n, mu, sigma)?);
    let x = proximal_gradient(f1.as_ref(), f2.as_ref(), n, ISTA_ITERATIONS)?;
    let grad = f1.gradient(&x).expect("quadratic has a gradient");
    let f_star = f1.value(&x) + f2.value(&x);
    let first = Block::new(f1, Matrix::identity(n, n))?;
    let second = Block::new(f2, -Matrix::identity(n, n))?.with_sigma(sigma)?;
    let problem = BlockProblem::two_block(first, second, Vector::zeros(n))?;
    // stationarity in x₁: ∇f₁(x*) = λ*
    let reference = ReferenceSolution::new(pclm_core::linalg::concat(&[x.clone(), x]), grad, f_star);
    Ok(Instance {
        name: format!("elastic_net_n{n}_s{seed}"),
        problem,
        reference: Some(reference),
    })
}

/// `iters` steps of x ← prox_{g/L}(x − ∇f(x)/L) from zero.
pub fn proximal_gradient(
    smooth: &Quadratic,
    g: &dyn ObjectiveOracle,
    n: usize,
    iters: usize,
) -> Result<Vector> {
    let lip = smooth.lipschitz().unwrap_or(1.0).max(1e-12);
    let curvature = pclm_core::oracle::Curvature::scaled_identity(lip);
    let mut x = Vector::zeros(n);
    for _ in 0..iters {
        let grad = smooth.gradient(&x).expect("quadratic has a gradient");
        let h = &x * lip - grad;
        x = g.minimize(&curvature, &h)?;
    }
    Ok(x)
}

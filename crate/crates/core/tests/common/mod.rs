#![allow(dead_code)]

use std::sync::Arc;

use pclm_core::oracle::Quadratic;
use pclm_core::{
    Block, BlockProblem, Matrix, Metric, PenaltyRule, PenaltySchedule, Rate, Schedules, SolverParams, TauRule,
    TauSchedule, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// BᵀB + shift·I
pub fn spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Matrix {
    let b = matrix(rng, n, n);
    b.tr_mul(&b) + Matrix::identity(n, n) * shift
}

pub fn quad_block(rng: &mut ChaCha8Rng, n: usize, l: usize, shift: f64) -> Block {
    let p = spd(rng, n, shift);
    let q = vector(rng, n);
    let f = Arc::new(Quadratic::new(p, q).unwrap());
    Block::new(f, matrix(rng, l, n)).unwrap()
}

pub fn single_qp(n: usize, l: usize, seed: u64) -> BlockProblem {
    let mut r = rng(seed);
    let block = quad_block(&mut r, n, l, 1.0);
    let b = vector(&mut r, l);
    BlockProblem::single(block, b).unwrap()
}

pub fn two_block_qp(n1: usize, n2: usize, l: usize, seed: u64) -> BlockProblem {
    let mut r = rng(seed);
    let first = quad_block(&mut r, n1, l, 1.0);
    let second = quad_block(&mut r, n2, l, 1.0);
    let b = vector(&mut r, l);
    BlockProblem::two_block(first, second, b).unwrap()
}

pub fn chain_qp(m: usize, dim: usize, l: usize, seed: u64) -> BlockProblem {
    let mut r = rng(seed);
    let blocks = (0..m).map(|_| quad_block(&mut r, dim, l, 1.0)).collect();
    let b = vector(&mut r, l);
    BlockProblem::multi_block(blocks, b).unwrap()
}

pub fn scalar_qp() -> BlockProblem {
    let f = Arc::new(Quadratic::new(Matrix::from_element(1, 1, 1.0), Vector::zeros(1)).unwrap());
    let block = Block::new(f, Matrix::from_element(1, 1, 1.0)).unwrap();
    BlockProblem::single(block, Vector::from_element(1, 1.0)).unwrap()
}

pub fn rate_k(gamma: f64, metric: Metric, beta: f64) -> (SolverParams, Schedules) {
    (
        SolverParams::new(gamma, 0.0, metric, Rate::RateK),
        Schedules::new(
            TauSchedule::new(TauRule::C1, 0.5).unwrap(),
            PenaltySchedule::new(PenaltyRule::BetaOverTau, beta).unwrap(),
        ),
    )
}

/// O(1/k²) parameters for the one- and two-block methods.
pub fn rate_k2(gamma: f64, sigma: f64, metric: Metric, beta: f64) -> (SolverParams, Schedules) {
    (
        SolverParams::new(gamma, sigma, metric, Rate::RateK2),
        Schedules::new(
            TauSchedule::new(TauRule::C2, 0.5).unwrap(),
            PenaltySchedule::new(PenaltyRule::BetaOverTauSq, beta).unwrap(),
        ),
    )
}

pub fn rel(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / (1.0 + a.norm().max(b.norm()))
}

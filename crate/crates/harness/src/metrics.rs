//! Per-iteration convergence metrics and their CSV form.

use std::io::Write;

use pclm_core::certify::CertificateRecord;
use pclm_core::{BlockProblem, ReferenceSolution, Vector};

use crate::error::Result;

pub const METRICS_HEADER: [&str; 9] = [
    "k",
    "objective",
    "gap_fixed",
    "gap_ball",
    "feasibility",
    "residue",
    "min_residue",
    "ergodic_gap",
    "wall_time_ns",
];

pub const CERTIFICATE_HEADER: [&str; 6] = [
    "k",
    "cc1_residual",
    "g_min_eig",
    "cc3_slack",
    "theta_increment",
    "lyapunov_value",
];

/// Row k describes the iterate x̆^{k−1} produced by the k-th step.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub k: usize,
    pub objective: f64,
    pub gap_fixed: f64,
    pub gap_ball: f64,
    pub feasibility: f64,
    pub residue: f64,
    pub min_residue: f64,
    pub ergodic_gap: f64,
    pub wall_time_ns: u128,
}

impl MetricsRow {
    pub fn series(&self, name: &str) -> Option<f64> {
        Some(match name {
            "objective" => self.objective,
            "gap_fixed" => self.gap_fixed,
            "gap_ball" => self.gap_ball,
            "feasibility" => self.feasibility,
            "residue" => self.residue,
            "min_residue" => self.min_residue,
            "ergodic_gap" => self.ergodic_gap,
            _ => return None,
        })
    }
}

/// `f(x) − f* − λ*ᵀ(Ax−b)` and `f(x) − f* + ρ‖Ax−b‖`.
pub fn gaps(problem: &BlockProblem, reference: &ReferenceSolution, rho: f64, xs: &[Vector]) -> Result<(f64, f64)> {
    let r = problem.residual(xs)?;
    let f = problem.objective(xs)?;
    Ok((
        f - reference.f_star - reference.lambda_star.dot(&r),
        f - reference.f_star + rho * r.norm(),
    ))
}

/// Running state for one run's metric rows.
#[derive(Debug)]
pub struct MetricsTracker {
    problem: BlockProblem,
    reference: Option<ReferenceSolution>,
    rho: f64,
    prev: Vec<Vector>,
    min_residue: f64,
    weighted_sum: Vec<Vector>,
    weight_total: f64,
}

impl MetricsTracker {
    pub fn new(problem: &BlockProblem, reference: Option<&ReferenceSolution>, rho: Option<f64>, start: &[Vector]) -> Self {
        let rho = rho.unwrap_or_else(|| reference.map_or(1.0, |r| 2.0 * r.lambda_star.norm() + 1.0));
        MetricsTracker {
            problem: problem.clone(),
            reference: reference.cloned(),
            rho,
            prev: start.to_vec(),
            min_residue: f64::INFINITY,
            weighted_sum: start.iter().map(|x| Vector::zeros(x.len())).collect(),
            weight_total: 0.0,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Records the iterate after step k (1-based) with ergodic weight `r`.
    pub fn record(&mut self, k: usize, xs: &[Vector], weight: f64, wall_time_ns: u128) -> Result<MetricsRow> {
        let residue: f64 = xs.iter().zip(&self.prev).map(|(a, b)| (a - b).norm_squared()).sum();
        self.min_residue = self.min_residue.min(residue);
        for (acc, x) in self.weighted_sum.iter_mut().zip(xs) {
            *acc += x * weight;
        }
        self.weight_total += weight;
        let feasibility = self.problem.residual(xs)?.norm();
        let objective = self.problem.objective(xs)?;
        let (gap_fixed, gap_ball, ergodic_gap) = match &self.reference {
            Some(reference) => {
                let (gf, gb) = gaps(&self.problem, reference, self.rho, xs)?;
                let avg: Vec<Vector> = self.weighted_sum.iter().map(|s| s / self.weight_total).collect();
                let (_, eg) = gaps(&self.problem, reference, self.rho, &avg)?;
                (gf, gb, eg)
            }
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        self.prev = xs.to_vec();
        Ok(MetricsRow {
            k,
            objective,
            gap_fixed,
            gap_ball,
            feasibility,
            residue,
            min_residue: self.min_residue,
            ergodic_gap,
            wall_time_ns,
        })
    }
}

pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.objective.to_string(),
            r.gap_fixed.to_string(),
            r.gap_ball.to_string(),
            r.feasibility.to_string(),
            r.residue.to_string(),
            r.min_residue.to_string(),
            r.ergodic_gap.to_string(),
            r.wall_time_ns.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Certificate rows use the same 1-based step numbering as metric rows.
pub fn write_certificates<W: Write>(out: W, rows: &[CertificateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CERTIFICATE_HEADER)?;
    for r in rows {
        w.write_record([
            (r.k + 1).to_string(),
            r.cc1_residual.to_string(),
            r.g_min_eig.to_string(),
            r.cc3_slack.to_string(),
            r.theta_increment.to_string(),
            r.lyapunov_value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

mod common;

use common::{rate_k, rate_k2, rel};
use pclm_core::certify::{build_matrices_p1, build_matrices_p2, build_matrices_p3, Certifier};
use pclm_core::linalg::concat;
use pclm_core::reference::quadratic_reference;
use pclm_core::schedule::validate_params;
use pclm_core::solver::{P1Solver, P2Solver, P3Solver};
use pclm_core::{
    build_method, BlockProblem, Matrix, Method, Metric, PenaltyRule, PenaltySchedule, ProblemKind, Rate,
    Schedules, SolverParams, StartPoint, StepArtifacts, TauRule, TauSchedule, Variant, Vector,
};
use proptest::prelude::*;

fn run(method: &mut dyn Method, iters: usize) -> Vec<StepArtifacts> {
    (0..iters).map(|_| method.step().unwrap()).collect()
}

fn saddle_start(problem: &BlockProblem) -> StartPoint {
    let reference = quadratic_reference(problem).unwrap();
    StartPoint {
        x: reference.blocks(problem).unwrap(),
        lambda: reference.lambda_star,
    }
}

#[test]
fn first_accelerated_step_on_scalar_problem() {
    // f = ½x², A = 1, b = 1, σ = 1, β = 1/2, from the origin
    let tau = (17f64.sqrt() - 1.0) / 8.0;
    let beta_k = 0.5 / (tau * tau);
    let s = (1.0 - tau) / tau;
    // (1 + β⁰ + s)x = β⁰
    let x1 = beta_k / (1.0 + beta_k + s);
    let x_tilde = x1 / tau;
    let lambda1 = -tau * beta_k * (x_tilde - 1.0);
    for metric in [Metric::Gram, Metric::ScaledIdentity] {
        let (params, sched) = rate_k2(1.0, 1.0, metric, 0.5);
        let mut solver = P1Solver::new(common::scalar_qp(), params, sched, Variant::Once, None).unwrap();
        let art = solver.step().unwrap();
        assert!((art.x_next[0][0] - x1).abs() < 1e-14);
        assert!((art.x_tilde[0][0] - x_tilde).abs() < 1e-13);
        assert!((art.lambda_next[0] - lambda1).abs() < 1e-13);
    }
}

#[test]
fn relaxation_is_continuous_in_gamma() {
    let problem = common::single_qp(6, 3, 11);
    let trajectory = |gamma: f64| {
        let (params, sched) = rate_k(gamma, Metric::Gram, 1.0);
        let mut s = P1Solver::new(problem.clone(), params, sched, Variant::Once, None).unwrap();
        run(&mut s, 50)
            .into_iter()
            .map(|a| concat(&[a.x_next[0].clone(), a.lambda_next]))
            .collect::<Vec<_>>()
    };
    let full = trajectory(1.0);
    let dev = |gamma: f64| {
        trajectory(gamma)
            .iter()
            .zip(&full)
            .map(|(a, b)| rel(a, b))
            .fold(0.0, f64::max)
    };
    let (near, far) = (dev(0.999), dev(0.99));
    assert!(near < 1e-2, "deviation {near}");
    assert!(near < far);
}

#[test]
fn aggressive_and_predicted_multiplier_are_consistent() {
    let problem = common::single_qp(5, 3, 12);
    let (a, b) = (problem.block(0).a().clone(), problem.b().clone());
    for variant in [Variant::Once, Variant::Twice] {
        let (params, sched) = rate_k(1.0, Metric::ScaledIdentity, 2.0);
        let mut s = P1Solver::new(problem.clone(), params, sched, variant, None).unwrap();
        let mut x_bar = Vector::zeros(5);
        for _ in 0..30 {
            let dual = s.v().rows(5, 3).into_owned();
            let art = s.step().unwrap();
            let tau = art.tau;
            let expect = (&art.x_next[0] - &art.x_prev[0] * (1.0 - tau)) / tau;
            assert!(rel(&art.x_tilde[0], &expect) < 1e-13);
            assert!(rel(&art.v_k.rows(0, 5).into_owned(), &x_bar) < 1e-15);
            let lt = &dual - (&a * &art.x_tilde[0] - &b) * (tau * art.beta);
            assert!(rel(&art.lambda_tilde, &lt) < 1e-13);
            x_bar = art.x_tilde[0].clone();
        }
    }
}

#[test]
fn twice_variant_keeps_zero_multiplier() {
    let problem = common::single_qp(5, 3, 13);
    for metric in [Metric::Gram, Metric::ScaledIdentity] {
        let (params, sched) = rate_k(1.0, metric, 1.0);
        let mut s = P1Solver::new(problem.clone(), params, sched, Variant::Twice, None).unwrap();
        for art in run(&mut s, 100) {
            assert!(art.lambda_next.iter().all(|v| *v == 0.0));
        }
    }
}

/// Closed-form τ^k for the two recurrences, computed without the schedule type.
fn tau_oracle(rate: Rate, k: usize) -> f64 {
    let mut t: f64 = 0.5;
    for _ in 0..=k {
        t = match rate {
            Rate::RateK => t / (1.0 + t),
            // positive root of τ² + t²τ − t² = 0
            Rate::RateK2 => 0.5 * (-t * t + t * (t * t + 4.0).sqrt()),
        };
    }
    t
}

/// Multiplier-free single-block recursion, written out as dense normal equations:
/// `x̂ = x + τ(1−τ⁻)/τ⁻·(x − x⁻)`, `c = β(Ax̂ − b) + (1−τ)β(Ax − b)` and
/// `(P + ρD + μI)x⁺ = −q − Aᵀc + ρDx̂ + μx`.
fn single_block_penalty_oracle(problem: &BlockProblem, metric: Metric, rate: Rate, beta: f64, sigma: f64, iters: usize) -> Vec<Vector> {
    let block = problem.block(0);
    let (p, q) = block.objective().as_quadratic().unwrap();
    let (a, b) = (block.a(), problem.b());
    let n = block.dim();
    let d = match metric {
        Metric::Gram => a.tr_mul(a),
        Metric::ScaledIdentity => Matrix::identity(n, n) * a.clone().svd(false, false).singular_values.max().powi(2),
    };
    let (mut x, mut x_prev) = (Vector::zeros(n), Vector::zeros(n));
    let mut out = Vec::new();
    for k in 0..iters {
        let tau = tau_oracle(rate, k);
        let tau_prev = if k == 0 { 0.5 } else { tau_oracle(rate, k - 1) };
        let (beta_k, mu) = match rate {
            Rate::RateK => (beta / tau, 0.0),
            Rate::RateK2 => (beta / (tau * tau), sigma * (1.0 - tau) / tau),
        };
        let x_hat = &x + (&x - &x_prev) * (tau * (1.0 - tau_prev) / tau_prev);
        let c = (a * &x_hat - b) * beta_k + (a * &x - b) * ((1.0 - tau) * beta_k);
        let lhs = p + &d * beta_k + Matrix::identity(n, n) * mu;
        let rhs = -q - a.tr_mul(&c) + &d * &x_hat * beta_k + &x * mu;
        let next = lhs.lu().solve(&rhs).unwrap();
        x_prev = std::mem::replace(&mut x, next);
        out.push(x.clone());
    }
    out
}

#[test]
fn single_block_twice_is_a_penalty_method() {
    let problem = common::single_qp(6, 3, 14);
    for metric in [Metric::Gram, Metric::ScaledIdentity] {
        for rate in [Rate::RateK, Rate::RateK2] {
            let (beta, sigma) = (0.5, 1.0);
            let (params, sched) = match rate {
                Rate::RateK => rate_k(1.0, metric, beta),
                Rate::RateK2 => rate_k2(1.0, sigma, metric, beta),
            };
            let mut s = P1Solver::new(problem.clone(), params, sched, Variant::Twice, None).unwrap();
            let oracle = single_block_penalty_oracle(&problem, metric, rate, beta, sigma, 200);
            for (art, x) in run(&mut s, 200).iter().zip(&oracle) {
                assert!(rel(&art.x_next[0], x) < 1e-9, "{metric:?} {rate:?} k={}", art.k);
            }
        }
    }
}

fn max_deviation(a: &[StepArtifacts], b: &[StepArtifacts]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            let u = concat(&[concat(&p.x_next), p.v_next.clone()]);
            let w = concat(&[concat(&q.x_next), q.v_next.clone()]);
            rel(&u, &w)
        })
        .fold(0.0, f64::max)
}

#[test]
fn two_block_twice_matches_penalty() {
    let problem = common::two_block_qp(5, 4, 3, 15);
    for metric in [Metric::Gram, Metric::ScaledIdentity] {
        for rate in [Rate::RateK, Rate::RateK2] {
            let (params, sched) = match rate {
                Rate::RateK => rate_k(1.0, metric, 1.0),
                Rate::RateK2 => rate_k2(1.0, 1.0, metric, 0.5),
            };
            let mut twice = P2Solver::new(problem.clone(), params, sched.clone(), Variant::Twice, None).unwrap();
            let mut penalty = P2Solver::new(problem.clone(), params, sched, Variant::Penalty, None).unwrap();
            let dev = max_deviation(&run(&mut twice, 200), &run(&mut penalty, 200));
            assert!(dev <= 1e-10, "{metric:?} {rate:?}: {dev:e}");
        }
    }
}

#[test]
fn chain_twice_matches_penalty() {
    for m in [2, 3, 4] {
        let problem = common::chain_qp(m, 3, 2, 16 + m as u64);
        let (params, sched) = rate_k(1.0, Metric::Gram, 1.0);
        let mut twice = P3Solver::new(problem.clone(), params, sched.clone(), Variant::Twice, None).unwrap();
        let mut penalty = P3Solver::new(problem.clone(), params, sched, Variant::Penalty, None).unwrap();
        let dev = max_deviation(&run(&mut twice, 200), &run(&mut penalty, 200));
        assert!(dev <= 1e-10, "m={m}: {dev:e}");
    }
}

#[test]
fn chain_penalty_needs_the_linear_rate() {
    let problem = common::chain_qp(3, 3, 2, 20);
    let params = SolverParams::new(1.0, 0.0, Metric::Gram, Rate::RateK2);
    let sched = Schedules::new(
        TauSchedule::new(TauRule::C2, 0.5).unwrap(),
        PenaltySchedule::new(PenaltyRule::Constant, 1.0).unwrap(),
    );
    assert!(P3Solver::new(problem, params, sched, Variant::Penalty, None).is_err());
}

#[test]
fn saddle_point_is_a_fixed_point() {
    let cases = [
        (common::two_block_qp(4, 3, 2, 21), Metric::ScaledIdentity),
        (common::two_block_qp(4, 3, 2, 21), Metric::Gram),
        (common::chain_qp(3, 3, 2, 22), Metric::Gram),
    ];
    for (problem, metric) in cases {
        let start = saddle_start(&problem);
        for variant in [Variant::Once, Variant::Twice] {
            let (params, sched) = rate_k(0.8, metric, 1.0);
            let mut s = build_method(&problem, params, sched, variant, Some(start.clone())).unwrap();
            for art in run(s.as_mut(), 20) {
                assert!(rel(&concat(&art.x_next), &concat(&start.x)) < 1e-10);
                assert!(rel(&art.lambda_next, &start.lambda) < 1e-10);
            }
        }
    }
}

#[test]
fn two_blocks_reproduced_by_chain_solver() {
    let problem = common::two_block_qp(4, 4, 3, 23);
    let chain = problem.with_kind(ProblemKind::P3).unwrap();
    let a2 = problem.block(1).a().clone();
    for variant in [Variant::Once, Variant::Twice] {
        let (params, sched) = rate_k(1.0, Metric::Gram, 1.0);
        let mut two = P2Solver::new(problem.clone(), params, sched.clone(), variant, None).unwrap();
        let mut multi = P3Solver::new(chain.clone(), params, sched, variant, None).unwrap();
        for (p, q) in run(&mut two, 100).iter().zip(&run(&mut multi, 100)) {
            // (x̄₂, λ) mapped to constraint space
            let mapped = concat(&[&a2 * p.v_next.rows(0, 4), p.v_next.rows(4, 3).into_owned()]);
            assert!(rel(&mapped, &q.v_next) < 1e-8, "{variant:?} k={}", p.k);
            assert!(rel(&concat(&p.x_next), &concat(&q.x_next)) < 1e-8);
        }
    }
}

/// λ̄^k = λ^k − γ(1−τ^k)β^k(Ax^k − b) along a run of the twice variant.
#[test]
fn bar_multiplier_follows_its_definition() {
    let problems = [
        common::single_qp(5, 3, 24),
        common::two_block_qp(4, 3, 3, 25),
        common::chain_qp(4, 3, 2, 26),
    ];
    let gamma = 0.7;
    for problem in problems {
        let (params, sched) = rate_k(gamma, Metric::Gram, 1.5);
        let mut s = build_method(&problem, params, sched.clone(), Variant::Twice, None).unwrap();
        let l = problem.l();
        for k in 0..100 {
            let v = s.v();
            let bar = v.rows(v.len() - l, l).into_owned();
            let tau = sched.tau.tau(k);
            let beta_k = 1.5 / tau;
            let r = problem.residual(s.x()).unwrap();
            let expect = s.lambda() - r * (gamma * (1.0 - tau) * beta_k);
            assert!(rel(&bar, &expect) < 1e-10, "{:?} k={k}", problem.kind());
            s.step().unwrap();
        }
    }
}

/// λ^k − γ[(1−τ^k)β^k(Ax^k−b) − (1−τ^{k+1})β^{k+1}(Ax^{k+1}−b)] − γτ^kβ^k(Ax̄^{k+1}−b) = λ^k.
#[test]
fn ambient_multiplier_telescopes() {
    let problem = common::two_block_qp(4, 3, 3, 27);
    let (params, sched) = rate_k(0.6, Metric::Gram, 2.0);
    let mut s = P2Solver::new(problem.clone(), params, sched, Variant::Twice, None).unwrap();
    for art in run(&mut s, 100) {
        let r_k = problem.residual(&art.x_prev).unwrap();
        let r_next = problem.residual(&art.x_next).unwrap();
        let r_tilde = problem.residual(&art.x_tilde).unwrap();
        let incr = (r_k * ((1.0 - art.tau) * art.beta) - r_next * ((1.0 - art.tau_next) * art.beta_next)
            + r_tilde * (art.tau * art.beta))
            * 0.6;
        let scale = 1.0 + art.beta * art.x_tilde.iter().map(|x| x.norm()).sum::<f64>();
        assert!(incr.norm() <= 1e-12 * scale, "k={} {:e}", art.k, incr.norm());
    }
}

fn correction_residual(problem: &BlockProblem, metric: Metric, gamma: f64, art: &StepArtifacts) -> f64 {
    let m = match problem.kind() {
        ProblemKind::P1 => build_matrices_p1(art.tau, art.beta, gamma, metric, problem.block(0).a()),
        ProblemKind::P2 => build_matrices_p2(art.tau, art.beta, gamma, metric, problem.block(1).a()),
        ProblemKind::P3 => build_matrices_p3(art.tau, art.beta, gamma, problem.m(), problem.l()),
    }
    .unwrap()
    .m;
    let predicted = &art.v_k - m * (&art.v_k - &art.v_tilde);
    (&predicted - &art.v_next).amax() / (1.0 + art.v_k.amax() + art.v_tilde.amax())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_step_is_a_correction(seed in 0u64..1000, gamma_frac in 0.05f64..1.0, beta in 0.1f64..5.0, twice in any::<bool>()) {
        let variant = if twice { Variant::Twice } else { Variant::Once };
        let cases = [
            (common::single_qp(4, 2, seed), Metric::ScaledIdentity, 2.0 * gamma_frac),
            (common::single_qp(4, 2, seed), Metric::Gram, 2.0 * gamma_frac),
            (common::two_block_qp(3, 3, 2, seed), Metric::ScaledIdentity, gamma_frac),
            (common::two_block_qp(3, 3, 2, seed), Metric::Gram, gamma_frac),
            (common::chain_qp(3, 2, 2, seed), Metric::Gram, gamma_frac),
        ];
        for (problem, metric, gamma) in cases {
            let (params, sched) = rate_k(gamma, metric, beta);
            let mut s = build_method(&problem, params, sched, variant, None).unwrap();
            for art in run(s.as_mut(), 30) {
                let res = correction_residual(&problem, metric, gamma, &art);
                prop_assert!(res <= 1e-12, "{:?} {metric:?} k={} residual {res:e}", problem.kind(), art.k);
            }
        }
    }
}

/// First β along `beta, beta·factor, …` for which the parameter inequalities hold.
fn admissible_beta(problem: &BlockProblem, params: &SolverParams, rule: PenaltyRule, mut beta: f64, factor: f64) -> f64 {
    let tau = TauSchedule::new(TauRule::C2, 0.5).unwrap();
    loop {
        let pen = PenaltySchedule::new(rule, beta).unwrap();
        if validate_params(problem, params, &tau, &pen, 400).unwrap().is_empty() {
            return beta;
        }
        beta *= factor;
        assert!(beta > 1e-8 && beta < 1e8, "no admissible beta");
    }
}

fn certify_run(problem: &BlockProblem, params: SolverParams, sched: Schedules, variant: Variant, iters: usize) {
    let reference = quadratic_reference(problem).unwrap();
    let mut cert = Certifier::new(problem, &params, &sched.penalty, &reference).unwrap();
    let mut s = build_method(problem, params, sched, variant, None).unwrap();
    for art in run(s.as_mut(), iters) {
        let rec = cert.observe(&art).unwrap();
        let tag = format!("{:?} {:?} {:?} k={}", problem.kind(), params.rate, variant, rec.k);
        assert!(rec.cc1_residual <= 1e-12, "{tag} cc1 {:e}", rec.cc1_residual);
        assert!(rec.g_min_eig >= -1e-10 * rec.g_scale, "{tag} G {:e}", rec.g_min_eig);
        assert!(rec.cc3_slack >= -1e-8, "{tag} cc3 {:e}", rec.cc3_slack);
        assert!(rec.g_bound_slack >= -1e-9, "{tag} bound {:e}", rec.g_bound_slack);
        if problem.kind() == ProblemKind::P1 && params.rate == Rate::RateK && params.gamma == 1.0 {
            let lyap = rec.lyapunov_increment / (1.0 + rec.lyapunov_value.abs());
            assert!(lyap >= -1e-8, "{tag} lyapunov {lyap:e}");
        }
    }
}

#[test]
fn certificates_hold_along_runs() {
    for metric in [Metric::Gram, Metric::ScaledIdentity] {
        for variant in [Variant::Once, Variant::Twice] {
            for gamma in [1.0, 0.5] {
                let p1 = common::single_qp(5, 3, 30);
                let (params, sched) = rate_k(2.0 * gamma, metric, 1.0);
                certify_run(&p1, params, sched, variant, 300);
                let (params, sched) = rate_k(gamma, metric, 1.0);
                certify_run(&p1, params, sched, variant, 300);
                let p2 = common::two_block_qp(4, 3, 3, 31);
                certify_run(&p2, params, rate_k(gamma, metric, 1.0).1, variant, 300);

                let sigma = p1.block(0).sigma().min(1.0);
                let probe = SolverParams::new(gamma, sigma, metric, Rate::RateK2);
                let beta = match metric {
                    Metric::Gram => 0.5,
                    // the scaled metric needs β‖A‖² below σ
                    Metric::ScaledIdentity => 0.1 * sigma / p1.block(0).norm_sq(),
                };
                certify_run(&p1, probe, rate_k2(gamma, sigma, metric, beta).1, variant, 300);
                let sigma = p2.block(1).sigma().min(1.0);
                let probe = SolverParams::new(gamma, sigma, metric, Rate::RateK2);
                let beta = admissible_beta(&p2, &probe, PenaltyRule::BetaOverTauSq, 0.5, 0.5);
                certify_run(&p2, probe, rate_k2(gamma, sigma, metric, beta).1, variant, 300);
            }
        }
    }
    // chain: square last block so that A_mA_mᵀ ≻ 0
    let p3 = common::chain_qp(3, 3, 3, 32);
    for variant in [Variant::Once, Variant::Twice] {
        let (params, sched) = rate_k(1.0, Metric::Gram, 1.0);
        certify_run(&p3, params, sched, variant, 300);
        let params = SolverParams::new(1.0, 0.0, Metric::Gram, Rate::RateK2);
        let beta = admissible_beta(&p3, &params, PenaltyRule::Constant, 1.0, 2.0);
        let sched = Schedules::new(
            TauSchedule::new(TauRule::C2, 0.5).unwrap(),
            PenaltySchedule::new(PenaltyRule::Constant, beta).unwrap(),
        );
        certify_run(&p3, params, sched, variant, 300);
    }
}

#[test]
fn inflated_lyapunov_weight_is_detected() {
    use pclm_core::certify::{check_cc3_step, Cc3Inputs};
    let problem = common::single_qp(4, 2, 33);
    let reference = quadratic_reference(&problem).unwrap();
    let (params, sched) = rate_k(1.0, Metric::Gram, 1.0);
    let cert = Certifier::new(&problem, &params, &sched.penalty, &reference).unwrap();
    let mut s = P1Solver::new(problem.clone(), params, sched, Variant::Once, None).unwrap();
    let art = s.step().unwrap();
    let mats = build_matrices_p1(art.tau, art.beta, 1.0, Metric::Gram, problem.block(0).a()).unwrap();
    let h0_k = cert.h0(art.tau_prev);
    let inflated = cert.h0(art.tau) * 10.0;
    let out = check_cc3_step(&Cc3Inputs {
        h_k: &mats.h,
        h0_k: &h0_k,
        h0_next: &inflated,
        g_k: &mats.g,
        r_k: 1.0,
        sigma: 0.0,
        r_metric: None,
        v_k: &art.v_k,
        v_next: &art.v_next,
        v_tilde: &art.v_tilde,
        v_prime: Some(cert.v_prime()),
        z_k: None,
        z_prime: None,
        theta_k: 0.0,
        theta_next: 0.0,
    })
    .unwrap();
    assert!(out.slack < 0.0);
}

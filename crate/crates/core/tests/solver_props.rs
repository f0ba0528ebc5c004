mod common;

use common::{inverse, random_col, random_mat, rng};
use faer::{Col, Mat};
use lmss::linalg::col_from_slice;
use lmss::scaling::{completeness_gamma, diff, first_diff, ScalingOperator};
use lmss::solver::synthetic::SyntheticProblem;
use lmss::solver::{
    damping, finite_difference_jacobian, gradient, gradient_related_check, lm_step,
    local_rate_check, model_value, solve, ClosureProblem, NlsProblem, RateCheckOptions,
    SolverConfig, StepMethod, StopReason, TRACE_CSV_HEADER,
};
use proptest::prelude::*;

fn normal_residual(
    j: &Mat<f64>,
    f: &Col<f64>,
    l: &ScalingOperator,
    lambda: f64,
    d: &Col<f64>,
) -> f64 {
    let h = j.transpose() * j + lambda * l.gram();
    let rhs = -(j.transpose() * f);
    (&h * d - &rhs).norm_l2() / rhs.norm_l2().max(h.norm_l2() * d.norm_l2()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lm_step_contract(seed in any::<u64>(), n in 2usize..9, order in 0u8..3, log_lambda in -6.0f64..2.0) {
        let mut r = rng(seed);
        let j = random_mat(&mut r, n + 3, n);
        let f = random_col(&mut r, n + 3);
        let order = order.min(n as u8 - 1);
        let l = if order == 0 { ScalingOperator::identity(n) } else { diff(order, n).unwrap() };
        let lambda = 10f64.powf(log_lambda);
        let dq = lm_step(j.as_ref(), f.as_ref(), &l, lambda, StepMethod::AugmentedQr).unwrap();
        let dc = lm_step(j.as_ref(), f.as_ref(), &l, lambda, StepMethod::NormalCholesky).unwrap();
        prop_assert!(normal_residual(&j, &f, &l, lambda, &dq) <= 1e-10);
        prop_assert!((&dq - &dc).norm_l2() <= 1e-8 * dq.norm_l2());
        let theta = model_value(j.as_ref(), f.as_ref(), &l, lambda, dq.as_ref());
        prop_assert!(theta <= f.squared_norm_l2() * (1.0 + 1e-12));
        for _ in 0..50 {
            let v = random_col(&mut r, n) * 0.01;
            let dv = &dq + &v;
            prop_assert!(theta <= model_value(j.as_ref(), f.as_ref(), &l, lambda, dv.as_ref()) * (1.0 + 1e-12));
        }
        // Descent: ∇φᵀd = −dᵀ(JᵀJ + λLᵀL)d.
        let g = gradient(j.as_ref(), f.as_ref()).unwrap();
        let dd = lmss::linalg::dot(g.as_ref(), dq.as_ref());
        let quad = (&j * &dq).squared_norm_l2() + lambda * l.apply(dq.as_ref()).squared_norm_l2();
        prop_assert!((dd + quad).abs() <= 1e-9 * quad.max(1e-300));
        prop_assert!(dd <= 0.0);
    }

    #[test]
    fn runs_are_monotone_and_gradient_related(
        which in 0usize..5,
        x0 in prop::collection::vec(-2.0f64..2.0, 2),
        order in 0u8..2,
    ) {
        let problem = match which {
            0 => SyntheticProblem::Linear { target: vec![0.3, -1.2] },
            1 => SyntheticProblem::Bilinear,
            2 => SyntheticProblem::AffineSet,
            3 => SyntheticProblem::Circle,
            _ => SyntheticProblem::Rosenbrock,
        };
        let l = if order == 0 { ScalingOperator::identity(2) } else { first_diff(2).unwrap() };
        let x0 = col_from_slice(&x0);
        let cfg = SolverConfig { gsvd_diagnostics: true, max_iter: 60, ..Default::default() };
        match solve(&problem, &l, x0.as_ref(), &cfg) {
            Ok((_, trace)) => {
                prop_assert!(trace.residuals_nonincreasing());
                let report = gradient_related_check(&trace, None);
                prop_assert!(report.passed, "{:?}", report);
                prop_assert_eq!(report.margins.len(), trace.iterations.len());
                for rec in &trace.iterations {
                    let diag = rec.diagnostics.unwrap();
                    prop_assert!(rec.step_norm <= diag.step_bound * (1.0 + 1e-8) + 1e-14);
                    if rec.lambda < 0.5 {
                        prop_assert!(diag.filter_norm.max(1.0) * rec.resid_norm <= std::f64::consts::FRAC_1_SQRT_2 + 1e-12
                            || rec.lambda >= 0.5);
                    }
                }
            }
            // Starting points on N(J) ∩ N(L) ≠ {0} are legitimately rejected.
            Err(e) => prop_assert!(matches!(e, lmss::Error::Completeness(_) | lmss::Error::Dimension(_)), "{e}"),
        }
    }
}

#[test]
fn identity_pair_step() {
    let j = Mat::<f64>::identity(2, 2);
    let f = col_from_slice(&[2.0, 2.0]);
    let d = lm_step(
        j.as_ref(),
        f.as_ref(),
        &ScalingOperator::identity(2),
        1.0,
        StepMethod::AugmentedQr,
    )
    .unwrap();
    assert!((d[0] + 1.0).abs() < 1e-14 && (d[1] + 1.0).abs() < 1e-14);
}

#[test]
fn singular_scaling_two_by_two() {
    let j = Mat::from_fn(2, 2, |i, k| if i == 0 && k == 0 { 1.0 } else { 0.0 });
    let f = col_from_slice(&[1.0, 0.0]);
    let l = first_diff(2).unwrap();
    // JᵀJ + 4LᵀL = [[5, −4], [−4, 4]], inverse (1/4)[[4, 4], [4, 5]]; −JᵀF = (−1, 0).
    let expected = [-1.0, -1.0];
    for method in [StepMethod::AugmentedQr, StepMethod::NormalCholesky] {
        let d = lm_step(j.as_ref(), f.as_ref(), &l, 4.0, method).unwrap();
        assert!((d[0] - expected[0]).abs() < 1e-12 && (d[1] - expected[1]).abs() < 1e-12);
    }
}

#[test]
fn completeness_violation_is_reported() {
    let j = Mat::from_fn(3, 2, |_, k| if k == 0 { 1.0 } else { 0.0 });
    let l = ScalingOperator::raw(Mat::from_fn(1, 2, |_, k| if k == 0 { 1.0 } else { 0.0 }));
    let f = col_from_slice(&[1.0, 1.0, 1.0]);
    assert_eq!(completeness_gamma(j.as_ref(), &l).unwrap(), 0.0);
    for method in [StepMethod::AugmentedQr, StepMethod::NormalCholesky] {
        assert!(matches!(
            lm_step(j.as_ref(), f.as_ref(), &l, 1.0, method),
            Err(lmss::Error::Completeness(_))
        ));
    }
    let i2 = ScalingOperator::identity(3);
    assert!(matches!(
        lm_step(
            Mat::<f64>::identity(3, 3).as_ref(),
            f.as_ref(),
            &i2,
            0.0,
            StepMethod::AugmentedQr
        ),
        Err(lmss::Error::Domain(_))
    ));
}

#[test]
fn gradient_matches_finite_differences_of_phi() {
    let p = SyntheticProblem::Rosenbrock;
    let x = col_from_slice(&[-0.4, 0.9]);
    let j = p.jacobian(x.as_ref()).unwrap();
    let f = p.residual(x.as_ref()).unwrap();
    let g = gradient(j.as_ref(), f.as_ref()).unwrap();
    let phi = |x: &Col<f64>| 0.5 * p.residual(x.as_ref()).unwrap().squared_norm_l2();
    let h = 1e-6;
    for i in 0..2 {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (phi(&xp) - phi(&xm)) / (2.0 * h);
        assert!((fd - g[i]).abs() < 1e-6 * g[i].abs().max(1.0));
    }
    assert_eq!(damping(col_from_slice(&[3.0, 4.0]).as_ref()), 25.0);
    assert_eq!(
        damping(col_from_slice(&[0.5_f64.sqrt(), 0.0]).as_ref()),
        0.5000000000000001
    );
}

#[test]
fn first_iterate_matches_closed_form() {
    let p = SyntheticProblem::Linear {
        target: vec![0.0, 0.0],
    };
    let l = first_diff(2).unwrap();
    let x0 = col_from_slice(&[1.0, 2.0]);
    let cfg = SolverConfig {
        max_iter: 1,
        ..Default::default()
    };
    let (x1, trace) = solve(&p, &l, x0.as_ref(), &cfg).unwrap();
    let lambda = 5.0;
    assert_eq!(trace.iterations[0].lambda, lambda);
    let h = Mat::<f64>::identity(2, 2) + lambda * l.gram();
    let expected = &x0 - inverse(&h) * &x0;
    assert!((&x1 - &expected).norm_l2() < 1e-14);
    // The unit step contracts the residual far more than ϑ = 0.9 asks for.
    assert!(trace.iterations[0].unit_branch);
    assert_eq!(trace.stop_reason, StopReason::MaxIter);
}

#[test]
fn linear_problem_converges_to_target() {
    let target = vec![3.0, -1.0, 0.5, 2.0];
    let p = SyntheticProblem::Linear {
        target: target.clone(),
    };
    let l = diff(2, 4).unwrap();
    let (x, trace) = solve(
        &p,
        &l,
        Col::<f64>::zeros(4).as_ref(),
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(trace.stop_reason.converged());
    for i in 0..4 {
        assert!((x[i] - target[i]).abs() < 5e-4);
    }
    assert!(trace.residuals_nonincreasing());
    assert!(trace.iterations.last().unwrap().unit_branch);
}

#[test]
fn perturbed_directions_fail_the_angle_test() {
    // Negative control: replace every LM direction by a random one and recompute ∇φᵀd.
    let p = SyntheticProblem::Circle;
    let l = first_diff(2).unwrap();
    let x0 = col_from_slice(&[1.5, 0.7]);
    let cfg = SolverConfig {
        gsvd_diagnostics: true,
        ..Default::default()
    };
    let (_, trace) = solve(&p, &l, x0.as_ref(), &cfg).unwrap();
    assert!(gradient_related_check(&trace, None).passed);
    let mut r = rng(3);
    let mut bad = trace.clone();
    let grad0 = {
        let j = p.jacobian(x0.as_ref()).unwrap();
        let f = p.residual(x0.as_ref()).unwrap();
        gradient(j.as_ref(), f.as_ref()).unwrap()
    };
    let rec = &mut bad.iterations[0];
    let mut v = random_col(&mut r, 2);
    if lmss::linalg::dot(grad0.as_ref(), v.as_ref()) < 0.0 {
        v = -v;
    }
    rec.dir_deriv = lmss::linalg::dot(grad0.as_ref(), v.as_ref());
    rec.step_norm = v.norm_l2();
    let report = gradient_related_check(&bad, None);
    assert!(!report.passed);
    assert_eq!(report.failures, vec![0]);
}

fn rate_run(p: &SyntheticProblem, x0: [f64; 2], l: &ScalingOperator) -> lmss::solver::RateReport {
    let cfg = SolverConfig {
        eps: 1e-10,
        max_iter: 40,
        ..Default::default()
    };
    let (_, trace) = solve(p, l, col_from_slice(&x0).as_ref(), &cfg).unwrap();
    assert!(trace.residuals_nonincreasing());
    local_rate_check(&trace, &RateCheckOptions::default())
        .expect("enough iterations above the floor")
}

#[test]
fn quadratic_rate_on_non_isolated_solution_sets() {
    let l = first_diff(2).unwrap();
    for (p, x0) in [
        (SyntheticProblem::Bilinear, [0.5, 0.3]),
        (SyntheticProblem::Circle, [1.4, 0.9]),
    ] {
        let rep = rate_run(&p, x0, &l);
        assert!(rep.bounded, "{p:?}: {:?}", rep.tail_ratios);
        assert!(rep.max_tail_ratio <= 1e3);
        assert!(rep.log_convex_decreasing, "{p:?}: {:?}", rep.ratios);
        assert!(rep.step_constant.is_finite() && rep.linearized_constant.is_finite());
    }
}

#[test]
fn affine_solution_set_is_hit_up_to_damping() {
    // F = (x₁, 0): the step solves (1 + λ)d₁ = −x₁ when L = I, so x₁ shrinks by λ/(1+λ).
    let p = SyntheticProblem::AffineSet;
    let l = ScalingOperator::identity(2);
    let x0 = col_from_slice(&[0.1, 5.0]);
    let cfg = SolverConfig {
        max_iter: 1,
        ..Default::default()
    };
    let (x1, _) = solve(&p, &l, x0.as_ref(), &cfg).unwrap();
    let lambda = 0.01;
    assert!((x1[0] - 0.1 * lambda / (1.0 + lambda)).abs() < 1e-15);
    assert_eq!(x1[1], 5.0);
}

#[test]
fn closure_problems_and_fd_jacobians() {
    let p = ClosureProblem::new(
        2,
        3,
        |x| {
            Col::from_fn(3, |i| match i {
                0 => x[0].sin(),
                1 => x[0] * x[1],
                _ => x[1] * x[1],
            })
        },
        |x| {
            Mat::from_fn(3, 2, |i, j| match (i, j) {
                (0, 0) => x[0].cos(),
                (1, 0) => x[1],
                (1, 1) => x[0],
                (2, 1) => 2.0 * x[1],
                _ => 0.0,
            })
        },
    );
    let x = col_from_slice(&[0.4, -0.8]);
    let fd = finite_difference_jacobian(&p, x.as_ref(), 1e-6).unwrap();
    assert!((&fd - p.jacobian(x.as_ref()).unwrap()).norm_max() < 1e-8);
}

#[test]
fn trace_csv_has_one_row_per_iterate() {
    let p = SyntheticProblem::Bilinear;
    let (_, trace) = solve(
        &p,
        &first_diff(2).unwrap(),
        col_from_slice(&[0.5, 0.3]).as_ref(),
        &SolverConfig::default(),
    )
    .unwrap();
    let csv = trace.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], TRACE_CSV_HEADER);
    assert_eq!(lines.len(), trace.iterations.len() + 2);
    assert!(lines.iter().all(|l| l.split(',').count() == 9));
}

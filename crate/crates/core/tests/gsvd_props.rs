mod common;

use common::{inverse, random_col, random_mat, rng};
use faer::Mat;
use lmss::gsvd::{
    gamma_filter, gen_singular_values, gsvd_pair, psi, psi_max, step_norm_bound, PsiMax,
};
use lmss::scaling::{completeness_gamma, first_diff, ScalingOperator};
use lmss::solver::{damping, lm_step, StepMethod};
use proptest::prelude::*;

fn orthonormality_defect(q: &Mat<f64>) -> f64 {
    let g = q.transpose() * q;
    (&g - Mat::<f64>::identity(g.nrows(), g.ncols())).norm_max()
}

fn check_pair(a: &Mat<f64>, l: &Mat<f64>) {
    let f = gsvd_pair(a.as_ref(), l.as_ref()).unwrap();
    let scale_a = a.norm_max().max(1.0);
    let scale_l = l.norm_max().max(1.0);
    assert!((f.reconstruct_a() - a).norm_max() / scale_a < 1e-10);
    assert!((f.reconstruct_l() - l).norm_max() / scale_l < 1e-10);
    assert!(orthonormality_defect(&f.u) < 1e-10);
    assert!(orthonormality_defect(&f.v) < 1e-10);
    assert!(f.sigma.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    assert!(f.mu.windows(2).all(|w| w[0] + 1e-12 >= w[1]));
    for (s, m) in f.sigma.iter().zip(&f.mu) {
        assert!((s * s + m * m - 1.0).abs() < 1e-10);
        assert!(*s >= 0.0 && *m > 0.0);
    }
    let h = a.transpose() * a + l.transpose() * l;
    let xxt = &f.x * f.x.transpose();
    let inv = inverse(&h);
    assert!((&xxt - &inv).norm_max() / inv.norm_max().max(1.0) < 1e-8);
    let g = gen_singular_values(&f);
    assert!(g.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-10) + 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_pairs_satisfy_the_gsvd_contract(
        seed in any::<u64>(),
        n in 1usize..7,
        extra in 0usize..4,
        p_frac in 0.0f64..1.0,
    ) {
        let mut r = rng(seed);
        let m = n + extra;
        let p = 1 + ((n as f64 - 1.0) * p_frac).round() as usize;
        let a = random_mat(&mut r, m, n);
        let l = random_mat(&mut r, p, n);
        check_pair(&a, &l);
    }

    #[test]
    fn gsvd_direction_equals_the_lm_step(seed in any::<u64>(), n in 2usize..6) {
        let mut r = rng(seed);
        let j = random_mat(&mut r, n + 2, n);
        let f = random_col(&mut r, n + 2);
        let l = first_diff(n).unwrap();
        let lambda = damping(f.as_ref());
        let fac = gsvd_pair(j.as_ref(), l.entries()).unwrap();
        let d_gsvd = fac.lm_direction(lambda, f.as_ref()).unwrap();
        let d = lm_step(j.as_ref(), f.as_ref(), &l, lambda, StepMethod::AugmentedQr).unwrap();
        prop_assert!((&d - &d_gsvd).norm_l2() <= 1e-8 * d.norm_l2().max(1e-300));
        let gamma = completeness_gamma(j.as_ref(), &l).unwrap();
        let bound = step_norm_bound(&fac, lambda, f.as_ref(), gamma).unwrap();
        prop_assert!(d.norm_l2() <= bound * (1.0 + 1e-10));
    }

    #[test]
    fn psi_never_exceeds_its_maximum(gamma in 0.0f64..1e4, lambda in 1e-8f64..10.0) {
        let v = psi(gamma, lambda).unwrap();
        let bound = psi_max(lambda).unwrap().value();
        prop_assert!(v <= bound * (1.0 + 1e-10));
    }
}

#[test]
fn rank_deficient_operands() {
    let mut r = rng(5);
    // A with a zero column, L = first difference: N(A) ∩ N(L) = {0}.
    let mut a = random_mat(&mut r, 6, 4);
    for i in 0..6 {
        a[(i, 2)] = 0.0;
    }
    check_pair(&a, &first_diff(4).unwrap().entries().to_owned());
    let zero = Mat::<f64>::zeros(5, 3);
    check_pair(&zero, &Mat::<f64>::identity(3, 3));
}

#[test]
fn incompatible_pairs_are_rejected() {
    let a = Mat::from_fn(3, 2, |i, j| if j == 1 && i == 0 { 1.0 } else { 0.0 });
    let l = Mat::from_fn(1, 2, |_, j| if j == 1 { 1.0 } else { 0.0 });
    assert!(gsvd_pair(a.as_ref(), l.as_ref()).is_err());
    let wide = Mat::<f64>::zeros(2, 3);
    assert!(gsvd_pair(wide.as_ref(), Mat::<f64>::identity(3, 3).as_ref()).is_err());
    let short_rank = Mat::from_fn(2, 3, |_, j| j as f64);
    assert!(gsvd_pair(Mat::<f64>::identity(3, 3).as_ref(), short_rank.as_ref()).is_err());
}

#[test]
fn psi_maximum_closed_form() {
    for &lambda in &[1e-6, 0.01, 0.1, 0.3, 0.49] {
        let PsiMax::Attained { gamma_max, value } = psi_max(lambda).unwrap() else {
            panic!("λ < 1/2 must attain its maximum");
        };
        assert!((psi(gamma_max, lambda).unwrap() - value).abs() <= 1e-10 * value);
        for g in [
            0.5 * gamma_max,
            0.9 * gamma_max,
            1.1 * gamma_max,
            2.0 * gamma_max,
        ] {
            assert!(psi(g, lambda).unwrap() < value);
        }
    }
    assert!(matches!(psi_max(0.5).unwrap(), PsiMax::Unbounded { sup } if sup == 1.0));
    assert!(psi(1e300, 2.0).unwrap() <= 1.0);
    assert!(psi(0.0, 1.0).unwrap() == 0.0);
    assert!(psi(1.0, 0.0).is_err());
    assert!(psi(-1.0, 1.0).is_err());
}

#[test]
fn filter_factors_are_bounded_by_psi() {
    // With μ = (1+γ²)^{-1/2}, each σ/(σ²+λμ²) is exactly ψ(γ,λ).
    let mut r = rng(9);
    let a = random_mat(&mut r, 7, 5);
    let l = ScalingOperator::raw(random_mat(&mut r, 3, 5));
    let f = gsvd_pair(a.as_ref(), l.entries()).unwrap();
    for &lambda in &[1e-3, 0.2, 3.0] {
        let g = gamma_filter(&f, lambda).unwrap();
        let bound = psi_max(lambda).unwrap().value();
        for (gi, (s, m)) in g.iter().zip(f.sigma.iter().zip(&f.mu)) {
            let gamma = s / m;
            assert!((gi - psi(gamma, lambda).unwrap()).abs() < 1e-10 * gi.max(1.0));
            assert!(*gi <= bound * (1.0 + 1e-10));
        }
    }
}

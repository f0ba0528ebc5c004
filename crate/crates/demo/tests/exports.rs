use lmss::gsvd::psi_max;
use lmss_demo::{perfusion_run, psi_curve, synthetic_run};

#[test]
fn psi_curve_stays_below_its_maximum() {
    let c = psi_curve(0.05, -3.0, 3.0, 200).unwrap();
    assert_eq!(c.gamma.len(), 200);
    let cap = psi_max(0.05).unwrap();
    assert_eq!(c.gamma_max, cap.argmax());
    assert!(c.psi.iter().all(|&v| v <= c.psi_max * (1.0 + 1e-12)));
    let peak = c.psi.iter().cloned().fold(0.0, f64::max);
    assert!(peak > 0.99 * c.psi_max);

    let flat = psi_curve(2.0, -2.0, 2.0, 10).unwrap();
    assert_eq!(flat.gamma_max, None);
    assert!(flat.psi.windows(2).all(|w| w[0] <= w[1]));
    assert!(psi_curve(0.1, 1.0, 1.0, 10).is_err());
}

#[test]
fn synthetic_run_reaches_the_solution_set() {
    let r = synthetic_run("circle", "identity", [2.0, 0.5]).unwrap();
    assert_eq!(r.iterates.len(), r.resid_norm.len());
    assert_eq!(r.iterates.len(), r.dist.len());
    let [x, y] = *r.iterates.last().unwrap();
    assert!(((x * x + y * y).sqrt() - 1.0).abs() < 1e-8);
    assert!(r.resid_norm.windows(2).all(|w| w[1] <= w[0]));

    let b = synthetic_run("bilinear", "d1", [1.0, 2.0]).unwrap();
    assert_ne!(b.stop_reason, "line_search_failure");
    assert!(b.iterates.last().unwrap()[0].abs() < 1e-8);
    assert!(synthetic_run("nope", "identity", [0.0, 0.0]).is_err());
    assert!(synthetic_run("circle", "d9", [0.0, 0.0]).is_err());
}

#[test]
fn coarse_perfusion_reconstruction_stops_by_discrepancy() {
    let r = perfusion_run(6, "d2", 1e-3, 1).unwrap();
    assert_eq!(r.estimate.len(), 6 * 7);
    assert_eq!(r.nodes.len(), r.exact.len());
    assert_eq!(r.stop_reason, "discrepancy");
    assert!(r.re.is_finite() && r.re < 1.0);
    assert!(perfusion_run(12, "d2", 1e-3, 1).is_err());
}

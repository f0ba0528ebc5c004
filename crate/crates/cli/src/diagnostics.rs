use std::fmt::Write as _;
use std::io::Write;

use faer::{Col, Mat};
use lmss::gsvd::{gamma_filter, gen_singular_values, gsvd_pair, psi, psi_max, step_norm_bound};
use lmss::linalg::Lu;
use lmss::scaling::{completeness_gamma, ScalingOperator};
use lmss::solver::{lm_step, StepMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{write_file, CliError, CliResult};
use crate::{load_config, Common};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSource {
    /// Row-major `A` (m × n) and `L` (p × n).
    Explicit { a: Vec<Vec<f64>>, l: Vec<Vec<f64>> },
    /// `count` pairs with standard normal entries.
    Random {
        m: usize,
        n: usize,
        p: usize,
        count: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub pairs: PairSource,
    /// Damping values for the filter-factor and step-bound checks.
    pub lambdas: Vec<f64>,
    /// Random `(γ, λ)` samples for the ψ bound.
    #[serde(default = "default_psi_samples")]
    pub psi_samples: usize,
    #[serde(default)]
    pub psi_seed: u64,
}

fn default_name() -> String {
    "diagnostics".into()
}

fn default_psi_samples() -> usize {
    10_000
}

const CONTRACT_TOL: f64 = 1e-10;
const INVERSE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Check {
    pair: String,
    name: &'static str,
    lambda: Option<f64>,
    /// Worst violation measure; the check passes when it is ≤ `tol`.
    value: f64,
    tol: f64,
}

impl Check {
    fn pass(&self) -> bool {
        self.value <= self.tol
    }
}

fn rows_to_mat(rows: &[Vec<f64>], what: &str) -> CliResult<Mat<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::config(format!(
            "{what} must be a non-empty rectangular array"
        )));
    }
    Ok(Mat::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<f64> {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn pairs(src: &PairSource, seed: Option<u64>) -> CliResult<Vec<(Mat<f64>, Mat<f64>)>> {
    match src {
        PairSource::Explicit { a, l } => Ok(vec![(rows_to_mat(a, "a")?, rows_to_mat(l, "l")?)]),
        &PairSource::Random {
            m,
            n,
            p,
            count,
            seed: s,
        } => {
            if !(m >= n && n >= p && p >= 1) || count == 0 {
                return Err(CliError::config(format!(
                    "random pairs need m ≥ n ≥ p ≥ 1 and count ≥ 1, got m={m}, n={n}, p={p}, count={count}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(s));
            Ok((0..count)
                .map(|_| (gaussian(&mut rng, m, n), gaussian(&mut rng, p, n)))
                .collect())
        }
    }
}

fn orthonormality_defect(q: &Mat<f64>) -> f64 {
    let g = q.transpose() * q;
    (&g - Mat::<f64>::identity(g.nrows(), g.ncols())).norm_max()
}

fn max_over(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

fn pair_checks(
    label: &str,
    a: &Mat<f64>,
    l: &Mat<f64>,
    lambdas: &[f64],
    rng: &mut ChaCha8Rng,
) -> CliResult<Vec<Check>> {
    let f = gsvd_pair(a.as_ref(), l.as_ref())?;
    let mut out = Vec::new();
    let mut push = |name, lambda, value: f64, tol| {
        out.push(Check {
            pair: label.to_string(),
            name,
            lambda,
            value: if value.is_nan() { f64::INFINITY } else { value },
            tol,
        })
    };
    let rel = |e: Mat<f64>, m: &Mat<f64>| e.norm_max() / m.norm_max().max(1.0);
    push(
        "reconstruct_a",
        None,
        rel(f.reconstruct_a() - a, a),
        CONTRACT_TOL,
    );
    push(
        "reconstruct_l",
        None,
        rel(f.reconstruct_l() - l, l),
        CONTRACT_TOL,
    );
    push(
        "orthonormal_u",
        None,
        orthonormality_defect(&f.u),
        CONTRACT_TOL,
    );
    push(
        "orthonormal_v",
        None,
        orthonormality_defect(&f.v),
        CONTRACT_TOL,
    );
    let order = max_over(f.sigma.windows(2).map(|w| w[0] - w[1]))
        .max(max_over(f.mu.windows(2).map(|w| w[1] - w[0])));
    push("ordering", None, order, 1e-12);
    let unit = max_over(
        f.sigma
            .iter()
            .zip(&f.mu)
            .map(|(s, m)| (s * s + m * m - 1.0).abs()),
    );
    push("sigma2_plus_mu2", None, unit, CONTRACT_TOL);
    let h = a.transpose() * a + l.transpose() * l;
    let n = h.nrows();
    let inv = Lu::new(h.as_ref())?.solve_mat(Mat::<f64>::identity(n, n).as_ref());
    let xxt = &f.x * f.x.transpose();
    push("xxt_inverse", None, rel(&xxt - &inv, &inv), INVERSE_TOL);

    let gammas = gen_singular_values(&f);
    let scaling = ScalingOperator::raw(l.clone());
    let completeness = completeness_gamma(a.as_ref(), &scaling)?;
    let resid = Col::from_fn(a.nrows(), |_| rng.sample::<f64, _>(StandardNormal));
    for &lambda in lambdas {
        let filt = gamma_filter(&f, lambda)?;
        let mut dev = 0.0_f64;
        for (g, v) in gammas.iter().zip(&filt) {
            dev = dev.max((psi(*g, lambda)? - v).abs() / v.abs().max(1.0));
        }
        push("filter_equals_psi", Some(lambda), dev, CONTRACT_TOL);
        let cap = psi_max(lambda)?.value();
        let over = max_over(filt.iter().map(|v| v / cap - 1.0));
        push("filter_below_psi_max", Some(lambda), over, CONTRACT_TOL);
        let d = lm_step(
            a.as_ref(),
            resid.as_ref(),
            &scaling,
            lambda,
            StepMethod::AugmentedQr,
        )?;
        let d_gsvd = f.lm_direction(lambda, resid.as_ref())?;
        push(
            "gsvd_direction",
            Some(lambda),
            (&d - &d_gsvd).norm_l2() / d.norm_l2().max(f64::MIN_POSITIVE),
            INVERSE_TOL,
        );
        let bound = step_norm_bound(&f, lambda, resid.as_ref(), completeness)?;
        push(
            "step_bound",
            Some(lambda),
            d.norm_l2() / bound - 1.0,
            CONTRACT_TOL,
        );
    }
    Ok(out)
}

/// `ψ ≤ ψ_max` on random samples, and equality at the maximizer when `λ < 1/2`.
fn psi_checks(samples: usize, rng: &mut ChaCha8Rng) -> CliResult<Vec<Check>> {
    let mut over = 0.0_f64;
    let mut attained = 0.0_f64;
    for _ in 0..samples {
        let gamma = 10f64.powf(rng.random_range(-6.0..6.0));
        let lambda = 10f64.powf(rng.random_range(-8.0..2.0));
        let cap = psi_max(lambda)?;
        over = over.max(psi(gamma, lambda)? / cap.value() - 1.0);
        if let Some(g) = cap.argmax() {
            attained = attained.max((psi(g, lambda)? / cap.value() - 1.0).abs());
        }
    }
    let check = |name, value| Check {
        pair: "-".into(),
        name,
        lambda: None,
        value,
        tol: CONTRACT_TOL,
    };
    Ok(vec![
        check("psi_bound", over),
        check("psi_max_attained", attained),
    ])
}

fn render_table(checks: &[Check]) -> String {
    let mut s = format!(
        "{:<8} {:<22} {:>10} {:>12} {:>8}  {}\n",
        "pair", "check", "lambda", "value", "tol", "result"
    );
    for c in checks {
        let lambda = c.lambda.map_or("-".to_string(), |l| format!("{l:.3e}"));
        let _ = writeln!(
            s,
            "{:<8} {:<22} {:>10} {:>12.3e} {:>8.0e}  {}",
            c.pair,
            c.name,
            lambda,
            c.value,
            c.tol,
            if c.pass() { "PASS" } else { "FAIL" }
        );
    }
    s
}

fn render_csv(checks: &[Check]) -> String {
    let mut s = String::from("pair,check,lambda,value,tolerance,pass\n");
    for c in checks {
        let lambda = c.lambda.map_or(String::new(), |l| format!("{l:e}"));
        let _ = writeln!(
            s,
            "{},{},{},{:e},{:e},{}",
            c.pair,
            c.name,
            lambda,
            c.value,
            c.tol,
            c.pass()
        );
    }
    s
}

pub fn run(args: &Common) -> CliResult<()> {
    let cfg: DiagnosticsConfig = load_config(&args.config)?;
    if cfg.lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(CliError::config("lambdas must be finite and positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.unwrap_or(cfg.psi_seed));
    let mut checks = Vec::new();
    for (i, (a, l)) in pairs(&cfg.pairs, args.seed)?.iter().enumerate() {
        if l.ncols() != a.ncols() {
            return Err(CliError::config(format!(
                "A has {} columns, L has {}",
                a.ncols(),
                l.ncols()
            )));
        }
        checks.extend(pair_checks(&i.to_string(), a, l, &cfg.lambdas, &mut rng)?);
    }
    checks.extend(psi_checks(cfg.psi_samples, &mut rng)?);

    let path = args.out.join(&cfg.name).join("diagnostics.csv");
    write_file(&path, render_csv(&checks))?;
    if !args.quiet {
        let _ = std::io::stdout()
            .lock()
            .write_all(render_table(&checks).as_bytes());
    }
    let failed = checks.iter().filter(|c| !c.pass()).count();
    if failed > 0 {
        return Err(CliError::numerical(format!(
            "{failed} of {} checks failed; see {}",
            checks.len(),
            path.display()
        )));
    }
    args.progress(&format!("all {} checks passed", checks.len()));
    Ok(())
}

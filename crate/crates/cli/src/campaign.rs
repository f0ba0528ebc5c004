use std::io::Write;

use lmss::experiments::{
    run_conductivity_campaign, run_perfusion_campaign, ConductivityConfig, ExperimentReport,
    PerfusionConfig,
};

use crate::error::{CliError, CliResult};
use crate::{load_config, Common};

pub fn run_perfusion(args: &Common) -> CliResult<()> {
    let mut cfg: PerfusionConfig = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed_base = seed;
    }
    cfg.validate()?;
    args.progress(&format!(
        "perfusion campaign '{}': {} cells x {} seeds",
        cfg.name,
        cfg.noise_levels.len() * cfg.scalings.len(),
        cfg.seed_count
    ));
    finish(args, run_perfusion_campaign(&cfg)?)
}

pub fn run_conductivity(args: &Common) -> CliResult<()> {
    let mut cfg: ConductivityConfig = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed_base = seed;
    }
    cfg.validate()?;
    args.progress(&format!(
        "conductivity campaign '{}': {} cells x {} seeds",
        cfg.name,
        cfg.noise_levels.len() * cfg.scalings.len(),
        cfg.seed_count
    ));
    finish(args, run_conductivity_campaign(&cfg)?)
}

/// Writes the report and traces; a campaign with any failed seed exits as a numerical
/// failure after everything is on disk.
fn finish(args: &Common, report: ExperimentReport) -> CliResult<()> {
    let dir = report.write(&args.out)?;
    if !args.quiet {
        let _ = std::io::stdout()
            .lock()
            .write_all(report.to_csv().as_bytes());
    }
    args.progress(&format!("wrote {}", dir.display()));
    let failed: usize = report.cells.iter().map(|c| c.n_failed).sum();
    if failed > 0 {
        return Err(CliError::numerical(format!(
            "{failed} seed run(s) failed; see {}",
            dir.join("report.csv").display()
        )));
    }
    Ok(())
}

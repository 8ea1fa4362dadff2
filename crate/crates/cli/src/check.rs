//! The `check` subcommand: executable property checks on the soft QD score.

use softqd::theory::{run_suite, PropertyReport};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn run_checks(cfg: &RunConfig) -> CliResult<Vec<PropertyReport>> {
    Ok(run_suite(cfg.check.seed, &cfg.check.counts())?)
}

pub fn format_reports(reports: &[PropertyReport]) -> String {
    let mut s = format!(
        "{:<20} {:>7} {:>9} {:>14}  status\n",
        "check", "trials", "failures", "worst_margin"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<20} {:>7} {:>9} {:>14.6e}  {}\n",
            r.name,
            r.trials,
            r.failures,
            r.worst_margin,
            if r.passed() { "ok" } else { "FAILED" }
        ));
    }
    s
}

/// Error when any report has failures.
pub fn verdict(reports: &[PropertyReport]) -> CliResult<()> {
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::PropertyFailure(failed.join(", ")))
    }
}

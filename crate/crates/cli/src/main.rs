use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use softqd_cli::check::{format_reports, run_checks, verdict};
use softqd_cli::{experiment, CliError, CliResult, RunConfig, SweepParam};

#[derive(Parser)]
#[command(
    name = "softqd",
    version,
    about = "Soft QD experiments: SQUAD and MAP-Elites baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm for every seed.
    Run(Common),
    /// Repeat the run for each value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// gamma_sq, batch_size, neighbors, population_size or transform_enabled
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Run the property checks.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the configured seeds with this one.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Output directory (overrides out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed_override {
            cfg.seeds = vec![seed];
            cfg.check.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let summary = experiment::run(&cfg, &cfg.out_dir)?;
            let m = &summary.metrics;
            println!(
                "mean_obj {:.4} ± {:.4}  vendi {:.4} ± {:.4}  coverage {:.2} ± {:.2}  qd_score {:.2} ± {:.2}",
                m.mean_obj.mean,
                m.mean_obj.stderr,
                m.vendi.mean,
                m.vendi.stderr,
                m.coverage.mean,
                m.coverage.stderr,
                m.qd_score.mean,
                m.qd_score.stderr
            );
            println!("outputs in {}", cfg.out_dir.display());
        }
        Command::Sweep { common, param, values } => {
            let cfg = common.load()?;
            let param: SweepParam = param.parse()?;
            let values: Vec<String> = values
                .into_iter()
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            let rows = experiment::sweep(&cfg, param, &values, &cfg.out_dir)?;
            println!(
                "{} rows written to {}",
                rows.len(),
                cfg.out_dir.join("sweep.csv").display()
            );
        }
        Command::Check(common) => {
            let cfg = common.load()?;
            let reports = run_checks(&cfg)?;
            print!("{}", format_reports(&reports));
            verdict(&reports)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use transitivity::cli::{self, AnalysisReport, RunConfig, RunOptions, ValidationOptions};
use transitivity::error::Error;

#[derive(Parser)]
#[command(name = "transitivity", version, about = "Bayesian transitivity tests for paired-gamble choice experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the configured worker count.
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the trial manifest.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Manifest path (default: <output_dir>/manifest.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer pending trials, resuming from an existing results file.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        results: Option<PathBuf>,
        /// Stop after this many trials.
        #[arg(long)]
        limit: Option<usize>,
        /// Trials between results-file checkpoints.
        #[arg(long, default_value_t = 2000)]
        checkpoint_every: usize,
        /// Override the configured master seed.
        #[arg(long)]
        master_seed: Option<u64>,
    },
    /// Estimate Bayes factors and write the report tables.
    Analyze {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        results: Option<PathBuf>,
        /// Override `bayes.max_samples`.
        #[arg(long)]
        max_samples: Option<u64>,
        /// Override `bayes.master_seed`.
        #[arg(long)]
        bf_seed: Option<u64>,
    },
    /// Print the tables of an existing report.
    Report {
        /// Path to report.json.
        report: PathBuf,
    },
    /// Run the built-in oracle checks.
    Validate {
        #[arg(long, default_value_t = 2_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 1000)]
        lp_points: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

enum Failure {
    Checks,
    Err(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Err(e)
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Generate { config, out } => {
            let cfg = config.load()?;
            let path = out.unwrap_or_else(|| cfg.manifest_path());
            let s = cli::generate(&cfg, &path)?;
            println!("{} trials written to {}", s.trials, s.path.display());
        }
        Command::Run { config, manifest, results, limit, checkpoint_every, master_seed } => {
            let mut cfg = config.load()?;
            if let Some(s) = master_seed {
                cfg.master_seed = s;
            }
            let defaults = RunOptions::for_config(&cfg);
            let opts = RunOptions {
                manifest: manifest.unwrap_or(defaults.manifest),
                results: results.unwrap_or(defaults.results),
                limit,
                checkpoint_every,
            };
            let s = cli::run(&cfg, &opts)?;
            println!(
                "{} trials: {} already done, {} executed, {} remaining; {} parse failures, {} transport failures",
                s.total, s.already_done, s.executed, s.remaining, s.parse_failures, s.transport_failures
            );
        }
        Command::Analyze { config, results, max_samples, bf_seed } => {
            let mut cfg = config.load()?;
            if let Some(m) = max_samples {
                cfg.bayes.max_samples = m;
                cfg.bayes.batch_size = cfg.bayes.batch_size.min(m);
            }
            if let Some(s) = bf_seed {
                cfg.bayes.master_seed = s;
            }
            cfg.validate()?;
            let results = results.unwrap_or_else(|| cfg.results_path());
            let out = cli::analyze(&cfg, &results, &cfg.output_dir)?;
            print!("{}", out.report.render_text());
            for p in &out.written {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Report { report } => {
            print!("{}", AnalysisReport::load(&report)?.render_text());
        }
        Command::Validate { samples, lp_points, seed } => {
            let r = cli::run_validation(&ValidationOptions { samples, lp_points, seed })?;
            print!("{}", r.render());
            if !r.all_passed() {
                return Err(Failure::Checks);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nsedit::dump::StreamDump;
use nsedit::run::generate;
use nsedit::{load_checkpoint, simulate, verify, ExperimentConfig, Overrides, RunError};
use nsedit_core::StrategyKind;

/// Null-space constrained sequential editing experiments.
#[derive(Debug, Parser)]
#[command(name = "nsedit", version)]
struct Cli {
    /// Write results here instead of the config's output_dir.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Run only this seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Run only this strategy (dynamic, static or identity).
    #[arg(long, global = true)]
    strategy: Option<StrategyKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate streams, run every strategy and write metrics.
    Simulate { config: PathBuf },
    /// Check the editing invariants on the config's first seed.
    Verify { config: PathBuf },
    /// Print the header of a checkpoint file.
    Inspect { checkpoint: PathBuf },
    /// Write the generated stream for one seed as JSON.
    DumpStream {
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, RunError> {
    let mut cfg = ExperimentConfig::load(path)?;
    overrides.apply(&mut cfg);
    Ok(cfg)
}

fn fail(err: &RunError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        output_dir: cli.output_dir,
        seed: cli.seed_override,
        strategy: cli.strategy,
    };
    match cli.command {
        Command::Simulate { config } => {
            let result = load(&config, &overrides).and_then(|cfg| simulate(&cfg).map(|r| (cfg, r)));
            match result {
                Ok((cfg, records)) => {
                    for r in &records {
                        println!(
                            "{} seed {}: efficacy {} generality {} specificity {}",
                            r.strategy, r.seed, r.aggregate.efficacy, r.aggregate.generality, r.aggregate.specificity
                        );
                    }
                    println!("wrote {}", cfg.output_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Verify { config } => match load(&config, &overrides).and_then(|cfg| verify(&cfg)) {
            Ok(report) => {
                for check in &report.checks {
                    println!("{check}");
                }
                for w in &report.warnings {
                    println!("warning: {w}");
                }
                match report.first_failure() {
                    Some(check) => {
                        eprintln!("error: check `{}` failed", check.name);
                        ExitCode::from(4)
                    }
                    None => ExitCode::SUCCESS,
                }
            }
            Err(e) => fail(&e),
        },
        Command::Inspect { checkpoint } => match load_checkpoint(&checkpoint) {
            Ok(state) => {
                println!("d1 {}", state.memory.d1());
                println!("d0 {}", state.memory.d0());
                println!("step {}", state.step);
                println!("count {}", state.accumulator.count);
                println!("nullity {}", state.projection.nullity);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", checkpoint.display());
                ExitCode::from(1)
            }
        },
        Command::DumpStream { config, out } => {
            let result = load(&config, &overrides).and_then(|cfg| {
                let seed = cfg.seeds[0];
                let stream = generate(&cfg, seed)?;
                Ok(StreamDump::new(&cfg.stream.clone().with_seed(seed), &stream))
            });
            let dump = match result {
                Ok(d) => d,
                Err(e) => return fail(&e),
            };
            let text = serde_json::to_string(&dump).expect("stream dump serializes");
            match out {
                Some(path) => {
                    if let Err(e) = fs::write(&path, text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(1);
                    }
                }
                None => println!("{text}"),
            }
            ExitCode::SUCCESS
        }
    }
}

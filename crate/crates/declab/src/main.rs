//! Thin CLI over the harness: run presets or config files, list the
//! registry, regenerate reports from result directories.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use declab::harness::{presets, report_dir, run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "declab", about = "excess-risk decomposition laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named preset or a key=value config file.
    Run {
        /// Preset name, or path to a config file containing `preset=`.
        target: String,
        /// Number of trials (overrides preset/config default).
        #[arg(long)]
        trials: Option<usize>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for CSV (and SVG) artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also emit SVG charts.
        #[arg(long)]
        svg: bool,
        /// Worker threads (0 = default).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List all registered presets.
    ListPresets,
    /// Regenerate report.txt from the CSVs in a results directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> declab::Result<()> {
    match cli.command {
        Command::Run {
            target,
            trials,
            seed,
            out,
            svg,
            threads,
        } => {
            let path = PathBuf::from(&target);
            let mut cfg = if path.is_file() {
                ExperimentConfig::from_config_text(&std::fs::read_to_string(&path)?)?
            } else {
                ExperimentConfig::new(&target)?
            };
            if let Some(t) = trials {
                cfg.apply_override("trials", &t.to_string())?;
            }
            if let Some(s) = seed {
                cfg.apply_override("seed", &s.to_string())?;
            }
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            if svg {
                cfg.emit_svg = true;
            }
            if let Some(t) = threads {
                cfg.apply_override("threads", &t.to_string())?;
            }
            let tab = run_experiment(&cfg)?;
            let text = declab::harness::emit_report(&[tab])?;
            print!("{text}");
            Ok(())
        }
        Command::ListPresets => {
            for p in presets::registry() {
                println!("{:24} {:2} trials  {}", p.name, p.default_trials, p.description);
            }
            Ok(())
        }
        Command::Report { dir } => {
            let text = report_dir(&dir)?;
            print!("{text}");
            Ok(())
        }
    }
}

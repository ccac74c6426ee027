use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scrambler::experiments::{run_experiment, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "scrambler", version, about = "Boundary-scrambling circuit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: fig1c, fig2a, fig2b, stability or concentration.
    Run {
        experiment: String,
        /// Key-value config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { experiment, config, out, threads, seed } = cli.command;
    let run = || -> Result<i32, Box<dyn std::error::Error>> {
        let experiment: Experiment = experiment.parse()?;
        let mut cfg = ExperimentConfig::from_file(&config, Some(experiment))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let bundle = run_experiment(&cfg, threads)?;
        bundle.write(&out)?;
        for s in &bundle.skipped {
            eprintln!("skipped realization {} (seed {}, parameter {}): {}", s.realization, s.seed, s.param, s.reason);
        }
        eprintln!("wrote {} and {}", bundle.series_path(&out).display(), bundle.meta_path(&out).display());
        Ok(bundle.exit_code())
    };
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

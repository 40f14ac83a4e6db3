use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use gaitevo_core::experiment::{self, ExperimentConfig, ReevalOptions};
use gaitevo_core::Genome;

#[derive(Parser)]
#[command(
    name = "gaitevo",
    version,
    about = "Evolve quadruped gaits and leg lengths in a surrogate environment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a complete experiment config with default values.
    Config,
    /// Run every evolution in the matrix, resuming partial runs.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-evaluate front individuals on several surfaces.
    Reevaluate {
        /// Directory written by `evolve`.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Individuals sampled per training surface.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Comma-separated evaluation surfaces.
        #[arg(long, value_delimiter = ',')]
        surfaces: Option<Vec<String>>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compute fronts, hypervolume, significance, distances and densities.
    Analyze {
        #[arg(long)]
        runs: PathBuf,
        /// Re-evaluation table for the surface distance matrix.
        #[arg(long)]
        reeval: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one plotting table per figure from an analysis directory.
    ExportPlots {
        #[arg(long)]
        analysis: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Roll out one genome and write its sensor trace.
    Simulate {
        /// 18 comma-separated values in [0, 1].
        #[arg(long)]
        genome: String,
        #[arg(long, default_value = "A")]
        surface: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Experiment config supplying surfaces and model constants.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Config => print!("{}", ExperimentConfig::default().to_toml()),
        Command::Evolve { config, jobs } => {
            let cfg = ExperimentConfig::load(&config)?;
            let logs = experiment::evolve(&cfg, jobs)?;
            for p in logs {
                println!("{}", p.display());
            }
        }
        Command::Reevaluate {
            runs,
            out,
            seed,
            count,
            repeats,
            surfaces,
            jobs,
        } => {
            let (cfg, loaded) = experiment::load_runs(&runs)?;
            let mut opts = ReevalOptions::from_config(&cfg);
            if let Some(s) = seed {
                opts.seed = s;
            }
            if let Some(c) = count {
                opts.per_surface = c;
            }
            if let Some(r) = repeats {
                opts.repeats = r;
            }
            if let Some(s) = surfaces {
                opts.surfaces = s;
            }
            let rows = experiment::reevaluate(&cfg, &loaded, &opts, jobs)?;
            experiment::store::write_reeval(&out, &rows)?;
            println!("{} evaluations written to {}", rows.len(), out.display());
        }
        Command::Analyze { runs, reeval, out } => {
            experiment::analyze(&runs, reeval.as_deref(), &out)?;
            let summary = std::fs::read_to_string(out.join("summary.txt"))?;
            print!("{summary}");
        }
        Command::ExportPlots { analysis, out } => {
            for p in experiment::export_plots(&analysis, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Simulate {
            genome,
            surface,
            seed,
            config,
            out,
        } => {
            let genome: Genome = genome.parse().context("--genome")?;
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            let outcome =
                experiment::simulate(&genome, &cfg.surface(&surface)?, seed, &cfg.model, &out)?;
            println!("{} ({})", out.display(), outcome.as_str());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

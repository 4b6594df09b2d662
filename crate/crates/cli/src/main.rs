use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use eci_cli::commands::{self, GraphFormat};
use eci_cli::{CliError, MetricsFormat, RunConfig};

#[derive(Parser)]
#[command(name = "eci", version, about = "Push/vote knowledge dissemination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphOut {
    Dot,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a population, run the engine and write artifacts.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Exhaustive minimum-MSRE partition of up to 10 files.
    Oracle {
        /// Population export holding the files.
        #[arg(long)]
        files: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_clusters: usize,
        /// `items.tsv` from a simulation, for comparison.
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Random-push match probability, closed form and Monte-Carlo.
    Baseline {
        #[arg(long, default_value_t = 54)]
        m: usize,
        #[arg(long, default_value_t = 3.178 / 54.0)]
        p_file: f64,
        #[arg(long, default_value_t = 1.543 / 54.0)]
        p_agent: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rebuild the item graph from an event log.
    ExportGraph {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        population: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        t_e: f64,
        #[arg(long, value_enum, default_value = "dot")]
        format: GraphOut,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            format,
        } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let format = format.map(|f| match f {
                Format::Json => MetricsFormat::Json,
                Format::Tsv => MetricsFormat::Tsv,
            });
            commands::simulate(&cfg, format)
        }
        Command::Oracle {
            files,
            max_clusters,
            partition,
        } => commands::oracle(&files, max_clusters, partition.as_deref()),
        Command::Baseline {
            m,
            p_file,
            p_agent,
            trials,
            seed,
        } => commands::baseline(m, p_file, p_agent, trials, seed),
        Command::ExportGraph {
            events,
            population,
            t_e,
            format,
            out,
        } => {
            let format = match format {
                GraphOut::Dot => GraphFormat::Dot,
                GraphOut::Tsv => GraphFormat::Tsv,
            };
            let text = commands::export_graph(&events, &population, t_e, format)?;
            match out {
                Some(p) => {
                    std::fs::write(&p, &text).map_err(|source| CliError::Io {
                        path: p.display().to_string(),
                        source,
                    })?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("eci: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

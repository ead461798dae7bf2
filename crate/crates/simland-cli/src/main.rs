//! simland: train, evaluate, and benchmark similarity-based landmark
//! predictors from the command line.
//!
//! Exit codes: 0 success, 1 config error, 2 data error, 3 numeric failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use simland::bench::{self, ExperimentConfig};
use simland::data::{self, HeaderMode};
use simland::error::Result;
use simland::pipeline::Pipeline;

#[derive(Parser)]
#[command(name = "simland", version, about = "Supervised learning with (indefinite) similarity functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    Csv,
    Plotdata,
}

#[derive(Subcommand)]
enum Command {
    /// Run a landmark-sweep benchmark over random splits.
    Bench {
        /// JSON experiment config; flat keys mirror the config struct.
        #[arg(long)]
        config: PathBuf,
        /// Where to write per-cell records (CSV) or plot data.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Apply the reported-table conventions: data-driven kernel
        /// parameters, 5 splits, 50 landmarks.
        #[arg(long)]
        paper_defaults: bool,
        /// Also write the per-group mean/std summary CSV here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Train one model on a whole dataset and save it with its sidecar.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Model file path; the sidecar lands next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predict with a saved model on a feature-only CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// One prediction per line; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a saved model against a labeled CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => bench::write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench { config, out, format, seed, paper_defaults, summary } => {
            let mut cfg = load_config(&config, seed)?;
            if paper_defaults {
                cfg.apply_paper_defaults();
            }
            let output = bench::run_bench(&cfg)?;
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            let summary_rows = bench::summarize(&output.records);
            match format {
                OutputFormat::Csv => write_or_print(&out, &bench::records_to_csv(&output.records))?,
                OutputFormat::Plotdata => write_or_print(&out, &bench::summary_to_plotdata(&summary_rows))?,
            }
            if let Some(path) = summary {
                bench::write_text(path, &bench::summary_to_csv(&summary_rows))?;
            }
            if out.is_some() {
                // short human-readable recap on stdout
                for row in &summary_rows {
                    println!(
                        "{} {} {} d={} n={} mean={:.6e} std={:.6e}",
                        row.dataset, row.kernel, row.method, row.landmarks, row.n, row.mean, row.std
                    );
                }
            }
            Ok(())
        }
        Command::Train { config, out, seed } => {
            let cfg = load_config(&config, seed)?;
            let pipeline = Pipeline::train(&cfg)?;
            pipeline.save(&out)?;
            println!("wrote {} and its pipeline sidecar", out.display());
            Ok(())
        }
        Command::Predict { model, data, out } => {
            let pipeline = Pipeline::load(&model)?;
            let features = data::load_features_csv(&data, HeaderMode::Auto)?;
            let preds = pipeline.predict(&features)?;
            let mut text = String::new();
            for p in preds {
                text.push_str(&format!("{p}\n"));
            }
            write_or_print(&out, &text)
        }
        Command::Eval { model, data } => {
            let pipeline = Pipeline::load(&model)?;
            for (metric, value) in pipeline.evaluate(&data)? {
                println!("{metric} {value}");
            }
            Ok(())
        }
    }
}

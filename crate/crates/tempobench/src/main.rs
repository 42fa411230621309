use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tempobench::config::{PipelineConfig, SplitConfig};
use tempobench::debias::Grouping;
use tempobench::metrics::Aggregation;
use tempobench::pipeline::{self, DebiasMethod};

#[derive(Parser)]
#[command(name = "tempobench", version, about = "Synthesizes and audits temporally balanced video grounding benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark: annotations, per-video scripts, and a manifest
    Generate {
        /// TOML run configuration
        #[arg(long)]
        config: PathBuf,
        /// Output directory
        #[arg(long, short)]
        out: PathBuf,
        /// Override the configured master seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Audit a dataset for multi-level temporal bias
    Audit {
        /// Dataset JSONL file
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Moments per video (bins = n(n+1)/2)
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Groups smaller than this are excluded from aggregates
        #[arg(long, default_value_t = 10)]
        min_group_size: usize,
        #[arg(long, value_enum, default_value_t = Aggregation::Weighted)]
        aggregation: Aggregation,
    },
    /// Remove records to flatten the temporal distribution
    Debias {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = DebiasMethod::Icgf)]
        method: DebiasMethod,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Maximum removable fraction
        #[arg(long, default_value_t = 0.3)]
        rho: f64,
        #[arg(long, value_enum, default_value_t = Grouping::PerAction)]
        grouping: Grouping,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Assign train/val/test_high/test_low distribution-shift splits
    Split {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        train: f64,
        #[arg(long, default_value_t = 0.1)]
        val: f64,
        #[arg(long, default_value_t = 0.2)]
        test_high: f64,
        /// Long-tail skew exponent for the biased splits
        #[arg(long, default_value_t = 1.5)]
        skew: f64,
        /// Filtering rate used to balance test_low
        #[arg(long, default_value_t = 0.3)]
        rho: f64,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Score a prediction file against a dataset
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// JSONL with {"sample_id", "pred_start", "pred_end"} per line;
        /// sample_id is the zero-based record index in the dataset file
        #[arg(long)]
        predictions: PathBuf,
        /// IoU thresholds for R@1
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.7, 0.9])]
        thresholds: Vec<f64>,
        /// Optional JSON report path (stdout otherwise)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> tempobench::Result<()> {
    match cli.command {
        Command::Generate { config, out, seed } => {
            let mut config = PipelineConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            std::fs::create_dir_all(&out)
                .map_err(|e| tempobench::Error::io(&out, e))?;
            let stats = pipeline::generate(&config, &out)?;
            println!(
                "generated {} annotations over {} videos ({} actions) in {}",
                stats.num_annotations,
                stats.num_videos,
                stats.num_actions,
                out.display()
            );
        }
        Command::Audit {
            dataset,
            out,
            bins,
            min_group_size,
            aggregation,
        } => {
            let summary = pipeline::audit(&dataset, &out, bins, min_group_size, aggregation)?;
            for report in &summary.levels {
                println!(
                    "{:<12} aggregate TJSD {:.4} over {} groups",
                    report.level.as_str(),
                    report.aggregate,
                    report.per_group.len()
                );
            }
        }
        Command::Debias {
            dataset,
            out,
            method,
            bins,
            rho,
            grouping,
            seed,
        } => {
            let result = pipeline::debias(&dataset, &out, method, bins, rho, grouping, seed)?;
            println!(
                "kept {} records, removed {} (objective {:.3})",
                result.kept.len(),
                result.removed.len(),
                result.total_objective_after()
            );
        }
        Command::Split {
            dataset,
            out,
            train,
            val,
            test_high,
            skew,
            rho,
            bins,
            seed,
        } => {
            let config = SplitConfig {
                train,
                val,
                test_high,
                skew,
                rho,
            };
            let summary = pipeline::split(&dataset, &out, &config, bins, seed)?;
            for (split, count) in &summary.counts {
                println!("{split:<12} {count}");
            }
        }
        Command::Eval {
            dataset,
            predictions,
            thresholds,
            out,
        } => {
            let summary = pipeline::evaluate_file(&dataset, &predictions, &thresholds)?;
            match out {
                Some(path) => {
                    pipeline::write_json_report(&summary, &path)?;
                    println!("wrote {}", path.display());
                }
                None => {
                    let json = serde_json::to_string_pretty(&summary).expect("serializable");
                    println!("{json}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::FAILURE
        }
    }
}

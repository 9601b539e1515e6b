use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gtda::config::RunConfig;
use gtda::pipeline;
use gtda::GtdaError;

/// Imbalanced time-series anomaly detection: waveform imaging, cluster-aware
/// oversampling and variance-weighted training.
#[derive(Debug, Parser)]
#[command(name = "gtda", version)]
struct Cli {
    /// Config file (`key = value` lines with `[section]` headers).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for clustering, initialization and shuffling (run.seed).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (run.out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// `section.key=value`, applied after the config file. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render every sample to a PGM image and write the image manifest.
    Rasterize,
    /// Apply cluster-aware oversampling to the training manifest.
    Resample,
    /// Train the classifier; writes a checkpoint and training history.
    Train,
    /// Score the saved checkpoint on the test split.
    Evaluate,
    /// Run the ablation grid over the configured seeds.
    Experiment,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &GtdaError) -> u8 {
    match e {
        GtdaError::Config(_) | GtdaError::InvalidInput(_) => EXIT_CONFIG,
        GtdaError::Numerical(_) | GtdaError::StaleCache { .. } => EXIT_NUMERICAL,
        GtdaError::Parse { .. } | GtdaError::Io { .. } | GtdaError::Data(_) => EXIT_DATA,
    }
}

fn load_config(cli: &Cli) -> gtda::Result<RunConfig> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    if let Some(out) = &cli.out {
        overrides.push(format!("run.out={}", out.display()));
    }
    match &cli.config {
        Some(path) => RunConfig::load(path, &overrides),
        None => RunConfig::parse("", Path::new("<defaults>"), &overrides),
    }
}

fn run(cli: &Cli, config: &RunConfig) -> gtda::Result<()> {
    let out = config.out.as_path();
    match cli.command {
        Command::Rasterize => {
            let s = pipeline::cmd_rasterize(config, out)?;
            println!("wrote {} images; manifest {}", s.rows.len(), s.manifest.display());
        }
        Command::Resample => {
            let s = pipeline::cmd_resample(config, out)?;
            let pos = s.rows.iter().filter(|r| r.label == gtda::data::Label::Positive).count();
            println!(
                "training manifest: {} rows ({} positive, {} negative)",
                s.rows.len(),
                pos,
                s.rows.len() - pos
            );
            if let Some(report) = s.report {
                print!("{report}");
            }
        }
        Command::Train => {
            let s = pipeline::cmd_train(config, out)?;
            if let Some(last) = s.history.last() {
                match &last.metrics {
                    Some(m) => println!("epoch {}: loss {:.5}, test {m}", last.epoch, last.loss),
                    None => println!("epoch {}: loss {:.5}", last.epoch, last.loss),
                }
            }
            println!("checkpoint {}", out.join(pipeline::CHECKPOINT).display());
        }
        Command::Evaluate => {
            let s = pipeline::cmd_evaluate(config, out)?;
            println!("{}\n{}", s.confusion, s.metrics);
        }
        Command::Experiment => {
            let report = pipeline::cmd_experiment(config, out)?;
            print!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(&cli, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

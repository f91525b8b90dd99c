use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seqsmf::io::{read_json, write_json};
use seqsmf::{
    compute_metrics, estimate_with, run_benchmark_with, sample_dataset_with, sample_ground_truth, write_records,
    BenchConfig, ChoiceDataset, Error, Execution, GroundTruth,
};

#[derive(Parser)]
#[command(
    name = "seqsmf",
    version,
    about = "Sequential stochastic matrix factorization of choice data"
)]
struct Cli {
    /// Cap on worker threads. Outputs do not depend on it.
    #[arg(long, global = true, value_name = "T", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw ground-truth factors W and Q and write DIR/truth.json.
    Generate(GenerateArgs),
    /// Sample binned choice frequencies from a ground truth.
    Sample(SampleArgs),
    /// Estimate W and Q from a dataset, scoring against a truth if given.
    Estimate(EstimateArgs),
    /// Run the Monte Carlo sample-size sweep and write a CSV of metrics.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of choices K.
    #[arg(long, value_name = "K")]
    choices: usize,
    /// Number of attributes L.
    #[arg(long, value_name = "L")]
    attributes: usize,
    #[arg(long, value_name = "S")]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_name = "FILE")]
    truth: PathBuf,
    /// Total samples C per message, split evenly over the bins.
    #[arg(long, value_name = "C")]
    samples: usize,
    /// Number of bins N.
    #[arg(long, value_name = "N")]
    bins: usize,
    #[arg(long, value_name = "S")]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Metrics output; defaults to metrics.json next to --out.
    #[arg(long, value_name = "FILE", requires = "truth")]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    if let Some(threads) = cli.threads {
        configure_threads(threads.into());
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: usize) {
    // Only fails if a global pool already exists, which cannot happen here.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_threads: usize) {}

fn run(command: Command) -> Result<(), Error> {
    let exec = Execution::default();
    match command {
        Command::Generate(args) => {
            let truth = sample_ground_truth(args.choices, args.attributes, args.seed)?;
            std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
                path: args.out.clone(),
                source,
            })?;
            write_json(&truth, args.out.join("truth.json"))?;
            println!(
                "K={} L={} M={}",
                truth.choices(),
                truth.attributes(),
                truth.lattice().len()
            );
        }
        Command::Sample(args) => {
            let truth: GroundTruth = read_json(&args.truth)?;
            let data = sample_dataset_with(&truth, args.samples, args.bins, args.seed, exec)?;
            write_json(&data, &args.out)?;
        }
        Command::Estimate(args) => {
            let data: ChoiceDataset = read_json(&args.dataset)?;
            let truth: Option<GroundTruth> = args.truth.as_ref().map(read_json).transpose()?;
            let result = estimate_with(&data, data.lattice(), exec)?;
            write_json(&result, &args.out)?;
            if let Some(truth) = truth {
                let metrics = compute_metrics(&truth, &result, &data)?;
                let path = args.metrics.unwrap_or_else(|| sibling(&args.out, "metrics.json"));
                write_json(&metrics, path)?;
            }
        }
        Command::Bench(args) => {
            let config: BenchConfig = read_json(&args.config)?;
            let records = run_benchmark_with(&config, exec)?;
            write_records(&records, &args.out)?;
        }
    }
    Ok(())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from(name), |dir| dir.join(name))
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pfedsv_core::federation::Algorithm;
use pfedsv_core::harness::{
    describe_idx, resolve_output_root, run_experiment, ExperimentSummary, HarnessError, RunOptions,
};
use pfedsv_core::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "pfedsv",
    version,
    about = "Shapley-value personalized federated learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the algorithm named in the config.
    Run(RunArgs),
    /// Run several algorithms on the same seeds and tabulate final MTA.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated algorithm ids.
        #[arg(long, value_delimiter = ',', required = true)]
        algorithms: Vec<Algorithm>,
    },
    /// Print the shape and class counts of an IDX image/label pair.
    Inspect {
        #[arg(long, num_args = 2, value_names = ["IMAGES", "LABELS"], required = true)]
        idx: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to $PFEDSV_OUTPUT_ROOT/<config name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    repeats: Option<usize>,
    /// Master seed; repeats use seed, seed+1, ...
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(
    args: &RunArgs,
    algorithms: Option<&[Algorithm]>,
) -> Result<ExperimentSummary, HarnessError> {
    let config = ExperimentConfig::from_file(&args.config)?;
    let algorithms = algorithms.map_or_else(|| vec![config.algorithm], <[Algorithm]>::to_vec);
    let options = RunOptions {
        out_dir: resolve_output_root(args.out.as_deref(), &config, &args.config),
        force: args.force,
        repeats: args.repeats,
        seed: args.seed,
    };
    let run = || run_experiment(&config, &algorithms, &options);
    let summary = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Io {
                context: "starting thread pool".into(),
                source: std::io::Error::other(e),
            })?
            .install(run)?,
        None => run()?,
    };
    print_table(&summary, &options.out_dir);
    Ok(summary)
}

fn print_table(summary: &ExperimentSummary, out: &Path) {
    println!(
        "{:<14} {:>7} {:>10} {:>10}",
        "algorithm", "repeats", "mean_mta", "std_mta"
    );
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:.4}", x));
    for a in &summary.algorithms {
        println!(
            "{:<14} {:>7} {:>10} {:>10}",
            a.algorithm.id(),
            a.seeds.len(),
            fmt(a.mean_mta),
            fmt(a.std_mta)
        );
    }
    println!("results written to {}", out.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => execute(args, None).map(drop),
        Command::Compare { run, algorithms } => execute(run, Some(algorithms)).map(drop),
        Command::Inspect { idx } => describe_idx(&idx[0], &idx[1]).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levylab::harness::{self, RunOptions, SuiteConfig, EXIT_CONFIG};
use levylab::Error;

#[derive(Parser)]
#[command(name = "levylab", version, about = "Monte Carlo lab for infinite-dimensional Lévy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a suite config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        samples_scale: f64,
        /// Output directory; falls back to LEVYLAB_OUT, then ./results.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Glob over experiment names.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
        /// Fill the CSV `seconds` column (makes the output non-reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// List the registered operations.
    Ops,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Ops => {
            for name in harness::registry_names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, seed, samples_scale, out, filter, threads, timings } => {
            let opts = RunOptions { seed, samples_scale, filter, timings };
            match run(&config, &opts, out, threads) {
                Ok(code) => ExitCode::from(code as u8),
                Err(e) => {
                    eprintln!("levylab: {e}");
                    let code = if matches!(e, Error::Config(_)) { EXIT_CONFIG } else { 1 };
                    ExitCode::from(code as u8)
                }
            }
        }
    }
}

fn run(config: &std::path::Path, opts: &RunOptions, out: Option<PathBuf>, threads: Option<usize>) -> levylab::Result<i32> {
    let (cfg, text) = SuiteConfig::load(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("threads: {e}")))?;
    let record = pool.install(|| harness::run_suite(&cfg, &text, opts))?;
    let dir = harness::effective_out(out.as_deref());
    let (csv, json) = record.write(&dir)?;
    for e in &record.experiments {
        let status = match e.as_expected {
            Some(true) => "ok",
            Some(false) => "FAILED",
            None => "inconclusive",
        };
        match &e.error {
            Some(err) => println!("{:<32} {status:<12} error: {err}", e.name),
            None => println!("{:<32} {status:<12} {}", e.name, e.verdict.map_or("-".into(), |v| v.to_string())),
        }
    }
    let s = &record.summary;
    println!(
        "{} experiments: {} ok, {} failed, {} inconclusive; wrote {} and {}",
        s.experiments,
        s.passed,
        s.failed,
        s.inconclusive,
        csv.display(),
        json.display()
    );
    Ok(record.exit_code())
}

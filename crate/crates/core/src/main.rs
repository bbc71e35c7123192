use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use avsfe::cli::{benchmark_listing, run, validate_config};

#[derive(Parser)]
#[command(name = "avsfe", version, about = "AVS-FE solver with goal-oriented error estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: AVSFE_THREADS or all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Validate a configuration file without running it.
    Check { config: PathBuf },
    /// List the built-in benchmarks.
    ListBenchmarks,
}

fn init_threads(threads: Option<usize>) {
    let n = threads.or_else(|| std::env::var("AVSFE_THREADS").ok().and_then(|s| s.parse().ok()));
    if let Some(n) = n.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size thread pool: {e}");
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListBenchmarks => {
            print!("{}", benchmark_listing());
            Ok(())
        }
        Command::Check { config } => std::fs::read_to_string(&config)
            .map_err(avsfe::Error::from)
            .and_then(|text| validate_config(&text))
            .map(|cfg| println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"))),
        Command::Run { config, out, threads } => {
            init_threads(threads);
            std::fs::read_to_string(&config).map_err(avsfe::Error::from).and_then(|text| {
                let cfg = validate_config(&text)?;
                let dir = out.unwrap_or_else(|| cfg.output.clone());
                let summary = run(&cfg, &dir)?;
                println!("run {}", summary.run_id);
                for f in summary.files {
                    println!("  {}", f.display());
                }
                Ok(())
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

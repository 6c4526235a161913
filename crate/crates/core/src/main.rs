use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lacsim::cli::{parse_config, run, write_atomic, RunError};

/// Level anti-crossing spectra under field modulation.
#[derive(Debug, Parser)]
#[command(name = "lacsim", version)]
struct Args {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Output CSV; overrides `output` in the config.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(short, long, env = "LACSIM_THREADS", default_value_t = 0)]
    threads: usize,
    /// Report per-point progress on standard error.
    #[arg(short, long)]
    verbose: bool,
}

fn execute(args: &Args) -> Result<usize, RunError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| RunError::Io {
        path: args.config.clone(),
        source,
    })?;
    let config = parse_config(&text)?;
    let output = args
        .output
        .clone()
        .or_else(|| config.output.clone())
        .ok_or(RunError::NoOutput)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .expect("thread pool");
    let result = pool.install(|| run(&config, args.verbose))?;
    write_atomic(&output, &result.csv)?;
    if args.verbose {
        eprintln!("wrote {}", output.display());
    }
    Ok(result.failures)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!(
                "lacsim: {failures} point(s) failed; see the `# failed:` lines in the output"
            );
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("lacsim: {e}");
            ExitCode::from(match e {
                RunError::Config(_) | RunError::NoOutput => 2,
                _ => 1,
            })
        }
    }
}

//! Convergence-study runner.
//!
//! Runs the replicated randomized rule over budgets `n = 2^k`, writes one
//! CSV row per budget, and optionally fits the log-log error slope and
//! renders an SVG. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use gaussquad::experiment::{
    fit_slope, run_convergence_study, run_with_threads, write_csv, write_svg_plot, StudyCutoff,
};
use gaussquad::test_functions::Registry;
use gaussquad::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CutoffArg {
    /// Smoothness-aware cut-off; requires --alpha.
    Alpha,
    /// Smoothness-free cut-off (slowly growing substitute for alpha).
    AlphaFree,
}

#[derive(Debug, Parser)]
#[command(
    name = "gaussquad",
    about = "Randomized truncated trapezoidal quadrature convergence studies"
)]
struct Args {
    /// Integrand id: f1p1, f1p2, f1p3, f2, f3
    #[arg(long)]
    function: String,

    /// Cut-off strategy
    #[arg(long, value_enum)]
    cutoff: CutoffArg,

    /// Smoothness order for --cutoff alpha
    #[arg(long)]
    alpha: Option<u32>,

    /// Tail-balance exponent, strictly in (1/2, 1)
    #[arg(long, default_value_t = 0.51)]
    epsilon: f64,

    /// Smallest budget exponent: n starts at 2^n-min-pow
    #[arg(long = "n-min-pow", default_value_t = 6)]
    n_min_pow: u32,

    /// Largest budget exponent
    #[arg(long = "n-max-pow", default_value_t = 14)]
    n_max_pow: u32,

    /// Independent rule replicates per budget
    #[arg(long, default_value_t = 50)]
    replicates: u32,

    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output CSV path
    #[arg(long)]
    output: PathBuf,

    /// Optional SVG plot path
    #[arg(long)]
    plot: Option<PathBuf>,

    /// Print the fitted log2-log2 slope of mse_estimate to stdout
    #[arg(long)]
    fit: bool,
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var("GAUSSQUAD_THREADS") {
        Err(_) => Ok(None),
        Ok(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|&t| t >= 1)
            .map(Some)
            .ok_or_else(|| format!("GAUSSQUAD_THREADS must be a positive integer, got `{raw}`")),
    }
}

fn run(args: &Args) -> Result<(), Error> {
    let cutoff = match args.cutoff {
        CutoffArg::Alpha => {
            let alpha = args
                .alpha
                .ok_or(Error::AlphaOutOfRange("--cutoff alpha requires --alpha"))?;
            StudyCutoff::Alpha(alpha)
        }
        CutoffArg::AlphaFree => StudyCutoff::AlphaFree,
    };
    let registry = Registry::new()?;
    let records = run_convergence_study(
        &registry,
        &args.function,
        cutoff,
        args.epsilon,
        args.n_min_pow,
        args.n_max_pow,
        args.replicates,
        args.seed,
    )?;
    write_csv(&records, &args.output)?;
    if let Some(plot_path) = &args.plot {
        write_svg_plot(&records, plot_path)?;
    }
    if args.fit {
        let fit = fit_slope(&records)?;
        println!("slope={}", fit.slope);
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    match run_with_threads(threads, || run(&args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_numerical() { 3 } else { 2 })
        }
    }
}

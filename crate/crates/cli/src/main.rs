//! `wavegain`: self tests, gradient checks, impulse and degrees-of-freedom
//! experiments, CIFAR training and cost benchmarks.

mod bench;
mod checks;
mod experiments;
mod run;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use run::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "wavegain", version = run::VERSION, about = "Wavelet-domain gain layers")]
struct Cli {
    /// JSON file with settings; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for every output file [default: wavegain-out/<command>]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruction, adjoint and identity invariants of the transform and layer
    Selftest(checks::SelftestArgs),
    /// Finite-difference and dense-operator gradient checks
    Gradcheck(checks::GradcheckArgs),
    /// Impulse responses of random scale-2 gain layers
    Impulse(experiments::ImpulseArgs),
    /// Degrees of freedom of random scale-2 shapes
    Corrdof(experiments::CorrdofArgs),
    /// Train LeNet or WaveLeNet on CIFAR
    Train(train::TrainArgs),
    /// Evaluate a saved checkpoint
    Eval(train::EvalArgs),
    /// Multiply counts and timings of gain layers against convolutions
    Bench(bench::BenchArgs),
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let g = (cli.config.as_deref(), cli.out_dir, cli.threads);
    match cli.command {
        Command::Selftest(a) => checks::selftest(a, g),
        Command::Gradcheck(a) => checks::gradcheck(a, g),
        Command::Impulse(a) => experiments::impulse(a, g),
        Command::Corrdof(a) => experiments::corrdof(a, g),
        Command::Train(a) => train::train(a, g),
        Command::Eval(a) => train::eval(a, g),
        Command::Bench(a) => bench::bench(a, g),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// `(config file, --out-dir, --threads)`
pub type Globals<'a> = (Option<&'a std::path::Path>, Option<PathBuf>, Option<usize>);

/// Resolves settings and applies the thread count.
pub fn setup<S>(
    command: &str,
    flags: &impl serde::Serialize,
    g: Globals,
) -> CliResult<(S, run::Common)>
where
    S: serde::Serialize + serde::de::DeserializeOwned + Default,
{
    let (settings, common) = run::resolve::<S>(command, g.0, flags, g.1, g.2)?;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    Ok((settings, common))
}

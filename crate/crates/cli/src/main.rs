use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frfkit_cli::commands::{
    self, ConvergenceArgs, FitArgs, KernelChoice, MethodChoice, Points, TargetSpec,
};
use frfkit_cli::io::{emit, read_samples, write_atomic};
use frfkit_cli::model_file::ModelFile;
use frfkit_cli::CliError;

/// Kernel interpolation of frequency response functions.
#[derive(Parser)]
#[command(name = "frfkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to an `omega,re,im` CSV file.
    Fit {
        input: PathBuf,
        /// szego, stable-spline or se-separate.
        #[arg(long, default_value = "szego")]
        kernel: String,
        /// Use the symmetry pseudo-kernel (real impulse response).
        #[arg(long)]
        symmetric: bool,
        /// Select a rational mean by stabilized leave-one-out.
        #[arg(long)]
        hybrid: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model.
    Predict {
        model: PathBuf,
        /// min:max:count
        #[arg(long, conflicts_with = "at", required_unless_present = "at")]
        grid: Option<String>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        at: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// RMSE against the number of equidistant training points.
    Convergence {
        /// szego, szego-rat, aaa, se-separate or chebyshev.
        #[arg(long)]
        method: String,
        /// frat, frat-beta:β, circuit:seed[:dominant] or a CSV file.
        #[arg(long)]
        target: String,
        /// a..b, a..b:step or a comma-separated list.
        #[arg(long)]
        n: String,
        /// min:max; defaults to the target's natural range.
        #[arg(long)]
        range: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        symmetric: bool,
        /// Report the median over this many circuits (seeds seed, seed+1, …).
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a random circuit or training samples of a target.
    Generate(GenerateArgs),
    /// Print the model-selection report of a hybrid model.
    Report { model: PathBuf },
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of random branches.
    #[arg(long, conflicts_with = "samples", required_unless_present = "samples")]
    circuit: Option<usize>,
    /// Target to sample (as for `convergence`).
    #[arg(long)]
    samples: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Append the two lightly damped branches.
    #[arg(long)]
    dominant: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    range: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    ModelFile::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("FRF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("FRF_THREADS: bad value {v:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("FRF_THREADS: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Fit {
            input,
            kernel,
            symmetric,
            hybrid,
            seed,
            out,
        } => {
            let args = FitArgs {
                kernel: kernel.parse::<KernelChoice>()?,
                symmetric,
                hybrid,
                seed,
            };
            let ts = read_samples(&input)?;
            let fitted = commands::fit(&ts, &args)?;
            write_atomic(&out, fitted.file.to_json().as_bytes())?;
            print!("{}", fitted.summary);
        }
        Command::Predict {
            model,
            grid,
            at,
            out,
        } => {
            let model = load_model(&model)?.to_model()?;
            let points = match grid {
                Some(g) => Points::Grid(commands::parse_grid(&g)?),
                None => Points::At(at),
            };
            emit(out.as_deref(), &commands::predict(&model, &points)?)?;
        }
        Command::Convergence {
            method,
            target,
            n,
            range,
            seed,
            symmetric,
            realizations,
            out,
        } => {
            let args = ConvergenceArgs {
                method: method.parse::<MethodChoice>()?,
                target: target.parse::<TargetSpec>()?,
                n_list: commands::parse_n_list(&n)?,
                range: range.as_deref().map(commands::parse_range).transpose()?,
                seed,
                symmetric,
                realizations,
            };
            let result = commands::convergence(&args)?;
            for note in &result.notes {
                eprintln!("note: {note}");
            }
            emit(out.as_deref(), &result.csv)?;
        }
        Command::Generate(g) => {
            let text = match (g.circuit, g.samples) {
                (Some(n), _) => commands::generate_circuit(n, g.seed, g.dominant)?,
                (None, Some(target)) => {
                    let n =
                        g.n.ok_or_else(|| CliError::Input("--samples needs --n".into()))?;
                    let range = g.range.as_deref().map(commands::parse_range).transpose()?;
                    commands::generate_samples(&target.parse()?, n, range)?
                }
                (None, None) => unreachable!("clap enforces one of --circuit/--samples"),
            };
            emit(g.out.as_deref(), &text)?;
        }
        Command::Report { model } => print!("{}", commands::report(&load_model(&model)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

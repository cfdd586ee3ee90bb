use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use eitats::fitting::ModelKind;
use eitats::harness::{exit_code, run, Command, RunOptions};
use eitats::units::mhz;

#[derive(Parser)]
#[command(
    name = "eitats",
    version,
    about = "EIT/ATS spectra of a driven transmon qutrit"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Synthetic spectrum and, with full rates, the steady-state scan
    Simulate(Args),
    /// Fit one spectrum with the exact, EIT or ATS model
    Fit(Args),
    /// AIC weights of the EIT and ATS models for one spectrum
    Discriminate(Args),
    /// AIC weights over a grid of control drives
    Sweep(Args),
    /// Transmon levels and selection-rule table
    Transmon(Args),
    /// Rabi trace and damped-sinusoid fit
    Rabi(Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Exact,
    Eit,
    Ats,
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    model: Option<Model>,
    /// Control drive in MHz (cyclic)
    #[arg(long = "omega-c")]
    omega_c: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Fit(a) => (Command::Fit, a),
        Sub::Discriminate(a) => (Command::Discriminate, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Transmon(a) => (Command::Transmon, a),
        Sub::Rabi(a) => (Command::Rabi, a),
    };
    let opts = RunOptions {
        out_dir: args.out,
        seed: args.seed,
        model: args.model.map(|m| match m {
            Model::Exact => ModelKind::Exact,
            Model::Eit => ModelKind::Eit,
            Model::Ats => ModelKind::Ats,
        }),
        omega_c: args.omega_c.map(mhz),
    };
    let result = run(command, &args.config, &opts);
    match &result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}

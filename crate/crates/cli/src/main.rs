use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nsf_cli::commands::{
    cmd_convergence, cmd_diagnose, cmd_run, cmd_steady, cmd_verify_model, parse_levels,
};
use nsf_cli::{CliError, Options, SimConfig};

#[derive(Parser)]
#[command(
    name = "nsf",
    version,
    about = "Power-law Navier-Stokes-Fourier solver and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the randomized checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Treat warnings as failures.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Time-dependent run with field dumps and diagnostics.
    Run(Common),
    /// Stationary state of the time-independent data.
    Steady(Common),
    /// Randomized check of the stress model's structural assumptions.
    VerifyModel(Common),
    /// Run with every diagnostic enabled; report only.
    Diagnose(Common),
    /// Refinement study over a list of levels.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Levels as `n:dt,n:dt,...`.
        #[arg(long)]
        levels: String,
    },
}

enum Kind {
    Run,
    Steady,
    VerifyModel,
    Diagnose,
    Convergence,
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    let (command, common, levels) = match cmd {
        Command::Convergence { common, levels } => (Kind::Convergence, common, Some(levels)),
        Command::Run(c) => (Kind::Run, c, None),
        Command::Steady(c) => (Kind::Steady, c, None),
        Command::VerifyModel(c) => (Kind::VerifyModel, c, None),
        Command::Diagnose(c) => (Kind::Diagnose, c, None),
    };
    let cfg = SimConfig::from_path(&common.config)?;
    let opts = Options {
        out: common.out,
        seed: common.seed,
        parallel: common.parallel.max(1),
        strict: common.strict,
    };
    match (command, levels) {
        (Kind::Run, _) => cmd_run(&cfg, &opts),
        (Kind::Steady, _) => cmd_steady(&cfg, &opts),
        (Kind::VerifyModel, _) => cmd_verify_model(&cfg, &opts),
        (Kind::Diagnose, _) => cmd_diagnose(&cfg, &opts),
        (Kind::Convergence, Some(levels)) => cmd_convergence(&cfg, &parse_levels(&levels)?, &opts),
        (Kind::Convergence, None) => Err(CliError::Usage("--levels required".into())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use waiter_cli::commands::{cmd_filter, cmd_freqresp, cmd_plan, cmd_simulate, Invocation, Outcome};

#[derive(Parser)]
#[command(name = "waiter", version, about = "Slosh-free and slip-free tray trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a point-to-point motion and write flange poses plus a report.
    Plan(Common),
    /// Smooth and compensate a recorded reference trajectory.
    Filter(Common),
    /// Simulate the planned (or given) motion and issue a PASS/FAIL verdict.
    Simulate(Common),
    /// Tabulate smoother magnitude responses.
    Freqresp(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override numerics.dt.
    #[arg(long)]
    dt: Option<f64>,
    /// Override numerics.seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl From<Common> for Invocation {
    fn from(c: Common) -> Self {
        Invocation { config: c.config, input: c.input, output: c.output, dt: c.dt, seed: c.seed }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WAITER_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, inv): (fn(&Invocation) -> _, Common) = match cli.command {
        Command::Plan(c) => (cmd_plan, c),
        Command::Filter(c) => (cmd_filter, c),
        Command::Simulate(c) => (cmd_simulate, c),
        Command::Freqresp(c) => (cmd_freqresp, c),
    };
    match cmd(&inv.into()) {
        Ok(outcome) => {
            match &outcome {
                Outcome::Pass => println!("PASS"),
                Outcome::Fail(reason) => println!("FAIL: {reason}"),
                Outcome::Done => {}
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("waiter: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

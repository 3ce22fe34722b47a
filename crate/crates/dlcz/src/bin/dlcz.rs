use clap::{Args, Parser, Subcommand};
use dlcz::cli::{execute, load, Command, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dlcz", version, about = "Simulate, analyze and plan heralded optomechanical entanglement runs")]
struct Cli {
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `out` next to the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Subcommand)]
enum Sub {
    /// g² fringe versus the interferometer phase.
    PhaseSweep(Common),
    /// g² versus delay, with the phase-fringe visibility per delay.
    TimeSweep(Common),
    /// Simulated witness run with confidence level.
    Witness(Common),
    /// Heating-dynamics fit to a pump-probe trace.
    PumpProbe(Common),
    /// Device-matching yield across chips.
    PlanYield(Common),
    /// Insertable fiber and integration time.
    PlanFiber(Common),
    /// Witness analysis of an existing tally or click log.
    Analyze(Common),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (cmd, c) = match cli.cmd {
        Sub::PhaseSweep(c) => (Command::PhaseSweep, c),
        Sub::TimeSweep(c) => (Command::TimeSweep, c),
        Sub::Witness(c) => (Command::Witness, c),
        Sub::PumpProbe(c) => (Command::PumpProbe, c),
        Sub::PlanYield(c) => (Command::PlanYield, c),
        Sub::PlanFiber(c) => (Command::PlanFiber, c),
        Sub::Analyze(c) => (Command::Analyze, c),
    };
    let ov = Overrides { seed: c.seed, trials: c.trials, out: c.out };
    let res = load(&c.config, cmd, &ov).and_then(|cfg| execute(cmd, &cfg).map(|o| (cfg, o)));
    match res {
        Ok((cfg, o)) => {
            print!("{}", o.report);
            println!("wrote {}", cfg.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprint!("{e}");
            if !e.to_string().ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

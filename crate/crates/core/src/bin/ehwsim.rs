use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use ehw_recovery::device::{builtin_profiles, load_profiles, DeviceProfile};
use ehw_recovery::ledger::DeadlineBoundary;
use ehw_recovery::scenario::{
    load_scenario, render_device_table, render_report, run_campaign, write_artifacts, BudgetQuery,
    Scenario,
};
use ehw_recovery::time::parse_duration;

/// Exit status for a run that completed but missed its goal.
const EXIT_NOT_MET: u8 = 1;
/// Exit status for bad input.
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "ehwsim",
    version,
    about = "Evolvable-hardware fault recovery simulator with deadline accounting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List device profiles.
    Devices {
        /// Extra profiles from a TOML file of [[device]] tables.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Reconfiguration time of a fixed search plan against a deadline.
    Budget(BudgetArgs),
    /// Run every seed of a scenario and report each run.
    Simulate(RunArgs),
    /// Run every seed of a scenario and report the summary only.
    Campaign {
        #[command(flatten)]
        run: RunArgs,
        /// Run seeds on all cores; results are identical to a serial run.
        #[arg(long)]
        parallel: bool,
    },
}

#[derive(Args)]
struct BudgetArgs {
    /// Device profile name.
    #[arg(long, required_unless_present = "t_program")]
    device: Option<String>,
    /// Programming time per evaluation, instead of a device (bare numbers are ms).
    #[arg(long, conflicts_with = "device")]
    t_program: Option<String>,
    /// Fitness test time per evaluation (bare numbers are ms).
    #[arg(long)]
    t_eval: String,
    #[arg(long)]
    pop: u64,
    #[arg(long)]
    gens: u64,
    /// Recovery deadline (bare numbers are seconds), e.g. 10h.
    #[arg(long)]
    deadline: Option<String>,
    /// Finishing exactly at the deadline counts as late.
    #[arg(long)]
    strict: bool,
    /// Extra profiles from a TOML file of [[device]] tables.
    #[arg(long)]
    profiles: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    scenario: PathBuf,
    /// Directory for CSV artifacts and the text report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only this seed instead of the scenario's list.
    #[arg(long)]
    seed: Option<u64>,
}

fn profiles(extra: Option<&Path>) -> Result<Vec<DeviceProfile>, String> {
    let mut all = builtin_profiles();
    if let Some(path) = extra {
        all.extend(load_profiles(path).map_err(|e| e.to_string())?);
    }
    Ok(all)
}

fn duration(text: &str, default_unit: &str, flag: &str) -> Result<Duration, String> {
    parse_duration(text, default_unit).map_err(|e| format!("--{flag}: {e}"))
}

fn budget(args: BudgetArgs) -> Result<ExitCode, String> {
    let t_eval = duration(&args.t_eval, "ms", "t-eval")?;
    let mut query = match (&args.device, &args.t_program) {
        (Some(name), _) => {
            let all = profiles(args.profiles.as_deref())?;
            let device = all
                .iter()
                .find(|p| p.name().eq_ignore_ascii_case(name))
                .ok_or_else(|| {
                    let known: Vec<&str> = all.iter().map(|p| p.name()).collect();
                    format!("unknown device `{name}` (known: {})", known.join(", "))
                })?;
            BudgetQuery::for_device(device, t_eval, args.pop, args.gens)
        }
        (None, Some(tp)) => BudgetQuery {
            device: None,
            t_program: duration(tp, "ms", "t-program")?,
            t_eval,
            population: args.pop,
            generations: args.gens,
            deadline: None,
            boundary: DeadlineBoundary::Inclusive,
        },
        (None, None) => return Err("either --device or --t-program is required".into()),
    };
    query.deadline = args
        .deadline
        .as_deref()
        .map(|d| duration(d, "s", "deadline"))
        .transpose()?;
    if args.strict {
        query.boundary = DeadlineBoundary::Strict;
    }
    let report = query.analyze().map_err(|e| e.to_string())?;
    print!("{}", report.render());
    Ok(if report.feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_MET)
    })
}

fn load(args: &RunArgs) -> Result<Scenario, String> {
    let mut scenario = load_scenario(&args.scenario).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        scenario.seeds = vec![seed];
    }
    Ok(scenario)
}

fn run(args: RunArgs, parallel: bool, per_seed: bool) -> Result<ExitCode, String> {
    let scenario = load(&args)?;
    let campaign = run_campaign(&scenario, parallel).map_err(|e| e.to_string())?;
    print!("{}", render_report(&scenario, &campaign, per_seed));
    if let Some(dir) = &args.out {
        write_artifacts(&scenario, &campaign, dir).map_err(|e| e.to_string())?;
        println!("artifacts: {}", dir.display());
    }
    Ok(if campaign.report.all_effective() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_MET)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Devices { profiles: extra } => profiles(extra.as_deref()).map(|all| {
            print!("{}", render_device_table(&all));
            ExitCode::SUCCESS
        }),
        Command::Budget(args) => budget(args),
        Command::Simulate(args) => run(args, false, true),
        Command::Campaign {
            run: args,
            parallel,
        } => run(args, parallel, false),
    };
    outcome.unwrap_or_else(|message| {
        eprintln!("error: {message}");
        ExitCode::from(EXIT_ERROR)
    })
}

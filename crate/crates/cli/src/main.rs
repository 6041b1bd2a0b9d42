use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridplan::solver::DEFAULT_ENUMERATION_CAP;
use gridplan_cli::*;

#[derive(Parser)]
#[command(name = "gridplan", version, about = "Storage expansion planning for microgrids under grid outages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TargetArgs {
    /// Planning config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Named outage model from the config's `outage_models` table.
    #[arg(long)]
    model: Option<String>,
    /// Output directory.
    #[arg(long, env = "GRIDPLAN_OUT", default_value = ".")]
    out: PathBuf,
}

impl TargetArgs {
    fn target(self) -> Target {
        Target { config: self.config, model: self.model, out: self.out }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit single and superposed outage models to a CAIDI series.
    Fit {
        /// CSV with header `year,caidi_hours`.
        caidi: PathBuf,
        #[arg(long, default_value = "10")]
        threshold_hours: String,
        #[arg(long, default_value = "1.2")]
        base_frequency: String,
        #[arg(long, default_value = "1")]
        shift_hours: String,
    },
    /// Tabulate expected outage cost over every reachable portfolio.
    Metamodel {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a Q-table against a cost table.
    Train {
        #[command(flatten)]
        target: TargetArgs,
        /// Cost table; defaults to metamodel-<model>.tsv in the output directory.
        #[arg(long)]
        metamodel: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Roll the greedy policy out along a fixed price trajectory.
    Evaluate {
        #[command(flatten)]
        target: TargetArgs,
        /// CSV rows `unit,p1,...,pK`.
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        qtable: Option<PathBuf>,
        #[arg(long)]
        metamodel: Option<PathBuf>,
        /// Skip exact returns above this many reachable states.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        oracle_cap: usize,
        /// Roll out the exact optimal policy (value iteration) instead.
        #[arg(long)]
        optimal: bool,
    },
    /// Compare two policy traces.
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, env = "GRIDPLAN_OUT", default_value = ".")]
        out: PathBuf,
    },
    /// Duration pmf of two outage models as CSV.
    Plotdata {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "GRIDPLAN_OUT", default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value = "single")]
        single: String,
        #[arg(long, default_value = "superposed")]
        superposed: String,
        #[arg(long, default_value_t = 80.0)]
        max_hours: f64,
    },
}

fn run(cli: Cli) -> CliResult<CommandOutput> {
    match cli.command {
        Command::Fit { caidi, threshold_hours, base_frequency, shift_hours } => {
            cmd_fit(&FitArgs { caidi, threshold_hours, base_frequency, shift_hours })
        }
        Command::Metamodel { target, replications, seed } => {
            cmd_metamodel(&MetamodelArgs { target: target.target(), replications, seed })
        }
        Command::Train { target, metamodel, episodes, seed } => {
            cmd_train(&TrainArgs { target: target.target(), metamodel, episodes, seed })
        }
        Command::Evaluate { target, trajectory, qtable, metamodel, oracle_cap, optimal } => cmd_evaluate(&EvaluateArgs {
            target: target.target(),
            qtable,
            metamodel,
            trajectory,
            oracle_cap,
            optimal,
        }),
        Command::Compare { first, second, out } => cmd_compare(&CompareArgs { first, second, out }),
        Command::Plotdata { config, out, single, superposed, max_hours } => {
            cmd_plotdata(&PlotArgs { config, out, single, superposed, max_hours })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}

use clap::{Parser, Subcommand};
use evodyn_cli::commands;

/// Closed-loop evolutionary dynamics: simulation and certification runner.
#[derive(Parser)]
#[command(name = "evodyn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write trajectories, a report, and (n=3) a ternary plot.
    Simulate {
        /// Path to a scenario file, or the name of a bundled scenario.
        config: String,
    },
    /// Run the certification battery for a scenario and write a verdict report.
    Certify {
        /// Path to a scenario file, or the name of a bundled scenario.
        config: String,
        /// Also certify an unweighted replicator rule on its own, outside the
        /// hybrid cone the builder normally enforces.
        #[arg(long)]
        pure_replicator: bool,
    },
    /// List bundled scenarios.
    ListScenarios {
        /// Show per-scenario parameter summaries.
        #[arg(short, long)]
        verbose: bool,
    },
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config } => commands::cmd_simulate(&config),
        Command::Certify {
            config,
            pure_replicator,
        } => commands::cmd_certify(&config, pure_replicator),
        Command::ListScenarios { verbose } => commands::cmd_list_scenarios(verbose),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

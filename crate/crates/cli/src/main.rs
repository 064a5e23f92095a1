use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use passn_lab::recipes::BoundsParams;
use passn_lab::{list_recipes, run_experiment, Ctx, ExperimentConfig, LabError, Report};

#[derive(Parser)]
#[command(name = "passn-lab", version, about = "Pass@N coverage experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the recipe named in a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Root seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List registered recipes.
    ListRecipes,
    /// Print the bound sweep as CSV.
    Bounds {
        #[arg(long, default_value_t = 0.5)]
        p1: f64,
        #[arg(long, default_value_t = 0.25)]
        p2: f64,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 2)]
        n_min: u64,
        #[arg(long, default_value_t = 512)]
        n_max: u64,
    },
}

fn run(cli: Cli) -> Result<(), LabError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let cfg = ExperimentConfig::load(&config)?;
            let threads = Ctx::threads_from_env()?;
            let outcome = run_experiment(&cfg, out.as_deref(), seed, threads)?;
            for f in &outcome.files {
                println!("{}", outcome.output_dir.join(f).display());
            }
        }
        Command::ListRecipes => {
            for r in list_recipes() {
                println!("{:<20} {}  [analogue: {}]", r.name, r.description, r.anchor);
            }
        }
        Command::Bounds {
            p1,
            p2,
            eps,
            k,
            n_min,
            n_max,
        } => {
            let params = BoundsParams {
                p1,
                p2,
                eps,
                k,
                n_min,
                n_max,
            };
            let table = BoundsParams::table(&params.sweep()?);
            let bytes = Report::table_csv(&table)?;
            print!("{}", String::from_utf8_lossy(&bytes));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("passn-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

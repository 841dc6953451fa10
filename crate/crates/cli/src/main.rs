use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use continuum::scenario::{
    compare_runs, format_scalar_table, scalar_demo, track2d_run, write_scalar_csv, FilterKind, ScenarioConfig,
    Variant,
};
use continuum::Error;

#[derive(Parser)]
#[command(name = "continuum", version, about = "Possibilistic and Gaussian filtering scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the scalar width contraction table and write it as CSV.
    ScalarDemo {
        #[arg(long, default_value = "scalar_demo.csv")]
        output: PathBuf,
    },
    /// Run the 2-D tracking scenario.
    Track {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        filter: Option<FilterKind>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Compare two run directories produced by `track`.
    Compare { run_a: PathBuf, run_b: PathBuf },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_FILTER: u8 = 3;

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::SeedMismatch(..) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::FAILURE,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::ScalarDemo { output } => {
            let rows = scalar_demo()?;
            print!("{}", format_scalar_table(&rows));
            write_scalar_csv(&rows, BufWriter::new(File::create(&output)?))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Track {
            config,
            filter,
            variant,
            seed,
            output_dir,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            cfg.filter = filter.unwrap_or(cfg.filter);
            cfg.variant = variant.unwrap_or(cfg.variant);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.output_dir = output_dir.unwrap_or(cfg.output_dir);
            cfg.validate()?;
            let out = track2d_run(&cfg)?;
            let s = &out.summary;
            println!("wrote {}", cfg.output_dir.display());
            println!(
                "steps {}/{}  final error {}  switches {}",
                s.steps_completed,
                s.steps,
                s.final_position_error.map_or("-".into(), |e| format!("{e:.3} m")),
                s.switch_count
            );
            match &s.failure {
                Some(f) => {
                    eprintln!("filter failure at step {}: {}", f.step, f.message);
                    Ok(ExitCode::from(EXIT_FILTER))
                }
                None => Ok(ExitCode::SUCCESS),
            }
        }
        Command::Compare { run_a, run_b } => {
            print!("{}", compare_runs(&run_a, &run_b)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    run(Cli::parse()).unwrap_or_else(fail)
}

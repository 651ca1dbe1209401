use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otdm_core::mzm::{CalibrationOptions, MzmParams};
use otdm_sim::output::write_bundle;
use otdm_sim::scenario::{CombConfig, Mode, SamplerConfig, SamplerKind};
use otdm_sim::sweep::{parse_values, sweep, write_sweep};
use otdm_sim::{CliError, Result, Runner, Scenario};

#[derive(Parser)]
#[command(name = "otdm", version, about = "Nyquist OTDM demultiplexing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run { config: PathBuf },
    /// Run a scenario once per value of a dotted parameter path.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma separated, e.g. `15,20,25`.
        #[arg(long)]
        values: String,
    },
    /// Calibrate a flat comb on the modulator.
    CalibrateComb {
        #[arg(long, default_value_t = 3)]
        lines: usize,
        /// Line spacing in GHz.
        #[arg(long)]
        spacing: f64,
        /// JSON file with modulator parameters.
        #[arg(long)]
        device: Option<PathBuf>,
    },
    /// Check a scenario and print it with defaults filled in.
    Validate { config: PathBuf },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<Scenario> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let s = load(&config, cli.seed)?;
            let bundle = Runner::default().run(&s)?;
            write_bundle(&bundle, &cli.out_dir)?;
            match &bundle.comb {
                Some(c) => print!("{}", c.calibration.table()),
                None => print!("{}", bundle.metrics_table()),
            }
        }
        Command::Sweep { config, param, values } => {
            let s = load(&config, cli.seed)?;
            let points = sweep(&s, &param, &parse_values(&values))?;
            write_sweep(&points, &param, &cli.out_dir)?;
            for p in &points {
                println!("{param} = {}", p.value);
                match &p.bundle.comb {
                    Some(c) => println!(
                        "  flatness {:.4} dB, suppression {:.2} dB, rmse {:.3}%",
                        c.calibration.report.flatness_db, c.calibration.report.sideband_suppression_db, c.rmse_percent
                    ),
                    None => print!("{}", p.bundle.metrics_table()),
                }
            }
        }
        Command::CalibrateComb { lines, spacing, device } => {
            let device = match device {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                    serde_json::from_str::<MzmParams>(&text).map_err(|e| CliError::config("device", e.to_string()))?
                }
                None => MzmParams::default(),
            };
            let s = Scenario {
                mode: Mode::Comb,
                comb: CombConfig {
                    lines,
                    spacing_ghz: spacing,
                    ..CombConfig::default()
                },
                sampler: SamplerConfig {
                    kind: SamplerKind::Mzm,
                    device,
                    calibration: CalibrationOptions::default(),
                },
                ..Scenario::default()
            };
            let bundle = Runner::default().run(&s)?;
            write_bundle(&bundle, &cli.out_dir)?;
            let comb = bundle.comb.as_ref().expect("comb mode");
            print!("{}", comb.calibration.table());
            println!("rmse_percent           {:.4}", comb.rmse_percent);
        }
        Command::Validate { config } => {
            let s = load(&config, cli.seed)?;
            println!("{}", s.to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

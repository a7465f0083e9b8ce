use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use satlae::cli::{parse_scenario, write_channel_dump, write_csv};
use satlae::engine::{
    min_power_experiment, power_sweep, run_table, service_experiment, sweep_policies,
    timescale_experiment, ScenarioConfig, World,
};
use satlae::Result;

#[derive(Parser)]
#[command(
    name = "satlae",
    version,
    about = "Satellite uplink simulator for low-altitude aircraft fleets"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file; defaults to the built-in case study.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the scenario's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-slot metrics of the configured policy.
    Run,
    /// Average sum rate against transmit power.
    SweepPower {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.1,0.5,1,2,5,10,20,50,100"
        )]
        powers: Vec<f64>,
    },
    /// Minimum power reaching each target rate.
    MinPower {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
        targets: Vec<f64>,
    },
    /// Service duration and handovers per receiver variant.
    Service {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8")]
        targets: Vec<f64>,
    },
    /// Two-timescale frames against slot-level, fixed and nadir beams.
    CompareTimescales {
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,300,500")]
        frames: Vec<usize>,
        /// Per-slot trace CSV.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Channel coefficients of one slot.
    DumpChannel {
        #[arg(long, default_value_t = 0)]
        slot: usize,
    },
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let mut config = match &common.scenario {
        Some(path) => {
            let parsed = parse_scenario(path)?;
            for n in &parsed.notices {
                info!("{n}");
            }
            parsed.config
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<()> {
    let config = load(&cli.common)?;
    info!("scenario fingerprint {}", config.fingerprint());
    let mut out = sink(&cli.common.out)?;
    match &cli.command {
        Command::Run => write_csv(&mut out, &run_table(&config)?)?,
        Command::SweepPower { powers } => {
            let result = power_sweep(&config, powers, &sweep_policies(&config))?;
            write_csv(&mut out, &result)?
        }
        Command::MinPower { targets } => {
            write_csv(&mut out, &min_power_experiment(&config, targets)?)?
        }
        Command::Service { targets } => {
            write_csv(&mut out, &service_experiment(&config, targets)?)?
        }
        Command::CompareTimescales { frames, trace_out } => {
            let result = timescale_experiment(&config, frames)?;
            write_csv(&mut out, &result.summary)?;
            match trace_out {
                Some(_) => {
                    let mut t = sink(trace_out)?;
                    write_csv(&mut t, &result.trace)?;
                    t.flush()?;
                }
                None => warn!("no --trace-out given, per-slot trace discarded"),
            }
        }
        Command::DumpChannel { slot } => {
            let world = World::new(config.clone())?;
            let sc = world.slot_channels(&config.policy, *slot)?;
            write_channel_dump(&mut out, *slot, &sc.channels)?
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.common.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => {
                eprintln!("error: cannot start {n} worker threads: {e}");
                return ExitCode::FAILURE;
            }
        },
        None => execute(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hst_ofdm::config::{load_config, Config};
use hst_ofdm::experiment::{position_grid, run, write_outputs, Estimator, ExperimentKind, ExperimentSpec, PilotDesign};
use hst_ofdm::Result;

#[derive(Parser)]
#[command(name = "simcli", version, about = "HST SIMO-OFDM compressed channel estimation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design the low-coherence pilot pattern and compare it with the baselines
    DesignPilot(Common),
    /// Channel estimation NMSE versus SNR
    MseSweep(Common),
    /// Bit error rate versus SNR for one and R receive antennas
    BerSweep(Common),
    /// NMSE versus antenna position along the track
    PositionSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
    },
    /// ICI power of naive versus permuted pilot extraction
    IciCompare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Average-coherence threshold
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Also write an SVG chart
    #[arg(long)]
    svg: bool,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated SNR grid in dB
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    /// Comma-separated estimators: ls, omp, bp, perfect
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    /// Comma-separated pilot designs: equidistant, exhaustive, alg1
    #[arg(long, value_delimiter = ',')]
    designs: Option<Vec<String>>,
    /// Iteration budget of the low-coherence search
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct Grid {
    /// First position (m)
    #[arg(long)]
    from: Option<f64>,
    /// Last position (m), defaults to 2D
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
}

fn build_spec(kind: ExperimentKind, common: &Common, grid: Option<&Grid>) -> Result<ExperimentSpec> {
    let config = match &common.config {
        Some(path) => load_config(&std::fs::read_to_string(path)?)?,
        None => Config::default(),
    };
    let mut spec = ExperimentSpec::from_config(kind, &config)?;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(delta) = common.delta {
        spec.delta = delta;
    }
    if let Some(trials) = common.trials {
        spec.trials = trials;
    }
    if let Some(snr) = &common.snr {
        spec.snr_grid = snr.clone();
    }
    if let Some(list) = &common.estimators {
        spec.estimators = list.iter().map(|s| s.parse::<Estimator>()).collect::<Result<_>>()?;
    }
    if let Some(list) = &common.designs {
        spec.designs = list.iter().map(|s| s.parse::<PilotDesign>()).collect::<Result<_>>()?;
    }
    if let Some(it) = common.iterations {
        spec.iterations = it;
    }
    spec.threads = common.threads;
    if let Some(g) = grid {
        if g.from.is_some() || g.to.is_some() || g.step.is_some() {
            spec.positions = position_grid(
                g.from.unwrap_or(0.0),
                g.to.unwrap_or(spec.params.railway_span_m()),
                g.step.unwrap_or(100.0),
            )?;
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn execute(cli: Cli) -> Result<()> {
    let (kind, common, grid) = match &cli.command {
        Command::DesignPilot(c) => (ExperimentKind::DesignPilot, c, None),
        Command::MseSweep(c) => (ExperimentKind::MseSweep, c, None),
        Command::BerSweep(c) => (ExperimentKind::BerSweep, c, None),
        Command::PositionSweep { common, grid } => (ExperimentKind::PositionSweep, common, Some(grid)),
        Command::IciCompare { common, grid } => (ExperimentKind::IciCompare, common, Some(grid)),
    };
    let spec = build_spec(kind, common, grid)?;
    let output = run(&spec)?;
    for path in write_outputs(&common.out, &spec, &output, common.svg)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

//! Seeded Monte Carlo experiments: MSE, BER, position and ICI sweeps plus
//! pilot design, with CSV as the output contract.

mod output;
mod runner;
mod seed;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::{Config, SystemParams};
use crate::error::{validation, Error, Result};
use crate::pilot::DEFAULT_DELTA;

pub use output::{write_csv, write_outputs, write_pattern, write_svg, write_trace, CSV_HEADER};
pub use runner::{
    design_patterns, run, run_ber_sweep, run_design_pilot, run_ici_compare, run_mse_sweep,
    run_position_sweep, DesignedPattern, RunOutput,
};
pub use seed::{derive_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MseSweep,
    BerSweep,
    PositionSweep,
    IciCompare,
    DesignPilot,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::MseSweep => "mse-sweep",
            ExperimentKind::BerSweep => "ber-sweep",
            ExperimentKind::PositionSweep => "position-sweep",
            ExperimentKind::IciCompare => "ici-compare",
            ExperimentKind::DesignPilot => "design-pilot",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            ExperimentKind::MseSweep,
            ExperimentKind::BerSweep,
            ExperimentKind::PositionSweep,
            ExperimentKind::IciCompare,
            ExperimentKind::DesignPilot,
        ]
        .into_iter()
        .find(|k| k.label() == s)
        .ok_or_else(|| validation(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ls,
    Omp,
    Bp,
    /// True dominant-band channel (BER reference only).
    Perfect,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::Ls => "ls",
            Estimator::Omp => "omp",
            Estimator::Bp => "bp",
            Estimator::Perfect => "perfect",
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" => Ok(Estimator::Ls),
            "omp" => Ok(Estimator::Omp),
            "bp" => Ok(Estimator::Bp),
            "perfect" => Ok(Estimator::Perfect),
            other => Err(validation(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotDesign {
    Equidistant,
    Exhaustive,
    Alg1,
}

impl PilotDesign {
    pub fn label(self) -> &'static str {
        match self {
            PilotDesign::Equidistant => "equidistant",
            PilotDesign::Exhaustive => "exhaustive",
            PilotDesign::Alg1 => "alg1",
        }
    }
}

impl FromStr for PilotDesign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equidistant" => Ok(PilotDesign::Equidistant),
            "exhaustive" => Ok(PilotDesign::Exhaustive),
            "alg1" => Ok(PilotDesign::Alg1),
            other => Err(validation(format!("unknown pilot design '{other}'"))),
        }
    }
}

/// Fully resolved description of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub params: SystemParams,
    pub snr_grid: Vec<f64>,
    /// Front-antenna positions (m from point A).
    pub positions: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub designs: Vec<PilotDesign>,
    /// Leakage values; sweeps other than `ici-compare` use the first.
    pub leakages: Vec<f64>,
    pub delta: f64,
    /// Iteration budget of the low-coherence search.
    pub iterations: usize,
    /// Candidate count of the random-search baseline.
    pub exhaustive_candidates: usize,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// Grid `from, from + step, ...` up to `to`, with `to` appended when the
/// step does not land on it.
pub fn position_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || to < from {
        return Err(validation(format!("invalid position grid {from}:{step}:{to}")));
    }
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let x = from + step * i as f64;
        if x > to + 1e-9 {
            break;
        }
        out.push(x.min(to));
        i += 1;
    }
    if out.last().is_some_and(|last| (to - last).abs() > 1e-9) {
        out.push(to);
    }
    Ok(out)
}

impl ExperimentSpec {
    /// Default experiment of `kind` for a loaded config.
    pub fn from_config(kind: ExperimentKind, config: &Config) -> Result<Self> {
        let params = config.system.clone();
        let sim = &config.sim;
        let all_designs = vec![PilotDesign::Equidistant, PilotDesign::Exhaustive, PilotDesign::Alg1];
        let track = position_grid(0.0, params.railway_span_m(), 100.0)?;
        let (snr_grid, positions, estimators, designs, leakages) = match kind {
            ExperimentKind::MseSweep => (
                sim.snr_db.clone(),
                vec![sim.position_m],
                vec![Estimator::Ls, Estimator::Omp, Estimator::Bp],
                all_designs,
                vec![sim.leakage],
            ),
            ExperimentKind::BerSweep => (
                sim.snr_db.clone(),
                vec![sim.position_m],
                vec![Estimator::Perfect, Estimator::Ls, Estimator::Omp, Estimator::Bp],
                all_designs,
                vec![sim.leakage],
            ),
            ExperimentKind::PositionSweep => (
                vec![15.0, 30.0],
                track,
                vec![Estimator::Bp],
                vec![PilotDesign::Alg1],
                vec![sim.leakage],
            ),
            ExperimentKind::IciCompare => {
                let mut rhos = vec![0.0, 0.01, 0.1, sim.leakage];
                rhos.sort_by(f64::total_cmp);
                rhos.dedup();
                (vec![], track, vec![], vec![PilotDesign::Alg1], rhos)
            }
            ExperimentKind::DesignPilot => (vec![], vec![], vec![], all_designs, vec![0.0]),
        };
        let spec = ExperimentSpec {
            kind,
            params,
            snr_grid,
            positions,
            trials: sim.trials,
            seed: sim.seed,
            estimators,
            designs,
            leakages,
            delta: DEFAULT_DELTA,
            iterations: 200,
            exhaustive_candidates: 200,
            threads: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(validation("trials must be at least 1"));
        }
        let needs_snr = matches!(
            self.kind,
            ExperimentKind::MseSweep | ExperimentKind::BerSweep | ExperimentKind::PositionSweep
        );
        if needs_snr && self.snr_grid.is_empty() {
            return Err(validation("SNR grid must not be empty"));
        }
        if self.kind != ExperimentKind::DesignPilot && self.positions.is_empty() {
            return Err(validation("position grid must not be empty"));
        }
        if self.designs.is_empty() {
            return Err(validation("at least one pilot design is required"));
        }
        let needs_estimators = needs_snr;
        if needs_estimators && self.estimators.is_empty() {
            return Err(validation("at least one estimator is required"));
        }
        if self.leakages.is_empty() || self.leakages.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(validation("leakage values must lie in [0, 1)"));
        }
        crate::pilot::CoherenceParams::new(self.delta)?;
        if !self.iterations.is_multiple_of(self.params.p) {
            return Err(validation(format!(
                "iteration budget {} must be a multiple of P = {}",
                self.iterations, self.params.p
            )));
        }
        if self.exhaustive_candidates == 0 {
            return Err(validation("exhaustive search needs at least one candidate"));
        }
        Ok(())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub snr_db: Option<f64>,
    pub position_m: Option<f64>,
    /// 1-based antenna, 0 for combined or antenna-free metrics.
    pub antenna_id: usize,
    pub estimator: String,
    pub pilot_design: String,
    pub trials: usize,
    pub metric_name: String,
    pub metric_value: f64,
    pub seed: u64,
}

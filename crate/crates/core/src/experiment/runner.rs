use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::seed::{derive_seed, Stream};
use super::{Estimator, ExperimentKind, ExperimentSpec, PilotDesign, ResultRow};
use crate::bem::{channel_matrix, synthesize_coefficients, BemCoefficients, ChannelMatrix};
use crate::config::SystemParams;
use crate::error::{validation, Result};
use crate::geometry::{antenna_positions, doppler_state};
use crate::ici::{
    build_measurement, extract_pilots, ici_power_ratio, naive_extract, receive_pattern, MeasurementSystem,
    PilotPattern,
};
use crate::phy::{apply_channel, assemble_symbol, qam4_demodulate, random_bits, zf_combine, DiagonalEstimate, PILOT_SYMBOL};
use crate::pilot::{design_low_coherence, equidistant_pattern, exhaustive_search, pattern_coherence, TraceEntry};
use crate::sparse::{nmse, omp, reconstruct_channel, BpSolver, LsSolver, OmpStop};

/// A pilot pattern fixed for the run, with its solvers.
#[derive(Debug, Clone)]
pub struct DesignedPattern {
    pub design: PilotDesign,
    pub pattern: PilotPattern,
    pub mu: f64,
    pub measurement: MeasurementSystem,
    pub trace: Vec<TraceEntry>,
    pub initial_mu: f64,
    bp: BpSolver,
    ls: LsSolver,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub designs: Vec<DesignedPattern>,
}

fn design_id(d: PilotDesign) -> u64 {
    match d {
        PilotDesign::Equidistant => 0,
        PilotDesign::Exhaustive => 1,
        PilotDesign::Alg1 => 2,
    }
}

/// Designs every requested pattern once; each design has its own seed.
pub fn design_patterns(spec: &ExperimentSpec) -> Result<Vec<DesignedPattern>> {
    let p = &spec.params;
    spec.designs
        .iter()
        .map(|&design| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, Stream::Design, design_id(design), 0));
            let start = equidistant_pattern(p.k, p.p)?;
            let initial_mu = pattern_coherence(&start, p.l, spec.delta);
            let (pattern, trace) = match design {
                PilotDesign::Equidistant => (start, Vec::new()),
                PilotDesign::Exhaustive => (
                    exhaustive_search(p.k, p.p, p.l, spec.delta, spec.exhaustive_candidates, &mut rng)?,
                    Vec::new(),
                ),
                PilotDesign::Alg1 => {
                    let out = design_low_coherence(&start, p.l, spec.delta, spec.iterations, &mut rng)?;
                    (out.pattern, out.trace)
                }
            };
            let mu = pattern_coherence(&pattern, p.l, spec.delta);
            let measurement = build_measurement(&pattern, &vec![PILOT_SYMBOL; pattern.len()], p)?;
            Ok(DesignedPattern {
                design,
                mu,
                initial_mu,
                trace,
                bp: BpSolver::new(&measurement.a)?,
                ls: LsSolver::new(&measurement.a)?,
                pattern,
                measurement,
            })
        })
        .collect()
}

fn trial_rng(spec: &ExperimentSpec, point: usize, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, Stream::Trial, point as u64, trial as u64))
}

/// Runs `f` for every trial of a grid point; results come back in trial order.
fn run_trials<T, F>(spec: &ExperimentSpec, point: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..spec.trials)
        .into_par_iter()
        .map(|t| f(&mut trial_rng(spec, point, t)))
        .collect()
}

/// Element-wise sum in trial order.
fn sum_columns(per_trial: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; per_trial.first().map_or(0, Vec::len)];
    for row in per_trial {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    acc
}

fn bp_noise_level(p: usize, noise_var: f64) -> f64 {
    1.1 * (p as f64 * noise_var).sqrt()
}

fn estimate(
    dp: &DesignedPattern,
    estimator: Estimator,
    y_obs: &[Complex64],
    noise_var: f64,
    params: &SystemParams,
    truth: &[Complex64],
) -> Result<Vec<Complex64>> {
    Ok(match estimator {
        Estimator::Ls => dp.ls.solve(y_obs)?.c_hat,
        Estimator::Omp => omp(&dp.measurement.a, y_obs, OmpStop::Sparsity(params.s))?.c_hat,
        Estimator::Bp => dp.bp.solve(y_obs, bp_noise_level(y_obs.len(), noise_var))?.c_hat,
        Estimator::Perfect => truth.to_vec(),
    })
}

struct Link {
    coeffs: Vec<BemCoefficients>,
    channels: Vec<ChannelMatrix>,
    bits: Vec<u8>,
    noise: ChaCha8Rng,
}

/// Fresh channel per antenna, data bits, and a noise stream shared by every
/// pilot design of the trial.
fn draw_link(params: &SystemParams, q_stars: &[usize], rho: f64, rng: &mut ChaCha8Rng) -> Result<Link> {
    let coeffs = q_stars
        .iter()
        .map(|&q| synthesize_coefficients(params, q, rho, rng))
        .collect::<Result<Vec<_>>>()?;
    let channels = coeffs
        .iter()
        .map(|c| channel_matrix(c, params))
        .collect::<Result<Vec<_>>>()?;
    let bits = random_bits(2 * (params.k - params.p), rng);
    let noise = ChaCha8Rng::seed_from_u64(rand::Rng::random(rng));
    Ok(Link { coeffs, channels, bits, noise })
}

#[allow(clippy::too_many_arguments)]
fn row(
    spec: &ExperimentSpec,
    snr_db: Option<f64>,
    position_m: Option<f64>,
    antenna_id: usize,
    estimator: &str,
    pilot_design: &str,
    metric_name: &str,
    metric_value: f64,
) -> ResultRow {
    ResultRow {
        experiment: spec.kind.label().to_string(),
        snr_db,
        position_m,
        antenna_id,
        estimator: estimator.to_string(),
        pilot_design: pilot_design.to_string(),
        trials: spec.trials,
        metric_name: metric_name.to_string(),
        metric_value,
        seed: spec.seed,
    }
}

fn with_pool<T: Send>(spec: &ExperimentSpec, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| validation(format!("thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

/// Dispatches on the experiment kind.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutput> {
    spec.validate()?;
    with_pool(spec, || {
        let designs = design_patterns(spec)?;
        let rows = match spec.kind {
            ExperimentKind::MseSweep => mse_rows(spec, &designs)?,
            ExperimentKind::BerSweep => ber_rows(spec, &designs)?,
            ExperimentKind::PositionSweep => position_rows(spec, &designs)?,
            ExperimentKind::IciCompare => ici_rows(spec, &designs)?,
            ExperimentKind::DesignPilot => design_rows(spec, &designs),
        };
        Ok(RunOutput { rows, designs })
    })
}

fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    if spec.kind != kind {
        return Err(validation(format!("spec is for {}, not {kind}", spec.kind)));
    }
    Ok(())
}

pub fn run_mse_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    expect_kind(spec, ExperimentKind::MseSweep)?;
    Ok(run(spec)?.rows)
}

pub fn run_ber_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    expect_kind(spec, ExperimentKind::BerSweep)?;
    Ok(run(spec)?.rows)
}

pub fn run_position_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    expect_kind(spec, ExperimentKind::PositionSweep)?;
    Ok(run(spec)?.rows)
}

pub fn run_ici_compare(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    expect_kind(spec, ExperimentKind::IciCompare)?;
    Ok(run(spec)?.rows)
}

pub fn run_design_pilot(spec: &ExperimentSpec) -> Result<RunOutput> {
    expect_kind(spec, ExperimentKind::DesignPilot)?;
    run(spec)
}

fn mse_rows(spec: &ExperimentSpec, designs: &[DesignedPattern]) -> Result<Vec<ResultRow>> {
    let params = &spec.params;
    let rho = spec.leakages[0];
    let mut rows = Vec::new();
    for (pi, &position) in spec.positions.iter().enumerate() {
        let antennas = antenna_positions(position, params)?;
        let q_stars = antennas
            .iter()
            .map(|a| doppler_state(a.alpha, params).map(|d| d.q_star))
            .collect::<Result<Vec<_>>>()?;
        let receive = designs
            .iter()
            .map(|dp| {
                q_stars
                    .iter()
                    .map(|&q| receive_pattern(&dp.pattern, q, params.q_order))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for (si, &snr) in spec.snr_grid.iter().enumerate() {
            let point = pi * spec.snr_grid.len() + si;
            let per_trial = run_trials(spec, point, |rng| {
                let link = draw_link(params, &q_stars, rho, rng)?;
                let mut out = Vec::with_capacity(designs.len() * q_stars.len() * spec.estimators.len());
                for (di, dp) in designs.iter().enumerate() {
                    let symbol = assemble_symbol(&dp.pattern, &link.bits)?;
                    let received = apply_channel(&symbol.x, &link.channels, Some(snr), &mut link.noise.clone())?;
                    for (ai, rx) in received.iter().enumerate() {
                        let y_obs = extract_pilots(&rx.y, &receive[di][ai]);
                        let truth = link.coeffs[ai].dominant();
                        for &est in &spec.estimators {
                            let c_hat = estimate(dp, est, &y_obs, rx.noise_var, params, truth)?;
                            out.push(nmse(&c_hat, truth)?);
                        }
                    }
                }
                Ok(out)
            })?;
            let sums = sum_columns(&per_trial);
            let mut idx = 0;
            for dp in designs {
                for a in &antennas {
                    for est in &spec.estimators {
                        rows.push(row(
                            spec,
                            Some(snr),
                            Some(position),
                            a.antenna_id,
                            est.label(),
                            dp.design.label(),
                            "nmse",
                            sums[idx] / spec.trials as f64,
                        ));
                        idx += 1;
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn ber_rows(spec: &ExperimentSpec, designs: &[DesignedPattern]) -> Result<Vec<ResultRow>> {
    let params = &spec.params;
    let rho = spec.leakages[0];
    let mut counts = vec![1, params.antennas];
    counts.dedup();
    let mut rows = Vec::new();
    for (pi, &position) in spec.positions.iter().enumerate() {
        let antennas = antenna_positions(position, params)?;
        let q_stars = antennas
            .iter()
            .map(|a| doppler_state(a.alpha, params).map(|d| d.q_star))
            .collect::<Result<Vec<_>>>()?;
        for (si, &snr) in spec.snr_grid.iter().enumerate() {
            let point = pi * spec.snr_grid.len() + si;
            let per_trial = run_trials(spec, point, |rng| {
                let link = draw_link(params, &q_stars, rho, rng)?;
                let mut out = Vec::with_capacity(designs.len() * spec.estimators.len() * counts.len());
                for dp in designs {
                    let symbol = assemble_symbol(&dp.pattern, &link.bits)?;
                    let received = apply_channel(&symbol.x, &link.channels, Some(snr), &mut link.noise.clone())?;
                    let ys: Vec<Vec<Complex64>> = received.iter().map(|r| r.y.clone()).collect();
                    for &est in &spec.estimators {
                        let estimates = received
                            .iter()
                            .enumerate()
                            .map(|(ai, rx)| {
                                let q = q_stars[ai];
                                if est == Estimator::Perfect {
                                    return Ok(DiagonalEstimate::from_channel(&link.channels[ai], q));
                                }
                                let v = receive_pattern(&dp.pattern, q, params.q_order)?;
                                let y_obs = extract_pilots(&rx.y, &v);
                                let c_hat = estimate(dp, est, &y_obs, rx.noise_var, params, link.coeffs[ai].dominant())?;
                                let h = reconstruct_channel(&c_hat, q, params)?;
                                Ok(DiagonalEstimate::from_channel(&h, q))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        for &r in &counts {
                            let eq = zf_combine(&ys[..r], &estimates[..r], &symbol.data_indices)?;
                            let bits = qam4_demodulate(&eq.symbols);
                            let errors = bits.iter().zip(&symbol.bits).filter(|(a, b)| a != b).count();
                            out.push(errors as f64);
                        }
                    }
                }
                Ok(out)
            })?;
            let sums = sum_columns(&per_trial);
            let total_bits = (2 * (params.k - params.p) * spec.trials) as f64;
            let mut idx = 0;
            for dp in designs {
                for est in &spec.estimators {
                    for &r in &counts {
                        rows.push(row(
                            spec,
                            Some(snr),
                            Some(position),
                            0,
                            est.label(),
                            dp.design.label(),
                            &format!("ber_r{r}"),
                            sums[idx] / total_bits,
                        ));
                        idx += 1;
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn position_rows(spec: &ExperimentSpec, designs: &[DesignedPattern]) -> Result<Vec<ResultRow>> {
    let params = &spec.params;
    let rho = spec.leakages[0];
    let mut rows = Vec::new();
    for (pi, &alpha) in spec.positions.iter().enumerate() {
        let state = doppler_state(alpha, params)?;
        rows.push(row(spec, None, Some(alpha), 1, "none", "none", "doppler_hz", state.f_r));
        rows.push(row(spec, None, Some(alpha), 1, "none", "none", "q_star", state.q_star as f64));
        let receive = designs
            .iter()
            .map(|dp| receive_pattern(&dp.pattern, state.q_star, params.q_order))
            .collect::<Result<Vec<_>>>()?;
        for (si, &snr) in spec.snr_grid.iter().enumerate() {
            let point = pi * spec.snr_grid.len() + si;
            let per_trial = run_trials(spec, point, |rng| {
                let link = draw_link(params, &[state.q_star], rho, rng)?;
                let truth = link.coeffs[0].dominant();
                let mut out = Vec::with_capacity(designs.len() * spec.estimators.len() * 2);
                for (di, dp) in designs.iter().enumerate() {
                    let symbol = assemble_symbol(&dp.pattern, &link.bits)?;
                    let oracle = symbol.pilots_only();
                    let full = apply_channel(&symbol.x, &link.channels, Some(snr), &mut link.noise.clone())?;
                    let clean = apply_channel(&oracle.x, &link.channels, Some(snr), &mut link.noise.clone())?;
                    let y_full = extract_pilots(&full[0].y, &receive[di]);
                    let y_clean = extract_pilots(&clean[0].y, &receive[di]);
                    for &est in &spec.estimators {
                        let a = estimate(dp, est, &y_full, full[0].noise_var, params, truth)?;
                        let b = estimate(dp, est, &y_clean, clean[0].noise_var, params, truth)?;
                        out.push(nmse(&a, truth)?);
                        out.push(nmse(&b, truth)?);
                    }
                }
                Ok(out)
            })?;
            let sums = sum_columns(&per_trial);
            let mut idx = 0;
            for dp in designs {
                for est in &spec.estimators {
                    for metric in ["nmse", "nmse_ici_free"] {
                        rows.push(row(
                            spec,
                            Some(snr),
                            Some(alpha),
                            1,
                            est.label(),
                            dp.design.label(),
                            metric,
                            sums[idx] / spec.trials as f64,
                        ));
                        idx += 1;
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn ici_rows(spec: &ExperimentSpec, designs: &[DesignedPattern]) -> Result<Vec<ResultRow>> {
    let params = &spec.params;
    let mut rows = Vec::new();
    for (pi, &alpha) in spec.positions.iter().enumerate() {
        let q_star = doppler_state(alpha, params)?.q_star;
        for (ri, &rho) in spec.leakages.iter().enumerate() {
            let point = pi * spec.leakages.len() + ri;
            let per_trial = run_trials(spec, point, |rng| {
                let link = draw_link(params, &[q_star], rho, rng)?;
                let mut out = Vec::with_capacity(designs.len() * 2);
                for dp in designs {
                    let symbol = assemble_symbol(&dp.pattern, &link.bits)?;
                    let rx = apply_channel(&symbol.x, &link.channels, None, &mut link.noise.clone())?;
                    let clean = dp.measurement.apply(link.coeffs[0].dominant())?;
                    let v = receive_pattern(&dp.pattern, q_star, params.q_order)?;
                    out.push(ici_power_ratio(&extract_pilots(&rx[0].y, &v), &clean));
                    out.push(ici_power_ratio(&naive_extract(&rx[0].y, &dp.pattern), &clean));
                }
                Ok(out)
            })?;
            let sums = sum_columns(&per_trial);
            let metric = format!("ici_power_ratio@rho={rho}");
            let mut idx = 0;
            for dp in designs {
                for method in ["permuted", "naive"] {
                    rows.push(row(
                        spec,
                        None,
                        Some(alpha),
                        1,
                        method,
                        dp.design.label(),
                        &metric,
                        sums[idx] / spec.trials as f64,
                    ));
                    idx += 1;
                }
            }
        }
    }
    Ok(rows)
}

fn design_rows(spec: &ExperimentSpec, designs: &[DesignedPattern]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for dp in designs {
        if dp.design == PilotDesign::Alg1 {
            rows.push(row(spec, None, None, 0, "none", dp.design.label(), "avg_coherence_initial", dp.initial_mu));
        }
        rows.push(row(spec, None, None, 0, "none", dp.design.label(), "avg_coherence", dp.mu));
    }
    rows
}

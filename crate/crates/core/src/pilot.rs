//! Average-coherence metric and pilot pattern search.
//!
//! The search objective is `μ_δ{F_L(w, :)}`: it depends on the pattern, `K`
//! and `L` only, never on Doppler, position, or antenna count, so one
//! pattern serves every antenna along the whole track.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::dft::twiddle;
use crate::error::{validation, Result};
use crate::ici::PilotPattern;

pub const DEFAULT_DELTA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceParams {
    pub delta: f64,
}

impl CoherenceParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(validation(format!("coherence threshold delta = {delta} must lie in (0, 1)")));
        }
        Ok(CoherenceParams { delta })
    }
}

impl Default for CoherenceParams {
    fn default() -> Self {
        CoherenceParams { delta: DEFAULT_DELTA }
    }
}

/// Mean of the absolute normalized column inner products that reach `delta`.
/// Returns 0 when no pair reaches it.
pub fn average_coherence(m: &DMatrix<Complex64>, delta: f64) -> Result<f64> {
    let mut cols = Vec::with_capacity(m.ncols());
    for (j, col) in m.column_iter().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(validation(format!("column {j} is zero")));
        }
        cols.push(col / Complex64::new(norm, 0.0));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            let g = cols[i].dotc(&cols[j]).norm();
            if g >= delta {
                sum += g;
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// `F_L(w, :)` for a pattern, unit pilots.
pub fn partial_fourier(pattern: &PilotPattern, l: usize) -> DMatrix<Complex64> {
    let w = pattern.indices();
    DMatrix::from_fn(w.len(), l, |p, t| twiddle(w[p], t, pattern.k()))
}

/// `μ_δ{F_L(w, :)}` through the lag structure of partial Fourier columns:
/// columns `i < j` have normalized inner product magnitude
/// `|Σ_p exp(-j 2π w_p (j - i) / K)| / P`, shared by `L - (j - i)` pairs.
pub fn pattern_coherence(pattern: &PilotPattern, l: usize, delta: f64) -> f64 {
    let (k, p) = (pattern.k(), pattern.len() as f64);
    let (mut sum, mut count) = (0.0, 0usize);
    for lag in 1..l {
        let s: Complex64 = pattern.indices().iter().map(|&w| twiddle(w, lag, k)).sum();
        let g = s.norm() / p;
        if g >= delta {
            let pairs = l - lag;
            sum += g * pairs as f64;
            count += pairs;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Replaces entry `index` of the (sorted) pattern with a uniformly drawn
/// subcarrier not already in it.
pub fn perturb<R: Rng + ?Sized>(pattern: &PilotPattern, index: usize, rng: &mut R) -> Result<PilotPattern> {
    let (k, p) = (pattern.k(), pattern.len());
    if index >= p {
        return Err(validation(format!("perturbation index {index} outside [0, {p})")));
    }
    if p >= k {
        return Err(validation("no free subcarrier to move a pilot to"));
    }
    let pick = rng.random_range(0..k - p);
    let replacement = pattern
        .data_indices()
        .into_iter()
        .nth(pick)
        .expect("free subcarrier count is K - P");
    let mut w = pattern.indices().to_vec();
    w[index] = replacement;
    PilotPattern::new(k, w)
}

/// Uniformly random valid pattern with `p` pilots.
pub fn random_pattern<R: Rng + ?Sized>(k: usize, p: usize, rng: &mut R) -> Result<PilotPattern> {
    if p == 0 || p > k {
        return Err(validation(format!("cannot place {p} pilots on {k} subcarriers")));
    }
    PilotPattern::new(k, sample(rng, k, p).into_vec())
}

/// `w[p] = floor(p K / P)`.
pub fn equidistant_pattern(k: usize, p: usize) -> Result<PilotPattern> {
    if p == 0 || p > k {
        return Err(validation(format!("cannot place {p} pilots on {k} subcarriers")));
    }
    PilotPattern::new(k, (0..p).map(|i| i * k / p).collect())
}

/// Best of `n_candidates` uniformly random patterns.
pub fn exhaustive_search<R: Rng + ?Sized>(
    k: usize,
    p: usize,
    l: usize,
    delta: f64,
    n_candidates: usize,
    rng: &mut R,
) -> Result<PilotPattern> {
    if n_candidates == 0 {
        return Err(validation("exhaustive search needs at least one candidate"));
    }
    let mut best: Option<(f64, PilotPattern)> = None;
    for _ in 0..n_candidates {
        let cand = random_pattern(k, p, rng)?;
        let mu = pattern_coherence(&cand, l, delta);
        if best.as_ref().is_none_or(|(b, _)| mu < *b) {
            best = Some((mu, cand));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

/// One recorded step of the low-coherence search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub m: usize,
    /// Coherence of the accepted pattern after this step.
    pub mu: f64,
    pub accepted: bool,
    /// Coherence of the currently selected (most occupied) pattern.
    pub best_mu: f64,
}

/// Stochastic-approximation state of the low-coherence search.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    /// Occupation probabilities over visited states 0..=Iter.
    pub gamma: Vec<f64>,
    pub current: PilotPattern,
    pub best: PilotPattern,
    /// State index of the last accepted pattern.
    pub kappa: usize,
    /// State index of the selected pattern.
    pub iota: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub pattern: PilotPattern,
    pub mu: f64,
    pub initial_mu: f64,
    pub trace: Vec<TraceEntry>,
    pub state: OptimizerState,
}

/// Low-coherence pilot pattern design.
///
/// For `m = n P + k` the `k`-th pilot of the accepted pattern is moved to a
/// random free subcarrier; the move is kept only if it strictly lowers the
/// coherence. Occupation probabilities follow
/// `Γ[m+1] = Γ[m] + (U_κ − Γ[m]) / (m + 1)` with `U_κ` the indicator of the
/// currently occupied state, and the output is the most occupied state
/// (ties go to the most recent one).
pub fn design_low_coherence<R: Rng + ?Sized>(
    w0: &PilotPattern,
    l: usize,
    delta: f64,
    iterations: usize,
    rng: &mut R,
) -> Result<DesignOutcome> {
    let p = w0.len();
    if !iterations.is_multiple_of(p) {
        return Err(validation(format!(
            "iteration budget {iterations} is not a multiple of P = {p}"
        )));
    }
    CoherenceParams::new(delta)?;
    let rounds = iterations / p;
    let mut gamma = vec![0.0; iterations + 1];
    gamma[0] = 1.0;
    let mut state = OptimizerState {
        gamma,
        current: w0.clone(),
        best: w0.clone(),
        kappa: 0,
        iota: 0,
        m: 0,
    };
    let initial_mu = pattern_coherence(w0, l, delta);
    let mut current_mu = initial_mu;
    let mut best_mu = initial_mu;
    let mut trace = Vec::with_capacity(iterations);

    for n in 0..rounds {
        for k in 0..p {
            let m = n * p + k;
            let candidate = perturb(&state.current, k, rng)?;
            let cand_mu = pattern_coherence(&candidate, l, delta);
            let accepted = cand_mu < current_mu;
            if accepted {
                state.current = candidate;
                current_mu = cand_mu;
                state.kappa = m + 1;
            }

            let eta = 1.0 / (m + 1) as f64;
            for (idx, g) in state.gamma.iter_mut().enumerate() {
                let target = if idx == state.kappa { 1.0 } else { 0.0 };
                *g += eta * (target - *g);
            }
            if state.gamma[state.kappa] >= state.gamma[state.iota] {
                state.best = state.current.clone();
                state.iota = state.kappa;
                best_mu = current_mu;
            }
            state.m = m + 1;
            trace.push(TraceEntry { m, mu: current_mu, accepted, best_mu });
        }
    }
    Ok(DesignOutcome {
        pattern: state.best.clone(),
        mu: best_mu,
        initial_mu,
        trace,
        state,
    })
}

//! Physical and OFDM parameters of the high-speed-train link, plus the
//! structured text config that feeds the simulator.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// Propagation speed used for every Doppler computation (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Every physical and OFDM constant of the link, with derived quantities.
///
/// Construct with [`SystemParams::default`] (the reference HST scenario) and
/// adjust raw fields, then call [`SystemParams::derive`]. Derived fields are
/// only meaningful on a value returned by `derive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Subcarrier count K.
    pub k: usize,
    /// Pilot count P.
    pub p: usize,
    /// Channel tap count L.
    pub l: usize,
    /// Dominant tap count S.
    pub s: usize,
    /// Carrier frequency (Hz).
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// Packet duration T (s).
    pub packet_duration_s: f64,
    /// Train speed (m/s).
    pub speed_mps: f64,
    /// Max BS-railway distance (m).
    pub d_max_m: f64,
    /// Min BS-railway distance (m).
    pub d_min_m: f64,
    pub bs_range_m: f64,
    pub train_length_m: f64,
    /// Receive antenna count R.
    pub antennas: usize,
    /// Dominance power threshold, relative to the peak coefficient power.
    pub gamma: f64,

    /// Maximum Doppler shift (Hz).
    pub f_max: f64,
    /// BEM order bound Q (always even).
    pub q_order: usize,
    /// Normalized Doppler T·f_max.
    pub f_norm: f64,
    /// Half railway span inside the cell (m).
    pub half_span_m: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            k: 512,
            p: 40,
            l: 64,
            s: 5,
            carrier_hz: 2.35e9,
            bandwidth_hz: 5e6,
            packet_duration_s: 1.2e-3,
            speed_mps: kmh_to_mps(500.0),
            d_max_m: 1000.0,
            d_min_m: 40.0,
            bs_range_m: 1000.0,
            train_length_m: 200.0,
            antennas: 2,
            gamma: 0.01,
            f_max: 0.0,
            q_order: 0,
            f_norm: 0.0,
            half_span_m: 0.0,
        }
        .derive()
        .expect("default parameters are valid")
    }
}

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

impl SystemParams {
    /// Validates raw fields and recomputes every derived quantity.
    pub fn derive(mut self) -> Result<Self> {
        self.validate_raw()?;
        self.f_max = self.speed_mps / SPEED_OF_LIGHT * self.carrier_hz;
        self.f_norm = self.packet_duration_s * self.f_max;
        self.q_order = 2 * self.f_norm.ceil() as usize;
        self.half_span_m = (self.d_max_m.powi(2) - self.d_min_m.powi(2)).sqrt();
        if self.q_order >= self.k {
            return Err(validation(format!(
                "BEM order Q = {} must be smaller than K = {}",
                self.q_order, self.k
            )));
        }
        Ok(self)
    }

    fn validate_raw(&self) -> Result<()> {
        if self.p == 0 || self.p >= self.k {
            return Err(validation(format!(
                "pilot count P = {} must satisfy 0 < P < K = {}",
                self.p, self.k
            )));
        }
        if self.s == 0 || self.s > self.l {
            return Err(validation(format!(
                "dominant tap count S = {} must satisfy 0 < S <= L = {}",
                self.s, self.l
            )));
        }
        if self.l >= self.k {
            return Err(validation(format!(
                "tap count L = {} must be smaller than K = {}",
                self.l, self.k
            )));
        }
        if !(self.d_min_m >= 0.0 && self.d_min_m < self.d_max_m) {
            return Err(validation(format!(
                "D_min = {} m must be non-negative and below D_max = {} m",
                self.d_min_m, self.d_max_m
            )));
        }
        if !(self.speed_mps >= 0.0 && self.speed_mps.is_finite()) {
            return Err(validation(format!(
                "train speed {} m/s must be finite and non-negative",
                self.speed_mps
            )));
        }
        if !(self.carrier_hz > 0.0 && self.packet_duration_s > 0.0) {
            return Err(validation("carrier frequency and packet duration must be positive"));
        }
        if self.antennas == 0 {
            return Err(validation("at least one receive antenna is required"));
        }
        if self.train_length_m < 0.0 {
            return Err(validation("train length must be non-negative"));
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(validation("dominance threshold gamma must be positive"));
        }
        Ok(())
    }

    /// Number of stacked BEM coefficients L(Q+1).
    pub fn coefficient_len(&self) -> usize {
        self.l * (self.q_order + 1)
    }

    /// Zero-Doppler centre index Q/2.
    pub fn center_index(&self) -> usize {
        self.q_order / 2
    }

    pub fn default_cp_len(&self) -> usize {
        self.l
    }

    pub fn railway_span_m(&self) -> f64 {
        2.0 * self.half_span_m
    }
}

/// `snr_db` accepts either one value or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrSetting {
    Single(f64),
    Grid(Vec<f64>),
}

impl SnrSetting {
    pub fn values(&self) -> Vec<f64> {
        match self {
            SnrSetting::Single(v) => vec![*v],
            SnrSetting::Grid(v) => v.clone(),
        }
    }
}

/// Monte Carlo settings from the `[sim]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub trials: usize,
    pub seed: u64,
    pub snr_db: Vec<f64>,
    pub leakage: f64,
    /// Reported train position (front antenna), m from point A.
    pub position_m: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            trials: 200,
            seed: 1,
            snr_db: (0..=8).map(|i| 5.0 * i as f64).collect(),
            leakage: 0.0,
            position_m: 200.0,
        }
    }
}

/// Resolved configuration: derived system parameters and simulation settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub system: SystemParams,
    pub sim: SimSettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    radio: RawRadio,
    #[serde(default)]
    geometry: RawGeometry,
    #[serde(default)]
    sim: RawSim,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    k: Option<usize>,
    p: Option<usize>,
    l: Option<usize>,
    s: Option<usize>,
    gamma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRadio {
    carrier_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
    packet_duration_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    d_max_m: Option<f64>,
    d_min_m: Option<f64>,
    bs_range_m: Option<f64>,
    train_length_m: Option<f64>,
    speed_kmh: Option<f64>,
    antennas: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    trials: Option<usize>,
    seed: Option<u64>,
    snr_db: Option<SnrSetting>,
    leakage: Option<f64>,
    position_m: Option<f64>,
}

/// Parses a TOML config document. Missing keys take the reference defaults.
pub fn load_config(text: &str) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut system = SystemParams::default();
    let RawSystem { k, p, l, s, gamma } = raw.system;
    if let Some(v) = k {
        system.k = v;
    }
    if let Some(v) = p {
        system.p = v;
    }
    if let Some(v) = l {
        system.l = v;
    }
    if let Some(v) = s {
        system.s = v;
    }
    if let Some(v) = gamma {
        system.gamma = v;
    }
    if let Some(v) = raw.radio.carrier_hz {
        system.carrier_hz = v;
    }
    if let Some(v) = raw.radio.bandwidth_hz {
        system.bandwidth_hz = v;
    }
    if let Some(v) = raw.radio.packet_duration_s {
        system.packet_duration_s = v;
    }
    let g = raw.geometry;
    if let Some(v) = g.d_max_m {
        system.d_max_m = v;
    }
    if let Some(v) = g.d_min_m {
        system.d_min_m = v;
    }
    if let Some(v) = g.bs_range_m {
        system.bs_range_m = v;
    }
    if let Some(v) = g.train_length_m {
        system.train_length_m = v;
    }
    if let Some(v) = g.speed_kmh {
        system.speed_mps = kmh_to_mps(v);
    }
    if let Some(v) = g.antennas {
        system.antennas = v;
    }
    let system = system.derive()?;

    let mut sim = SimSettings::default();
    if let Some(v) = raw.sim.trials {
        sim.trials = v;
    }
    if let Some(v) = raw.sim.seed {
        sim.seed = v;
    }
    if let Some(v) = raw.sim.snr_db {
        sim.snr_db = v.values();
    }
    if let Some(v) = raw.sim.leakage {
        sim.leakage = v;
    }
    if let Some(v) = raw.sim.position_m {
        sim.position_m = v;
    }
    if sim.trials == 0 {
        return Err(validation("trials must be at least 1"));
    }
    if sim.snr_db.is_empty() {
        return Err(validation("snr_db grid must not be empty"));
    }
    if !(0.0..1.0).contains(&sim.leakage) {
        return Err(validation(format!("leakage {} must lie in [0, 1)", sim.leakage)));
    }
    Ok(Config { system, sim })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults_give_reference_doppler() {
        let p = SystemParams::default();
        assert!((p.f_max - 1087.0).abs() < 2.0, "f_max = {}", p.f_max);
        assert_eq!(p.q_order, 4);
        assert!((p.f_norm - 1.3056).abs() < 1e-3);
        assert!((p.half_span_m - (1000f64.powi(2) - 40f64.powi(2)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_speed_is_zero_doppler() {
        let p = SystemParams {
            speed_mps: 0.0,
            ..SystemParams::default()
        }
        .derive()
        .unwrap();
        assert_eq!(p.f_max, 0.0);
        assert_eq!(p.q_order, 0);
        assert_eq!(p.f_norm, 0.0);
    }

    #[test]
    fn rejects_inconsistent_raw_fields() {
        let base = SystemParams::default();
        let bad = [
            SystemParams { p: 512, ..base.clone() },
            SystemParams { s: 65, ..base.clone() },
            SystemParams { d_min_m: 1000.0, ..base.clone() },
        ];
        for b in bad {
            assert!(matches!(b.derive(), Err(Error::Validation(_))));
        }
    }

    #[test]
    fn derive_is_idempotent() {
        let once = SystemParams::default();
        let twice = once.clone().derive().unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn f_max_monotone_in_speed_and_carrier() {
        let base = SystemParams::default();
        let mut prev = -1.0;
        for kmh in [0.0, 100.0, 250.0, 350.0, 500.0, 600.0] {
            let p = SystemParams { speed_mps: kmh_to_mps(kmh), ..base.clone() }.derive().unwrap();
            assert!(p.f_max > prev);
            prev = p.f_max;
        }
        let lo = SystemParams { carrier_hz: 0.9e9, ..base.clone() }.derive().unwrap();
        assert!(lo.f_max < base.f_max);
    }

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = load_config("").unwrap();
        assert_eq!(cfg.system, SystemParams::default());
        assert_eq!(cfg.sim, SimSettings::default());
    }

    #[test]
    fn zero_speed_config() {
        let cfg = load_config("[geometry]\nspeed_kmh = 0\n").unwrap();
        assert_eq!(cfg.system.f_max, 0.0);
        assert_eq!(cfg.system.q_order, 0);
    }

    #[test]
    fn small_instance_accepted() {
        let cfg = load_config("[system]\nk = 64\np = 8\nl = 8\n").unwrap();
        assert_eq!((cfg.system.k, cfg.system.p, cfg.system.l), (64, 8, 8));
    }

    #[test]
    fn parse_error_reports_line() {
        let err = load_config("[system]\nk = 64\np = = 8\n").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_error_surfaces_from_config() {
        let err = load_config("[system]\nk = 32\np = 40\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn snr_accepts_scalar_or_list() {
        let a = load_config("[sim]\nsnr_db = 15\n").unwrap();
        assert_eq!(a.sim.snr_db, vec![15.0]);
        let b = load_config("[sim]\nsnr_db = 15.0\n").unwrap();
        assert_eq!(b.sim.snr_db, vec![15.0]);
        let c = load_config("[sim]\nsnr_db = [10.0, 20.0]\ntrials = 3\nseed = 9\n").unwrap();
        assert_eq!(c.sim.snr_db, vec![10.0, 20.0]);
        assert_eq!((c.sim.trials, c.sim.seed), (3, 9));
    }
}

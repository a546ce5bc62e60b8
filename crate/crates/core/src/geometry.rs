//! Train position to Doppler shift and dominant BEM index.
//!
//! Positions `alpha` are measured along the railway from point A (cell
//! entry) through B (closest approach to the BS, `alpha = D`) to C
//! (`alpha = 2D`).

use crate::config::SystemParams;
use crate::error::{out_of_range, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPosition {
    /// Distance from point A along the railway (m).
    pub alpha: f64,
    /// 1-based antenna index.
    pub antenna_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerState {
    /// Signed Doppler shift (Hz).
    pub f_r: f64,
    pub q_star: usize,
}

fn check_alpha(alpha: f64, params: &SystemParams) -> Result<()> {
    let span = params.railway_span_m();
    // one-ulp slack so 2D computed elsewhere is still admissible
    if !(alpha >= 0.0 && alpha <= span * (1.0 + 1e-15)) {
        return Err(out_of_range(format!(
            "position {alpha} m outside [0, {span}] m"
        )));
    }
    Ok(())
}

/// cos of the angle between the direction of travel and the BS.
fn direction_cosine(alpha: f64, params: &SystemParams) -> f64 {
    let dx = params.half_span_m - alpha;
    let denom = (dx * dx + params.d_min_m * params.d_min_m).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        dx / denom
    }
}

pub fn doppler_at_position(alpha: f64, params: &SystemParams) -> Result<f64> {
    check_alpha(alpha, params)?;
    Ok(params.f_max * direction_cosine(alpha, params))
}

pub fn dominant_index_from_doppler(f_r: f64, params: &SystemParams) -> Result<usize> {
    if f_r.is_nan() || f_r.abs() > params.f_max * (1.0 + 1e-12) {
        return Err(out_of_range(format!(
            "Doppler {f_r} Hz exceeds f_max = {} Hz",
            params.f_max
        )));
    }
    let level = params.packet_duration_s * f_r;
    Ok(index_from_level(level, params))
}

pub fn dominant_index_from_position(alpha: f64, params: &SystemParams) -> Result<usize> {
    check_alpha(alpha, params)?;
    let level = params.f_norm * direction_cosine(alpha, params);
    Ok(index_from_level(level, params))
}

/// Ceil branch for non-negative Doppler levels, floor branch for negative ones.
fn index_from_level(level: f64, params: &SystemParams) -> usize {
    let half = params.center_index() as i64;
    let shift = if level >= 0.0 { level.ceil() } else { level.floor() } as i64;
    (shift + half).clamp(0, params.q_order as i64) as usize
}

pub fn doppler_state(alpha: f64, params: &SystemParams) -> Result<DopplerState> {
    let f_r = doppler_at_position(alpha, params)?;
    Ok(DopplerState {
        f_r,
        q_star: dominant_index_from_position(alpha, params)?,
    })
}

/// Places `R` antennas evenly over the train length, front first.
pub fn antenna_positions(front_alpha: f64, params: &SystemParams) -> Result<Vec<AntennaPosition>> {
    check_alpha(front_alpha, params)?;
    let r = params.antennas;
    let spacing = if r > 1 {
        params.train_length_m / (r - 1) as f64
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(r);
    for i in 0..r {
        let alpha = front_alpha - spacing * i as f64;
        if alpha < 0.0 {
            return Err(out_of_range(format!(
                "antenna {} at {alpha} m lies before point A",
                i + 1
            )));
        }
        out.push(AntennaPosition {
            alpha,
            antenna_id: i + 1,
        });
    }
    Ok(out)
}

//! Position-based ICI elimination.
//!
//! Under the dominant-index channel `H_r = P_{q*_r - Q/2} diag{F_L c*_r}` the
//! pilot sent on subcarrier `w_p` lands, free of any data leakage, on
//! `v_{r,p} = (w_p + q*_r - Q/2) mod K`. Gathering the received symbol at
//! `v_r` therefore yields `A c*_r + n` with a sensing matrix `A` that does
//! not depend on the antenna or its position.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bem::{basis_shift, shift_permutation};
use crate::config::SystemParams;
use crate::dft::twiddle;
use crate::error::{dimension, out_of_range, validation, Result};

/// Transmit pilot pattern: distinct subcarrier indices in `[0, K)`, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PilotPattern {
    k: usize,
    w: Vec<usize>,
}

impl PilotPattern {
    pub fn new(k: usize, mut w: Vec<usize>) -> Result<Self> {
        if w.is_empty() {
            return Err(validation("pilot pattern must not be empty"));
        }
        if let Some(&bad) = w.iter().find(|&&i| i >= k) {
            return Err(out_of_range(format!("pilot index {bad} outside [0, {k})")));
        }
        w.sort_unstable();
        if w.windows(2).any(|p| p[0] == p[1]) {
            return Err(validation("pilot pattern contains duplicate subcarriers"));
        }
        Ok(PilotPattern { k, w })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.w
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.w.binary_search(&idx).is_ok()
    }

    /// Subcarriers not carrying pilots, ascending.
    pub fn data_indices(&self) -> Vec<usize> {
        (0..self.k).filter(|&i| !self.contains(i)).collect()
    }

    pub fn into_indices(self) -> Vec<usize> {
        self.w
    }
}

/// Receive pattern at an antenna with dominant index `q_star`.
pub fn receive_pattern(pattern: &PilotPattern, q_star: usize, q_order: usize) -> Result<Vec<usize>> {
    if q_star > q_order {
        return Err(out_of_range(format!("dominant index {q_star} outside [0, {q_order}]")));
    }
    Ok(shift_indices(pattern.indices(), basis_shift(q_order, q_star), pattern.k()))
}

/// `(w_p + shift) mod K` for each entry.
pub fn shift_indices(w: &[usize], shift: i64, k: usize) -> Vec<usize> {
    w.iter()
        .map(|&i| (i as i64 + shift).rem_euclid(k as i64) as usize)
        .collect()
}

/// Gathers the received symbol at the receive pattern.
pub fn extract_pilots(y: &[Complex64], receive: &[usize]) -> Vec<Complex64> {
    receive.iter().map(|&v| y[v]).collect()
}

/// Gathers at the unpermuted transmit pattern (keeps the data ICI).
pub fn naive_extract(y: &[Complex64], pattern: &PilotPattern) -> Vec<Complex64> {
    extract_pilots(y, pattern.indices())
}

/// Restriction `D*(v, w)` of the dominant permutation to receive rows and
/// transmit columns. Equals the identity by construction of `v`.
pub fn selection_matrix(pattern: &PilotPattern, q_star: usize, q_order: usize) -> Result<DMatrix<Complex64>> {
    let v = receive_pattern(pattern, q_star, q_order)?;
    let full = shift_permutation(pattern.k(), basis_shift(q_order, q_star));
    let w = pattern.indices();
    Ok(DMatrix::from_fn(w.len(), w.len(), |i, j| full[(v[i], w[j])]))
}

/// Sparse measurement system `y_obs ≈ A c*`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSystem {
    /// `P × L` sensing matrix `diag{x(w)} F_L(w, :)`.
    pub a: DMatrix<Complex64>,
    pub pattern: PilotPattern,
}

impl MeasurementSystem {
    pub fn apply(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        if c.len() != self.a.ncols() {
            return Err(dimension(format!("coefficient length {} != L = {}", c.len(), self.a.ncols())));
        }
        Ok((0..self.a.nrows())
            .map(|p| (0..c.len()).map(|l| self.a[(p, l)] * c[l]).sum())
            .collect())
    }
}

pub fn build_measurement(
    pattern: &PilotPattern,
    pilot_symbols: &[Complex64],
    params: &SystemParams,
) -> Result<MeasurementSystem> {
    if pilot_symbols.len() != pattern.len() {
        return Err(dimension(format!(
            "{} pilot symbols for {} pilots",
            pilot_symbols.len(),
            pattern.len()
        )));
    }
    if pattern.k() != params.k {
        return Err(dimension(format!("pattern is for K = {}, params have K = {}", pattern.k(), params.k)));
    }
    let w = pattern.indices();
    let a = DMatrix::from_fn(w.len(), params.l, |p, l| pilot_symbols[p] * twiddle(w[p], l, params.k));
    Ok(MeasurementSystem { a, pattern: pattern.clone() })
}

/// `‖observed − clean‖² / ‖clean‖²`.
pub fn ici_power_ratio(observed: &[Complex64], clean: &[Complex64]) -> f64 {
    let err: f64 = observed.iter().zip(clean).map(|(a, b)| (a - b).norm_sqr()).sum();
    let sig: f64 = clean.iter().map(|v| v.norm_sqr()).sum();
    err / sig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_validation() {
        assert!(PilotPattern::new(8, vec![1, 1]).is_err());
        assert!(PilotPattern::new(8, vec![8]).is_err());
        assert!(PilotPattern::new(8, vec![]).is_err());
        let p = PilotPattern::new(8, vec![5, 0, 3]).unwrap();
        assert_eq!(p.indices(), &[0, 3, 5]);
        assert_eq!(p.data_indices(), vec![1, 2, 4, 6, 7]);
    }

    #[test]
    fn receive_pattern_shifts() {
        let w = PilotPattern::new(8, vec![0, 3, 7]).unwrap();
        assert_eq!(receive_pattern(&w, 2, 4).unwrap(), vec![0, 3, 7]);
        assert_eq!(receive_pattern(&w, 4, 4).unwrap(), vec![2, 5, 1]);
        let w0 = PilotPattern::new(512, vec![0]).unwrap();
        assert_eq!(receive_pattern(&w0, 0, 4).unwrap(), vec![510]);
        assert!(receive_pattern(&w, 5, 4).is_err());
    }

    #[test]
    fn gather() {
        let y: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let got = extract_pilots(&y, &[2, 5, 1]);
        assert_eq!(got, vec![y[2], y[5], y[1]]);
    }

    #[test]
    fn selection_is_identity() {
        let w = PilotPattern::new(64, vec![0, 1, 9, 30, 62, 63]).unwrap();
        for q in 0..=4 {
            let d = selection_matrix(&w, q, 4).unwrap();
            assert_eq!(d, DMatrix::identity(6, 6), "q* = {q}");
        }
    }

    #[test]
    fn measurement_rows() {
        let p = SystemParams { k: 8, l: 2, p: 1, s: 1, ..SystemParams::default() }.derive().unwrap();
        let one = Complex64::new(1.0, 0.0);
        let m = build_measurement(&PilotPattern::new(8, vec![0]).unwrap(), &[one], &p).unwrap();
        assert_eq!(m.a.row(0).iter().copied().collect::<Vec<_>>(), vec![one, one]);
        let m = build_measurement(&PilotPattern::new(8, vec![2]).unwrap(), &[one], &p).unwrap();
        assert!((m.a[(0, 1)] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(build_measurement(&PilotPattern::new(8, vec![2, 3]).unwrap(), &[one], &p).is_err());
    }
}

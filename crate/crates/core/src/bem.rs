//! Complex-exponential basis expansion model (CE-BEM) of the doubly
//! selective channel.
//!
//! Coefficients are stacked as `c[q * L + l] = c(q, l)`. In the frequency
//! domain basis `q` is an exact circular shift by `q - Q/2`, so the channel
//! matrix is the sum of `Q + 1` shifted diagonals and is stored that way.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SystemParams;
use crate::dft::{frequency_response, unitary_dft};
use crate::error::{dimension, out_of_range, validation, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn check_index(q_order: usize, q: usize) -> Result<()> {
    if q > q_order {
        return Err(out_of_range(format!("basis index {q} outside [0, {q_order}]")));
    }
    Ok(())
}

/// Frequency shift associated with basis index `q`.
pub fn basis_shift(q_order: usize, q: usize) -> i64 {
    q as i64 - (q_order / 2) as i64
}

/// Time-domain CE basis function `b_q[k] = exp(j 2π k (q - Q/2) / K)`.
pub fn ce_basis(k: usize, q_order: usize, q: usize) -> Result<Vec<Complex64>> {
    check_index(q_order, q)?;
    let shift = basis_shift(q_order, q).rem_euclid(k as i64) as usize;
    Ok((0..k)
        .map(|n| {
            let r = (n * shift % k) as f64;
            Complex64::from_polar(1.0, 2.0 * PI * r / k as f64)
        })
        .collect())
}

/// `D_q = F diag{b_q} F^H`, computed densely.
pub fn basis_freq(k: usize, q_order: usize, q: usize) -> Result<DMatrix<Complex64>> {
    let b = ce_basis(k, q_order, q)?;
    let f = unitary_dft(k);
    let mut fb = f.clone();
    for (mut col, bn) in fb.column_iter_mut().zip(&b) {
        col *= *bn;
    }
    Ok(fb * f.adjoint())
}

/// Permutation `P_s` with `P_s[m, n] = 1` iff `m ≡ n + s (mod K)`.
pub fn shift_permutation(k: usize, shift: i64) -> DMatrix<Complex64> {
    let mut p = DMatrix::zeros(k, k);
    for n in 0..k {
        let m = (n as i64 + shift).rem_euclid(k as i64) as usize;
        p[(m, n)] = Complex64::new(1.0, 0.0);
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct BemCoefficients {
    /// Stacked coefficients, length `L (Q + 1)`.
    pub c: Vec<Complex64>,
    pub l: usize,
    pub q_order: usize,
    pub q_star: usize,
    /// Tap indices carrying the dominant power, ascending.
    pub support: Vec<usize>,
    /// Fraction of power placed off the dominant index.
    pub rho: f64,
}

impl BemCoefficients {
    /// Builds a coefficient set from an explicit stacked vector.
    pub fn from_stacked(c: Vec<Complex64>, l: usize, q_order: usize, q_star: usize) -> Result<Self> {
        if c.len() != l * (q_order + 1) {
            return Err(dimension(format!(
                "coefficient vector has length {}, expected L(Q+1) = {}",
                c.len(),
                l * (q_order + 1)
            )));
        }
        check_index(q_order, q_star)?;
        let support = (0..l)
            .filter(|&t| (0..=q_order).any(|q| c[q * l + t] != ZERO))
            .collect();
        Ok(BemCoefficients { c, l, q_order, q_star, support, rho: 0.0 })
    }

    /// Coefficients of basis index `q` across all taps.
    pub fn block(&self, q: usize) -> &[Complex64] {
        &self.c[q * self.l..(q + 1) * self.l]
    }

    /// Dominant sub-vector `c*` (the block at `q_star`).
    pub fn dominant(&self) -> &[Complex64] {
        self.block(self.q_star)
    }

    pub fn energy(&self) -> f64 {
        self.c.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Number of coefficients whose power exceeds `gamma` times the peak power.
    pub fn dominant_count(&self, gamma: f64) -> usize {
        let peak = self.c.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        self.c.iter().filter(|v| v.norm_sqr() > gamma * peak).count()
    }
}

/// Draws an S-sparse CE-BEM channel concentrated on `q_star`.
///
/// The support is `S` distinct taps drawn uniformly; with `rho > 0` every
/// other basis index receives Gaussian coefficients on the same support such
/// that a fraction `rho` of the (unit) total energy lies off `q_star`.
pub fn synthesize_coefficients<R: Rng + ?Sized>(
    params: &SystemParams,
    q_star: usize,
    rho: f64,
    rng: &mut R,
) -> Result<BemCoefficients> {
    if !(0.0..1.0).contains(&rho) {
        return Err(validation(format!("leakage rho = {rho} must lie in [0, 1)")));
    }
    let (l, q_order) = (params.l, params.q_order);
    check_index(q_order, q_star)?;
    let mut support = sample(rng, l, params.s).into_vec();
    support.sort_unstable();

    let mut c = vec![ZERO; l * (q_order + 1)];
    for &t in &support {
        c[q_star * l + t] = complex_gaussian(rng);
    }
    let dominant_power: f64 = support.iter().map(|&t| c[q_star * l + t].norm_sqr()).sum();

    if rho > 0.0 && q_order > 0 {
        let mut leak_power = 0.0;
        for q in (0..=q_order).filter(|&q| q != q_star) {
            for &t in &support {
                let v = complex_gaussian(rng);
                leak_power += v.norm_sqr();
                c[q * l + t] = v;
            }
        }
        let scale = (rho / (1.0 - rho) * dominant_power / leak_power).sqrt();
        for q in (0..=q_order).filter(|&q| q != q_star) {
            for &t in &support {
                c[q * l + t] *= scale;
            }
        }
    }

    let norm = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|v| *v /= norm);
    Ok(BemCoefficients { c, l, q_order, q_star, support, rho })
}

/// Frequency-domain channel `H = Σ_q P_{q - Q/2} diag{g_q}`.
///
/// `bands[q]` holds the length-K diagonal `g_q`; entry `H[(n + s) mod K, n]`
/// equals `g_q[n]` for `s = q - Q/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub k: usize,
    pub q_order: usize,
    pub bands: Vec<Vec<Complex64>>,
}

impl ChannelMatrix {
    pub fn zeros(k: usize, q_order: usize) -> Self {
        ChannelMatrix { k, q_order, bands: vec![vec![ZERO; k]; q_order + 1] }
    }

    /// Permuted-diagonal channel carrying only basis `q` with the given gains.
    pub fn permuted_diagonal(q_order: usize, q: usize, gains: Vec<Complex64>) -> Result<Self> {
        check_index(q_order, q)?;
        let mut h = ChannelMatrix::zeros(gains.len(), q_order);
        h.bands[q] = gains;
        Ok(h)
    }

    pub fn shift(&self, q: usize) -> i64 {
        basis_shift(self.q_order, q)
    }

    fn row_of(&self, q: usize, n: usize) -> usize {
        (n as i64 + self.shift(q)).rem_euclid(self.k as i64) as usize
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        (0..=self.q_order)
            .filter(|&q| self.row_of(q, n) == m)
            .map(|q| self.bands[q][n])
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut h = DMatrix::zeros(self.k, self.k);
        for (q, band) in self.bands.iter().enumerate() {
            for (n, g) in band.iter().enumerate() {
                h[(self.row_of(q, n), n)] += *g;
            }
        }
        h
    }

    /// `H x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.k {
            return Err(dimension(format!("signal length {} != K = {}", x.len(), self.k)));
        }
        let mut y = vec![ZERO; self.k];
        for (q, band) in self.bands.iter().enumerate() {
            for (n, (g, xn)) in band.iter().zip(x).enumerate() {
                y[self.row_of(q, n)] += g * xn;
            }
        }
        Ok(y)
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.bands.iter().flatten().map(|v| v.norm_sqr()).sum()
    }

    /// Indices of bands with at least one nonzero gain.
    pub fn active_bands(&self) -> Vec<usize> {
        (0..=self.q_order)
            .filter(|&q| self.bands[q].iter().any(|v| *v != ZERO))
            .collect()
    }
}

pub fn channel_matrix(coeffs: &BemCoefficients, params: &SystemParams) -> Result<ChannelMatrix> {
    if coeffs.l != params.l || coeffs.q_order != params.q_order {
        return Err(dimension(format!(
            "coefficients are for L = {}, Q = {} but params have L = {}, Q = {}",
            coeffs.l, coeffs.q_order, params.l, params.q_order
        )));
    }
    if coeffs.c.len() != params.coefficient_len() {
        return Err(dimension(format!(
            "coefficient vector has length {}, expected {}",
            coeffs.c.len(),
            params.coefficient_len()
        )));
    }
    let bands = (0..=params.q_order)
        .map(|q| frequency_response(coeffs.block(q), params.k))
        .collect();
    Ok(ChannelMatrix { k: params.k, q_order: params.q_order, bands })
}

/// Time-varying taps `h(n, l) = Σ_q b_q[n] c(q, l)`, laid out as `h[n * L + l]`.
pub fn time_domain_taps(coeffs: &BemCoefficients, params: &SystemParams) -> Result<Vec<Complex64>> {
    let (k, l) = (params.k, coeffs.l);
    let mut h = vec![ZERO; k * l];
    for q in 0..=coeffs.q_order {
        let block = coeffs.block(q);
        if block.iter().all(|v| *v == ZERO) {
            continue;
        }
        let b = ce_basis(k, coeffs.q_order, q)?;
        for n in 0..k {
            for t in 0..l {
                h[n * l + t] += b[n] * block[t];
            }
        }
    }
    Ok(h)
}

/// Splits `H` into its diagonal (ICI-free) part and the off-diagonal ICI part.
pub fn ici_split(h: &ChannelMatrix) -> (ChannelMatrix, ChannelMatrix) {
    let mut free = ChannelMatrix::zeros(h.k, h.q_order);
    let mut ici = h.clone();
    for q in 0..=h.q_order {
        if h.shift(q).rem_euclid(h.k as i64) == 0 {
            free.bands[q] = std::mem::replace(&mut ici.bands[q], vec![ZERO; h.k]);
        }
    }
    (free, ici)
}

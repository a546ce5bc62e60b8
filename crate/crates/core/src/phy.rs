//! Frequency-domain SIMO-OFDM link: symbol assembly, channel, noise,
//! combining and demapping.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::bem::{complex_gaussian, time_domain_taps, BemCoefficients, ChannelMatrix};
use crate::config::SystemParams;
use crate::dft::{dft_in_place, idft_in_place};
use crate::error::{dimension, validation, Result};
use crate::ici::PilotPattern;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Constant pilot symbol (amplitude 1, phase 0).
pub const PILOT_SYMBOL: Complex64 = Complex64::new(1.0, 0.0);

/// Gray-mapped 4-QAM with unit average power. Bits are 0/1 bytes.
pub fn qam4_modulate(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(validation(format!("4-QAM needs an even bit count, got {}", bits.len())));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|b| {
            let im = if b[0] == 0 { 1.0 } else { -1.0 };
            let re = if b[1] == 0 { 1.0 } else { -1.0 };
            Complex64::new(re, im) * FRAC_1_SQRT_2
        })
        .collect())
}

/// Hard-decision demapping, inverse of [`qam4_modulate`].
pub fn qam4_demodulate(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.im < 0.0), u8::from(s.re < 0.0)])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSymbol {
    pub x: Vec<Complex64>,
    pub pattern: PilotPattern,
    pub data_indices: Vec<usize>,
    pub bits: Vec<u8>,
}

impl OfdmSymbol {
    pub fn pilot_symbols(&self) -> Vec<Complex64> {
        self.pattern.indices().iter().map(|&w| self.x[w]).collect()
    }

    /// Same symbol with every data subcarrier set to zero.
    pub fn pilots_only(&self) -> OfdmSymbol {
        let mut out = self.clone();
        for &d in &self.data_indices {
            out.x[d] = ZERO;
        }
        out
    }
}

/// Places unit pilots on `pattern` and 4-QAM data everywhere else.
pub fn assemble_symbol(pattern: &PilotPattern, data_bits: &[u8]) -> Result<OfdmSymbol> {
    let k = pattern.k();
    let data_indices = pattern.data_indices();
    if data_bits.len() != 2 * data_indices.len() {
        return Err(dimension(format!(
            "expected {} data bits for {} data subcarriers, got {}",
            2 * data_indices.len(),
            data_indices.len(),
            data_bits.len()
        )));
    }
    let mut x = vec![ZERO; k];
    for &w in pattern.indices() {
        x[w] = PILOT_SYMBOL;
    }
    for (&d, s) in data_indices.iter().zip(qam4_modulate(data_bits)?) {
        x[d] = s;
    }
    Ok(OfdmSymbol { x, pattern: pattern.clone(), data_indices, bits: data_bits.to_vec() })
}

/// Uniform random bits for the data subcarriers of `pattern`.
pub fn random_bits<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<u8> {
    (0..count).map(|_| rng.random_range(0..2u8)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSymbol {
    pub y: Vec<Complex64>,
    pub snr_db: Option<f64>,
    /// Per-entry complex noise variance (0 when noiseless).
    pub noise_var: f64,
}

pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// `y_r = H_r x + n_r` for every antenna. `snr_db = None` is noiseless.
pub fn apply_channel<R: Rng + ?Sized>(
    x: &[Complex64],
    channels: &[ChannelMatrix],
    snr_db: Option<f64>,
    rng: &mut R,
) -> Result<Vec<ReceivedSymbol>> {
    let noise_var = snr_db.map_or(0.0, noise_variance);
    let sigma = noise_var.sqrt();
    channels
        .iter()
        .map(|h| {
            let mut y = h.apply(x)?;
            if snr_db.is_some() {
                y.iter_mut().for_each(|v| *v += complex_gaussian(rng) * sigma);
            }
            Ok(ReceivedSymbol { y, snr_db, noise_var })
        })
        .collect()
}

/// Noiseless time-domain link: IDFT, cyclic prefix, time-varying
/// convolution with `h(n, l)`, prefix removal, DFT.
pub fn time_domain_loopback(
    x: &[Complex64],
    coeffs: &BemCoefficients,
    params: &SystemParams,
    cp_len: usize,
) -> Result<ReceivedSymbol> {
    let (k, l) = (params.k, params.l);
    if x.len() != k {
        return Err(dimension(format!("signal length {} != K = {k}", x.len())));
    }
    if cp_len + 1 < l {
        return Err(validation(format!("cyclic prefix {cp_len} shorter than L - 1 = {}", l - 1)));
    }
    if cp_len > k {
        return Err(validation(format!("cyclic prefix {cp_len} longer than the symbol")));
    }
    let taps = time_domain_taps(coeffs, params)?;
    let mut body = x.to_vec();
    idft_in_place(&mut body);
    let mut frame = Vec::with_capacity(k + cp_len);
    frame.extend_from_slice(&body[k - cp_len..]);
    frame.extend_from_slice(&body);

    let mut r = vec![ZERO; k];
    for (n, rn) in r.iter_mut().enumerate() {
        let i = n + cp_len;
        *rn = (0..l).map(|t| taps[n * l + t] * frame[i - t]).sum();
    }
    dft_in_place(&mut r);
    Ok(ReceivedSymbol { y: r, snr_db: None, noise_var: 0.0 })
}

/// Permuted-diagonal channel estimate for one antenna: the signal sent on
/// subcarrier `k` arrives at `(k + shift) mod K` with gain `gains[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEstimate {
    pub shift: i64,
    pub gains: Vec<Complex64>,
}

impl DiagonalEstimate {
    /// Reads the band of `h` at basis index `q`.
    pub fn from_channel(h: &ChannelMatrix, q: usize) -> Self {
        DiagonalEstimate { shift: h.shift(q), gains: h.bands[q].clone() }
    }

    pub fn receive_index(&self, k: usize) -> usize {
        (k as i64 + self.shift).rem_euclid(self.gains.len() as i64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub symbols: Vec<Complex64>,
    /// Subcarriers where every antenna had zero estimated gain.
    pub erasures: Vec<bool>,
}

/// Per-subcarrier ZF combining across antennas:
/// `x̂(k) = Σ_r conj(Ĥ_r(k)) y_r(v_r(k)) / Σ_r |Ĥ_r(k)|²`.
pub fn zf_combine(
    received: &[Vec<Complex64>],
    estimates: &[DiagonalEstimate],
    subcarriers: &[usize],
) -> Result<Equalized> {
    if received.len() != estimates.len() || received.is_empty() {
        return Err(dimension(format!(
            "{} received vectors for {} channel estimates",
            received.len(),
            estimates.len()
        )));
    }
    for (y, h) in received.iter().zip(estimates) {
        if y.len() != h.gains.len() {
            return Err(dimension("received vector and estimate lengths differ"));
        }
    }
    let mut symbols = Vec::with_capacity(subcarriers.len());
    let mut erasures = Vec::with_capacity(subcarriers.len());
    for &k in subcarriers {
        let mut num = ZERO;
        let mut den = 0.0;
        for (y, h) in received.iter().zip(estimates) {
            let g = h.gains[k];
            num += g.conj() * y[h.receive_index(k)];
            den += g.norm_sqr();
        }
        if den > 0.0 {
            symbols.push(num / den);
            erasures.push(false);
        } else {
            symbols.push(ZERO);
            erasures.push(true);
        }
    }
    Ok(Equalized { symbols, erasures })
}

pub fn ber(bits_true: &[u8], bits_est: &[u8]) -> Result<f64> {
    if bits_true.len() != bits_est.len() {
        return Err(dimension(format!(
            "bit vectors differ in length: {} vs {}",
            bits_true.len(),
            bits_est.len()
        )));
    }
    if bits_true.is_empty() {
        return Ok(0.0);
    }
    let errors = bits_true.iter().zip(bits_est).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / bits_true.len() as f64)
}

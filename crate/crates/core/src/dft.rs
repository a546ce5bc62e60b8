//! DFT conventions shared by every module.
//!
//! `F[m, n] = K^(-1/2) exp(-j 2π m n / K)` (unitary), and `F_L` is the first
//! `L` columns of `sqrt(K) F`, i.e. `F_L[k, l] = exp(-j 2π k l / K)`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// `exp(-j 2π k l / K)` with the exponent reduced mod K first.
pub fn twiddle(k: usize, l: usize, size: usize) -> Complex64 {
    let r = ((k as u128 * l as u128) % size as u128) as f64;
    Complex64::from_polar(1.0, -2.0 * PI * r / size as f64)
}

/// Dense unitary DFT matrix of order `size`.
pub fn unitary_dft(size: usize) -> DMatrix<Complex64> {
    let scale = 1.0 / (size as f64).sqrt();
    DMatrix::from_fn(size, size, |m, n| twiddle(m, n, size) * scale)
}

/// Unitary forward DFT, in place.
pub fn dft_in_place(x: &mut [Complex64]) {
    let n = x.len();
    plan(n, false).process(x);
    let s = 1.0 / (n as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= s);
}

/// Unitary inverse DFT, in place.
pub fn idft_in_place(x: &mut [Complex64]) {
    let n = x.len();
    plan(n, true).process(x);
    let s = 1.0 / (n as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= s);
}

/// `F_L · c` for a length-L tap vector: the length-K frequency response.
pub fn frequency_response(taps: &[Complex64], size: usize) -> Vec<Complex64> {
    assert!(taps.len() <= size, "more taps than subcarriers");
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    buf[..taps.len()].copy_from_slice(taps);
    plan(size, false).process(&mut buf);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary() {
        let f = unitary_dft(16);
        let g = &f * f.adjoint();
        let err = (g - DMatrix::<Complex64>::identity(16, 16)).map(|v| v.norm()).max();
        assert!(err < 1e-12);
    }

    #[test]
    fn fft_matches_dense_matrix() {
        let x: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let dense = unitary_dft(16) * nalgebra::DVector::from_vec(x.clone());
        let mut fast = x.clone();
        dft_in_place(&mut fast);
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).norm() < 1e-10);
        }
        idft_in_place(&mut fast);
        for (a, b) in x.iter().zip(&fast) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn frequency_response_is_partial_fourier_product() {
        let taps = [Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25), Complex64::new(0.0, 1.0)];
        let h = frequency_response(&taps, 8);
        for (k, hk) in h.iter().enumerate() {
            let direct: Complex64 = taps.iter().enumerate().map(|(l, c)| c * twiddle(k, l, 8)).sum();
            assert!((hk - direct).norm() < 1e-12);
        }
    }
}

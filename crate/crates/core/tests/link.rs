use hst_ofdm::bem::{channel_matrix, complex_gaussian, shift_permutation, synthesize_coefficients, BemCoefficients};
use hst_ofdm::config::{kmh_to_mps, SystemParams};
use hst_ofdm::ici::{build_measurement, extract_pilots, ici_power_ratio, naive_extract, receive_pattern, PilotPattern};
use hst_ofdm::phy::{
    apply_channel, assemble_symbol, ber, noise_variance, qam4_demodulate, random_bits, time_domain_loopback,
    zf_combine, DiagonalEstimate, PILOT_SYMBOL,
};
use hst_ofdm::pilot::{average_coherence, design_low_coherence, equidistant_pattern, random_pattern};
use hst_ofdm::sparse::{omp, reconstruct_channel, OmpStop};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(k: usize, l: usize, p: usize, speed_kmh: f64) -> SystemParams {
    SystemParams { k, l, p, s: 2.min(l), speed_mps: kmh_to_mps(speed_kmh), ..SystemParams::default() }
        .derive()
        .unwrap()
}

fn random_coeffs(p: &SystemParams, q_star: usize, rng: &mut ChaCha8Rng) -> BemCoefficients {
    let c = (0..p.coefficient_len()).map(|_| complex_gaussian(rng)).collect();
    BemCoefficients::from_stacked(c, p.l, p.q_order, q_star).unwrap()
}

/// Brute force `H_time[n, (n - l) mod K] = h(n, l)` pushed through the unitary DFT.
fn dense_time_oracle(coeffs: &BemCoefficients, p: &SystemParams) -> nalgebra::DMatrix<Complex64> {
    let k = p.k;
    let mut ht = nalgebra::DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
    for n in 0..k {
        for l in 0..p.l {
            let h: Complex64 = (0..=p.q_order)
                .map(|q| {
                    let phase = 2.0 * std::f64::consts::PI * n as f64 * (q as f64 - (p.q_order / 2) as f64) / k as f64;
                    coeffs.block(q)[l] * Complex64::from_polar(1.0, phase)
                })
                .sum();
            ht[(n, (n + k - l) % k)] += h;
        }
    }
    let f = hst_ofdm::dft::unitary_dft(k);
    &f * ht * f.adjoint()
}

#[test]
fn frequency_model_matches_dense_time_oracle() {
    let p = small(16, 4, 4, 250.0);
    assert_eq!(p.q_order, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let coeffs = random_coeffs(&p, 1, &mut rng);
        let h = channel_matrix(&coeffs, &p).unwrap().to_dense();
        let err = (h - dense_time_oracle(&coeffs, &p)).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}

#[test]
fn loopback_with_minimal_prefix() {
    let p = small(16, 4, 4, 250.0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let coeffs = random_coeffs(&p, 2, &mut rng);
    let x: Vec<Complex64> = (0..p.k).map(|_| complex_gaussian(&mut rng)).collect();
    let want = channel_matrix(&coeffs, &p).unwrap().apply(&x).unwrap();
    let got = time_domain_loopback(&x, &coeffs, &p, p.l - 1).unwrap();
    for (a, b) in got.y.iter().zip(&want) {
        assert!((a - b).norm() < 1e-10);
    }
    assert!(time_domain_loopback(&x, &coeffs, &p, p.l - 2).is_err());
}

#[test]
fn exact_elimination_with_random_data() {
    let p = SystemParams { k: 64, p: 8, l: 8, s: 3, ..SystemParams::default() }.derive().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let pattern = random_pattern(p.k, p.p, &mut rng).unwrap();
        let m = build_measurement(&pattern, &vec![PILOT_SYMBOL; p.p], &p).unwrap();
        for q_star in 0..=p.q_order {
            let coeffs = synthesize_coefficients(&p, q_star, 0.0, &mut rng).unwrap();
            let h = channel_matrix(&coeffs, &p).unwrap();
            let sym = assemble_symbol(&pattern, &random_bits(2 * (p.k - p.p), &mut rng)).unwrap();
            let y = apply_channel(&sym.x, &[h], None, &mut rng).unwrap();
            let v = receive_pattern(&pattern, q_star, p.q_order).unwrap();
            let got = extract_pilots(&y[0].y, &v);
            let want = m.apply(coeffs.dominant()).unwrap();
            assert!(ici_power_ratio(&got, &want) < 1e-24);
        }
    }
}

#[test]
fn naive_extraction_keeps_data_interference() {
    let p = SystemParams::default();
    let pattern = equidistant_pattern(p.k, p.p).unwrap();
    let m = build_measurement(&pattern, &vec![PILOT_SYMBOL; p.p], &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for q_star in [0, 1, 3, 4] {
        let coeffs = synthesize_coefficients(&p, q_star, 0.0, &mut rng).unwrap();
        let h = channel_matrix(&coeffs, &p).unwrap();
        let sym = assemble_symbol(&pattern, &random_bits(2 * (p.k - p.p), &mut rng)).unwrap();
        let y = apply_channel(&sym.x, &[h], None, &mut rng).unwrap();
        let clean = m.apply(coeffs.dominant()).unwrap();
        assert!(ici_power_ratio(&naive_extract(&y[0].y, &pattern), &clean) > 0.1);
    }
}

#[test]
fn leakage_appears_as_residual_ici() {
    let p = SystemParams::default();
    let pattern = equidistant_pattern(p.k, p.p).unwrap();
    let m = build_measurement(&pattern, &vec![PILOT_SYMBOL; p.p], &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let coeffs = synthesize_coefficients(&p, 2, 0.1, &mut rng).unwrap();
    let h = channel_matrix(&coeffs, &p).unwrap();
    let sym = assemble_symbol(&pattern, &random_bits(2 * (p.k - p.p), &mut rng)).unwrap();
    let y = apply_channel(&sym.x, &[h], None, &mut rng).unwrap();
    let v = receive_pattern(&pattern, 2, p.q_order).unwrap();
    let clean = m.apply(coeffs.dominant()).unwrap();
    assert!(ici_power_ratio(&extract_pilots(&y[0].y, &v), &clean) > 0.0);
}

#[test]
fn reconstructed_channel_is_the_dominant_band() {
    let p = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for q_star in 0..=p.q_order {
        let coeffs = synthesize_coefficients(&p, q_star, 0.0, &mut rng).unwrap();
        let h = channel_matrix(&coeffs, &p).unwrap();
        let r = reconstruct_channel(coeffs.dominant(), q_star, &p).unwrap();
        assert_eq!(r.active_bands(), vec![q_star]);
        for (a, b) in r.bands[q_star].iter().zip(&h.bands[q_star]) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn noiseless_link_decodes_without_errors() {
    let p = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let start = equidistant_pattern(p.k, p.p).unwrap();
    let pattern = design_low_coherence(&start, p.l, 0.2, 200, &mut rng).unwrap().pattern;
    let m = build_measurement(&pattern, &vec![PILOT_SYMBOL; p.p], &p).unwrap();
    let q_stars = [4, 3];
    for _ in 0..5 {
        let coeffs: Vec<_> = q_stars.iter().map(|&q| synthesize_coefficients(&p, q, 0.0, &mut rng).unwrap()).collect();
        let channels: Vec<_> = coeffs.iter().map(|c| channel_matrix(c, &p).unwrap()).collect();
        let sym = assemble_symbol(&pattern, &random_bits(2 * (p.k - p.p), &mut rng)).unwrap();
        let rx = apply_channel(&sym.x, &channels, None, &mut rng).unwrap();
        let estimates: Vec<_> = rx
            .iter()
            .zip(q_stars)
            .map(|(r, q)| {
                let v = receive_pattern(&pattern, q, p.q_order).unwrap();
                let c_hat = omp(&m.a, &extract_pilots(&r.y, &v), OmpStop::Sparsity(p.s)).unwrap().c_hat;
                DiagonalEstimate::from_channel(&reconstruct_channel(&c_hat, q, &p).unwrap(), q)
            })
            .collect();
        let ys: Vec<_> = rx.iter().map(|r| r.y.clone()).collect();
        let eq = zf_combine(&ys, &estimates, &sym.data_indices).unwrap();
        assert_eq!(ber(&sym.bits, &qam4_demodulate(&eq.symbols)).unwrap(), 0.0);
    }
}

#[test]
fn noise_power_matches_snr() {
    let k = 100_000;
    let h = hst_ofdm::bem::ChannelMatrix::permuted_diagonal(0, 0, vec![Complex64::new(0.0, 0.0); k]).unwrap();
    let x = vec![Complex64::new(1.0, 0.0); k];
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for snr in [0.0, 10.0, 25.0] {
        let rx = apply_channel(&x, std::slice::from_ref(&h), Some(snr), &mut rng).unwrap();
        let power = rx[0].y.iter().map(|v| v.norm_sqr()).sum::<f64>() / k as f64;
        let measured = -10.0 * power.log10();
        assert!((measured - snr).abs() < 0.2, "{measured} vs {snr}");
        assert_eq!(rx[0].noise_var, noise_variance(snr));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_permutations_compose(k in 2usize..24, a in -30i64..30, b in -30i64..30) {
        let lhs = shift_permutation(k, a) * shift_permutation(k, b);
        prop_assert_eq!(lhs, shift_permutation(k, a + b));
    }

    #[test]
    fn receive_pattern_round_trips(seed in any::<u64>(), q_star in 0usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pattern = random_pattern(512, 40, &mut rng).unwrap();
        let v = receive_pattern(&pattern, q_star, 4).unwrap();
        let back = hst_ofdm::ici::shift_indices(&v, 2 - q_star as i64, 512);
        prop_assert_eq!(back.as_slice(), pattern.indices());
    }

    #[test]
    fn coherence_ignores_pilot_amplitude(seed in any::<u64>(), re in -5.0f64..5.0, im in -5.0f64..5.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let p = SystemParams { k: 128, p: 16, l: 24, ..SystemParams::default() }.derive().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pattern = random_pattern(p.k, p.p, &mut rng).unwrap();
        let unit = build_measurement(&pattern, &vec![PILOT_SYMBOL; p.p], &p).unwrap();
        let scaled = build_measurement(&pattern, &vec![Complex64::new(re, im); p.p], &p).unwrap();
        let a = average_coherence(&unit.a, 0.2).unwrap();
        let b = average_coherence(&scaled.a, 0.2).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn patterns_stay_valid(seed in any::<u64>(), k in 16usize..128) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = (k / 4).max(1);
        let w = random_pattern(k, p, &mut rng).unwrap().into_indices();
        prop_assert!(PilotPattern::new(k, w).is_ok());
    }
}

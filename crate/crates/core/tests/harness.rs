use hst_ofdm::config::Config;
use hst_ofdm::experiment::{run, write_csv, Estimator, ExperimentKind, ExperimentSpec, PilotDesign, ResultRow};

fn spec(kind: ExperimentKind, trials: usize) -> ExperimentSpec {
    let mut s = ExperimentSpec::from_config(kind, &Config::default()).unwrap();
    s.trials = trials;
    s
}

fn csv(rows: &[ResultRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).unwrap();
    buf
}

#[test]
fn mse_rows_cover_the_cross_product() {
    let mut s = spec(ExperimentKind::MseSweep, 3);
    s.snr_grid = vec![10.0, 20.0];
    let rows = run(&s).unwrap().rows;
    assert_eq!(rows.len(), 2 * 3 * 3 * s.params.antennas);
    assert!(rows.iter().all(|r| r.trials == 3 && r.metric_name == "nmse" && r.seed == s.seed));
    assert!(rows.iter().all(|r| r.metric_value.is_finite() && r.metric_value >= 0.0));
}

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let mut s = spec(ExperimentKind::MseSweep, 4);
    s.snr_grid = vec![20.0];
    s.designs = vec![PilotDesign::Alg1];
    let a = csv(&run(&s).unwrap().rows);
    let b = csv(&run(&s).unwrap().rows);
    assert_eq!(a, b);
    s.seed += 1;
    assert_ne!(a, csv(&run(&s).unwrap().rows));
}

#[test]
fn nmse_decreases_with_snr() {
    let mut s = spec(ExperimentKind::MseSweep, 40);
    s.snr_grid = vec![0.0, 20.0, 40.0];
    s.designs = vec![PilotDesign::Alg1];
    s.estimators = vec![Estimator::Omp, Estimator::Bp];
    let rows = run(&s).unwrap().rows;
    for est in ["omp", "bp"] {
        let curve: Vec<f64> = s
            .snr_grid
            .iter()
            .map(|&snr| {
                rows.iter()
                    .filter(|r| r.estimator == est && r.snr_db == Some(snr))
                    .map(|r| r.metric_value)
                    .sum::<f64>()
            })
            .collect();
        assert!(curve.windows(2).all(|w| w[1] < w[0]), "{est}: {curve:?}");
    }
}

#[test]
fn ber_rows_and_perfect_reference() {
    let mut s = spec(ExperimentKind::BerSweep, 4);
    s.snr_grid = vec![30.0];
    s.designs = vec![PilotDesign::Alg1];
    s.estimators = vec![Estimator::Perfect, Estimator::Omp];
    let rows = run(&s).unwrap().rows;
    assert_eq!(rows.len(), 2 * 2);
    let names: Vec<&str> = rows.iter().map(|r| r.metric_name.as_str()).collect();
    assert_eq!(names, ["ber_r1", "ber_r2", "ber_r1", "ber_r2"]);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.metric_value)));
}

#[test]
fn position_sweep_reports_doppler_and_reference() {
    let mut s = spec(ExperimentKind::PositionSweep, 3);
    s.positions = vec![0.0, s.params.half_span_m, s.params.railway_span_m()];
    s.snr_grid = vec![30.0];
    let rows = run(&s).unwrap().rows;
    let q: Vec<f64> = rows.iter().filter(|r| r.metric_name == "q_star").map(|r| r.metric_value).collect();
    assert_eq!(q, [4.0, 2.0, 0.0]);
    let prop: Vec<_> = rows.iter().filter(|r| r.metric_name == "nmse").collect();
    let free: Vec<_> = rows.iter().filter(|r| r.metric_name == "nmse_ici_free").collect();
    assert_eq!(prop.len(), 3);
    for (a, b) in prop.iter().zip(&free) {
        assert!((a.metric_value / b.metric_value - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ici_compare_separates_methods() {
    let mut s = spec(ExperimentKind::IciCompare, 3);
    s.positions = vec![0.0, 1500.0];
    let rows = run(&s).unwrap().rows;
    for r in &rows {
        if r.metric_name.ends_with("rho=0") {
            if r.estimator == "permuted" {
                assert!(r.metric_value < 1e-24, "{r:?}");
            } else {
                assert!(r.metric_value > 0.1, "{r:?}");
            }
        }
    }
    assert!(rows.iter().any(|r| r.metric_name == "ici_power_ratio@rho=0.1" && r.metric_value > 0.0));
}

#[test]
fn design_pilot_lowers_coherence() {
    let out = run(&spec(ExperimentKind::DesignPilot, 1)).unwrap();
    let mu = |design: &str, metric: &str| {
        out.rows.iter().find(|r| r.pilot_design == design && r.metric_name == metric).unwrap().metric_value
    };
    assert!(mu("alg1", "avg_coherence") < mu("alg1", "avg_coherence_initial"));
    assert!(mu("alg1", "avg_coherence") < mu("equidistant", "avg_coherence"));
    let alg1 = out.designs.iter().find(|d| d.design == PilotDesign::Alg1).unwrap();
    assert_eq!(alg1.trace.len(), 200);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = spec(ExperimentKind::MseSweep, 0);
    assert!(run(&s).is_err());
    s.trials = 1;
    s.snr_grid.clear();
    assert!(run(&s).is_err());
}

"""Smoke test for the hst_ofdm Python extension.

Build and install first:  maturin develop -m crates/py/Cargo.toml --release
"""

import csv
import io

import hst_ofdm


def main():
    p = hst_ofdm.SystemParams()
    assert 1086.0 <= p.f_max <= 1090.0, p.f_max
    assert p.q_order == 4
    print(p)

    assert hst_ofdm.dominant_index(0.0, p) == 4
    assert hst_ofdm.dominant_index(p.half_span_m, p) == 2
    assert hst_ofdm.doppler_at_position(2 * p.half_span_m, p) < 0.0

    start = hst_ofdm.equidistant_pattern(p.k, p.p)
    mu0 = hst_ofdm.pattern_coherence(start, p.k, p.l)
    pattern, mu, trace = hst_ofdm.design_pilot(p, iterations=200, seed=3)
    assert len(pattern) == p.p and len(trace) == 200
    assert mu < mu0, (mu, mu0)
    print(f"coherence {mu0:.4f} -> {mu:.4f}")

    a = hst_ofdm.sensing_matrix(pattern, p)
    c = [0j] * p.l
    for tap, value in [(1, 1.0 + 0.5j), (9, -0.7j), (30, 0.4), (41, 0.2 - 0.2j), (63, -0.3)]:
        c[tap] = value
    y = [sum(row[i] * c[i] for i in range(p.l)) for row in a]
    for name, c_hat in [("omp", hst_ofdm.omp(a, y, 5)), ("bp", hst_ofdm.bp(a, y))]:
        err = hst_ofdm.nmse(c_hat, c)
        assert err < 1e-6, (name, err)
        print(f"{name} nmse {err:.2e}")

    text = hst_ofdm.run_experiment("mse-sweep", trials=4, snr_db=[30.0])
    assert text.splitlines()[0] == hst_ofdm.CSV_HEADER
    rows = list(csv.DictReader(io.StringIO(text)))
    assert rows and all(r["metric_name"] == "nmse" for r in rows)
    print(f"mse-sweep rows: {len(rows)}")
    print("smoke test passed")


if __name__ == "__main__":
    main()

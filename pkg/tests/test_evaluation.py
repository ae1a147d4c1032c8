import csv

import numpy as np
import pytest

from robust_slc.evaluation import (SWEEP_COLUMNS, SweepRow, SweepTable, TestReport, monte_carlo_fidelity,
                                   sweep_bound, sweep_sample_count, write_sweep_csv)
from robust_slc.models import build_model, single_charge_qubit
from robust_slc.optimizer import ControlField, OptimizationConfig, initial_field, sample_overlaps
from robust_slc.sampling import BLOCK_SIZE, random_samples


@pytest.fixture(scope="module")
def pi_pulse():
    m = single_charge_qubit("excited")
    values = np.zeros((2, 100))
    values[1] = 1.4
    return m, ControlField.for_model(m, values)


def test_zero_bound_single_sample_is_nominal_fidelity(pi_pulse):
    m, f = pi_pulse
    report = monte_carlo_fidelity(f, m.with_bound(0.0), 1, seed=3)
    nominal = abs(sample_overlaps(f, m, [m.nominal_sample()])[0])
    assert report.n_samples == 1
    assert report.mean_fidelity == pytest.approx(nominal, abs=1e-15)
    assert report.std_fidelity == 0.0
    assert report.min_fidelity == report.mean_fidelity


def test_report_is_deterministic(pi_pulse):
    m, f = pi_pulse
    m = m.with_bound(0.2)
    a = monte_carlo_fidelity(f, m, 300, seed=5)
    b = monte_carlo_fidelity(f, m, 300, seed=5)
    assert a.mean_fidelity == b.mean_fidelity and np.array_equal(a.fidelities, b.fidelities)
    c = monte_carlo_fidelity(f, m, 300, seed=6)
    assert c.mean_fidelity != a.mean_fidelity


def test_report_matches_direct_propagation(pi_pulse):
    m, f = pi_pulse
    m = m.with_bound(0.25)
    report = monte_carlo_fidelity(f, m, 50, seed=11)
    samples = random_samples(m.fluctuations, 50, 11)
    assert np.allclose(report.fidelities, np.abs(sample_overlaps(f, m, samples)), atol=1e-15)


def test_fidelities_in_unit_interval_and_histogram_counts(pi_pulse):
    m, f = pi_pulse
    report = monte_carlo_fidelity(f, m.with_bound(0.25), 2000, seed=1)
    assert np.all((report.fidelities >= 0) & (report.fidelities <= 1))
    assert report.histogram.sum() == 2000
    assert report.histogram.shape == (100,)
    assert 0 <= report.min_fidelity <= report.mean_fidelity <= 1


def test_batch_union_mean():
    rng = np.random.default_rng(0)
    a, b = rng.uniform(0.9, 1, 137), rng.uniform(0.5, 1, 4001)
    ra, rb = TestReport.from_fidelities(a, 0), TestReport.from_fidelities(b, 0)
    union = TestReport.from_fidelities(np.concatenate([a, b]), 0)
    weighted = (ra.n_samples * ra.mean_fidelity + rb.n_samples * rb.mean_fidelity) / (ra.n_samples + rb.n_samples)
    assert abs(union.mean_fidelity - weighted) < 1e-12


def test_report_rejects_empty():
    with pytest.raises(ValueError):
        TestReport.from_fidelities(np.array([]), 0)


def test_thread_count_does_not_change_report():
    m = build_model("coupled_phase").with_bound(0.2)
    f = initial_field(m)
    n = 2 * BLOCK_SIZE + 17
    one = monte_carlo_fidelity(f, m, n, seed=2, threads=1)
    three = monte_carlo_fidelity(f, m, n, seed=2, threads=3)
    assert one.mean_fidelity == three.mean_fidelity
    assert np.array_equal(one.fidelities, three.fidelities)


def test_field_shape_mismatch(pi_pulse):
    m, _ = pi_pulse
    wrong = ControlField.for_model(build_model("coupled_charge"), np.zeros((3, 200)))
    with pytest.raises(ValueError):
        monte_carlo_fidelity(wrong, m, 10, 0)
    with pytest.raises(ValueError):
        monte_carlo_fidelity(pi_pulse[1], m, 0, 0)


def _report(x):
    return TestReport.from_fidelities(np.array([x]), 1)


def test_sweep_table_requires_increasing_keys():
    rows = [SweepRow(0.1, 0.1, _report(0.9)), SweepRow(0.1, 0.1, _report(0.8))]
    with pytest.raises(ValueError):
        SweepTable("theta", rows)
    with pytest.raises(ValueError):
        SweepTable("theta", rows[::-1] + [SweepRow(0.05, 0.05, _report(0.9))])


def test_sweep_csv_header(tmp_path):
    table = SweepTable("theta", [SweepRow(0.05, 0.05, _report(0.99)), SweepRow(0.1, 0.1, _report(0.98))])
    path = tmp_path / "s.csv"
    write_sweep_csv(path, [table])
    text = path.read_bytes().decode()
    assert text.splitlines()[0] == "theta,mean_fidelity,std_fidelity,min_fidelity,n,seed"
    assert "\r" not in text
    rows = list(csv.reader(text.splitlines()))
    assert [float(r[1]) for r in rows[1:]] == [0.99, 0.98]
    assert tuple(rows[0]) == SWEEP_COLUMNS

    nf_table = SweepTable("nf", [SweepRow(1, 0.15, _report(0.9)), SweepRow(3, 0.15, _report(0.95))])
    assert nf_table.header()[0] == "nf" and nf_table.csv_rows()[0][0] == "1"

    table.label, nf_table.label = "a", "b"
    write_sweep_csv(path, [table, table])
    assert path.read_text().splitlines()[0].startswith("case,theta,")


def test_small_sweeps_run():
    cfg = OptimizationConfig(max_iterations=30)
    table = sweep_bound("single_charge_superposition", [0.0, 0.1], n=40, nf=3, config=cfg)
    assert [r.key for r in table.rows] == [0.0, 0.1]
    assert all(0 < r.report.mean_fidelity <= 1 for r in table.rows)
    nf_table = sweep_sample_count([1, 3], 0.1, n=40, config=cfg)
    assert [r.key for r in nf_table.rows] == [1, 3]
    with pytest.raises(ValueError):
        sweep_bound("single_charge_excited", [])

import numpy as np
import pytest

from parityqv import circuit as circ
from parityqv import noise as nz
from parityqv import randmat as rm
from parityqv import sim
from parityqv.errors import ResourceLimitError


def test_ideal_normalized_and_deterministic():
    c = circ.generate_standard(4, 4, 3)
    p = sim.simulate_ideal(c)
    assert p.sum() == pytest.approx(1.0)
    assert np.array_equal(p, sim.simulate_ideal(c))


def test_ideal_matches_explicit_matrix_product():
    c = circ.generate_standard(3, 3, 7)
    dim = 8
    u = np.eye(dim, dtype=complex)
    for layer in c.layers:
        pm = np.zeros((dim, dim))
        for x in range(dim):
            pm[rm.permute_index(x, layer.perm), x] = 1
        u = pm @ u
        for g in layer.gates:
            u = sim._full_operator(3, g.matrix, g.targets) @ u
    assert np.allclose(np.abs(u[:, 0]) ** 2, sim.simulate_ideal(c))


def test_resource_cap():
    c = circ.generate_parity(6, 1, 0)
    with pytest.raises(ResourceLimitError):
        sim.simulate_ideal(c, n_cap=5)


def test_sampling_frequencies():
    c = circ.generate_standard(3, 3, 1)
    p = sim.simulate_ideal(c)
    hist = sim.sample_outcomes(c, None, 100000, 2)
    freq = hist.table / hist.n_shots
    assert np.all(np.abs(freq - p) < 5 * np.sqrt(p * (1 - p) / 100000) + 1e-9)
    assert sum(hist.counts.values()) == 100000


def test_readout_full_flip_complements():
    c = circ.generate_parity(4, 2, 0)
    clean = sim.sample_outcomes(c, None, 500, 9)
    flipped = sim.sample_outcomes(c, nz.MeasurementFlip(1.0), 500, 9)
    assert np.array_equal(flipped.table, clean.table[np.arange(16) ^ 15])


def test_zero_shots_rejected():
    with pytest.raises(ValueError, match="empty input"):
        sim.sample_outcomes(circ.generate_parity(2, 1, 0), None, 0)


@pytest.mark.parametrize(
    "spec",
    [
        nz.GueTwoQubit(0.4),
        nz.SwapOmission(0.3),
        nz.FaultySwap(0.3),
        nz.Depolarizing(0.1),
        nz.Composite((nz.Dephasing(0.7, (1, 2)), nz.MeasurementFlip((0.05, 0.1, 0.2)))),
        nz.Composite((nz.GueTwoQubit(0.3), nz.SwapOmission(0.2), nz.Depolarizing(0.05))),
    ],
)
def test_trajectories_match_density_matrix_oracle(spec):
    c = circ.generate_standard(3, 3, 4)
    exact = sim.exact_noisy_distribution(c, spec)
    shots = 40000
    hist = sim.sample_outcomes(c, spec, shots, 8)
    freq = hist.table / shots
    se = np.sqrt(exact * (1 - exact) / shots)
    assert np.all(np.abs(freq - exact) < 5 * se + 1e-9)


def test_confusion_matrix_readout_matches_oracle():
    gen = np.random.default_rng(0)
    conf = gen.random((8, 8)) * 0.05 + np.eye(8)
    conf /= conf.sum(axis=0)
    spec = nz.MeasurementFlip(confusion=conf)
    c = circ.generate_standard(3, 2, 5)
    exact = sim.exact_noisy_distribution(c, spec)
    assert np.allclose(exact, conf @ sim.simulate_ideal(c))
    freq = sim.sample_outcomes(c, spec, 40000, 1).table / 40000
    assert np.all(np.abs(freq - exact) < 5 * np.sqrt(exact * (1 - exact) / 40000) + 1e-9)


def test_oracle_limits():
    with pytest.raises(ResourceLimitError):
        sim.exact_noisy_distribution(circ.generate_parity(4, 1, 0))
    with pytest.raises(ValueError):
        sim.exact_noisy_distribution(circ.generate_parity(2, 1, 0), nz.DissipativeGue(0.1))


def test_heavy_output_on_ideal_parity():
    r = sim.run_circuit(circ.generate_parity(5, 5, 0), None, 300, 1)
    assert r.h == 1.0 and r.n_shots == 300


def test_thresholds():
    assert sim.threshold_for("parity") == pytest.approx(2 / 3)
    assert sim.threshold_for("double-parity") == pytest.approx((1 + np.log(2)) / (4 * np.log(2)))
    with pytest.raises(ValueError):
        sim.threshold_for("bogus")


def test_qv_decision_examples():
    hs = [0.70, 0.72, 0.68, 0.71, 0.69]
    d = sim.qv_decision(hs, "parity")
    se = np.std(hs, ddof=1) / np.sqrt(5)
    assert d.stderr == pytest.approx(se)
    assert d.passed == (0.70 - 2 * se > 2 / 3)
    assert not sim.qv_decision([0.67, 0.66, 0.68], "parity").passed
    assert sim.qv_decision([0.67, 0.66, 0.68], "parity", strict=False).passed
    with pytest.raises(ValueError, match="insufficient"):
        sim.qv_decision([0.9], "parity")


def test_measure_quantum_volume_ideal():
    res = sim.measure_quantum_volume(None, "parity", 4, 5, 50, 0)
    assert set(res.decisions) == {2, 3, 4}
    # constant h=1 gives zero stderr, strictly above 2/3
    assert res.largest_n == 4 and res.log2_qv == 4


def test_measure_quantum_volume_double_skips_sizes():
    res = sim.measure_quantum_volume(None, "double-parity", 6, 3, 20, 0)
    assert set(res.decisions) == {4, 6}


def test_seeded_runs_reproducible():
    c = circ.generate_parity(4, 3, 0)
    spec = nz.GueTwoQubit(0.2)
    a = sim.sample_outcomes(c, spec, 300, rm.RngStream(5).generator())
    b = sim.sample_outcomes(c, spec, 300, rm.RngStream(5).generator())
    assert np.array_equal(a.table, b.table)


def test_histogram_addition():
    a = sim.OutcomeHistogram.from_outcomes(2, [0, 1, 1])
    b = sim.OutcomeHistogram.from_outcomes(2, [3])
    assert (a + b).counts == {"00": 1, "10": 2, "11": 1}


def test_quantum_volume_cutoff_matches_closed_form():
    alpha = 0.15
    # parity passes while e^{-2 alpha^2 N^2} > 1/3
    predicted = int(np.floor(np.sqrt(np.log(3) / (2 * alpha**2))))
    res = sim.measure_quantum_volume(nz.GueTwoQubit(alpha), "parity", 7, 30, 100, 3)
    assert res.largest_n is not None and abs(res.largest_n - predicted) <= 1


def test_fully_depolarizing_has_no_volume():
    res = sim.measure_quantum_volume(nz.Depolarizing(1.0), "parity", 4, 10, 50, 0)
    assert res.largest_n is None and res.log2_qv == 0

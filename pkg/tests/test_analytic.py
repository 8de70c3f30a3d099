from math import exp, log

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parityqv import analytic as an
from parityqv import randmat as rm
from parityqv.errors import ExtractionUndefinedError, FitError

PSTAR = (1 + log(2)) / 2


def mc_form_factor(alpha, n_samples, seed):
    """Oracle: E|tr exp(i alpha H)|^2 from sampled GUE spectra."""
    h = rm.sample_gue(4, seed, size=n_samples)
    ev = np.linalg.eigvalsh(h)
    tr2 = np.abs(np.exp(1j * alpha * ev).sum(axis=1)) ** 2
    return (tr2.mean() - 4) / 12, tr2.std(ddof=1) / 12 / np.sqrt(n_samples)


def test_f_alpha_values():
    assert an.f_alpha(0.0) == pytest.approx(1.0, abs=1e-15)
    assert an.f_alpha(0.1) == pytest.approx(0.95083, abs=5e-6)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.7])
def test_f_alpha_against_sampled_spectra(alpha):
    mean, se = mc_form_factor(alpha, 100000, 3)
    assert abs(an.f_alpha(alpha) - mean) < 5 * se


def test_f_alpha_small_angle():
    alphas = np.linspace(0, 0.1, 101)
    assert np.max(np.abs(an.f_alpha(alphas) - np.exp(-5 * alphas**2))) < 5e-4


def test_f_general():
    assert an.f_general(0.2, 4) == an.f_alpha(0.2)
    assert an.f_general(0.2, 8) == pytest.approx(exp(-9 * 0.04))


def test_gue_weights_dissipative():
    a, b = an.gue_weights(0.1, 2)
    assert a == pytest.approx((8 * exp(-9 * 0.01) + 1) / 9)
    assert a + 4 * b == pytest.approx(1.0)


def test_w_and_q():
    assert an.w_line(6) == 7.5
    assert an.w_line(2) == 0.5
    assert an.q_of_n(6) == pytest.approx(6.4)


@pytest.mark.parametrize("n", [4, 6, 8, 10, 12, 14, 16, 18, 20])
def test_pair_distribution_normalized(n):
    dist = an.pair_mixing_distribution(n)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
    assert all((n // 2 - k) % 2 == 0 for k in dist)


def test_pair_distribution_support_n4():
    assert set(an.pair_mixing_distribution(4)) == {0, 2}
    with pytest.raises(ValueError, match="invalid size"):
        an.pair_mixing_distribution(5)


def test_pair_distribution_monte_carlo():
    n, samples = 6, 100000
    gen = np.random.default_rng(0)
    colours = np.argsort(gen.random((samples, n)), axis=1) < n // 2
    order = np.argsort(gen.random((samples, n)), axis=1)
    paired = np.take_along_axis(colours, order, axis=1).reshape(samples, n // 2, 2)
    k = (paired[..., 0] != paired[..., 1]).sum(axis=1)
    dist = an.pair_mixing_distribution(n)
    for kk in range(n // 2 + 1):
        p = dist.get(kk, 0.0)
        freq = np.mean(k == kk)
        assert abs(freq - p) <= 3 * np.sqrt(max(p * (1 - p), 1e-12) / samples) + 1e-12


def test_g_functions():
    for n in (4, 6, 8):
        assert an.g_exact(1.0, n) == pytest.approx(1.0)
    for alpha in np.linspace(0, 0.05, 11):
        a, _ = an.gue_weights(alpha)
        for n in (4, 6, 8, 10):
            assert abs(an.g_exact(a, n) - an.g_approx(alpha, n)) < 1e-3


def test_predict_parity_examples():
    assert an.predict_parity(6, 6, 0.0).exact == 1.0
    assert an.predict_parity(6, 6, 50.0).exact == pytest.approx(0.5, abs=1e-12)
    pr = an.predict_parity(6, 6, 0.05)
    assert pr.approx == pytest.approx(0.5 * (1 + exp(-0.18)))
    assert pr.approx == pytest.approx(0.9176, abs=1e-4)
    assert abs(pr.exact - pr.approx) < 2e-3


@settings(max_examples=100)
@given(
    st.integers(2, 10), st.integers(1, 10), st.floats(0, 0.3), st.floats(1e-4, 0.05),
    st.integers(1, 4),
)
def test_predict_parity_monotone(n, t, alpha, step, d_env):
    base = an.predict_parity(n, t, alpha, d_env).exact
    assert 0.5 <= base <= 1.0
    assert an.predict_parity(n, t, alpha + step, d_env).exact <= base
    assert an.predict_parity(n + 2, t, alpha, d_env).exact <= base
    assert an.predict_parity(n, t + 1, alpha, d_env).exact <= base
    assert an.predict_parity(n, t, alpha, d_env + 1).exact <= base


def test_predict_double_parity_examples():
    assert an.predict_double_parity(6, 6, 0.0).exact == 1.0
    pr = an.predict_double_parity(6, 6, 0.0, p=0.01, w=7.5)
    assert pr.exact == pytest.approx(0.5 * (1 + exp(-0.225)))
    assert pr.exact == pytest.approx(0.8992, abs=1e-4)
    assert an.predict_double_parity(6, 200, 5.0, p=0.5).exact == pytest.approx(0.25, abs=1e-9)
    t_minus = an.predict_double_parity(6, 6, 0.0, p=0.01, swap_layers=5).exact
    assert t_minus == pytest.approx(0.5 * (1 + exp(-0.5 * 0.01 * 7.5 * 5)))


@settings(max_examples=100)
@given(st.sampled_from([4, 6, 8, 10]), st.integers(1, 10), st.floats(0, 0.5), st.floats(0, 0.5))
def test_double_parity_floor(n, t, alpha, p):
    pr = an.predict_double_parity(n, t, alpha, p)
    assert 0.25 <= pr.exact <= 1.0
    assert 0.25 <= pr.approx <= 1.0


@settings(max_examples=100)
@given(st.floats(0, 0.3), st.sampled_from([4, 6, 8, 10, 12]), st.floats(0, 0.5))
def test_coefficient_identities(alpha, n, p):
    co = an.noise_coefficients(alpha, n, p)
    assert co.a + 4 * co.b == pytest.approx(1, abs=1e-12)
    assert co.A + co.B == pytest.approx(1, abs=1e-12)
    assert co.x + co.y == pytest.approx(1, abs=1e-12)
    assert co.c + co.d + 2 * co.e == pytest.approx(1, abs=1e-12)
    assert co.c + co.d - 2 * co.e == pytest.approx(co.a ** (n // 2), abs=1e-12)
    assert co.c - co.d == pytest.approx(an.g_exact(co.a, n), abs=1e-12)


def test_layer_transfer_check():
    report = an.layer_transfer_check(0, n_trials=50)
    assert report["matrix_power"] < 1e-10
    assert all(v < 1e-12 for k, v in report.items() if k != "matrix_power")
    a, b = 0.3, -0.7
    assert np.allclose(an.symmetric_power(a, b, 1), [[a, b], [b, a]])
    m = np.array([[a, b], [b, a]])
    assert np.abs(np.linalg.matrix_power(m, 7) - an.symmetric_power(a, b, 7)).max() < 1e-10


def test_extraction_examples():
    assert an.extract_exponents(1.0, "parity").Q == 0.0
    assert an.extract_exponents(0.75, "parity").Q == pytest.approx(log(2))
    with pytest.raises(ExtractionUndefinedError):
        an.extract_exponents(0.5, "parity")
    with pytest.raises(ExtractionUndefinedError):
        an.extract_exponents(0.51, "parity", stderr=0.01)
    with pytest.raises(ValueError, match="missing input"):
        an.extract_exponents(0.9, "double-parity")


@settings(max_examples=100)
@given(st.sampled_from([4, 6, 8]), st.integers(1, 8), st.floats(0, 0.1), st.floats(0, 0.05))
def test_extraction_inverts_approx_forms(n, t, alpha, p):
    q = an.extract_exponents(an.predict_parity(n, t, alpha).approx, "parity").Q
    assert q == pytest.approx(2 * alpha**2 * n * t, abs=1e-12)
    w = an.extract_exponents(an.predict_double_parity(n, t, 0.0, p).approx, "double-parity-swap").W
    assert w == pytest.approx(0.5 * p * an.w_line(n) * t, abs=1e-12)
    h = an.predict_double_parity(n, t, alpha, p).approx
    comp = {"Q": 2 * alpha**2 * n * t, "W": 0.5 * p * an.w_line(n) * t}
    qp = an.extract_exponents(h, "double-parity", companions=comp).Qprime
    assert qp == pytest.approx(1.5 * alpha**2 * t * n * (n - 2 / 3) / (n - 1), abs=1e-9)


def test_fit_linear():
    r = an.fit_linear([0, 1, 2, 3], [0, 2, 4, 6])
    assert r.slope == pytest.approx(2) and r.intercept == pytest.approx(0, abs=1e-12)
    assert r.slope_stderr == pytest.approx(0, abs=1e-7)
    gen = np.random.default_rng(1)
    xs = np.linspace(0, 1, 20)
    errs = np.full(20, 0.05)
    ys = 1.5 * xs + 0.2 + gen.normal(0, 0.05, 20)
    r = an.fit_linear(xs, ys, errs)
    assert abs(r.slope - 1.5) < 4 * r.slope_stderr
    with pytest.raises(FitError, match="singular"):
        an.fit_linear([1, 1, 1], [1, 2, 3])
    with pytest.raises(FitError):
        an.fit_linear([1, 2], [1, 2])


def test_estimator_hu():
    n = 3
    assert an.estimator_hu(n, 4, 1.0, [4.0**n] * 3) == pytest.approx(PSTAR)
    assert an.estimator_hu(n, 4, 1.0, [4.0**n, 1.0, 4.0**n]) == pytest.approx(0.5)


@pytest.mark.parametrize("n,m_layers,eps", [(3, 4, 0.1), (5, 2, 0.3), (6, 6, 0.02)])
def test_estimator_hu_depolarizing_closed_form(n, m_layers, eps):
    expect = 0.5 + (PSTAR - 0.5) * ((2 - eps) ** n - 1) / (2**n - 1) * (
        ((4 - 3 * eps) ** n - 1) / (4**n - 1)
    ) ** (m_layers - 1)
    assert an.estimator_hu_depolarizing(n, m_layers, eps) == pytest.approx(expect, rel=1e-12)


def test_estimator_hum():
    assert an.estimator_hum_depolarizing(2, 3, 0.0) == 1.0
    assert an.estimator_hum_depolarizing(2, 3, 1.0) == 0.5
    assert an.estimator_hum_depolarizing(2, 3, 0.1) == pytest.approx(0.7657, abs=1e-4)
    transfers = [an.depolarizing_transfer(2, 0.1)] * 3
    assert an.estimator_hum(transfers) == pytest.approx(an.estimator_hum_depolarizing(2, 3, 0.1))
    assert an.estimator_hum([np.eye(2)] * 4) == 1.0
    with pytest.raises(ValueError, match="invalid channel"):
        an.estimator_hum([np.array([[0.9, 0.5], [0.6, 0.5]])])


def brute_p0(conf):
    return float(np.trace(conf)) / conf.shape[0]


def test_measurement_inversion_perfect():
    p0, h = an.measurement_inversion([1.0, 1.0], 2)
    assert p0 == pytest.approx(1.0)
    assert h == pytest.approx(PSTAR)
    with pytest.raises(ValueError, match="incomplete sweep"):
        an.measurement_inversion({1: 1.0}, 2)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
@pytest.mark.parametrize("q", [0.0, 0.03, 0.2, 0.5])
def test_measurement_inversion_bit_flips(n, q):
    conf = an.flip_confusion(n, q)
    assert np.allclose(conf.sum(axis=0), 1)
    hums = [an.hum_from_confusion(conf, m) for m in range(1, n + 1)]
    p0, _ = an.measurement_inversion(hums, n)
    assert p0 == pytest.approx((1 - q) ** n, abs=1e-12)
    assert p0 == pytest.approx(brute_p0(conf), abs=1e-12)


def test_measurement_inversion_fully_random():
    n = 4
    conf = np.full((16, 16), 1 / 16)
    hums = [an.hum_from_confusion(conf, m) for m in range(1, n + 1)]
    assert np.allclose(hums, 0.5)
    p0, _ = an.measurement_inversion([0.5] * n, n)
    assert p0 == pytest.approx(float(an.inversion_weights(n)[1:].sum() / 2 + an.inversion_weights(n)[0]))
    assert p0 == pytest.approx(brute_p0(conf))


def test_hum_from_confusion_bruteforce():
    """Independent enumeration over inputs, subsets and both parities."""
    n = 3
    gen = np.random.default_rng(4)
    conf = gen.random((8, 8))
    conf /= conf.sum(axis=0)
    from itertools import combinations
    for m in range(1, n + 1):
        total, count = 0.0, 0
        for x in range(8):
            for sub in combinations(range(n), m):
                mask = sum(1 << i for i in sub)
                px = bin(x & mask).count("1") % 2
                same = sum(conf[y, x] for y in range(8) if bin(y & mask).count("1") % 2 == px)
                total += same
                count += 1
        assert an.hum_from_confusion(conf, m) == pytest.approx(total / count, abs=1e-12)


def test_upper_bound():
    n, m_layers = 4, 3
    corr = (1 + 1 / (2**n - 1)) * (1 + 1 / (4**n - 1)) ** (m_layers - 1) - 1
    assert an.upper_bound_hu([1.0] * 3, n, m_layers) == pytest.approx(PSTAR + (PSTAR - 0.5) * corr)
    assert an.upper_bound_hu([1.0, 0.0, 1.0], n, m_layers) == pytest.approx(0.5 + (PSTAR - 0.5) * corr)
    assert an.upper_bound_hu([1.0] * 3, 10, 3) == pytest.approx(PSTAR, abs=1e-3)
    for n in range(4, 9):
        for m_layers in range(2, 5):
            for eps in np.linspace(0, 1, 21):
                p0 = (1 - eps / 2) ** n
                bound = an.upper_bound_hu([p0] * m_layers, n, m_layers)
                assert bound >= an.estimator_hu_depolarizing(n, m_layers, eps) - 1e-12
    with pytest.raises(ValueError):
        an.upper_bound_hu([1.0] * 5, 2, 5)


def test_dephasing_counterexample():
    n = 4
    h_u, h_um = an.dephasing_counterexample(n, 0.0)
    assert h_u == pytest.approx(PSTAR) and h_um == 1.0
    h_u, _ = an.dephasing_counterexample(n, np.pi)
    assert h_u == pytest.approx(0.5 - (PSTAR - 0.5) / (4**n - 1))
    for lam in np.linspace(0, np.pi, 7):
        assert an.dephasing_counterexample(n, lam)[1] == 1.0


def test_dephasing_overlap_oracle():
    """Choi overlap of Z_lambda^{(x)n} with the identity equals |tr|^2."""
    n, lam = 3, 0.8
    z = np.diag([1, np.exp(1j * lam)])
    full = z
    for _ in range(n - 1):
        full = np.kron(full, z)
    overlap = abs(np.trace(full)) ** 2
    expect = 0.5 + (PSTAR - 0.5) * (overlap - 1) / (4**n - 1)
    assert an.dephasing_counterexample(n, lam)[0] == pytest.approx(expect)


def test_pstar_precision():
    assert an.P_STAR == (1 + log(2)) / 2

"""Closed-form heavy-output predictions, exponent extraction, fits and estimators.

Conventions: ``a`` is the weight of the identity part of the averaged
doubled GUE channel on one gate (``a + 4 b = 1``), ``p`` the swap omission
probability, ``w`` the mean number of swaps per layer permutation.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, exp, log, sqrt
from typing import Mapping, Sequence

import numpy as np

from .errors import ExtractionUndefinedError, FitError

P_STAR = (1.0 + log(2.0)) / 2.0


# --- spectral form factor and channel weights ----------------------------------

def f_alpha(alpha):
    """Exact dim-4 GUE form factor ``(E|tr e^{i alpha H}|^2 - 4) / 12``."""
    a2 = np.asarray(alpha, dtype=float) ** 2
    poly = -a2**5 + 12.5 * a2**4 - 64 * a2**3 + 138 * a2**2 - 144 * a2 + 36
    out = np.exp(-a2) * poly / 36
    return float(out) if np.ndim(out) == 0 else out


def f_general(alpha, d: int):
    """Form factor in dimension ``d``: exact for ``d == 4``, else ``exp(-(d+1) alpha^2)``."""
    if d == 4:
        return f_alpha(alpha)
    return np.exp(-(d + 1) * np.asarray(alpha, dtype=float) ** 2)


def gue_weights(alpha, d_env: int = 1):
    """``(a, b)`` with ``a = (D f + 1)/(D + 1)`` and ``a + 4 b = 1``, ``D = 4 d_env``."""
    dim = 4 * d_env
    f = f_general(alpha, dim)
    a = (dim * f + 1) / (dim + 1)
    return a, (1 - a) / 4


def _bell_projector() -> np.ndarray:
    phi = np.zeros(16)
    phi[[0, 5, 10, 15]] = 1.0
    return np.outer(phi, phi)


def gue_doubled_average(alpha: float) -> np.ndarray:
    """Analytic ``E[U ⊗ conj(U)] = a I + b |+><+|`` on the 4 ⊗ 4 doubled space."""
    a, b = gue_weights(alpha)
    return a * np.eye(16) + b * _bell_projector()


def swap_doubled_average(p: float) -> np.ndarray:
    """Averaged doubled faulty swap ``(1 - p) S ⊗ S + p I`` (S is real)."""
    s = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=float)
    return (1 - p) * np.kron(s, s) + p * np.eye(16)


def w_line(n: int) -> float:
    """Mean brick-sort swap count of a uniform permutation on a line."""
    if n < 2:
        raise ValueError("invalid size: need n >= 2")
    return n * (n - 1) / 4


def q_of_n(n: int) -> float:
    return n * (n - 2 / 3) / (n - 1)


# --- pair statistics -------------------------------------------------------------

def pair_mixing_distribution(n: int) -> dict[int, float]:
    """Probability of ``K`` cross-colour pairs for a random half/half colouring."""
    if n % 2 or n < 4:
        raise ValueError(f"invalid size: need even n >= 4, got {n}")
    h = n // 2
    norm = comb(n, h)
    return {
        k: comb(h, k) * comb(h - k, (h - k) // 2) * 2**k / norm
        for k in range(h + 1)
        if (h - k) % 2 == 0
    }


def g_exact(a, n: int):
    """``<a^{(n/2 + K)/2}>_K`` as a finite sum over the pair distribution."""
    a = np.asarray(a, dtype=float)
    out = sum(prob * a ** ((n / 2 + k) / 2) for k, prob in pair_mixing_distribution(n).items())
    return float(out) if np.ndim(out) == 0 else out


def g_approx(alpha, n: int):
    return np.exp(-1.5 * np.asarray(alpha, dtype=float) ** 2 * q_of_n(n))


# --- predictions -------------------------------------------------------------------

@dataclass(frozen=True)
class Prediction:
    exact: float
    approx: float


def predict_parity(n: int, t: int, alpha: float, d_env: int = 1, n_gates: int | None = None) -> Prediction:
    """Heavy-output frequency of a parity circuit with GUE noise after every gate."""
    if n < 1 or t < 0:
        raise ValueError("invalid size")
    gates = (n // 2) * t if n_gates is None else n_gates
    a, _ = gue_weights(alpha, d_env)
    exact = 0.5 * (1 + a**gates)
    approx = 0.5 * (1 + exp(-4 * d_env * alpha**2 * gates))
    return Prediction(float(exact), float(approx))


def predict_double_parity(
    n: int, t: int, alpha: float, p: float = 0.0, w: float | None = None,
    d_env: int = 1, swap_layers: int | None = None,
) -> Prediction:
    """Heavy-output frequency of a double-parity circuit.

    ``swap_layers`` is the number of permutations whose swap errors count
    (default ``t``; pass ``t - 1`` since the first permutation acts on
    ``|0...0>`` and its errors are invisible).
    """
    if n % 2 or n < 4:
        raise ValueError("invalid size: need even n >= 4")
    if not 0 <= p <= 0.5:
        raise ValueError("p must lie in [0, 1/2]")
    w = w_line(n) if w is None else w
    s = t if swap_layers is None else swap_layers
    a, _ = gue_weights(alpha, d_env)
    swap = exp(-0.5 * p * w * s)
    exact = 0.25 * (2 * g_exact(a, n) ** t * swap + a ** (n * t / 2) + 1)
    approx = 0.25 * (
        2 * exp(-1.5 * d_env * alpha**2 * n * t * (n - 2 / 3) / (n - 1)) * swap
        + exp(-2 * d_env * alpha**2 * n * t) + 1
    )
    return Prediction(float(exact), float(approx))


@dataclass(frozen=True)
class NoiseCoefficients:
    a: float
    b: float
    A: float
    B: float
    x: float
    y: float
    c: float
    d: float
    e: float


def noise_coefficients(alpha: float, n: int, p: float = 0.0, w: float | None = None, d_env: int = 1) -> NoiseCoefficients:
    """Per-layer weights of the averaged single- and double-parity layer maps."""
    a, b = gue_weights(alpha, d_env)
    an = a ** (n // 2)
    w = w_line(n) if w is None else w
    s = exp(-0.5 * p * w)
    g = g_exact(a, n) if n % 2 == 0 and n >= 4 else float("nan")
    return NoiseCoefficients(
        a=float(a), b=float(b),
        A=0.5 * (1 + an), B=0.5 * (1 - an),
        x=0.5 * (1 + s), y=0.5 * (1 - s),
        c=0.25 * an + 0.5 * g + 0.25, d=0.25 * an - 0.5 * g + 0.25, e=0.25 - 0.25 * an,
    )


def symmetric_power(a: float, b: float, t: int) -> np.ndarray:
    """Closed form of ``[[a, b], [b, a]]**t``."""
    s, d = (a + b) ** t, (a - b) ** t
    return 0.5 * np.array([[s + d, s - d], [s - d, s + d]])


def layer_transfer_check(rng=None, n_trials: int = 20, max_t: int = 12) -> dict[str, float]:
    """Largest deviations of the matrix-power and coefficient identities."""
    gen = np.random.default_rng(rng)
    report = {"matrix_power": 0.0, "a+4b": 0.0, "A+B": 0.0, "x+y": 0.0,
              "c+d+2e": 0.0, "c+d-2e": 0.0, "c-d": 0.0}
    for _ in range(n_trials):
        a, b = gen.uniform(-1, 1, size=2)
        t = int(gen.integers(1, max_t + 1))
        direct = np.linalg.matrix_power(np.array([[a, b], [b, a]]), t)
        report["matrix_power"] = max(report["matrix_power"], float(np.abs(direct - symmetric_power(a, b, t)).max()))
        alpha = gen.uniform(0, 0.3)
        n = int(gen.choice([4, 6, 8, 10, 12]))
        p = gen.uniform(0, 0.5)
        co = noise_coefficients(alpha, n, p)
        checks = {
            "a+4b": co.a + 4 * co.b - 1, "A+B": co.A + co.B - 1, "x+y": co.x + co.y - 1,
            "c+d+2e": co.c + co.d + 2 * co.e - 1,
            "c+d-2e": co.c + co.d - 2 * co.e - co.a ** (n // 2),
            "c-d": co.c - co.d - g_exact(co.a, n),
        }
        for k, v in checks.items():
            report[k] = max(report[k], abs(v))
    return report


# --- exponent extraction and fits -------------------------------------------------

@dataclass(frozen=True)
class DecayExponents:
    Q: float | None = None
    W: float | None = None
    Qprime: float | None = None


def _log_excess(excess: float, stderr: float | None, what: str) -> float:
    if excess <= 0 or (stderr is not None and excess < 3 * stderr):
        raise ExtractionUndefinedError(f"extraction undefined: {what} too close to its floor")
    return -log(excess)


def extract_exponents(
    h: float, kind: str, n: int | None = None, t: int | None = None,
    companions: Mapping[str, float] | None = None, stderr: float | None = None,
) -> DecayExponents:
    """Invert a heavy-output value for its decay exponent.

    ``kind``: ``"parity"`` (Q), ``"double-parity-swap"`` (W, no gate noise) or
    ``"double-parity"`` (Q' from companion ``Q`` and ``W``).  When ``stderr``
    is given, ``h`` must clear its floor by three standard errors.
    """
    if kind == "parity":
        return DecayExponents(Q=_log_excess(2 * h - 1, None if stderr is None else 2 * stderr, "h"))
    if kind == "double-parity-swap":
        return DecayExponents(W=_log_excess(2 * h - 1, None if stderr is None else 2 * stderr, "h"))
    if kind == "double-parity":
        if not companions or "Q" not in companions or "W" not in companions:
            raise ValueError("missing input: Q' needs companion Q and W")
        q, w = float(companions["Q"]), float(companions["W"])
        excess = (4 * h - 1 - exp(-q)) / 2
        qp = _log_excess(excess, None if stderr is None else 2 * stderr, "h") - w
        return DecayExponents(Q=q, W=w, Qprime=qp)
    raise ValueError(f"invalid kind {kind!r}")


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float


def fit_linear(xs, ys, y_errs=None) -> FitResult:
    """Straight-line least squares, weighted by ``1/y_err**2`` when errors are given.

    With errors the parameter covariance uses them as absolute sigmas;
    without, it is scaled by the residual variance.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 3:
        raise FitError("singular fit: need at least three points")
    if np.ptp(xs) == 0:
        raise FitError("singular fit: all x values coincide")
    if y_errs is not None:
        errs = np.asarray(y_errs, dtype=float)
        if np.all(errs > 0):
            coef, cov = np.polyfit(xs, ys, 1, w=1 / errs, cov="unscaled")
            se = np.sqrt(np.diag(cov))
            return FitResult(float(coef[0]), float(coef[1]), float(se[0]), float(se[1]))
    coef, res, *_ = np.polyfit(xs, ys, 1, full=True)
    x_c = xs - xs.mean()
    dof = xs.size - 2
    s2 = float(res[0]) / dof if res.size else 0.0
    sxx = float(x_c @ x_c)
    se_slope = sqrt(s2 / sxx)
    se_int = sqrt(s2 * (1 / xs.size + xs.mean() ** 2 / sxx))
    return FitResult(float(coef[0]), float(coef[1]), se_slope, se_int)


# --- heavy-output estimators --------------------------------------------------------

def estimator_hu(n: int, m_layers: int, p0_last: float, overlaps: Sequence[float]) -> float:
    """Estimated heavy-output frequency from channel data.

    ``overlaps`` are the Choi inner products with the identity channel for the
    first ``m_layers - 1`` slots; ``p0_last`` is the probability that the last
    channel returns a uniformly random basis input unchanged.
    """
    overlaps = np.asarray(overlaps, dtype=float)
    if overlaps.size != m_layers - 1:
        raise ValueError("need one overlap per slot except the last")
    if not 0 <= p0_last <= 1:
        raise ValueError("p0 must be a probability")
    dim = 2.0**n
    factor = (dim * p0_last - 1) / (dim - 1)
    factor *= float(np.prod((overlaps - 1) / (dim * dim - 1)))
    return 0.5 + (P_STAR - 0.5) * factor


def estimator_hu_depolarizing(n: int, m_layers: int, eps: float) -> float:
    overlap = (4 - 3 * eps) ** n
    return estimator_hu(n, m_layers, (1 - eps / 2) ** n, [overlap] * (m_layers - 1))


def depolarizing_transfer(m: int, eps: float) -> np.ndarray:
    """Parity transfer matrix of ``m`` depolarized tracked qubits."""
    r = (1 - eps) ** m
    return 0.5 * np.array([[1 + r, 1 - r], [1 - r, 1 + r]])


def estimator_hum(transfers: Sequence[np.ndarray], atol: float = 1e-12) -> float:
    """Subset-parity heavy-output estimate from per-slot parity transfer matrices.

    ``transfers[z][p_new, p_old]`` is the probability that tracked parity
    ``p_old`` becomes ``p_new`` in slot ``z``; the estimate is half the trace
    of their ordered product (the parity path must close).
    """
    prod = np.eye(2)
    for t in transfers:
        t = np.asarray(t, dtype=float)
        if t.shape != (2, 2) or np.any(t < -atol) or np.any(t.sum(axis=0) > 1 + 1e-9):
            raise ValueError("invalid channel: transfer values must be sub-stochastic")
        prod = t @ prod
    return 0.5 * float(np.trace(prod))


def estimator_hum_depolarizing(m: int, m_layers: int, eps: float) -> float:
    return 0.5 * (1 + (1 - eps) ** (m * m_layers))


def inversion_weights(n: int) -> np.ndarray:
    """``v_m = C(n, m) / 2^{n-1} - [m == 0]`` for ``m = 0..n``."""
    v = np.array([comb(n, m) for m in range(n + 1)], dtype=float) / 2.0 ** (n - 1)
    v[0] -= 1
    return v


def measurement_inversion(hum_values, n: int) -> tuple[float, float]:
    """Recover ``P0`` of the readout channel from a full ``m = 1..n`` sweep.

    ``hum_values`` is a sequence of length ``n`` (``m = 1..n``) or a mapping
    keyed by ``m``.  Returns ``(P0, estimated h_U)`` assuming all other
    channels are the identity.
    """
    if isinstance(hum_values, Mapping):
        missing = [m for m in range(1, n + 1) if m not in hum_values]
        if missing:
            raise ValueError(f"incomplete sweep: missing m = {missing}")
        h = [hum_values[m] for m in range(1, n + 1)]
    else:
        h = list(hum_values)
        if len(h) != n:
            raise ValueError("incomplete sweep: need one value per m = 1..n")
    p0 = float(inversion_weights(n) @ np.array([1.0] + h))
    return p0, 0.5 + (P_STAR - 0.5) * (2.0**n * p0 - 1) / (2.0**n - 1)


def hum_from_confusion(confusion, m: int) -> float:
    """Exact subset-parity frequency for a readout confusion matrix (brute force).

    Averages over uniformly random basis inputs, subsets of size ``m`` and
    both target parities, as the symmetrised readout channel does.
    """
    conf = np.asarray(confusion, dtype=float)
    dim = conf.shape[0]
    n = dim.bit_length() - 1
    dist = np.bitwise_count(np.arange(dim)[:, None] ^ np.arange(dim)[None, :])
    p_d = np.array([conf[dist == d].sum() for d in range(n + 1)]) / dim
    f = [
        sum(comb(d, l) * comb(n - d, m - l) for l in range(0, m + 1, 2)) / comb(n, m)
        for d in range(n + 1)
    ]
    return float(p_d @ np.array(f))


def flip_confusion(n: int, q) -> np.ndarray:
    """Confusion matrix of independent bit flips (``q`` scalar or per qubit)."""
    q = np.broadcast_to(np.asarray(q, dtype=float), (n,))
    conf = np.ones((1, 1))
    for i in reversed(range(n)):
        conf = np.kron(conf, np.array([[1 - q[i], q[i]], [q[i], 1 - q[i]]]))
    return conf


def upper_bound_hu(p0_list: Sequence[float], n: int, m_layers: int) -> float:
    """Upper bound on the heavy-output estimator from per-slot ``P0`` values."""
    if m_layers > 2**n:
        raise ValueError("bound requires m_layers <= 2^n")
    p0 = np.asarray(p0_list, dtype=float)
    if p0.size != m_layers:
        raise ValueError("need one P0 per slot")
    corr = (1 + 1 / (2.0**n - 1)) * (1 + 1 / (4.0**n - 1)) ** (m_layers - 1) - 1
    return 0.5 + (P_STAR - 0.5) * (float(np.prod(p0)) + corr)


def dephasing_counterexample(n: int, lam: float) -> tuple[float, float]:
    """``(h_U estimate, subset-parity estimate)`` when only the first slot dephases."""
    overlap = abs(1 + np.exp(1j * lam)) ** (2 * n)
    h_u = 0.5 + (P_STAR - 0.5) * (overlap - 1) / (4.0**n - 1)
    return float(h_u), 1.0

"""Statevector simulation, shot sampling, heavy-output statistics and QV decisions.

Noisy runs use one freshly sampled noise trajectory per shot.  Trajectories
are simulated in batches (``(batch, 2**n)`` arrays), which changes nothing
statistically because the batch entries are independent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import circuit as circ
from . import noise as nz
from .errors import ResourceLimitError
from .randmat import _apply_local, apply_permutation, as_generator

DEFAULT_N_CAP = 14
P_STAR = (1.0 + np.log(2.0)) / 2.0
THRESHOLD = 2.0 / 3.0
DOUBLE_PARITY_THRESHOLD = (1.0 + np.log(2.0)) / (4.0 * np.log(2.0))
# amplitudes held at once while batching trajectories
BATCH_AMPLITUDES = 1 << 20


def _check_cap(n: int, n_cap: int | None) -> None:
    cap = DEFAULT_N_CAP if n_cap is None else n_cap
    if n > cap:
        raise ResourceLimitError(f"resource limit: {n} qubits exceeds cap {cap}")


# --- execution ---------------------------------------------------------------

def _gather_perm(psi: np.ndarray, perms: np.ndarray) -> np.ndarray:
    batch, dim = psi.shape
    x = np.arange(dim)
    dest = np.zeros((batch, dim), dtype=np.int64)
    for i in range(perms.shape[1]):
        dest |= ((x >> i) & 1)[None, :] << perms[:, i : i + 1]
    out = np.empty_like(psi)
    np.put_along_axis(out, dest, psi, axis=1)
    return out


def _apply_dissipative(psi, n, targets, joint, env_in, d_env, gen):
    batch = psi.shape[0]
    q1, q2 = targets
    t = psi.reshape((batch,) + (2,) * n)
    axes = [n - q1, n - q2]
    t = np.moveaxis(t, axes, [n - 1, n])
    moved = t.shape
    sys = t.reshape(batch, -1, 4)
    ext = np.zeros(sys.shape + (d_env,), dtype=complex)
    ext[np.arange(batch), :, :, env_in] = sys
    ext = ext.reshape(batch, -1, 4 * d_env) @ np.swapaxes(joint, -1, -2)
    ext = ext.reshape(batch, -1, 4, d_env)
    weights = np.sum(np.abs(ext) ** 2, axis=(1, 2))
    weights /= weights.sum(axis=1, keepdims=True)
    env_out = (gen.random(batch)[:, None] > np.cumsum(weights, axis=1)).sum(axis=1)
    env_out = np.minimum(env_out, d_env - 1)
    kept = ext[np.arange(batch), :, :, env_out]
    kept /= np.sqrt(weights[np.arange(batch), env_out])[:, None, None]
    out = np.moveaxis(kept.reshape(moved), [n - 1, n], axes)
    return out.reshape(batch, -1)


def run_instance(inst: nz.NoisyInstance, rng=None) -> np.ndarray:
    """Final states ``(batch, 2**n)`` of every trajectory in ``inst``.

    ``rng`` is only used for the environment measurement of dissipative noise.
    """
    n = inst.n_qubits
    psi = np.zeros((inst.batch, 1 << n), dtype=complex)
    psi[:, 0] = 1.0
    gen = None
    for op in inst.ops:
        code = op[0]
        if code == "perm":
            psi = apply_permutation(psi, op[1])
        elif code == "perm_b":
            psi = _gather_perm(psi, op[1])
        elif code in ("gate", "gate_b"):
            psi = _apply_local(psi, op[2], tuple(op[1]))
        elif code == "diss":
            if gen is None:
                gen = as_generator(rng)
            psi = _apply_dissipative(psi, n, op[1], op[2], op[3], op[4], gen)
        else:
            raise ValueError(f"unknown operation {code!r}")
    return psi


def final_state(c: circ.Circuit, n_cap: int | None = None) -> np.ndarray:
    _check_cap(c.n_qubits, n_cap)
    return run_instance(nz.realize_trajectory(c, None))[0]


def simulate_ideal(c: circ.Circuit, n_cap: int | None = None) -> np.ndarray:
    """Exact output distribution ``|<x|U|0>|**2`` (qubit 0 = least significant bit)."""
    p = np.abs(final_state(c, n_cap)) ** 2
    return p / p.sum()


# --- sampling ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OutcomeHistogram:
    """Shot counts indexed by basis integer; ``counts`` gives the bitstring view."""

    n_qubits: int
    table: np.ndarray

    @classmethod
    def from_outcomes(cls, n: int, outcomes) -> "OutcomeHistogram":
        return cls(n, np.bincount(np.asarray(outcomes, dtype=np.int64), minlength=1 << n))

    @property
    def n_shots(self) -> int:
        return int(self.table.sum())

    @property
    def counts(self) -> dict[str, int]:
        return {circ.bitstring(int(x), self.n_qubits): int(self.table[x]) for x in np.flatnonzero(self.table)}

    def __add__(self, other: "OutcomeHistogram") -> "OutcomeHistogram":
        if other.n_qubits != self.n_qubits:
            raise ValueError("histograms over different registers")
        return OutcomeHistogram(self.n_qubits, self.table + other.table)


def _sample_rows(probs: np.ndarray, gen) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    u = gen.random(probs.shape[0]) * cum[:, -1]
    return np.minimum((cum <= u[:, None]).sum(axis=1), probs.shape[1] - 1)


def apply_readout(outcomes: np.ndarray, inst: nz.NoisyInstance, gen) -> np.ndarray:
    outcomes = np.asarray(outcomes, dtype=np.int64)
    if inst.flip_q is not None:
        flips = gen.random((len(outcomes), inst.n_qubits)) < inst.flip_q[None, :]
        outcomes = outcomes ^ (flips.astype(np.int64) << np.arange(inst.n_qubits)).sum(axis=1)
    if inst.confusion is not None:
        outcomes = _sample_rows(inst.confusion.T[outcomes], gen)
    return outcomes


def sample_outcomes(
    c: circ.Circuit, spec, n_shots: int, rng=None, n_cap: int | None = None
) -> OutcomeHistogram:
    """Histogram of ``n_shots`` measurements, one noise trajectory per shot."""
    if n_shots < 1:
        raise ValueError("empty input: need at least one shot")
    n = c.n_qubits
    _check_cap(n, n_cap)
    gen = as_generator(rng)
    if nz.is_deterministic(spec):
        inst = nz.realize_trajectory(c, spec, gen, batch=1)
        probs = np.abs(run_instance(inst)[0]) ** 2
        outcomes = gen.choice(1 << n, size=n_shots, p=probs / probs.sum())
        return OutcomeHistogram.from_outcomes(n, apply_readout(outcomes, inst, gen))
    step = max(1, BATCH_AMPLITUDES >> n)
    table = np.zeros(1 << n, dtype=np.int64)
    done = 0
    while done < n_shots:
        b = min(step, n_shots - done)
        inst = nz.realize_trajectory(c, spec, gen, batch=b)
        probs = np.abs(run_instance(inst, gen)) ** 2
        outcomes = apply_readout(_sample_rows(probs, gen), inst, gen)
        table += np.bincount(outcomes, minlength=1 << n)
        done += b
    return OutcomeHistogram(n, table)


# --- statistics ----------------------------------------------------------------

@dataclass(frozen=True)
class RunResult:
    h: float
    stderr: float
    n_shots: int
    n_circuits: int = 1
    kind: str | None = None


def heavy_output_frequency(hist: OutcomeHistogram, hs: circ.HeavySubspace, kind: str | None = None) -> RunResult:
    if hs.n_qubits != hist.n_qubits:
        raise ValueError("histogram and heavy subspace sizes differ")
    shots = hist.n_shots
    if shots == 0:
        raise ValueError("empty input: histogram has no shots")
    h = float(hist.table[hs.mask()].sum()) / shots
    return RunResult(h, float(np.sqrt(h * (1 - h) / shots)), shots, 1, kind)


def run_circuit(c: circ.Circuit, spec, n_shots: int, rng=None, n_cap: int | None = None) -> RunResult:
    """Sample a circuit under noise and score it against its heavy subspace."""
    probs = simulate_ideal(c, n_cap) if c.kind == "standard" else None
    hs = circ.heavy_predicate(c, probs)
    return heavy_output_frequency(sample_outcomes(c, spec, n_shots, rng, n_cap), hs, c.kind)


def threshold_for(kind: str) -> float:
    if kind in ("double-parity", "hidden-double-parity"):
        return DOUBLE_PARITY_THRESHOLD
    if kind in ("standard", "parity", "m-parity", "hidden-parity"):
        return THRESHOLD
    raise ValueError(f"invalid kind {kind!r}")


@dataclass(frozen=True)
class QvDecision:
    n_qubits: int | None
    mean_h: float
    stderr: float
    threshold: float
    passed: bool
    strict: bool = True


def qv_decision(hs: Sequence[float], kind: str, n_qubits: int | None = None, strict: bool = True) -> QvDecision:
    """Pass iff ``mean - 2*stderr > threshold`` (``mean > threshold`` when not strict).

    ``stderr`` is the sample standard deviation over circuits divided by sqrt(n).
    """
    hs = np.asarray(hs, dtype=float)
    if hs.size < 2:
        raise ValueError("insufficient data: need at least two circuits")
    mean = float(hs.mean())
    se = float(hs.std(ddof=1) / np.sqrt(hs.size))
    thr = threshold_for(kind)
    margin = 2 * se if strict else 0.0
    return QvDecision(n_qubits, mean, se, thr, bool(mean - margin > thr), strict)


@dataclass(frozen=True)
class QvResult:
    decisions: dict
    largest_n: int | None
    log2_qv: int

    @property
    def passes(self) -> dict:
        return {n: d.passed for n, d in self.decisions.items()}


def measure_quantum_volume(
    spec, kind: str, n_max: int, n_circuits: int, n_shots: int, rng=None,
    n_min: int = 2, n_cap: int | None = None, strict: bool = True,
) -> QvResult:
    """Square circuits (T = N) for every valid N up to ``n_max``; reports all decisions.

    The largest passing N is reported without requiring the passing sizes to
    be contiguous; ``log2_qv`` is 0 if nothing passes.
    """
    if n_max < 2:
        raise ValueError("invalid size: n_max must be >= 2")
    _check_cap(n_max, n_cap)
    gen = as_generator(rng)
    decisions = {}
    for n in range(n_min, n_max + 1):
        if not circ.kind_accepts(kind, n):
            continue
        hs = []
        for _ in range(n_circuits):
            c = circ.generate(kind, n, n, gen)
            hs.append(run_circuit(c, spec, n_shots, gen, n_cap).h)
        decisions[n] = qv_decision(hs, kind, n, strict)
    passing = [n for n, d in decisions.items() if d.passed]
    largest = max(passing) if passing else None
    return QvResult(decisions, largest, largest or 0)


# --- exact density-matrix oracle (tiny registers only) --------------------------

def _full_operator(n: int, gate: np.ndarray, targets) -> np.ndarray:
    eye = np.eye(1 << n, dtype=complex)
    return _apply_local(eye, gate, tuple(targets)).T


def _pauli_twirl(rho: np.ndarray, n: int, qubits) -> np.ndarray:
    from .randmat import PAULIS

    out = rho
    for q in qubits:
        ops = [_full_operator(n, p, (q,)) for p in PAULIS]
        out = sum(o @ out @ o.conj().T for o in ops) / 4
    return out


def exact_noisy_distribution(c: circ.Circuit, spec=None, max_qubits: int = 3) -> np.ndarray:
    """Output distribution under the *averaged* noise channels, by density matrices.

    Uses the closed-form averages: GUE noise as two-qubit depolarizing with
    weight ``(4 f(alpha) + 1)/5``, faulty or omitted swaps as a swap kept with
    probability ``1 - p``, depolarizing as a single-qubit twirl, readout flips
    on the final probabilities.  Meant as a test oracle for n <= 3.
    """
    from .analytic import f_alpha

    n = c.n_qubits
    if n > max_qubits:
        raise ResourceLimitError(f"resource limit: exact oracle limited to {max_qubits} qubits")
    comps = nz.flatten(spec)
    if any(isinstance(x, nz.DissipativeGue) for x in comps):
        raise ValueError("invalid combination: no exact oracle for dissipative noise")
    swap_p = 0.0
    for x in comps:
        if isinstance(x, nz.SwapOmission):
            swap_p = x.p
        elif isinstance(x, nz.FaultySwap):
            swap_p = nz.sigma_to_p(x.sigma)
    gue_a = [(4 * f_alpha(x.alpha) + 1) / 5 for x in comps if isinstance(x, nz.GueTwoQubit)]
    dim = 1 << n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0

    def unitary(u, targets):
        nonlocal rho
        full = _full_operator(n, u, targets)
        rho = full @ rho @ full.conj().T

    for g in c.prep:
        unitary(g.matrix, g.targets)
    swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
    for t, layer in enumerate(c.layers, start=1):
        for j in nz.decompose_permutation(layer.perm):
            full = _full_operator(n, swap, (j, j + 1))
            rho = (1 - swap_p) * full @ rho @ full.conj().T + swap_p * rho
        for g in layer.gates:
            unitary(g.matrix, g.targets)
            if len(g.targets) == 2:
                for a in gue_a:
                    rho = a * rho + (1 - a) * _pauli_twirl(rho, n, g.targets)
        for x in comps:
            if isinstance(x, nz.Depolarizing):
                for q in range(n):
                    rho = (1 - x.eps) * rho + x.eps * _pauli_twirl(rho, n, (q,))
            elif isinstance(x, nz.Dephasing) and t in x.after_layers:
                for q in range(n):
                    unitary(np.diag([1.0, np.exp(1j * x.lam)]), (q,))
    probs = np.clip(np.real(np.diag(rho)), 0, None)
    for x in comps:
        if isinstance(x, nz.MeasurementFlip):
            if x.confusion is not None:
                probs = np.asarray(x.confusion) @ probs
            else:
                q = np.broadcast_to(np.asarray(x.q, dtype=float), (n,))
                idx = np.arange(dim)
                for i in range(n):
                    probs = (1 - q[i]) * probs + q[i] * probs[idx ^ (1 << i)]
    return probs / probs.sum()


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())

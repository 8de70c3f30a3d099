"""Noise models, per-trajectory realization and doubled-channel averages.

A :class:`NoisyInstance` is a batch of sampled noise realizations of one
circuit compiled into a flat list of operations; ``sim.run_instance``
executes it.  Each batch entry is an independent trajectory and the batch
dimension is only there for vectorization.

Noise placement:

* ``GueTwoQubit`` / ``DissipativeGue``: after every two-qubit placement.
* ``FaultySwap`` / ``SwapOmission``: on the brick-sort swap decomposition of
  every layer permutation (never on the gates).
* ``Depolarizing``: every qubit after every layer, as a stochastic Pauli.
* ``Dephasing``: ``diag(1, e^{i lam})`` on every qubit after the listed
  layers (default: after layer 1 only).
* ``MeasurementFlip``: applied to sampled bitstrings.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import randmat
from .circuit import Circuit
from .randmat import as_generator, check_permutation


@dataclass(frozen=True)
class GueTwoQubit:
    alpha: float


@dataclass(frozen=True)
class DissipativeGue:
    alpha: float
    d_env: int = 1

    def __post_init__(self):
        if self.d_env < 1:
            raise ValueError("environment dimension must be >= 1")


@dataclass(frozen=True)
class FaultySwap:
    sigma: float


@dataclass(frozen=True)
class SwapOmission:
    p: float


@dataclass(frozen=True)
class Depolarizing:
    eps: float


@dataclass(frozen=True)
class Dephasing:
    lam: float
    after_layers: tuple[int, ...] = (1,)


@dataclass(frozen=True, eq=False)
class MeasurementFlip:
    """Independent bit flips (scalar or per-qubit ``q``) or a full confusion matrix.

    ``confusion[i, j]`` is the probability of reading ``i`` when the state was
    ``j`` (columns sum to one).
    """

    q: Union[float, tuple[float, ...]] = 0.0
    confusion: np.ndarray | None = None


@dataclass(frozen=True)
class Composite:
    parts: tuple = ()


@dataclass(frozen=True)
class Scale:
    factor: float
    inner: object = None


NoiseSpec = Union[
    GueTwoQubit, DissipativeGue, FaultySwap, SwapOmission, Depolarizing,
    Dephasing, MeasurementFlip, Composite, Scale,
]

IDEAL = Composite(())


def sigma_to_p(sigma: float) -> float:
    """Swap-omission probability equivalent to Gaussian ``S**beta`` with std ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    return 0.5 * (1.0 - np.exp(-0.5 * np.pi**2 * sigma**2))


def _prob(x: float, name: str) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name}={x} is not a probability")
    return float(x)


def flatten(spec, scale: float = 1.0) -> list:
    """Primitive components of ``spec`` with every ``Scale`` folded in.

    Scaling multiplies alpha, sigma, p, eps, lam and flip probabilities;
    probabilities are clipped to 1.
    """
    if spec is None:
        return []
    if scale < 0:
        raise ValueError("scale must be >= 0")
    if isinstance(spec, Composite):
        out = []
        for part in spec.parts:
            out.extend(flatten(part, scale))
        return out
    if isinstance(spec, Scale):
        if spec.factor < 0:
            raise ValueError("scale must be >= 0")
        return flatten(spec.inner, scale * spec.factor)
    s = scale
    if isinstance(spec, GueTwoQubit):
        return [GueTwoQubit(spec.alpha * s)] if spec.alpha * s else []
    if isinstance(spec, DissipativeGue):
        return [DissipativeGue(spec.alpha * s, spec.d_env)] if spec.alpha * s else []
    if isinstance(spec, FaultySwap):
        return [FaultySwap(spec.sigma * s)] if spec.sigma * s else []
    if isinstance(spec, SwapOmission):
        p = min(1.0, _prob(spec.p, "p") * s)
        return [SwapOmission(p)] if p else []
    if isinstance(spec, Depolarizing):
        eps = min(1.0, _prob(spec.eps, "eps") * s)
        return [Depolarizing(eps)] if eps else []
    if isinstance(spec, Dephasing):
        return [Dephasing(spec.lam * s, tuple(spec.after_layers))] if spec.lam * s else []
    if isinstance(spec, MeasurementFlip):
        if spec.confusion is not None:
            conf = np.asarray(spec.confusion, dtype=float)
            if s != 1.0:
                eye = np.eye(conf.shape[0])
                conf = eye + min(s, 1.0 / max(1e-300, _max_offdiag(conf))) * (conf - eye)
            return [MeasurementFlip(confusion=conf)]
        q = np.minimum(1.0, np.atleast_1d(np.asarray(spec.q, dtype=float)) * s)
        if np.any(q < 0):
            raise ValueError("flip probabilities must be non-negative")
        return [MeasurementFlip(q=tuple(q.tolist()))] if np.any(q > 0) else []
    raise TypeError(f"not a noise spec: {spec!r}")


def _max_offdiag(conf):
    return float(np.max(1.0 - np.diag(conf)))


def is_deterministic(spec) -> bool:
    """True when all trajectories coincide (only readout noise, or none)."""
    return all(isinstance(c, MeasurementFlip) for c in flatten(spec))


# --- permutations as swap networks -------------------------------------------

def decompose_permutation(perm, n: int | None = None) -> list[int]:
    """Odd-even transposition (brick) sort of ``perm`` on a line.

    Returns positions ``j`` of adjacent swaps ``(j, j+1)``; applying them in
    order sends the content of position ``i`` to ``perm[i]``.  The length is
    the inversion count of ``perm``.
    """
    perm = check_permutation(perm, n)
    target = perm.copy()
    n = len(target)
    swaps: list[int] = []
    for rnd in range(n):
        changed = False
        for j in range(rnd % 2, n - 1, 2):
            if target[j] > target[j + 1]:
                target[j], target[j + 1] = target[j + 1], target[j]
                swaps.append(j)
                changed = True
        if not changed and rnd % 2 and np.all(target[:-1] < target[1:]):
            break
    return swaps


def compose_swaps(swaps: Sequence[int], n: int) -> np.ndarray:
    """Permutation (``i -> perm[i]``) realised by a swap sequence."""
    occupant = np.arange(n)
    for j in swaps:
        occupant[[j, j + 1]] = occupant[[j + 1, j]]
    perm = np.empty(n, dtype=int)
    perm[occupant] = np.arange(n)
    return perm


# --- realization ---------------------------------------------------------------

@dataclass(eq=False)
class NoisyInstance:
    """Batch of sampled noise realizations compiled to operations.

    Operation tuples:
      ``("perm", perm)``, ``("perm_b", perms[B, n])``,
      ``("gate", targets, U)``, ``("gate_b", targets, U[B, d, d])``,
      ``("diss", targets, joint[B, 4dE, 4dE], env_in[B], dE)``.
    """

    n_qubits: int
    batch: int
    ops: list = field(default_factory=list)
    flip_q: np.ndarray | None = None
    confusion: np.ndarray | None = None

    def unitaries(self):
        for op in self.ops:
            if op[0] in ("gate", "gate_b", "diss"):
                yield op[2]


def _one_of(components, types):
    found = [c for c in components if isinstance(c, types)]
    return found


def realize_trajectory(c: Circuit, spec=None, rng=None, batch: int = 1) -> NoisyInstance:
    """Sample ``batch`` independent noise realizations of circuit ``c``."""
    gen = as_generator(rng)
    comps = flatten(spec)
    n = c.n_qubits
    swap_models = _one_of(comps, (FaultySwap, SwapOmission))
    if len(swap_models) > 1:
        raise ValueError("invalid combination: more than one permutation-noise model")
    swap_model = swap_models[0] if swap_models else None
    gues = _one_of(comps, GueTwoQubit)
    disss = _one_of(comps, DissipativeGue)
    depols = _one_of(comps, Depolarizing)
    dephs = _one_of(comps, Dephasing)
    flips = _one_of(comps, MeasurementFlip)
    if len(flips) > 1:
        raise ValueError("invalid combination: more than one readout model")

    inst = NoisyInstance(n, batch)
    if flips:
        fl = flips[0]
        if fl.confusion is not None:
            conf = np.asarray(fl.confusion, dtype=float)
            if conf.shape != (1 << n, 1 << n):
                raise ValueError("invalid combination: confusion matrix size does not match circuit")
            if not np.allclose(conf.sum(axis=0), 1.0) or np.any(conf < 0):
                raise ValueError("confusion matrix columns must be probability vectors")
            inst.confusion = conf
        else:
            q = np.asarray(fl.q, dtype=float)
            if q.size == 1:
                q = np.full(n, float(q.reshape(-1)[0]))
            if q.size != n:
                raise ValueError("invalid combination: per-qubit flip list has wrong length")
            inst.flip_q = q

    ops = inst.ops
    for g in c.prep:
        ops.append(("gate", g.targets, g.matrix))
    for t, layer in enumerate(c.layers, start=1):
        perm = np.asarray(layer.perm)
        if swap_model is None or np.array_equal(perm, np.arange(n)):
            if not np.array_equal(perm, np.arange(n)):
                ops.append(("perm", perm))
        elif isinstance(swap_model, SwapOmission):
            swaps = decompose_permutation(perm)
            keep = gen.random((batch, len(swaps))) >= swap_model.p
            ops.append(("perm_b", _omitted_perms(swaps, keep, n)))
        else:
            for j in decompose_permutation(perm):
                beta = gen.normal(1.0, swap_model.sigma, size=batch)
                ops.append(("gate_b", (j, j + 1), randmat.fractional_swap(beta)))
        for g in layer.gates:
            if len(g.targets) != 2 or not (gues or disss):
                ops.append(("gate", g.targets, g.matrix))
                continue
            u = np.broadcast_to(g.matrix, (batch, 4, 4))
            for comp in gues:
                u = randmat.gue_unitary(4, comp.alpha, gen, batch) @ u
            ops.append(("gate_b", g.targets, u))
            for comp in disss:
                dim = 4 * comp.d_env
                joint = randmat.gue_unitary(dim, comp.alpha, gen, batch)
                env_in = gen.integers(comp.d_env, size=batch)
                ops.append(("diss", g.targets, joint, env_in, comp.d_env))
        for comp in depols:
            # with prob eps the qubit is replaced by the maximally mixed state,
            # i.e. a uniform Pauli (incl. identity) -> X, Y, Z each w.p. eps/4
            hit = gen.random((batch, n)) < comp.eps
            which = np.where(hit, gen.integers(4, size=(batch, n)), 0)
            for q in range(n):
                if np.any(which[:, q]):
                    ops.append(("gate_b", (q,), randmat.PAULIS[which[:, q]]))
        for comp in dephs:
            if t in comp.after_layers:
                z = np.diag([1.0, np.exp(1j * comp.lam)])
                for q in range(n):
                    ops.append(("gate", (q,), z))
    return inst


def _omitted_perms(swaps, keep, n):
    batch = keep.shape[0]
    occupant = np.tile(np.arange(n), (batch, 1))
    rows = np.arange(batch)
    for k, j in enumerate(swaps):
        sel = rows[keep[:, k]]
        a = occupant[sel, j].copy()
        occupant[sel, j] = occupant[sel, j + 1]
        occupant[sel, j + 1] = a
    perms = np.empty_like(occupant)
    np.put_along_axis(perms, occupant, np.tile(np.arange(n), (batch, 1)), axis=1)
    return perms


# --- doubled-space channel averages --------------------------------------------

def _doubled_mean(sampler, n_samples, chunk, return_stderr):
    total = 0
    s1 = np.zeros((16, 16), dtype=complex)
    s2 = np.zeros((16, 16))
    while total < n_samples:
        k = min(chunk, n_samples - total)
        u = sampler(k)
        d = np.einsum("bij,bkl->bikjl", u, np.conj(u)).reshape(k, 16, 16)
        s1 += d.sum(axis=0)
        s2 += (np.abs(d) ** 2).sum(axis=0)
        total += k
    mean = s1 / n_samples
    if not return_stderr:
        return mean
    var = np.maximum(s2 / n_samples - np.abs(mean) ** 2, 0.0)
    return mean, np.sqrt(var / max(n_samples - 1, 1))


def average_gue_channel(alpha: float, n_samples: int, rng=None, return_stderr: bool = False, chunk: int = 20000):
    """Monte-Carlo ``E[e^{i alpha H} ⊗ conj(e^{i alpha H})]`` over dim-4 GUE.

    With ``return_stderr`` also returns the elementwise standard error of the
    (complex) mean.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    gen = as_generator(rng)
    return _doubled_mean(lambda k: randmat.gue_unitary(4, alpha, gen, k), n_samples, chunk, return_stderr)


def average_faulty_swap_channel(sigma: float, n_samples: int, rng=None, return_stderr: bool = False, chunk: int = 20000):
    """Monte-Carlo ``E[S^beta ⊗ conj(S^beta)]`` with ``beta ~ Normal(1, sigma**2)``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    gen = as_generator(rng)
    return _doubled_mean(
        lambda k: randmat.fractional_swap(gen.normal(1.0, sigma, size=k)), n_samples, chunk, return_stderr
    )


# --- JSON form used by run configs ----------------------------------------------

def to_json(spec) -> dict:
    if spec is None:
        return {"type": "ideal"}
    if isinstance(spec, GueTwoQubit):
        return {"type": "gue", "alpha": spec.alpha}
    if isinstance(spec, DissipativeGue):
        return {"type": "dissipative", "alpha": spec.alpha, "d_env": spec.d_env}
    if isinstance(spec, FaultySwap):
        return {"type": "faulty_swap", "sigma": spec.sigma}
    if isinstance(spec, SwapOmission):
        return {"type": "swap_omission", "p": spec.p}
    if isinstance(spec, Depolarizing):
        return {"type": "depolarizing", "eps": spec.eps}
    if isinstance(spec, Dephasing):
        return {"type": "dephasing", "lam": spec.lam, "after_layers": list(spec.after_layers)}
    if isinstance(spec, MeasurementFlip):
        if spec.confusion is not None:
            return {"type": "measurement_flip", "confusion": np.asarray(spec.confusion).tolist()}
        q = spec.q
        return {"type": "measurement_flip", "q": list(q) if isinstance(q, (tuple, list)) else q}
    if isinstance(spec, Composite):
        if not spec.parts:
            return {"type": "ideal"}
        return {"type": "composite", "parts": [to_json(p) for p in spec.parts]}
    if isinstance(spec, Scale):
        return {"type": "scale", "factor": spec.factor, "inner": to_json(spec.inner)}
    raise TypeError(f"not a noise spec: {spec!r}")


def from_json(obj: dict):
    """Inverse of :func:`to_json`; raises ``ValueError``/``KeyError`` on bad input."""
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError("noise spec must be an object with a 'type' field")
    kind = obj["type"]
    if kind == "ideal":
        return IDEAL
    if kind == "gue":
        return GueTwoQubit(float(obj["alpha"]))
    if kind == "dissipative":
        return DissipativeGue(float(obj["alpha"]), int(obj.get("d_env", 1)))
    if kind == "faulty_swap":
        return FaultySwap(float(obj["sigma"]))
    if kind == "swap_omission":
        return SwapOmission(float(obj["p"]))
    if kind == "depolarizing":
        return Depolarizing(float(obj["eps"]))
    if kind == "dephasing":
        return Dephasing(float(obj["lam"]), tuple(int(x) for x in obj.get("after_layers", [1])))
    if kind == "measurement_flip":
        if "confusion" in obj:
            return MeasurementFlip(confusion=np.asarray(obj["confusion"], dtype=float))
        q = obj.get("q", 0.0)
        return MeasurementFlip(q=tuple(q) if isinstance(q, list) else float(q))
    if kind == "composite":
        return Composite(tuple(from_json(p) for p in obj["parts"]))
    if kind == "scale":
        return Scale(float(obj["factor"]), from_json(obj["inner"]))
    raise ValueError(f"unknown noise type {kind!r}")

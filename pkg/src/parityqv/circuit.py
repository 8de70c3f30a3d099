"""Layered circuit IR, the parity-structured generators and heavy subspaces.

A layer is a qubit permutation followed by gates on disjoint positions.  All
generators pair positions ``(0, 1), (2, 3), ...`` after the permutation, so
the randomness of who-meets-whom lives entirely in the permutation.  With odd
``n`` the last position is left idle, except in :func:`generate_m_parity`
which gives it a single-qubit gate.

Bitstrings are written with qubit 0 first (``"100"`` means qubit 0 is set),
while integer basis indices keep qubit 0 as the least significant bit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import randmat
from .errors import ParseError, UnitarityError
from .randmat import as_generator, check_permutation

KINDS = ("standard", "parity", "double-parity", "hidden-parity", "m-parity")
TAGS = ("generic", "parity", "diagonal-zz", "single", "pauli-x")
FORMAT_NAME = "parityqv-circuit"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class GatePlacement:
    targets: tuple[int, ...]
    matrix: np.ndarray
    tag: str = "generic"

    def __post_init__(self):
        dim = 1 << len(self.targets)
        if self.matrix.shape != (dim, dim):
            raise ValueError(
                f"gate on {len(self.targets)} qubit(s) needs a {dim}x{dim} matrix"
            )
        if self.tag not in TAGS:
            raise ValueError(f"unknown gate tag {self.tag!r}")


@dataclass(frozen=True, eq=False)
class Layer:
    perm: tuple[int, ...]
    gates: tuple[GatePlacement, ...]

    def touched(self) -> list[int]:
        return [q for g in self.gates for q in g.targets]


@dataclass(frozen=True, eq=False)
class Circuit:
    n_qubits: int
    layers: tuple[Layer, ...]
    kind: str = "standard"
    prep: tuple[GatePlacement, ...] = ()
    metadata: dict = field(default_factory=dict)
    seed: int | None = None

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def placements(self):
        yield from self.prep
        for layer in self.layers:
            yield from layer.gates


def bitstring(x: int, n: int) -> str:
    """Format a basis index with qubit 0 as the first character."""
    return "".join("1" if (x >> k) & 1 else "0" for k in range(n))


def from_bitstring(s: str) -> int:
    return sum(1 << k for k, ch in enumerate(s) if ch == "1")


def _seed_of(rng) -> int | None:
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    if isinstance(rng, randmat.RngStream):
        return rng.seed
    return None


def _check_size(n: int, minimum: int = 2) -> None:
    if n < minimum:
        raise ValueError(f"invalid size: need at least {minimum} qubits, got {n}")


def _layer_perms(n, t, gen, perms):
    if perms is None:
        return [gen.permutation(n) for _ in range(t)]
    if len(perms) != t:
        raise ValueError("invalid size: one permutation per layer required")
    return [check_permutation(p, n) for p in perms]


def _advance(positions: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Labels indexed by position, carried through ``perm``."""
    out = np.empty_like(positions)
    out[perm] = positions
    return out


def generate_standard(n: int, t: int, rng=None, perms=None) -> Circuit:
    """Quantum-Volume circuit: random permutation then Haar SU(4) on adjacent pairs."""
    _check_size(n)
    gen = as_generator(rng)
    layers = []
    for perm in _layer_perms(n, t, gen, perms):
        gates = tuple(
            GatePlacement((j, j + 1), randmat.sample_haar_su4(gen), "generic")
            for j in range(0, n - 1, 2)
        )
        layers.append(Layer(tuple(int(p) for p in perm), gates))
    return Circuit(n, tuple(layers), "standard", seed=_seed_of(rng))


def generate_parity(n: int, t: int, rng=None, perms=None) -> Circuit:
    _check_size(n)
    gen = as_generator(rng)
    layers = []
    for perm in _layer_perms(n, t, gen, perms):
        gates = tuple(
            GatePlacement((j, j + 1), randmat.sample_parity_gate(gen), "parity")
            for j in range(0, n - 1, 2)
        )
        layers.append(Layer(tuple(int(p) for p in perm), gates))
    return Circuit(n, tuple(layers), "parity", seed=_seed_of(rng))


def track_colors(initial: Sequence[int], perms: Sequence[Sequence[int]]) -> list[list[int]]:
    """Colour of each position before layer 1 and after every permutation."""
    cols = [np.asarray(initial, dtype=int)]
    for perm in perms:
        cols.append(_advance(cols[-1], np.asarray(perm)))
    return [c.tolist() for c in cols]


def generate_double_parity(n: int, t: int, rng=None, perms=None, colors=None) -> Circuit:
    """Parity conserved separately on two tracked halves of the register.

    Same-colour pairs get a parity gate, cross-colour pairs get ``exp(i a ZZ)``
    with ``a`` uniform on ``[0, 2 pi)``.
    """
    if n % 2 or n < 4:
        raise ValueError(f"invalid size: double-parity needs even n >= 4, got {n}")
    gen = as_generator(rng)
    if colors is None:
        colors = np.zeros(n, dtype=int)
        colors[gen.permutation(n)[: n // 2]] = 1
    colors = np.asarray(colors, dtype=int)
    if colors.sum() != n // 2:
        raise ValueError("invalid size: colour classes must have n/2 qubits each")
    layers = []
    tracked = [colors.tolist()]
    cur = colors
    for perm in _layer_perms(n, t, gen, perms):
        cur = _advance(cur, perm)
        tracked.append(cur.tolist())
        gates = []
        for j in range(0, n, 2):
            if cur[j] == cur[j + 1]:
                gates.append(GatePlacement((j, j + 1), randmat.sample_parity_gate(gen), "parity"))
            else:
                a = gen.uniform(0, 2 * np.pi)
                gates.append(GatePlacement((j, j + 1), randmat.diagonal_zz_gate(a), "diagonal-zz"))
        layers.append(Layer(tuple(int(p) for p in perm), tuple(gates)))
    return Circuit(
        n, tuple(layers), "double-parity", metadata={"colors": tracked}, seed=_seed_of(rng)
    )


def generate_m_parity(
    n: int, t: int, m: int, rng=None, perms=None, subset=None, x_qubits=None
) -> Circuit:
    """Circuit conserving parity of a tracked ``m``-qubit subset.

    Random X gates on the initial subset fix the expected parity ``p0``.  Gate
    choice per pair after each permutation: both tracked -> parity gate; one
    tracked -> Haar U(2) blocks controlled on the tracked qubit; neither ->
    Haar U(4).  An unpaired tracked qubit gets a random diagonal phase gate,
    an untracked one a Haar U(2).
    """
    _check_size(n, 1)
    if not 1 <= m <= n:
        raise ValueError(f"invalid size: need 1 <= m <= n, got m={m}, n={n}")
    gen = as_generator(rng)
    if subset is None:
        subset = gen.choice(n, size=m, replace=False)
    inside = np.zeros(n, dtype=bool)
    inside[np.asarray(subset, dtype=int)] = True
    if inside.sum() != m:
        raise ValueError("invalid size: subset must have m distinct qubits")
    if x_qubits is None:
        x_qubits = [q for q in np.flatnonzero(inside) if gen.random() < 0.5]
    x_qubits = sorted(int(q) for q in x_qubits)
    if not all(inside[q] for q in x_qubits):
        raise ValueError("X gates must sit on the tracked subset")
    prep = tuple(GatePlacement((q,), randmat.PAULI_X.copy(), "pauli-x") for q in x_qubits)
    p0 = len(x_qubits) % 2

    subsets = [np.flatnonzero(inside).tolist()]
    layers = []
    for perm in _layer_perms(n, t, gen, perms):
        inside = _advance(inside, perm)
        subsets.append(np.flatnonzero(inside).tolist())
        gates = []
        for j in range(0, n - 1, 2):
            a, b = inside[j], inside[j + 1]
            if a and b:
                u, tag = randmat.sample_parity_gate(gen), "parity"
            elif a:
                u, tag = randmat.block_gate(((0, 1), (2, 3)), gen), "generic"
            elif b:
                u, tag = randmat.block_gate(((0, 2), (1, 3)), gen), "generic"
            else:
                u, tag = randmat.sample_haar_su4(gen), "generic"
            gates.append(GatePlacement((j, j + 1), u, tag))
        if n % 2:
            q = n - 1
            if inside[q]:
                u = randmat.block_gate(((0,), (1,)), gen)
            else:
                u = randmat.sample_haar_unitary(2, gen)
            gates.append(GatePlacement((q,), u, "single"))
        layers.append(Layer(tuple(int(p) for p in perm), tuple(gates)))
    meta = {"m": m, "subsets": subsets, "p0": p0, "x_qubits": x_qubits}
    return Circuit(n, tuple(layers), "m-parity", prep=prep, metadata=meta, seed=_seed_of(rng))


def dress_hidden_parity(c: Circuit, rng=None, insert_x: bool = False, x_prob: float = 0.5) -> Circuit:
    """Hide the parity structure behind random single-qubit dressings.

    Every pair gate ``G`` becomes ``(D1 ⊗ D2) X^x G (P1 ⊗ P2)`` where the
    ``D`` are fresh Haar U(2) and ``P`` undo the dressing pending on the
    qubit since the last gate that touched it (tracked through the
    permutations).  Final-layer gates carry no new dressing and any dressing
    still pending on an idle qubit is closed by an explicit single-qubit gate,
    so the ideal output distribution is unchanged.  With ``insert_x`` each
    gated qubit independently receives an X with probability ``x_prob``; the
    resulting parity flips are recorded for the heavy predicate.
    """
    if c.kind not in ("parity", "double-parity"):
        raise ValueError(f"invalid kind: cannot dress a {c.kind!r} circuit")
    gen = as_generator(rng)
    n = c.n_qubits
    eye = np.eye(2, dtype=complex)
    pending = [eye] * n  # dressing applied to the content at each position
    colors = c.metadata.get("colors")
    x_flips = []
    layers = []
    for t, layer in enumerate(c.layers):
        perm = np.asarray(layer.perm)
        moved = [None] * n
        for i, p in enumerate(perm):
            moved[p] = pending[i]
        pending = moved
        last = t == c.n_layers - 1
        gates = []
        flips_here = []
        for g in layer.gates:
            q1, q2 = g.targets
            pre = np.kron(pending[q1].conj().T, pending[q2].conj().T)
            xs = []
            for q in (q1, q2):
                put_x = insert_x and gen.random() < x_prob
                xs.append(randmat.PAULI_X if put_x else eye)
                if put_x:
                    flips_here.append(q)
            if last:
                post = [eye, eye]
            else:
                post = [randmat.sample_haar_unitary(2, gen) for _ in range(2)]
            pending[q1], pending[q2] = post
            mat = np.kron(post[0] @ xs[0], post[1] @ xs[1]) @ g.matrix @ pre
            gates.append(GatePlacement((q1, q2), mat, "generic"))
        if last:
            touched = set(layer.touched())
            for q in range(n):
                if q not in touched and not np.allclose(pending[q], eye):
                    gates.append(GatePlacement((q,), pending[q].conj().T, "single"))
        x_flips.append(sorted(flips_here))
        layers.append(Layer(layer.perm, tuple(gates)))
    meta = {"base_kind": c.kind, "x_flips": x_flips}
    if colors is not None:
        meta["colors"] = colors
    return Circuit(n, tuple(layers), "hidden-parity", metadata=meta, seed=c.seed)


# --- heavy subspaces ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HeavySubspace:
    """Set of heavy bitstrings.

    Parity variants are a list of ``(qubit mask, required parity)``
    constraints; the explicit variant stores a boolean table over all ``2**n``
    basis indices.
    """

    n_qubits: int
    variant: str
    constraints: tuple[tuple[int, int], ...] = ()
    table: np.ndarray | None = None

    @classmethod
    def explicit(cls, table) -> "HeavySubspace":
        table = np.asarray(table, dtype=bool)
        return cls(randmat.n_qubits_of(table), "explicit-set", table=table)

    @classmethod
    def global_parity(cls, n: int, p: int = 0) -> "HeavySubspace":
        return cls(n, "global-parity", (((1 << n) - 1, int(p) & 1),))

    @classmethod
    def double_parity(cls, n: int, subset_a, pa: int = 0, pb: int = 0) -> "HeavySubspace":
        ma = _mask(subset_a)
        mb = ((1 << n) - 1) ^ ma
        return cls(n, "double-parity", ((ma, int(pa) & 1), (mb, int(pb) & 1)))

    @classmethod
    def subset_parity(cls, n: int, subset, p0: int = 0) -> "HeavySubspace":
        return cls(n, "subset-parity", ((_mask(subset), int(p0) & 1),))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if self.table is not None:
            return self.table[x]
        ok = np.ones(x.shape, dtype=bool)
        for mask, p in self.constraints:
            ok &= (np.bitwise_count(x & mask) & 1) == p
        return ok

    def mask(self) -> np.ndarray:
        return self.contains(np.arange(1 << self.n_qubits))

    def heavy_mass(self, probs) -> float:
        return float(np.sum(np.asarray(probs)[self.mask()]))


def _mask(qubits) -> int:
    return sum(1 << int(q) for q in qubits)


def median_heavy_set(probs) -> HeavySubspace:
    """Heavy strings: ``p_x >= median`` with median = mean of the two middle values."""
    probs = np.asarray(probs, dtype=float)
    s = np.sort(probs)
    k = len(s) // 2
    median = 0.5 * (s[k - 1] + s[k]) if len(s) > 1 else s[0]
    return HeavySubspace.explicit(probs >= median)


def heavy_predicate(c: Circuit, ideal_probs=None) -> HeavySubspace:
    n = c.n_qubits
    if c.kind == "standard":
        if ideal_probs is None:
            raise ValueError("missing input: standard circuits need ideal probabilities")
        return median_heavy_set(ideal_probs)
    if c.kind == "parity":
        return HeavySubspace.global_parity(n, 0)
    if c.kind == "double-parity":
        final = np.asarray(c.metadata["colors"][-1])
        return HeavySubspace.double_parity(n, np.flatnonzero(final == 0))
    if c.kind == "m-parity":
        return HeavySubspace.subset_parity(n, c.metadata["subsets"][-1], c.metadata["p0"])
    if c.kind == "hidden-parity":
        flips = c.metadata["x_flips"]
        if c.metadata["base_kind"] == "parity":
            return HeavySubspace.global_parity(n, sum(len(f) for f in flips))
        colors = c.metadata["colors"]
        pa = pb = 0
        for t, qs in enumerate(flips):
            for q in qs:
                if colors[t + 1][q] == 0:
                    pa ^= 1
                else:
                    pb ^= 1
        final = np.asarray(colors[-1])
        return HeavySubspace.double_parity(n, np.flatnonzero(final == 0), pa, pb)
    raise ValueError(f"invalid kind {c.kind!r}")


# --- validation and serialization --------------------------------------------

def validate(c: Circuit, atol: float = 1e-10) -> None:
    """Check structural invariants; raises :class:`ParseError` (or subclass)."""
    if c.kind not in KINDS:
        raise ParseError(f"unknown circuit kind {c.kind!r}")
    n = c.n_qubits
    for g in c.placements():
        if any(not 0 <= q < n for q in g.targets) or len(set(g.targets)) != len(g.targets):
            raise ParseError(f"bad targets {g.targets}")
        if not randmat.is_unitary(g.matrix, atol):
            raise UnitarityError(f"gate on {g.targets} is not unitary")
    perms = []
    for layer in c.layers:
        try:
            perms.append(check_permutation(layer.perm, n))
        except ValueError as exc:
            raise ParseError(str(exc)) from None
        touched = layer.touched()
        if len(touched) != len(set(touched)):
            raise ParseError("layer touches a qubit twice")
    meta = c.metadata
    if c.kind == "parity" and any(g.tag != "parity" for g in c.placements()):
        raise ParseError("parity circuit with a non-parity gate")
    if c.kind in ("double-parity",) or (c.kind == "hidden-parity" and meta.get("base_kind") == "double-parity"):
        colors = meta.get("colors")
        if colors is None or len(colors) != c.n_layers + 1:
            raise ParseError("double-parity circuit without per-layer colour metadata")
        if track_colors(colors[0], perms) != [list(map(int, x)) for x in colors]:
            raise ParseError("colour metadata inconsistent with permutations")
        if c.kind == "double-parity":
            for layer, col in zip(c.layers, colors[1:]):
                for g in layer.gates:
                    q1, q2 = g.targets
                    if col[q1] != col[q2] and g.tag != "diagonal-zz":
                        raise ParseError("cross-colour gate is not diagonal")
    if c.kind == "m-parity":
        for key in ("subsets", "p0", "m"):
            if key not in meta:
                raise ParseError(f"m-parity circuit missing metadata {key!r}")
        inside = np.zeros(n, dtype=bool)
        inside[meta["subsets"][0]] = True
        for perm, sub in zip(perms, meta["subsets"][1:]):
            inside = _advance(inside, perm)
            if np.flatnonzero(inside).tolist() != list(sub):
                raise ParseError("subset metadata inconsistent with permutations")
    if c.kind == "hidden-parity":
        if meta.get("base_kind") not in ("parity", "double-parity") or "x_flips" not in meta:
            raise ParseError("hidden-parity circuit missing base kind or flip record")


def _encode_gate(g: GatePlacement) -> dict:
    flat = g.matrix.reshape(-1)
    return {
        "targets": list(g.targets),
        "tag": g.tag,
        "matrix": [[float(z.real), float(z.imag)] for z in flat],
    }


def _decode_gate(d: dict) -> GatePlacement:
    try:
        targets = tuple(int(q) for q in d["targets"])
        pairs = np.asarray(d["matrix"], dtype=float)
        dim = 1 << len(targets)
        mat = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(dim, dim)
        return GatePlacement(targets, mat, d.get("tag", "generic"))
    except (KeyError, ValueError, IndexError, TypeError) as exc:
        raise ParseError(f"malformed gate entry: {exc}") from None


def to_document(c: Circuit) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n_qubits": c.n_qubits,
        "n_layers": c.n_layers,
        "kind": c.kind,
        "seed": c.seed,
        "bit_order": "qubit k is bit k of the basis index",
        "prep": [_encode_gate(g) for g in c.prep],
        "layers": [
            {"perm": list(layer.perm), "gates": [_encode_gate(g) for g in layer.gates]}
            for layer in c.layers
        ],
        "metadata": c.metadata,
    }


def serialize(c: Circuit) -> bytes:
    return (json.dumps(to_document(c), separators=(",", ":")) + "\n").encode()


def from_document(doc: dict) -> Circuit:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ParseError("not a circuit document")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported circuit format version {doc.get('version')!r}")
    try:
        n = int(doc["n_qubits"])
        layers = tuple(
            Layer(tuple(int(p) for p in lay["perm"]), tuple(_decode_gate(g) for g in lay["gates"]))
            for lay in doc["layers"]
        )
        prep = tuple(_decode_gate(g) for g in doc.get("prep", []))
        c = Circuit(n, layers, doc["kind"], prep, dict(doc.get("metadata", {})), doc.get("seed"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed circuit document: {exc}") from None
    if c.n_layers != doc.get("n_layers", c.n_layers):
        raise ParseError("layer count does not match header")
    validate(c)
    return c


def deserialize(data: bytes | str) -> Circuit:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return from_document(doc)


def with_seed(c: Circuit, seed: int | None) -> Circuit:
    return replace(c, seed=seed)


# --- dispatch by name ----------------------------------------------------------

GENERATOR_KINDS = ("standard", "parity", "double-parity", "hidden-parity", "hidden-double-parity", "m-parity")


def kind_accepts(kind: str, n: int) -> bool:
    """Whether ``kind`` has a generator for ``n`` qubits."""
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"invalid kind {kind!r}")
    if kind in ("double-parity", "hidden-double-parity"):
        return n >= 4 and n % 2 == 0
    return n >= 2 or kind == "m-parity"


def generate(kind: str, n: int, t: int, rng=None, m: int | None = None, insert_x: bool = False) -> Circuit:
    """Generate a circuit of the named kind (``hidden-*`` are dressed parity kinds)."""
    if not kind_accepts(kind, n):
        raise ValueError(f"invalid size: {kind} circuits need a different n than {n}")
    gen = as_generator(rng)
    if kind == "standard":
        return generate_standard(n, t, gen)
    if kind == "parity":
        return generate_parity(n, t, gen)
    if kind == "double-parity":
        return generate_double_parity(n, t, gen)
    if kind == "hidden-parity":
        return dress_hidden_parity(generate_parity(n, t, gen), gen, insert_x)
    if kind == "hidden-double-parity":
        return dress_hidden_parity(generate_double_parity(n, t, gen), gen, insert_x)
    if m is None:
        raise ValueError("missing input: m-parity circuits need m")
    return generate_m_parity(n, t, m, gen)

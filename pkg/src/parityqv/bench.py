"""Experiment orchestration behind the command line: grids, reports, fits, QV scans.

A run configuration is a JSON object::

    {"kind": "parity", "n": [4, 6], "t": "square", "noise": {"type": "gue", "alpha": 0.03},
     "circuits": 100, "shots": 200, "seed": 7}

``noise`` may also be a list (one grid point per entry) and ``t`` an int or
a list.  Each grid point draws its randomness from
``RngStream(seed, point_hash).child(circuit_index)``, so serial and parallel
runs produce identical numbers.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from math import exp, sqrt
from pathlib import Path

import numpy as np

from . import analytic as an
from . import circuit as circ
from . import noise as nz
from . import sim
from .errors import (
    ConfigError, ExtractionUndefinedError, FitError, ResourceLimitError, UnsupportedEstimationError,
)
from .randmat import RngStream

ENV_SEED = "PARITYQV_SEED"
ENV_WORKERS = "PARITYQV_WORKERS"

FIT_TARGETS = {"Q": (1.9, 2.1), "W": (0.42, 0.58), "Qprime": (1.40, 1.60)}
FIT_IDEAL = {"Q": 2.0, "W": 0.5, "Qprime": 1.5}

ROW_FIELDS = [
    "kind", "n", "t", "m", "noise", "alpha", "d_env", "sigma", "p", "eps", "lam", "q",
    "circuits", "shots", "h_mean", "h_stderr", "h_stderr_pooled",
    "pred_exact", "pred_approx", "z_exact", "exponent", "exponent_name",
]


# --- configuration -------------------------------------------------------------

@dataclass
class RunConfig:
    kind: str = "parity"
    n: list = field(default_factory=lambda: [4])
    t: object = "square"
    noise: list = field(default_factory=lambda: [{"type": "ideal"}])
    circuits: int = 10
    shots: int = 100
    seed: int = 0
    out: str = "out"
    n_cap: int = sim.DEFAULT_N_CAP
    workers: int = 1
    m: object = None
    insert_x: bool = False
    strict: bool = True
    extra: dict = field(default_factory=dict)

    def t_values(self, n: int) -> list[int]:
        if self.t == "square":
            return [n]
        if isinstance(self.t, int):
            return [self.t]
        return list(self.t)

    def m_values(self, n: int) -> list:
        if self.kind != "m-parity":
            return [None]
        if self.m in (None, "all"):
            return list(range(1, n + 1))
        return [self.m] if isinstance(self.m, int) else list(self.m)


def _positive_int(obj, key):
    val = obj.get(key)
    if not isinstance(val, int) or isinstance(val, bool) or val < 1:
        raise ConfigError("must be a positive integer", key)
    return val


def parse_config(obj: dict, overrides: dict | None = None) -> RunConfig:
    """Validate a JSON config; raises :class:`ConfigError` naming the bad key."""
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    obj = dict(obj)
    cfg = RunConfig()
    if "kind" in obj:
        if obj["kind"] not in circ.GENERATOR_KINDS:
            raise ConfigError(f"unknown kind {obj['kind']!r}", "kind")
        cfg.kind = obj["kind"]
    if "n" in obj:
        ns = obj["n"] if isinstance(obj["n"], list) else [obj["n"]]
        if not ns or not all(isinstance(x, int) and x >= 1 for x in ns):
            raise ConfigError("must be a positive integer or list of them", "n")
        for x in ns:
            if not circ.kind_accepts(cfg.kind, x):
                raise ConfigError(f"{cfg.kind} circuits cannot have n={x}", "n")
        cfg.n = ns
    if "t" in obj:
        t = obj["t"]
        ok = t == "square" or (isinstance(t, int) and t >= 0) or (
            isinstance(t, list) and t and all(isinstance(x, int) and x >= 0 for x in t))
        if not ok:
            raise ConfigError("must be 'square', an integer or a list of integers", "t")
        cfg.t = t
    if "noise" in obj:
        raw = obj["noise"] if isinstance(obj["noise"], list) else [obj["noise"]]
        try:
            for r in raw:
                nz.flatten(nz.from_json(r))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(str(exc), "noise") from exc
        cfg.noise = raw
    for key in ("circuits", "shots", "n_cap", "workers"):
        if key in obj:
            setattr(cfg, key, _positive_int(obj, key))
    if "seed" in obj:
        if not isinstance(obj["seed"], int) or obj["seed"] < 0:
            raise ConfigError("must be a non-negative integer", "seed")
        cfg.seed = obj["seed"]
    if "out" in obj:
        cfg.out = str(obj["out"])
    if "m" in obj:
        cfg.m = obj["m"]
    if cfg.kind == "m-parity":
        for n in cfg.n:
            for m in cfg.m_values(n):
                if not isinstance(m, int) or not 1 <= m <= n:
                    raise ConfigError(f"m={m!r} out of range for n={n}", "m")
    cfg.insert_x = bool(obj.get("insert_x", False))
    cfg.strict = bool(obj.get("strict", True))
    known = {"kind", "n", "t", "noise", "circuits", "shots", "seed", "out", "n_cap", "workers", "m", "insert_x", "strict"}
    cfg.extra = {k: v for k, v in obj.items() if k not in known}
    for k, v in (overrides or {}).items():
        if v is not None:
            setattr(cfg, k, v)
    for n in cfg.n:
        if n > cfg.n_cap:
            raise ResourceLimitError(f"resource limit: n={n} exceeds cap {cfg.n_cap}")
    return cfg


def env_overrides(seed=None, workers=None) -> dict:
    """CLI flag beats environment variable beats config file."""
    out = {}
    env_seed = os.environ.get(ENV_SEED)
    env_workers = os.environ.get(ENV_WORKERS)
    try:
        if seed is not None:
            out["seed"] = int(seed)
        elif env_seed:
            out["seed"] = int(env_seed)
        if workers is not None:
            out["workers"] = int(workers)
        elif env_workers:
            out["workers"] = int(env_workers)
    except ValueError as exc:
        raise ConfigError(f"not an integer: {exc}", "seed/workers") from exc
    return out


# --- noise bookkeeping ---------------------------------------------------------

def noise_params(spec) -> dict:
    """Flat summary of a spec for report columns (first component of each type)."""
    out = dict(alpha=None, d_env=None, sigma=None, p=None, eps=None, lam=None, q=None)
    # components scaled to zero are dropped by flatten but still name a column
    for c in _leaves(spec):
        if isinstance(c, (nz.GueTwoQubit, nz.DissipativeGue)):
            out["alpha"], out["d_env"] = 0.0, getattr(c, "d_env", 1)
        elif isinstance(c, nz.FaultySwap):
            out["sigma"], out["p"] = 0.0, 0.0
        elif isinstance(c, nz.SwapOmission):
            out["p"] = 0.0
        elif isinstance(c, nz.Depolarizing):
            out["eps"] = 0.0
        elif isinstance(c, nz.Dephasing):
            out["lam"] = 0.0
        elif isinstance(c, nz.MeasurementFlip) and c.confusion is None:
            out["q"] = 0.0
    seen = set()
    for c in nz.flatten(spec):
        if isinstance(c, (nz.GueTwoQubit, nz.DissipativeGue)) and "alpha" not in seen:
            out["alpha"], out["d_env"] = c.alpha, getattr(c, "d_env", 1)
            seen.add("alpha")
        elif isinstance(c, nz.FaultySwap):
            out["sigma"], out["p"] = c.sigma, nz.sigma_to_p(c.sigma)
        elif isinstance(c, nz.SwapOmission):
            out["p"] = c.p
        elif isinstance(c, nz.Depolarizing):
            out["eps"] = c.eps
        elif isinstance(c, nz.Dephasing):
            out["lam"] = c.lam
        elif isinstance(c, nz.MeasurementFlip) and c.confusion is None:
            q = np.asarray(c.q, dtype=float)
            out["q"] = float(q.reshape(-1)[0]) if np.all(q == q.reshape(-1)[0]) else None
    return out


def _leaves(spec):
    if isinstance(spec, nz.Composite):
        for part in spec.parts:
            yield from _leaves(part)
    elif isinstance(spec, nz.Scale):
        yield from _leaves(spec.inner)
    elif spec is not None:
        yield spec


def predict_point(kind: str, n: int, t: int, spec, m: int | None = None) -> an.Prediction | None:
    """Closed-form heavy-output frequency for a grid point, or ``None`` if not covered."""
    comps = nz.flatten(spec)
    gues = [c for c in comps if isinstance(c, (nz.GueTwoQubit, nz.DissipativeGue))]
    swaps = [c for c in comps if isinstance(c, (nz.FaultySwap, nz.SwapOmission))]
    depol = [c for c in comps if isinstance(c, nz.Depolarizing)]
    dephs = [c for c in comps if isinstance(c, nz.Dephasing)]
    flips = [c for c in comps if isinstance(c, nz.MeasurementFlip)]
    if flips and flips[0].confusion is not None:
        return None
    qs = np.broadcast_to(np.asarray(flips[0].q, dtype=float), (n,)) if flips else np.zeros(n)
    p = 0.0
    for s in swaps:
        p = s.p if isinstance(s, nz.SwapOmission) else nz.sigma_to_p(s.sigma)
    hidden = kind.startswith("hidden")

    if kind in ("parity", "hidden-parity"):
        if (hidden and (swaps or dephs)) or len(gues) > 1:
            return None
        gates = (n // 2) * t
        r_exact = r_approx = 1.0
        if gues:
            g = gues[0]
            d_env = getattr(g, "d_env", 1)
            pr = an.predict_parity(n, t, g.alpha, d_env, gates)
            r_exact, r_approx = 2 * pr.exact - 1, 2 * pr.approx - 1
        other = float(np.prod([(1 - e.eps) ** (n * t) for e in depol])) * float(np.prod(1 - 2 * qs))
        return an.Prediction(0.5 * (1 + r_exact * other), 0.5 * (1 + r_approx * other))
    if kind in ("double-parity", "hidden-double-parity"):
        if depol or dephs or flips or len(gues) > 1 or (hidden and swaps):
            return None
        alpha = gues[0].alpha if gues else 0.0
        d_env = getattr(gues[0], "d_env", 1) if gues else 1
        return an.predict_double_parity(n, t, alpha, p, d_env=d_env, swap_layers=max(t - 1, 0))
    if kind == "m-parity":
        if gues or swaps or m is None:
            return None
        transfers = []
        for _ in range(t):
            tr = np.eye(2)
            for e in depol:
                tr = an.depolarizing_transfer(m, e.eps) @ tr
            transfers.append(tr)
        if flips:
            if not np.all(qs == qs[0]):
                return None
            s = 0.5 * (1 - (1 - 2 * qs[0]) ** m)
            transfers.append(np.array([[1 - s, s], [s, 1 - s]]))
        h = an.estimator_hum(transfers) if transfers else 1.0
        return an.Prediction(h, h)
    return None


# --- grid execution ---------------------------------------------------------------

def point_hash(key: dict) -> int:
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def run_point(point: dict) -> tuple[dict, list[float]]:
    """Run every circuit of one grid point; returns the report row and per-circuit h."""
    kind, n, t, m = point["kind"], point["n"], point["t"], point.get("m")
    spec = nz.from_json(point["noise"])
    key = {k: point[k] for k in ("kind", "n", "t", "m", "noise", "insert_x")}
    stream = RngStream(point["seed"], point_hash(key))
    hs, heavy, shots = [], 0, 0
    for i in range(point["circuits"]):
        gen = stream.child(i).generator()
        c = circ.generate(kind, n, t, gen, m=m, insert_x=point.get("insert_x", False))
        res = sim.run_circuit(c, spec, point["shots"], gen, point.get("n_cap"))
        hs.append(res.h)
        heavy += round(res.h * res.n_shots)
        shots += res.n_shots
    hs_arr = np.asarray(hs)
    mean = float(hs_arr.mean())
    se = float(hs_arr.std(ddof=1) / sqrt(len(hs))) if len(hs) > 1 else float("nan")
    pooled = heavy / shots
    row = dict(kind=kind, n=n, t=t, m=m, noise=json.dumps(point["noise"], sort_keys=True))
    row.update(noise_params(spec))
    row.update(
        circuits=len(hs), shots=point["shots"], h_mean=mean, h_stderr=se,
        h_stderr_pooled=sqrt(pooled * (1 - pooled) / shots),
        pred_exact=None, pred_approx=None, z_exact=None, exponent=None, exponent_name=None,
    )
    pred = predict_point(kind, n, t, spec, m)
    if pred is not None:
        row["pred_exact"], row["pred_approx"] = pred.exact, pred.approx
        err = se if se > 0 else row["h_stderr_pooled"]
        row["z_exact"] = abs(mean - pred.exact) / err if err > 0 else (0.0 if mean == pred.exact else float("inf"))
    name = {"parity": "Q", "hidden-parity": "Q"}.get(kind)
    if kind in ("double-parity", "hidden-double-parity") and not row["alpha"]:
        name = "W"
    if name:
        try:
            ex = an.extract_exponents(mean, "parity" if name == "Q" else "double-parity-swap")
            row["exponent"], row["exponent_name"] = ex.Q if name == "Q" else ex.W, name
        except ExtractionUndefinedError:
            pass
    return row, hs


def grid_points(cfg: RunConfig) -> list[dict]:
    pts = []
    for noise in cfg.noise:
        for n in cfg.n:
            for t in cfg.t_values(n):
                for m in cfg.m_values(n):
                    pts.append(dict(kind=cfg.kind, n=n, t=t, m=m, noise=noise, insert_x=cfg.insert_x,
                                    circuits=cfg.circuits, shots=cfg.shots, seed=cfg.seed, n_cap=cfg.n_cap))
    return pts


def run_points(points: list[dict], workers: int = 1) -> list[tuple[dict, list[float]]]:
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_point, points))
    return [run_point(p) for p in points]


# --- persistence ------------------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict], fields=ROW_FIELDS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_cell(r.get(f)) for f in fields])
    return buf.getvalue()


def _clean(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    return v


def write_json(path: Path, obj) -> None:
    def walk(o):
        if isinstance(o, dict):
            return {k: walk(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [walk(v) for v in o]
        return _clean(o)

    path.write_text(json.dumps(walk(obj), sort_keys=True, indent=1) + "\n")


def write_report(out: Path, rows: list[dict], per_circuit: list[dict], name: str = "report") -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.csv").write_text(rows_to_csv(rows))
    write_json(out / f"{name}.json", {"rows": rows})
    with open(out / f"{name}_circuits.ndjson", "w") as fh:
        for rec in per_circuit:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_rows(path: str | Path) -> list[dict]:
    """Rows from a JSON report (``{"rows": [...]}``) or a CSV report."""
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text())["rows"]
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({k: _parse_cell(k, v) for k, v in rec.items()})
    return rows


def _parse_cell(key, v):
    if v == "":
        return None
    if key in ("kind", "noise", "exponent_name"):
        return v
    if key in ("n", "t", "m", "circuits", "shots", "d_env"):
        return int(v)
    return float(v)


# --- commands -----------------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"kind": cfg.kind, "seed": cfg.seed, "files": []}
    for n in cfg.n:
        for t in cfg.t_values(n):
            for m in cfg.m_values(n):
                key = {"kind": cfg.kind, "n": n, "t": t, "m": m, "insert_x": cfg.insert_x}
                stream = RngStream(cfg.seed, point_hash(key))
                for i in range(cfg.circuits):
                    c = circ.generate(cfg.kind, n, t, stream.child(i).generator(), m=m, insert_x=cfg.insert_x)
                    c = circ.with_seed(c, cfg.seed)
                    tag = f"_m{m}" if m is not None else ""
                    fname = f"{cfg.kind}_n{n}_t{t}{tag}_{i:04d}.json"
                    (out / fname).write_bytes(circ.serialize(c))
                    manifest["files"].append({"file": fname, "n": n, "t": t, "m": m, "index": i,
                                              "stream": [cfg.seed, stream.index, i]})
    write_json(out / "manifest.json", manifest)
    return manifest


def cmd_run(cfg: RunConfig) -> list[dict]:
    points = grid_points(cfg)
    results = run_points(points, cfg.workers)
    rows = [r for r, _ in results]
    per_circuit = [
        {"kind": r["kind"], "n": r["n"], "t": r["t"], "m": r["m"], "noise": r["noise"], "index": i, "h": h}
        for r, hs in results for i, h in enumerate(hs)
    ]
    write_report(Path(cfg.out), rows, per_circuit)
    return rows


def _y_err_log(h, se, scale):
    # delta method for -ln(2h - 1)
    return 2 * se / (2 * h - 1) / scale if se and 2 * h - 1 > 0 else None


def fit_q(rows: list[dict], n: int) -> an.FitResult:
    """Q/(N T) against alpha^2 over parity rows of size ``n``."""
    xs, ys, es = [], [], []
    for r in rows:
        if r["kind"] not in ("parity", "hidden-parity") or r["n"] != n or r.get("alpha") is None:
            continue
        try:
            q = an.extract_exponents(r["h_mean"], "parity", stderr=_se(r)).Q
        except ExtractionUndefinedError:
            continue
        scale = n * r["t"]
        xs.append(r["alpha"] ** 2)
        ys.append(q / scale)
        es.append(_y_err_log(r["h_mean"], _se(r), scale))
    return _fit(xs, ys, es, "Q")


def fit_w(rows: list[dict], n: int) -> an.FitResult:
    """W/((T-1) w(N)) against p over swap-only double-parity rows."""
    xs, ys, es = [], [], []
    for r in rows:
        if r["kind"] != "double-parity" or r["n"] != n or r.get("alpha") or r.get("p") is None:
            continue
        try:
            w = an.extract_exponents(r["h_mean"], "double-parity-swap", stderr=_se(r)).W
        except ExtractionUndefinedError:
            continue
        scale = (r["t"] - 1) * an.w_line(n)
        xs.append(r["p"])
        ys.append(w / scale)
        es.append(_y_err_log(r["h_mean"], _se(r), scale))
    return _fit(xs, ys, es, "W")


def fit_qprime(rows: list[dict], n: int, q_fit: an.FitResult, w_fit: an.FitResult | None) -> an.FitResult:
    """Q'/(T q(N)) against alpha^2 with companions from earlier Q and W fits."""
    xs, ys, es = [], [], []
    for r in rows:
        if r["kind"] != "double-parity" or r["n"] != n or not r.get("alpha"):
            continue
        t, a2, p = r["t"], r["alpha"] ** 2, r.get("p") or 0.0
        comp_q = (q_fit.slope * a2 + q_fit.intercept) * n * t
        comp_w = 0.0
        if p:
            if w_fit is None:
                raise FitError("fit error: rows with swap noise need a W companion fit")
            comp_w = (w_fit.slope * p + w_fit.intercept) * (t - 1) * an.w_line(n)
        try:
            qp = an.extract_exponents(r["h_mean"], "double-parity", companions={"Q": comp_q, "W": comp_w},
                                      stderr=_se(r)).Qprime
        except ExtractionUndefinedError:
            continue
        scale = t * an.q_of_n(n)
        excess = (4 * r["h_mean"] - 1 - exp(-comp_q)) / 2
        se = _se(r)
        xs.append(a2)
        ys.append(qp / scale)
        es.append(2 * se / excess / scale if se else None)
    return _fit(xs, ys, es, "Q'")


def _se(r):
    # circuit-ensemble spread first; pooled binomial error as fallback
    for key in ("h_stderr", "h_stderr_pooled"):
        se = r.get(key)
        if se is not None and np.isfinite(se) and se > 0:
            return se
    # no observed spread (e.g. every shot heavy): resolution of the run
    if r.get("circuits") and r.get("shots"):
        return 1.0 / (r["circuits"] * r["shots"])
    return None


def _fit(xs, ys, es, what):
    if len(xs) < 3:
        raise FitError(f"fit error: fewer than three usable {what} points")
    errs = None if any(e is None or e <= 0 for e in es) else es
    return an.fit_linear(xs, ys, errs)


def cmd_fit(rows: list[dict], fit_kind: str, companions: dict | None = None) -> dict:
    """Fit normalized exponents per qubit count and compare slopes with targets."""
    if fit_kind not in FIT_TARGETS:
        raise ConfigError(f"unknown fit kind {fit_kind!r}", "fit")
    lo, hi = FIT_TARGETS[fit_kind]
    report = {"fit": fit_kind, "target": FIT_IDEAL[fit_kind], "accept": [lo, hi], "by_n": {}}
    kinds = {"Q": ("parity", "hidden-parity"), "W": ("double-parity",), "Qprime": ("double-parity",)}[fit_kind]
    ns = sorted({r["n"] for r in rows if r["kind"] in kinds})
    for n in ns:
        try:
            if fit_kind == "Q":
                f = fit_q(rows, n)
            elif fit_kind == "W":
                f = fit_w(rows, n)
            else:
                comp = (companions or {}).get(str(n)) or (companions or {}).get(n)
                if comp:
                    q_fit = an.FitResult(comp["q_slope"], comp.get("q_intercept", 0.0), 0.0, 0.0)
                    w_fit = an.FitResult(comp.get("w_slope", 0.5), comp.get("w_intercept", 0.0), 0.0, 0.0)
                else:
                    q_fit = fit_q(rows, n)
                    try:
                        w_fit = fit_w(rows, n)
                    except FitError:
                        w_fit = None
                f = fit_qprime(rows, n, q_fit, w_fit)
        except FitError as exc:
            report["by_n"][str(n)] = {"error": str(exc)}
            continue
        entry = asdict(f)
        entry["pass"] = bool(lo <= f.slope <= hi)
        report["by_n"][str(n)] = entry
    if not any("slope" in v for v in report["by_n"].values()):
        raise FitError("fit error: no qubit count had enough usable points")
    return report


def t_cross(ts, means, threshold) -> float | None:
    """First crossing of ``threshold`` from above, by linear interpolation."""
    pairs = sorted(zip(ts, means))
    for (t0, h0), (t1, h1) in zip(pairs, pairs[1:]):
        if h0 > threshold >= h1:
            return t0 + (h0 - threshold) * (t1 - t0) / (h0 - h1)
    return None


def cmd_qv(cfg: RunConfig) -> dict:
    """Quantum-volume decisions and threshold crossings against a noise scale sweep.

    Extra config keys: ``kinds`` (list), ``scales`` (list of factors applied
    to the single ``noise`` entry) and ``t_list`` (layer counts for T_cross).
    """
    kinds = cfg.extra.get("kinds", [cfg.kind])
    scales = cfg.extra.get("scales")
    if not isinstance(scales, list) or not scales:
        raise ConfigError("must be a non-empty list", "scales")
    if len(cfg.noise) != 1:
        raise ConfigError("qv sweeps scale exactly one base noise spec", "noise")
    base = cfg.noise[0]
    t_list = cfg.extra.get("t_list")
    points = []
    for kind in kinds:
        if kind not in circ.GENERATOR_KINDS or kind == "m-parity":
            raise ConfigError(f"unsupported kind {kind!r}", "kinds")
        for s in scales:
            noise = {"type": "scale", "factor": s, "inner": base}
            for n in cfg.n:
                if not circ.kind_accepts(kind, n):
                    continue
                ts = sorted(set((t_list or []) + [n]))
                for t in ts:
                    points.append(dict(kind=kind, n=n, t=t, m=None, noise=noise, insert_x=cfg.insert_x,
                                       circuits=cfg.circuits, shots=cfg.shots, seed=cfg.seed, n_cap=cfg.n_cap,
                                       scale=s))
    results = run_points(points, cfg.workers)
    table = []
    summary = {}
    for kind in kinds:
        thr = sim.threshold_for(kind)
        summary[kind] = {}
        for s in scales:
            res = [(p, r, hs) for p, (r, hs) in zip(points, results) if p["kind"] == kind and p["scale"] == s]
            passing_strict, passing_mean = [], []
            for n in sorted({p["n"] for p, _, _ in res}):
                sub = [(p, r, hs) for p, r, hs in res if p["n"] == n]
                sq = next(x for x in sub if x[0]["t"] == n)
                strict = sim.qv_decision(sq[2], kind, n, True)
                loose = sim.qv_decision(sq[2], kind, n, False)
                tc = t_cross([x[0]["t"] for x in sub], [x[1]["h_mean"] for x in sub], thr) if t_list else None
                table.append(dict(kind=kind, scale=s, n=n, mean_h=strict.mean_h, stderr=strict.stderr,
                                  threshold=thr, pass_strict=strict.passed, pass_mean=loose.passed,
                                  t_cross=tc, t_cross_over_n=None if tc is None else tc / n))
                if strict.passed:
                    passing_strict.append(n)
                if loose.passed:
                    passing_mean.append(n)
            summary[kind][repr(s)] = {
                "largest_n_strict": max(passing_strict) if passing_strict else None,
                "largest_n_mean": max(passing_mean) if passing_mean else None,
            }
    ranges = {}
    for kind in kinds:
        for n in cfg.n:
            ok = [r["scale"] for r in table if r["kind"] == kind and r["n"] == n and r["pass_mean"]]
            ranges.setdefault(kind, {})[str(n)] = [min(ok), max(ok)] if ok else None
    report = {"decision_rule": "strict (mean - 2 stderr) and mean-only both reported",
              "summary": summary, "passing_scale_range_mean": ranges, "table": table}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    fields = ["kind", "scale", "n", "mean_h", "stderr", "threshold", "pass_strict", "pass_mean", "t_cross", "t_cross_over_n"]
    (out / "qv.csv").write_text(rows_to_csv(table, fields))
    write_json(out / "qv.json", report)
    return report


def cmd_estimate(cfg: RunConfig) -> dict:
    """Subset-parity sweep m = 1..N and the heavy-output estimate it implies."""
    if len(cfg.n) != 1 or len(cfg.noise) != 1:
        raise ConfigError("estimate takes exactly one n and one noise spec", "n")
    n = cfg.n[0]
    t = cfg.t_values(n)[0]
    spec = nz.from_json(cfg.noise[0])
    comps = nz.flatten(spec)
    if any(not isinstance(c, (nz.MeasurementFlip, nz.Depolarizing)) for c in comps):
        raise UnsupportedEstimationError("unsupported estimation: only readout or depolarizing noise")
    family = "ideal"
    if any(isinstance(c, nz.Depolarizing) for c in comps):
        family = "depolarizing"
        if any(isinstance(c, nz.MeasurementFlip) for c in comps):
            raise UnsupportedEstimationError("unsupported estimation: mixed readout and depolarizing noise")
    elif comps:
        family = "measurement"
    points = [dict(kind="m-parity", n=n, t=t, m=m, noise=cfg.noise[0], insert_x=False,
                   circuits=cfg.circuits, shots=cfg.shots, seed=cfg.seed, n_cap=cfg.n_cap)
              for m in range(1, n + 1)]
    points.append(dict(kind="standard", n=n, t=t, m=None, noise=cfg.noise[0], insert_x=False,
                       circuits=cfg.circuits, shots=cfg.shots, seed=cfg.seed, n_cap=cfg.n_cap))
    results = run_points(points, cfg.workers)
    sweep = [r for r, _ in results[:-1]]
    direct = results[-1][0]
    hm = np.array([r["h_mean"] for r in sweep])
    se = np.array([r["h_stderr_pooled"] for r in sweep])
    report = {"n": n, "m_layers": t, "family": family, "h_m": hm.tolist(), "h_m_stderr": se.tolist(),
              "direct_standard_h": direct["h_mean"], "direct_standard_stderr": direct["h_stderr"]}
    if family == "depolarizing":
        eps = next(c.eps for c in comps if isinstance(c, nz.Depolarizing))
        closed = [an.estimator_hum_depolarizing(m, t, eps) for m in range(1, n + 1)]
        report["h_m_closed_form"] = closed
        report["z"] = [abs(h - c) / s if s > 0 else 0.0 for h, c, s in zip(hm, closed, se)]
        # invert each m for eps, weight by information
        ests, wts = [], []
        for m, h, s in zip(range(1, n + 1), hm, se):
            if 2 * h - 1 > 0 and h < 1:
                ests.append(1 - (2 * h - 1) ** (1 / (m * t)))
                wts.append(1 / max(s, 1e-12) ** 2)
        eps_hat = float(np.average(ests, weights=wts)) if ests else 0.0
        report["eps_inferred"] = eps_hat
        report["h_u_estimate"] = an.estimator_hu_depolarizing(n, t, eps_hat)
        report["p0_inferred"] = (1 - eps_hat / 2) ** n
    else:
        p0, h_est = an.measurement_inversion(hm.tolist(), n)
        v = an.inversion_weights(n)[1:]
        report["p0_inferred"] = p0
        report["p0_stderr"] = float(np.sqrt(np.sum((v * se) ** 2)))
        report["h_u_estimate"] = h_est
        flip = next((c for c in comps if isinstance(c, nz.MeasurementFlip)), None)
        if flip is not None:
            conf = flip.confusion if flip.confusion is not None else an.flip_confusion(n, flip.q)
            report["p0_exact"] = float(np.trace(conf)) / 2**n
        else:
            report["p0_exact"] = 1.0
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out, sweep + [direct], [], name="estimate")
    write_json(out / "estimate_summary.json", report)
    return report


def cmd_verify(seed: int = 0, samples: int = 20000) -> dict:
    """Run the closed-form and channel-average oracle checks; returns a pass/fail report."""
    gen = np.random.default_rng(seed)
    checks = {}
    lt = an.layer_transfer_check(gen)
    checks["matrix_power_and_coefficients"] = {"max_dev": max(lt.values()), "pass": max(lt.values()) < 1e-10}
    for alpha in (0.05, 0.1):
        mc, se = nz.average_gue_channel(alpha, samples, gen, return_stderr=True)
        dev = np.abs(mc - an.gue_doubled_average(alpha)) / np.maximum(se, 1e-15)
        checks[f"gue_channel_{alpha}"] = {"max_z": float(dev.max()), "pass": bool(dev.max() < 5)}
    for sigma in (0.05, 0.1):
        mc, se = nz.average_faulty_swap_channel(sigma, samples, gen, return_stderr=True)
        ref = an.swap_doubled_average(nz.sigma_to_p(sigma))
        dev = np.abs(mc - ref) / np.maximum(se, 1e-15)
        checks[f"faulty_swap_{sigma}"] = {"max_z": float(dev.max()), "pass": bool(dev.max() < 5)}
    norm = max(abs(sum(an.pair_mixing_distribution(n).values()) - 1) for n in range(4, 21, 2))
    checks["pair_distribution_norm"] = {"max_dev": norm, "pass": norm < 1e-12}
    for n in (6, 8):
        lens = [len(nz.decompose_permutation(gen.permutation(n))) for _ in range(4000)]
        rel = abs(np.mean(lens) / an.w_line(n) - 1)
        checks[f"brick_sort_mean_{n}"] = {"rel_dev": float(rel), "pass": bool(rel < 0.05)}
    worst = 0.0
    for n in range(1, 7):
        q = gen.uniform(0, 0.2)
        conf = an.flip_confusion(n, q)
        hm = [an.hum_from_confusion(conf, m) for m in range(1, n + 1)]
        worst = max(worst, abs(an.measurement_inversion(hm, n)[0] - (1 - q) ** n))
    checks["measurement_inversion"] = {"max_dev": worst, "pass": worst < 1e-12}
    return {"checks": checks, "pass": all(c["pass"] for c in checks.values())}

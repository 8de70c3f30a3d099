"""Command line: ``parityqv {generate,run,fit,qv,estimate,verify}``.

Exit codes: 0 success, 2 configuration error, 3 resource limit,
4 fit/estimation/verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .errors import (
    ConfigError, ExtractionUndefinedError, FitError, ResourceLimitError, UnsupportedEstimationError,
)

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_FIT = 0, 2, 3, 4


def _load_config(args) -> bench.RunConfig:
    obj = {}
    if args.config:
        try:
            obj = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", "--config") from exc
    overrides = bench.env_overrides(args.seed, args.workers)
    if args.out:
        overrides["out"] = args.out
    if args.n_cap:
        overrides["n_cap"] = args.n_cap
    return bench.parse_config(obj, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parityqv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("generate", "write serialized circuits and a manifest"),
        ("run", "simulate a noise/size grid and write CSV + JSON reports"),
        ("fit", "fit normalized decay exponents from a report"),
        ("qv", "quantum-volume decisions over a noise-scale sweep"),
        ("estimate", "subset-parity sweep and inferred heavy-output frequency"),
        ("verify", "run the closed-form and channel-average oracle checks"),
    ]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int)
        p.add_argument("--n-cap", dest="n_cap", type=int)
        if name == "fit":
            p.add_argument("--report", required=True, help="report.json or report.csv from `run`")
            p.add_argument("--kind", dest="fit_kind", choices=sorted(bench.FIT_TARGETS), required=True)
            p.add_argument("--companions", help="JSON file: {N: {q_slope, q_intercept, w_slope, w_intercept}}")
        if name == "verify":
            p.add_argument("--samples", type=int, default=20000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            seed = bench.env_overrides(args.seed).get("seed", 0)
            report = bench.cmd_verify(seed, args.samples)
            _emit(report, args.out, "verify.json")
            return EXIT_OK if report["pass"] else EXIT_FIT
        if args.command == "fit":
            rows = bench.read_rows(args.report)
            comps = json.loads(Path(args.companions).read_text()) if args.companions else None
            report = bench.cmd_fit(rows, args.fit_kind, comps)
            _emit(report, args.out, f"fit_{args.fit_kind}.json")
            return EXIT_OK
        cfg = _load_config(args)
        if args.command == "generate":
            manifest = bench.cmd_generate(cfg)
            print(f"wrote {len(manifest['files'])} circuits to {cfg.out}")
        elif args.command == "run":
            rows = bench.cmd_run(cfg)
            print(bench.rows_to_csv(rows, ["kind", "n", "t", "m", "noise", "h_mean", "h_stderr", "pred_exact", "z_exact"]), end="")
        elif args.command == "qv":
            report = bench.cmd_qv(cfg)
            print(json.dumps(report["summary"], indent=1))
        elif args.command == "estimate":
            report = bench.cmd_estimate(cfg)
            print(json.dumps({k: v for k, v in report.items() if not isinstance(v, list)}, indent=1))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_RESOURCE
    except (FitError, UnsupportedEstimationError, ExtractionUndefinedError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _emit(report: dict, out: str | None, name: str) -> None:
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        bench.write_json(path / name, report)
    print(json.dumps(report, indent=1, default=str))


if __name__ == "__main__":
    sys.exit(main())

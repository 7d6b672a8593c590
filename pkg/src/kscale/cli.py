"""Command-line entry point.

Subcommands: ``run`` (execute an experiment config, emit CSV),
``schedule``, ``effdim``, ``rate`` and ``filter`` (small calculators fed
by key=value arguments).  Data goes to stdout or --out; diagnostics go
to stderr.  Exit codes: 0 success, 1 usage error, 2 all grid points
diverged, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

from .errors import ConfigError
from .harness import (
    EXPERIMENTS,
    ExperimentConfig,
    default_config,
    fit_rate,
    run_replicated,
)
from .linalg import effective_dimension
from .schedule import STRATEGIES, choose_params
from .solver import filter_gd

_INT_KEYS = ("n", "b", "T", "m_test")
_FLOAT_KEYS = ("gamma", "noise_var")
_FLOAT_LIST_KEYS = ("widths", "orders", "gammas")
_INT_LIST_KEYS = ("batches", "ns", "seeds")
KNOWN_KEYS = (
    ("experiment",) + _INT_KEYS + _FLOAT_KEYS + _FLOAT_LIST_KEYS + _INT_LIST_KEYS
)

# experiment config field backing each key
_FIELD_FOR_KEY = {"T": "iterations"}


def _fmt(value: float) -> str:
    """Human-readable numeric rendering (7 significant digits)."""
    return f"{value:.7g}"


def parse_config(text: str) -> ExperimentConfig:
    """Parse a line-based key=value config into an ExperimentConfig.

    '#' starts a comment; unknown keys, malformed numbers (reported with
    their line number) and a missing ``experiment`` key are errors.
    Defaults for the named experiment fill whatever is not given.
    """
    values: dict[str, object] = {}
    unknown: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            unknown.append(key)
            continue
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, value)
        except ValueError:
            raise ConfigError(
                f"line {lineno}: malformed value {value!r} for key {key!r}"
            ) from None
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(set(unknown))}")
    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'")
    experiment = values.pop("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"experiment must be one of {EXPERIMENTS}, got {experiment!r}"
        )
    base = default_config(experiment)
    fields = {_FIELD_FOR_KEY.get(key, key): value for key, value in values.items()}
    try:
        return dataclasses.replace(base, **fields)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _convert(key: str, value: str):
    if key == "experiment":
        return value
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    parts = [part.strip() for part in value.split(",") if part.strip()]
    if not parts:
        raise ValueError("empty list")
    if key in _INT_LIST_KEYS:
        return tuple(int(part) for part in parts)
    return tuple(float(part) for part in parts)


def render_config(cfg: ExperimentConfig) -> str:
    """Config text that parses back to an equivalent config."""
    lines = [
        f"experiment={cfg.experiment}",
        f"n={cfg.n}",
        f"b={cfg.b}",
        f"gamma={cfg.gamma!r}",
        f"T={cfg.iterations}",
        f"noise_var={cfg.noise_var!r}",
        f"m_test={cfg.m_test}",
        "seeds=" + ",".join(str(s) for s in cfg.seeds),
    ]
    for key in ("widths", "orders", "gammas"):
        grid = getattr(cfg, key)
        if grid:
            lines.append(key + "=" + ",".join(repr(v) for v in grid))
    for key in ("batches", "ns"):
        grid = getattr(cfg, key)
        if grid:
            lines.append(key + "=" + ",".join(str(int(v)) for v in grid))
    return "\n".join(lines) + "\n"


def _parse_kv_args(pairs: list[str], allowed: dict[str, str]) -> dict[str, str]:
    values: dict[str, str] = {}
    for token in pairs:
        if "=" not in token:
            raise ConfigError(f"expected key=value argument, got {token!r}")
        key, value = token.split("=", 1)
        if key not in allowed:
            raise ConfigError(
                f"unknown argument {key!r}; expected one of {sorted(allowed)}"
            )
        if key in values:
            raise ConfigError(f"duplicate argument {key!r}")
        values[key] = value
    return values


def _require_keys(values: dict[str, str], required: tuple[str, ...]) -> None:
    missing = [key for key in required if key not in values]
    if missing:
        raise ConfigError(f"missing required arguments: {missing}")


def _cmd_run(args) -> int:
    config_path = Path(args.config)
    if not config_path.exists():
        print(f"error: config file {config_path} does not exist", file=sys.stderr)
        return 1
    try:
        cfg = parse_config(config_path.read_text())
    except OSError as exc:
        print(f"error: cannot read {config_path}: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = run_replicated(cfg, master_seed=args.seed, jobs=args.jobs)
    try:
        if args.out is None:
            result.to_csv(sys.stdout)
        else:
            result.to_csv(args.out)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 3
    measured = [row for row in result.rows if row.seed >= 0]
    if measured and all(row.status == "diverged" for row in measured):
        print("error: every grid point diverged", file=sys.stderr)
        return 2
    return 0


def _cmd_schedule(args) -> int:
    allowed = {
        "n": "int",
        "beta": "float",
        "nu": "float",
        "R": "float",
        "M": "float",
        "strategy": "str",
        "kappa-sq": "float",
    }
    values = _parse_kv_args(args.params, allowed)
    _require_keys(values, ("n", "beta", "nu", "strategy"))
    strategy = values["strategy"]
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    b, gamma, horizon = choose_params(
        int(values["n"]),
        float(values["beta"]),
        float(values["nu"]),
        float(values.get("R", "1")),
        float(values.get("M", "1")),
        strategy,
        kappa_sq_value=float(values.get("kappa-sq", "1")),
    )
    print(f"b={b} gamma={_fmt(gamma)} T={horizon}")
    return 0


def _cmd_effdim(args) -> int:
    values = _parse_kv_args(args.params, {"eigenvalues": "list", "lambda": "float"})
    _require_keys(values, ("eigenvalues", "lambda"))
    eigenvalues = [float(part) for part in values["eigenvalues"].split(",") if part]
    print(_fmt(effective_dimension(eigenvalues, float(values["lambda"]))))
    return 0


def _cmd_rate(args) -> int:
    values = _parse_kv_args(args.params, {"ns": "list", "risks": "list"})
    _require_keys(values, ("ns", "risks"))
    ns = [float(part) for part in values["ns"].split(",") if part]
    risks = [float(part) for part in values["risks"].split(",") if part]
    print(_fmt(fit_rate(ns, risks)))
    return 0


def _cmd_filter(args) -> int:
    values = _parse_kv_args(
        args.params, {"sigma": "float", "gamma": "float", "T": "int"}
    )
    _require_keys(values, ("sigma", "gamma", "T"))
    gbar, rbar = filter_gd(
        float(values["sigma"]), float(values["gamma"]), int(values["T"])
    )
    print(f"gbar={_fmt(gbar)} rbar={_fmt(rbar)}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kscale",
        description="Kernel least-squares learning in Hilbert scales",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="run an experiment config, emit CSV")
    run_parser.add_argument("--config", required=True, help="key=value config file")
    run_parser.add_argument("--out", default=None, help="CSV output path (default stdout)")
    run_parser.add_argument("--seed", type=int, default=0, help="master seed")
    run_parser.add_argument("--jobs", type=int, default=1, help="parallel workers")
    run_parser.set_defaults(func=_cmd_run)

    for name, func, usage in (
        ("schedule", _cmd_schedule, "n=... beta=... nu=... strategy=... [R= M= kappa-sq=]"),
        ("effdim", _cmd_effdim, "eigenvalues=v1,v2,... lambda=..."),
        ("rate", _cmd_rate, "ns=n1,n2,... risks=r1,r2,..."),
        ("filter", _cmd_filter, "sigma=... gamma=... T=..."),
    ):
        p = sub.add_parser(name, help=f"calculator: {usage}")
        p.add_argument("params", nargs="*", help=usage)
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; the documented usage code is 1
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

"""``gzpmm`` command line entry point.

Settings come from an optional flat ``key = value`` file (``--config``;
keys are the :class:`~gzpmm.bench.ExperimentConfig` field names, ``#``
starts a comment, list values are comma separated) overridden by flags.
Exit status: 0 when every run succeeds, 2 when a solver fails, 1 on a
configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import typing

from .bench import ExperimentConfig, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2

TUPLE_FIELDS = {"sweep_lambda": float, "sweep_noise_gs": float, "seeds": int}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_int_list(text: str):
    """``"0,1,2"`` or ``"0-4"`` (inclusive range) or a mix."""
    out = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if sep and lo:
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def coerce(key: str, value):
    types = ExperimentConfig.field_types()
    if key not in types:
        raise ConfigError(f"unknown setting {key!r}")
    if value is None:
        return None
    if key == "seeds":
        return parse_int_list(value)
    if key in TUPLE_FIELDS:
        if isinstance(value, (tuple, list)):
            return tuple(TUPLE_FIELDS[key](v) for v in value)
        return tuple(TUPLE_FIELDS[key](t) for t in str(value).split(",") if t.strip())
    t = types[key]
    if isinstance(t, str):  # postponed annotations
        t = t.replace("typing.", "")
    if t in ("int", int):
        return int(value)
    if t in ("float", float):
        return float(value)
    if t in ("Optional[float]",):
        return None if str(value).lower() in ("", "none") else float(value)
    if t in ("Optional[str]",):
        return None if str(value).lower() in ("", "none") else str(value)
    return str(value)


def read_config_file(path: str) -> dict:
    settings = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key = key.strip().replace("-", "_")
            settings[key] = coerce(key, value.strip())
    return settings


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(
        prog="gzpmm",
        description="Group zero-norm regression via proximal MM, with a pADMM baseline.")
    ap.add_argument("--config", help="flat key = value settings file")
    ap.add_argument("--problem", help="'synthetic' or a LIBSVM file path")
    ap.add_argument("--q", type=int, choices=(1, 2), help="loss order")
    ap.add_argument("--family", choices=("linear", "scad", "mcp"))
    ap.add_argument("--a", type=float, help="surrogate family parameter")
    ap.add_argument("--rho", type=float)
    ap.add_argument("--gamma-bar", type=float, help="lambda = gamma_bar * lambda_base")
    ap.add_argument("--init-scale", type=float, help="initialization lambda multiplier")
    ap.add_argument("--sweep-lambda", help="comma list of gamma_bar values")
    ap.add_argument("--sweep-noise-gs", help="comma list of noise group sparsities")
    ap.add_argument("--seeds", help="e.g. 0,1,2 or 0-4")
    ap.add_argument("--out", help="CSV output path")
    ap.add_argument("--solver", choices=("pmm", "padmm", "both"))
    ap.add_argument("--max-time-s", type=float)
    ap.add_argument("--max-outer", type=int)
    ap.add_argument("--workers", type=int)
    g = ap.add_argument_group("synthetic instances")
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--r-bar", type=int)
    g.add_argument("--cov", help="identity, ar:0.5, cs:0.6 or a preset index 1-5")
    g.add_argument("--noise", help="normal100, scaled_t4, cauchy, mixed_normal, laplace or 1-5")
    g.add_argument("--noise-gs", type=float)
    g.add_argument("--noise-groups", type=int)
    ap.add_argument("--groups", help="LIBSVM grouping: a group count or comma list of sizes")
    ap.add_argument("--mu", type=float)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args) -> ExperimentConfig:
    settings = read_config_file(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key in ("config", "verbose") or value is None:
            continue
        settings[key] = coerce(key, value)
    try:
        return ExperimentConfig(**settings)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except (ConfigError, ValueError) as exc:
        print(f"gzpmm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not config.is_synthetic:
        import os

        if not os.path.exists(config.problem):
            print(f"gzpmm: configuration error: no such file {config.problem!r}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        reports = run_experiment(config)
    except ValueError as exc:  # e.g. malformed LIBSVM input
        print(f"gzpmm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{'solver':<6} {'seed':>4} {'gs':>5} {'lambda':>10} {'L2err':>10} {'ng':>3} "
          f"{'kkt':>9} {'time':>7} status")
    for r in reports:
        print(f"{r.solver:<6} {r.seed:>4} {r.noise_gs:>5.2f} {r.lam:>10.4g} {r.l2err:>10.3e} "
              f"{r.ng:>3} {r.kkt:>9.2e} {r.wall_seconds:>7.2f} {r.status}")
    return EXIT_SOLVER if any(r.failed for r in reports) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

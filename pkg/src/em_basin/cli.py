"""``em-basin`` command line: one subcommand per experiment.

Exit codes: 0 when every asserted check passes, 1 when at least one fails,
2 for an invalid invocation or config.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import DEFAULTS, EXPERIMENTS, HELP, INIT_CHOICES, Config, ConfigError, defaults_for, run_experiment

EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2

_INT_KEYS = {"d", "n", "probes", "seeds", "m", "quadrature_order", "draws", "replicates",
             "moment_replicates", "max_iter", "threads", "seed"}
_LIST_KEYS = {"n_grid", "m_grid"}
_CHOICES = {"init": INIT_CHOICES, "format": ("csv", "json")}


def _default_text(experiment: str, key: str) -> str:
    val = defaults_for(experiment)[key]
    if key == "r" and val is None:
        return "2 sqrt(2 d)"
    if isinstance(val, bool):
        return "on" if val else "off"
    if isinstance(val, list):
        return " ".join(str(v) for v in val)
    return str(val)


def _add_flags(sub: argparse.ArgumentParser, experiment: str) -> None:
    sub.add_argument("--config", metavar="PATH", help="JSON config file; explicit flags override it")
    for key in DEFAULTS:
        text = f"{HELP[key]} (default: {_default_text(experiment, key)})"
        if key == "out_dir":
            sub.add_argument("--out", "--out-dir", dest=key, default=None, metavar="DIR", help=text)
        elif key == "record_runtime":
            sub.add_argument("--record-runtime", dest=key, action="store_true", default=None, help=text)
        elif key in _CHOICES:
            sub.add_argument(f"--{key}", dest=key, choices=_CHOICES[key], default=None, help=text)
        elif key in _LIST_KEYS:
            sub.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int, nargs="+", default=None, help=text)
        else:
            kind = int if key in _INT_KEYS else float
            sub.add_argument(f"--{key.replace('_', '-')}", dest=key, type=kind, default=None, help=text)
    sub.add_argument("--quiet", action="store_true", help="suppress per-check output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="em-basin",
        description="Numerical checks of EM basin-of-attraction guarantees for a symmetric Gaussian mixture.",
    )
    subs = parser.add_subparsers(dest="experiment", metavar="experiment")
    subs.required = True
    for name in EXPERIMENTS:
        sub = subs.add_parser(name, help=f"run the {name} experiment")
        _add_flags(sub, name)
    return parser


def _load_config(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError({"config": f"cannot read {path}: {exc.strerror}"}) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError({"config": f"invalid JSON in {path}: {exc.msg}"}) from exc
    if not isinstance(data, dict):
        raise ConfigError({"config": "top level must be a JSON object"})
    return data


def effective_config(args: argparse.Namespace) -> Config:
    raw = _load_config(args.config) if args.config else {}
    file_exp = raw.pop("experiment", None)
    if file_exp is not None and file_exp != args.experiment:
        raise ConfigError({"experiment": f"config file names {file_exp!r}, command is {args.experiment!r}"})
    skip = {"experiment", "config", "quiet"}
    for key, val in vars(args).items():
        if key not in skip and val is not None:
            raw[key] = val
    raw["experiment"] = args.experiment
    return Config.build(raw)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = effective_config(args)
        result = run_experiment(cfg)
    except ConfigError as exc:
        print(f"em-basin {args.experiment}: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    if not args.quiet:
        for check in result.assertions:
            print(check.line())
        verdict = "passed" if result.passed else "FAILED"
        print(f"{cfg.experiment}: {verdict}; artifacts in {cfg['out_dir']}")
    return EXIT_OK if result.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

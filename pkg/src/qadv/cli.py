"""Command-line entry point: ``qadv <subcommand> [flags]``.

Every subcommand accepts ``--config FILE`` (``key = value`` lines; keys are
flag names with or without leading dashes) and ``--workers N``.  Flags given
on the command line override the config file.  Stochastic subcommands
require ``--seed`` and write a CSV to ``--out`` plus a JSON summary to
``--json`` (default: the CSV path with a ``.json`` suffix).

Exit codes: 0 success, 2 configuration error, 3 numerical failure or
invariant violation.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from . import __version__, experiments
from .bounds import VARIANTS
from .core import HS_METRICS, InvalidQuantumObject, NumericalFailure
from .concentration import STATISTICS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


def _int_list(text: str) -> list:
    try:
        out = [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from exc
    if not out:
        raise ConfigError("empty list")
    return out


def _float_list(text: str) -> list:
    try:
        out = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated number list, got {text!r}") from exc
    if not out:
        raise ConfigError("empty list")
    return out


def _shots(text: str):
    if str(text) == "auto":
        return "auto"
    return int(text)


def _inputs(text: str):
    return "auto" if str(text) == "auto" else int(text)


@dataclass(frozen=True)
class Opt:
    flag: str
    type: Callable[[str], Any]
    default: Any = None
    required: bool = False
    choices: Optional[tuple] = None
    help: str = ""

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


SEED = Opt("--seed", int, required=True, help="master seed (mandatory)")
OUT = Opt("--out", str, required=True, help="CSV output path")

COMMANDS: dict = {
    "bounds": [
        Opt("--d", int, required=True),
        Opt("--mu", float, required=True, help="risk of the hypothesis, > 0"),
        Opt("--risk", float, required=True, help="tolerated adversarial risk R (or R')"),
        Opt("--delta", float, required=True, help="failure probability"),
        Opt("--variant", str, "paper", choices=VARIANTS),
        Opt("--trace-o", float, help="Tr(O) for the output-stability bound"),
        Opt("--chi", float, help="infidelity for the output-stability bound"),
    ],
    "risk": [
        Opt("--d", _int_list, required=True, help="dimension or comma list"),
        Opt("--tc", float, required=True),
        Opt("--th", float, required=True),
        Opt("--trials", int, required=True),
        SEED,
        OUT,
    ],
    "attack-sweep": [
        Opt("--dims", _int_list, [2, 4, 8, 16, 32]),
        Opt("--mu", float, 0.1),
        Opt("--risk", float, 0.5),
        Opt("--trials", int, 20000),
        Opt("--variant", str, "paper", choices=VARIANTS),
        SEED,
        OUT,
    ],
    "concentration": [
        Opt("--d", _int_list, required=True, help="dimension or comma list"),
        Opt("--samples", int, 100000),
        Opt("--eps", str, "0.1:2.0:0.1", help="START:STOP:STEP"),
        Opt("--metric", str, "unnorm", choices=HS_METRICS),
        Opt("--statistic", str, "re-overlap", choices=STATISTICS),
        SEED,
        OUT,
    ],
    "certify dfe": [
        Opt("--qubits", int, required=True),
        Opt("--eta", float, 0.05),
        Opt("--delta", float, 0.1),
        Opt("--runs", int, 100),
        Opt("--shots", _shots, 1, help="shots per setting: integer or 'auto'"),
        Opt("--fidelity", float, 0.9, help="fidelity of the rotated actual state before depolarizing"),
        Opt("--noise", float, 0.1, help="depolarizing weight of the actual state"),
        SEED,
        OUT,
    ],
    "certify channel": [
        Opt("--qubits", int, required=True),
        Opt("--theta", float, 0.1),
        Opt("--delta-prec", float, 0.02),
        Opt("--fail-prob", float, 0.1),
        Opt("--runs", int, 10),
        Opt("--n-inputs", _inputs, "auto", help="Haar inputs per run: integer or 'auto'"),
        SEED,
        OUT,
    ],
    "probe hs-fidelity": [
        Opt("--d", int, required=True),
        Opt("--samples", int, 10000),
        SEED,
        OUT,
    ],
    "uhlmann-check": [
        Opt("--d", _int_list, [2, 4, 8], help="dimension or comma list"),
        Opt("--chi", _float_list, [0.001, 0.01, 0.1], help="infidelity or comma list"),
        Opt("--trials", int, 1112, help="draws per (d, chi) cell; the default grid then totals about 10^4"),
        SEED,
        OUT,
    ],
}


def _add_opts(p: argparse.ArgumentParser, command: str) -> None:
    for o in COMMANDS[command]:
        # defaults are applied after merging with --config
        p.add_argument(o.flag, dest=o.dest, default=None, help=o.help or None)
    p.add_argument("--config", default=None, help="key = value file; flags override it")
    p.add_argument("--workers", default=None, help="worker threads (results do not depend on it)")
    p.add_argument("--json", dest="json_path", default=None, help="JSON summary path")
    p.set_defaults(command=command)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qadv", description="Adversarial robustness experiments for quantum classifiers")
    parser.add_argument("--version", action="version", version=f"qadv {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in ("bounds", "risk", "attack-sweep", "concentration", "uhlmann-check"):
        _add_opts(sub.add_parser(name), name)
    cert = sub.add_parser("certify").add_subparsers(dest="protocol", required=True)
    _add_opts(cert.add_parser("dfe"), "certify dfe")
    _add_opts(cert.add_parser("channel"), "certify channel")
    probe = sub.add_parser("probe").add_subparsers(dest="probe", required=True)
    _add_opts(probe.add_parser("hs-fidelity"), "probe hs-fidelity")
    return parser


def read_config(path: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return {k.lstrip("-").replace("-", "_"): v for k, v in cp["run"].items()}


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over config over built-in defaults, converting and range-checking."""
    opts = {o.dest: o for o in COMMANDS[args.command]}
    extra = {"workers": Opt("--workers", int, 1), "json_path": Opt("--json", str)}
    file_cfg = read_config(args.config) if args.config else {}
    unknown = set(file_cfg) - set(opts) - {"workers", "json"}
    if unknown:
        raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    if "json" in file_cfg:
        file_cfg["json_path"] = file_cfg.pop("json")

    cfg = {}
    for dest, o in {**opts, **extra}.items():
        raw = getattr(args, dest, None)
        if raw is None:
            raw = file_cfg.get(dest)
        if raw is None:
            if o.required:
                raise ConfigError(f"missing required option {o.flag}")
            cfg[dest] = o.default
            continue
        try:
            value = o.type(raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {o.flag}: {raw!r}") from exc
        if o.choices and value not in o.choices:
            raise ConfigError(f"{o.flag} must be one of {o.choices}, got {value!r}")
        cfg[dest] = value
    _range_check(args.command, cfg)
    return cfg


def _positive(cfg: dict, *keys: str) -> None:
    for k in keys:
        vals = cfg[k] if isinstance(cfg[k], list) else [cfg[k]]
        for v in vals:
            if isinstance(v, str):
                continue
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{k} must be positive, got {v!r}")


def _open_unit(cfg: dict, *keys: str) -> None:
    for k in keys:
        if not (0.0 < cfg[k] < 1.0):
            raise ConfigError(f"{k} must lie in (0, 1), got {cfg[k]!r}")


def _range_check(command: str, cfg: dict) -> None:
    if cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if "seed" in cfg and not (0 <= cfg["seed"] < 2**63):
        raise ConfigError("seed must be a nonnegative 63-bit integer")
    if command == "risk":
        _positive(cfg, "d", "trials")
        _open_unit(cfg, "tc", "th")
    elif command == "attack-sweep":
        _positive(cfg, "dims", "trials")
        _open_unit(cfg, "mu")
        if not (0.0 <= cfg["risk"] < 1.0):
            raise ConfigError("risk must lie in [0, 1)")
        if min(cfg["dims"]) < 2:
            raise ConfigError("dimensions must be >= 2")
    elif command == "concentration":
        _positive(cfg, "d", "samples")
    elif command == "certify dfe":
        _positive(cfg, "qubits", "runs", "shots")
        _open_unit(cfg, "eta", "delta")
        if not (0.0 <= cfg["fidelity"] <= 1.0 and 0.0 <= cfg["noise"] <= 1.0):
            raise ConfigError("fidelity and noise must lie in [0, 1]")
    elif command == "certify channel":
        _positive(cfg, "qubits", "runs", "n_inputs")
        _open_unit(cfg, "delta_prec", "fail_prob")
    elif command == "probe hs-fidelity":
        _positive(cfg, "d", "samples")
    elif command == "uhlmann-check":
        _positive(cfg, "d", "chi", "trials")


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str, table: experiments.Table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header.split(","))
        for row in table.rows:
            w.writerow([_cell(v) for v in row])


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        return _jsonable(x.item())
    return x


def run(command: str, cfg: dict) -> tuple[Optional[experiments.Table], dict]:
    """Dispatch one subcommand; returns the table (None for ``bounds``) and JSON results."""
    w = cfg["workers"]
    if command == "bounds":
        res = experiments.bound_summary(
            cfg["d"], cfg["mu"], cfg["risk"], cfg["delta"], cfg["variant"], cfg["trace_o"], cfg["chi"]
        )
        return None, res
    if command == "risk":
        t = experiments.risk_table(cfg["d"], cfg["tc"], cfg["th"], cfg["trials"], cfg["seed"], w)
    elif command == "attack-sweep":
        t = experiments.attack_sweep_table(
            cfg["dims"], cfg["mu"], cfg["risk"], cfg["trials"], cfg["seed"], w, cfg["variant"]
        )
    elif command == "concentration":
        grid = experiments.parse_eps_grid(cfg["eps"])
        t = experiments.concentration_table(cfg["d"], grid, cfg["samples"], cfg["seed"], cfg["metric"], cfg["statistic"], w)
    elif command == "certify dfe":
        t = experiments.certify_dfe_table(
            cfg["qubits"], cfg["eta"], cfg["delta"], cfg["runs"], cfg["seed"], cfg["shots"], cfg["fidelity"], cfg["noise"]
        )
    elif command == "certify channel":
        t = experiments.certify_channel_table(
            cfg["qubits"], cfg["theta"], cfg["delta_prec"], cfg["fail_prob"], cfg["runs"], cfg["seed"], cfg["n_inputs"]
        )
    elif command == "probe hs-fidelity":
        t = experiments.probe_hs_fidelity_table(cfg["d"], cfg["samples"], cfg["seed"], w)
    elif command == "uhlmann-check":
        t = experiments.uhlmann_check_table(cfg["d"], cfg["chi"], cfg["trials"], cfg["seed"], w)
    else:
        raise ConfigError(f"unknown subcommand {command!r}")
    return t, t.results


def _summary(cfg: dict, results: dict, errors: list, started: float) -> dict:
    return _jsonable(
        {
            "config": {k: v for k, v in cfg.items() if k != "json_path"},
            "results": results,
            "errors": errors,
            "version": __version__,
            "wallclock_s": time.perf_counter() - started,
        }
    )


def main(argv: Optional[list] = None) -> int:
    started = time.perf_counter()
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        cfg = resolve(args)
        if "out" in cfg:
            Path(cfg["out"]).parent.mkdir(parents=True, exist_ok=True)
            open(cfg["out"], "a").close()
    except (ConfigError, ValueError, OSError) as exc:
        print(f"qadv {command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table, results = run(command, cfg)
    except (NumericalFailure, InvalidQuantumObject, ArithmeticError, RuntimeError) as exc:
        print(f"qadv {command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"qadv {command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    cfg = {"subcommand": command, **cfg}
    errors = list(table.violations) if table is not None else []
    summary = _summary(cfg, results, errors, started)
    text = json.dumps(summary, indent=2, sort_keys=True)
    json_path = cfg.get("json_path") or (str(Path(cfg["out"]).with_suffix(".json")) if table is not None else None)
    try:
        if table is not None:
            write_csv(cfg["out"], table)
        if json_path:
            Path(json_path).write_text(text + "\n")
    except OSError as exc:
        print(f"qadv {command}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if table is None:
        print(text)
    else:
        print(f"wrote {len(table.rows)} rows to {cfg['out']}")
    for e in errors:
        print(f"qadv {command}: invariant violation: {e}", file=sys.stderr)
    return EXIT_NUMERIC if errors else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

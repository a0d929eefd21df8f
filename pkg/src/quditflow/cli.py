"""Command-line entry point.

Runs one study per invocation and writes report.json, metrics.csv, and
plotdata/*.csv into the output directory.  Progress goes to standard
error; files carry the machine-readable results.  Exit codes: 0 success,
2 configuration error, 3 numerical-invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from typing import Optional, Sequence

import jsonschema

from . import utils
from .algebra import CapacityError, InvariantViolation
from .circuit import CircuitParseError
from .experiments import (
    DRIVERS,
    REPORT_VERSION,
    ExperimentConfig,
    ExperimentReport,
    run_experiment,
)
from .noise import NoiseParseError, parse_noise_json
from .weyl import NormalizerViolation

log = logging.getLogger("quditflow")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

OUT_ENV = "QUDITFLOW_OUT"

# config-file keys that may be overridden from the command line
_CONFIG_FIELDS = {
    "n", "d", "depths", "n_randomizations", "shots", "n_id", "fold_strategy",
    "noise", "seed", "instances", "trials", "twirl_grid", "dims", "n_id_list",
    "sweep_points", "spectator", "rcal_shots", "workers",
}


class ConfigError(ValueError):
    pass


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip() != "")
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quditflow",
        description="Qudit circuit studies: noise tailoring and mitigation drivers.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    kinds = ("ghz", "rcs", "twirl-study", "nid-sweep", "rcal", "tomo", "phase-char", "validate")
    for kind in kinds:
        p = sub.add_parser(kind, help=f"run the {kind} study")
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--shots", type=int, default=None)
        p.add_argument("--randomizations", type=int, default=None, dest="n_randomizations")
        p.add_argument("--n-id", type=int, default=None, dest="n_id")
        p.add_argument("--depths", type=_int_list, default=None)
        p.add_argument("--noise", default=None,
                       help='"paper-default", "none", or a qf-noise/1 JSON file path')
        p.add_argument("--out", default=None, help="output directory (default $QUDITFLOW_OUT or ./qf-out)")
        p.add_argument("--n", type=int, default=None, help="register size")
        p.add_argument("--instances", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--rcal-shots", type=int, default=None, dest="rcal_shots")
        if kind == "phase-char":
            p.add_argument("--spectator", action="store_true", default=None)
            p.add_argument("--sweep-points", type=int, default=None, dest="sweep_points")
        if kind == "nid-sweep":
            p.add_argument("--n-id-list", type=_int_list, default=None, dest="n_id_list")
        if kind == "twirl-study":
            p.add_argument("--grid", type=_int_list, default=None, dest="twirl_grid")
            p.add_argument("--dims", type=_int_list, default=None)
    return parser


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path}: expected a JSON object")
    unknown = set(doc) - _CONFIG_FIELDS - {"kind"}
    if unknown:
        raise ConfigError(f"config {path}: unknown keys {sorted(unknown)}")
    return doc


def _resolve_noise_arg(spec) -> object:
    if spec is None or spec in ("paper-default", "none"):
        return spec
    if not isinstance(spec, str):
        raise ConfigError(f"noise must be a string, got {type(spec).__name__}")
    try:
        with open(spec, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read noise file {spec}: {exc}") from exc
    try:
        model = parse_noise_json(text)
    except NoiseParseError as exc:
        raise ConfigError(f"noise file {spec}: {exc}") from exc
    model.metadata.setdefault("name", os.path.basename(spec))
    return model


def make_config(kind: str, args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {"kind": kind}
    if args.config:
        doc = _load_config_file(args.config)
        file_kind = doc.pop("kind", None)
        if file_kind is not None and file_kind != kind:
            raise ConfigError(f"config kind {file_kind!r} does not match subcommand {kind!r}")
        for key, val in doc.items():
            values[key] = tuple(val) if isinstance(val, list) else val
    for key in _CONFIG_FIELDS:
        override = getattr(args, key, None)
        if override is not None:
            values[key] = override
    if "noise" in values:
        values["noise"] = _resolve_noise_arg(values["noise"])
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output files


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return utils.format_float(value)
    if isinstance(value, int):
        return str(value)
    if value is None:
        return ""
    return str(value)


def _write_csv(path: str, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if not rows:
            fh.write("\n")
            return
        columns = list(rows[0].keys())
        for row in rows:
            if list(row.keys()) != columns:
                raise InvariantViolation(f"inconsistent row keys in {path}")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(row[c]) for c in columns) + "\n")


def write_report(report: ExperimentReport, out_dir: str) -> None:
    doc = report.to_document()
    try:
        jsonschema.validate(doc, utils.load_schema("qf-report-1.json"))
    except jsonschema.ValidationError as exc:
        raise InvariantViolation(f"report does not match {REPORT_VERSION}: {exc.message}") from exc
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(utils.dumps_canonical(doc) + "\n")
    _write_csv(os.path.join(out_dir, "metrics.csv"), report.metrics)
    plot_dir = os.path.join(out_dir, "plotdata")
    os.makedirs(plot_dir, exist_ok=True)
    for name, rows in report.plotdata.items():
        _write_csv(os.path.join(plot_dir, f"{name}.csv"), rows)
    log.info("wrote %s", report_path)


# ---------------------------------------------------------------------------
# subcommands


def _run_validate(args: argparse.Namespace, out_dir: str) -> int:
    from .validation import validate_all

    seed = args.seed if args.seed is not None else 0
    results = validate_all(seed)
    metrics = []
    failed = 0
    for res in results:
        status = "ok" if res.passed else "FAIL"
        log.info("%-28s %s  %s", res.name, status, res.detail)
        metrics.append({"check": res.name, "passed": int(res.passed), "detail": res.detail})
        failed += 0 if res.passed else 1
    report = ExperimentReport(
        kind="validate",
        config={"seed": seed},
        results={"checks": len(results), "failed": failed},
        metrics=metrics,
        plotdata={},
        seed=seed,
    )
    write_report(report, out_dir)
    if failed:
        log.error("%d of %d checks failed", failed, len(results))
        return EXIT_INVARIANT
    log.info("all %d checks passed", len(results))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    kind = args.subcommand
    out_dir = args.out or os.environ.get(OUT_ENV) or "qf-out"

    start = time.monotonic()
    try:
        if kind == "validate":
            return _run_validate(args, out_dir)
        config = make_config(kind, args)
        log.info("running %s (seed=%s, noise=%s)", kind, config.seed, config.describe_noise())
        report = run_experiment(config)
        write_report(report, out_dir)
        log.info("%s finished in %.1f s", kind, time.monotonic() - start)
        return EXIT_OK
    except (ConfigError, CircuitParseError, NoiseParseError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (InvariantViolation, NormalizerViolation, CapacityError) as exc:
        log.error("invariant violation: %s", exc)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipeline: generate, featurize, train, evaluate, pd-report.

Every command resolves its parameters as built-in defaults, overridden by
the JSON ``--config`` file (top-level keys, then a section named after the
command), overridden by explicit flags. The resolved configuration is
logged and written to ``run_config.json`` in the output directory.

Exit codes: 0 success, 2 usage or validation error, 3 data error,
4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import plotting
from .comb import CombModel, comb_fit
from .domain import DEFAULT_THRESHOLD, SchemaError, read_panels, write_panels
from .experiment import CONFIGURATIONS, METHODS, format_table, run_configurations, write_csv
from .features import LabeledDataset, balanced_subsample, build_features
from .learners import FAMILIES, TrainedModel, default_hyperparams, fit, set_threads
from .pd_segments import ERROR_KINDS, GRANULARITIES, run_pd, write_segment_csv, write_summary
from .synth import GeneratorConfig, calibration_report, generate, latest_reference_year

log = logging.getLogger("defaultpred")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
RUN_CONFIG_VERSION = 1


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


GLOBAL_DEFAULTS = {"seed": 0, "threads": None, "out": "out"}

COMMAND_DEFAULTS: dict[str, dict] = {
    "generate": {
        "firms": GeneratorConfig.n_firms,
        "balance_fraction": GeneratorConfig.balance_sheet_fraction,
        "default_rate": GeneratorConfig.target_default_rate,
        "balance_signal": GeneratorConfig.balance_signal,
        "segment_cycle_sd": GeneratorConfig.segment_cycle_sd,
        "quarters": GeneratorConfig.n_quarters,
        "threshold": DEFAULT_THRESHOLD,
    },
    "featurize": {"data": None, "reference_year": None, "balance": False, "threshold": DEFAULT_THRESHOLD},
    "train": {
        "data": None,
        "features": None,
        "method": "COMB",
        "reference_year": None,
        "balance": False,
        "balanced": False,
        "threshold": DEFAULT_THRESHOLD,
        "vote_threshold": 3,
        "grids": None,
    },
    "evaluate": {
        "data": None,
        "mode": "all",
        "methods": list(METHODS),
        "reference_year": None,
        "threshold": DEFAULT_THRESHOLD,
        "vote_threshold": 3,
        "test_fraction": 0.3,
        "grids": None,
        "plots": True,
    },
    "pd-report": {
        "data": None,
        "model": None,
        "train": False,
        "oracle": False,
        "reference_year": None,
        "balance": False,
        "threshold": DEFAULT_THRESHOLD,
        "vote_threshold": 3,
        "grids": None,
        "error": "absolute",
        "plots": True,
    },
}


def _methods(text: str) -> list[str]:
    items = [m.strip().upper() for m in text.split(",") if m.strip()]
    unknown = [m for m in items if m not in METHODS]
    if unknown or not items:
        raise argparse.ArgumentTypeError(f"unknown methods {unknown}; choose from {','.join(METHODS)}")
    return items


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with parameter values (flags override it)")
    common.add_argument("--seed", type=int, help="top-level seed (default 0)")
    common.add_argument("--threads", type=int, help="worker cap (default: available cores)")
    common.add_argument("--out", help="output directory (default ./out)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="defaultpred", description="Firm default prediction pipeline.", parents=[common]
    )
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common], argument_default=S)

    def add_data(p):
        p.add_argument("--data", help="directory with firm_quarters.csv and balance_sheets.csv")
        p.add_argument("--reference-year", type=int, help="default: latest year with a full next year")
        p.add_argument("--threshold", type=float, help="adjusted-default ratio threshold")

    p = add("generate", "write a synthetic credit-register panel")
    p.add_argument("--firms", type=int)
    p.add_argument("--balance-fraction", type=float)
    p.add_argument("--default-rate", type=float)
    p.add_argument("--balance-signal", type=float)
    p.add_argument("--segment-cycle-sd", type=float)
    p.add_argument("--quarters", type=int)
    p.add_argument("--threshold", type=float)

    p = add("featurize", "build the labelled feature table")
    add_data(p)
    p.add_argument("--balance", action="store_true", help="append balance-sheet features")

    p = add("train", "train one learner family or COMB")
    add_data(p)
    p.add_argument("--features", help="featurized CSV instead of --data")
    p.add_argument("--method", choices=[*FAMILIES, "COMB"])
    p.add_argument("--balance", action="store_true")
    p.add_argument("--balanced", action="store_true", help="train on a 50/50 subsample")
    p.add_argument("--vote-threshold", type=int)

    p = add("evaluate", "holdout evaluation of the methods")
    add_data(p)
    p.add_argument("--mode", choices=["all", *CONFIGURATIONS])
    p.add_argument("--methods", type=_methods, help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--vote-threshold", type=int)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--no-plots", dest="plots", action="store_false")

    p = add("pd-report", "segment PD: baseline vs classifier")
    add_data(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", help="trained model file or COMB directory")
    src.add_argument("--train", action="store_true", help="train COMB on the year before the reference year")
    src.add_argument("--oracle", action="store_true", help="use realized labels as predictions (debug)")
    p.add_argument("--balance", action="store_true")
    p.add_argument("--vote-threshold", type=int)
    p.add_argument("--error", choices=ERROR_KINDS)
    p.add_argument("--no-plots", dest="plots", action="store_false")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults < config file (global keys, then the command section) < flags."""
    cfg = {**GLOBAL_DEFAULTS, **COMMAND_DEFAULTS[command]}
    given = vars(args)
    if "config" in given:
        path = Path(given["config"])
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise UsageError(f"{path}: config file not found")
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON: {exc}")
        if not isinstance(doc, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        # top-level keys may serve several commands; section keys must fit this one
        shared = {k: v for k, v in doc.items() if k not in COMMAND_DEFAULTS and k != "version"}
        known = set(GLOBAL_DEFAULTS).union(*COMMAND_DEFAULTS.values())
        unknown = sorted(set(shared) - known)
        section = doc.get(command, {})
        unknown += sorted(f"{command}.{k}" for k in set(section) - set(cfg))
        if unknown:
            raise UsageError(f"{path}: unknown config keys: {unknown}")
        cfg.update({k: v for k, v in shared.items() if k in cfg})
        cfg.update(section)
    for key, value in given.items():
        if key in cfg:
            cfg[key] = value
    return cfg


def _write_run_config(out: Path, command: str, cfg: dict) -> None:
    doc = {"version": RUN_CONFIG_VERSION, "command": command, "config": cfg}
    (out / "run_config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _load_panels(cfg: dict):
    if not cfg["data"]:
        raise UsageError("--data is required")
    try:
        panels = read_panels(Path(cfg["data"]))
    except (SchemaError, FileNotFoundError) as exc:
        raise DataError(str(exc))
    if not panels:
        raise DataError(f"{cfg['data']}: no firms")
    return panels


def _reference_year(cfg: dict, panels) -> int:
    if cfg["reference_year"] is not None:
        return int(cfg["reference_year"])
    periods = sorted({r.period for p in panels for r in p.quarters})
    try:
        return latest_reference_year(periods)
    except ValueError as exc:
        raise DataError(str(exc))


# --- commands --------------------------------------------------------------


def cmd_generate(cfg: dict, out: Path) -> None:
    if cfg["firms"] < 1:
        raise UsageError("--firms must be >= 1")
    try:
        gen = GeneratorConfig(
            n_firms=cfg["firms"],
            balance_sheet_fraction=cfg["balance_fraction"],
            target_default_rate=cfg["default_rate"],
            balance_signal=cfg["balance_signal"],
            segment_cycle_sd=cfg["segment_cycle_sd"],
            n_quarters=cfg["quarters"],
            threshold=cfg["threshold"],
            seed=cfg["seed"],
        )
        panels = generate(gen)
    except ValueError as exc:
        raise UsageError(str(exc))
    write_panels(panels, out)
    report = calibration_report(panels, threshold=gen.threshold)
    report["generator"] = gen.to_dict()
    (out / "calibration.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    log.info(
        "generated %d firms; default rate %.4f at reference year %d",
        report["n_firms"],
        report["default_rate"],
        report["reference_year"],
    )


def cmd_featurize(cfg: dict, out: Path) -> None:
    panels = _load_panels(cfg)
    ref = _reference_year(cfg, panels)
    ds = build_features(panels, ref, cfg["balance"], cfg["threshold"])
    name = f"features_{'loan+balance' if cfg['balance'] else 'loan'}_{ref}.csv"
    ds.to_csv(out / name)
    log.info("wrote %s: %d rows, %d defaults", name, len(ds), ds.n_positive)


def _training_set(cfg: dict) -> LabeledDataset:
    if cfg["features"]:
        try:
            return LabeledDataset.from_csv(Path(cfg["features"]))
        except (OSError, ValueError, IndexError) as exc:
            raise DataError(f"{cfg['features']}: {exc}")
    panels = _load_panels(cfg)
    ref = _reference_year(cfg, panels)
    return build_features(panels, ref, cfg["balance"], cfg["threshold"])


def cmd_train(cfg: dict, out: Path) -> None:
    ds = _training_set(cfg)
    if cfg["balanced"]:
        ds = balanced_subsample(ds, cfg["seed"])
    method = cfg["method"]
    if method == "COMB":
        comb_fit(ds, cfg["grids"], cfg["seed"], cfg["vote_threshold"]).save(out / "comb")
        target = out / "comb"
    else:
        hp = None if method == "NAIVE" else default_hyperparams(method)
        target = fit(method, ds, hp, cfg["seed"]).save(out / f"model_{method}.json")
    info = {"method": method, "n_rows": len(ds), "n_positive": ds.n_positive, **ds.meta}
    (out / "train_info.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    log.info("trained %s on %d rows; saved to %s", method, len(ds), target)


def cmd_evaluate(cfg: dict, out: Path) -> None:
    panels = _load_panels(cfg)
    ref = _reference_year(cfg, panels)
    names = list(CONFIGURATIONS) if cfg["mode"] == "all" else [cfg["mode"]]
    try:
        results = run_configurations(
            panels,
            names,
            reference_year=ref,
            seed=cfg["seed"],
            methods=tuple(cfg["methods"]),
            test_fraction=cfg["test_fraction"],
            threshold=cfg["threshold"],
            vote_threshold=cfg["vote_threshold"],
            grids=cfg["grids"],
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    for name, result in results.items():
        text = format_table(result)
        sys.stdout.write(text + "\n")
        (out / f"{name}.txt").write_text(text)
        write_csv(result, out / f"{name}.csv")
        if cfg["plots"]:
            table = {m: dict(zip(("pr", "re", "f1", "type1", "type2", "bacc"), r.values())) for m, r in result.reports.items()}
            if table:
                plotting.metrics_figure(table, name, out / f"{name}.png")


def _load_model(path: Path):
    if path.is_dir() or path.name == "comb.json":
        return CombModel.load(path)
    return TrainedModel.load(path)


def cmd_pd_report(cfg: dict, out: Path) -> None:
    if not (cfg["model"] or cfg["train"] or cfg["oracle"]):
        raise UsageError("pd-report needs --model PATH, --train or --oracle")
    if cfg["error"] not in ERROR_KINDS:
        raise UsageError(f"error must be one of {list(ERROR_KINDS)}")
    panels = _load_panels(cfg)
    ref = _reference_year(cfg, panels)
    model = None
    if cfg["model"] and not (cfg["train"] or cfg["oracle"]):
        path = Path(cfg["model"])
        if not path.exists():
            raise DataError(f"{path}: model not found (train one or pass --train)")
        try:
            model = _load_model(path)
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"{path}: cannot load model: {exc}")
    try:
        run = run_pd(
            panels,
            ref,
            model=model,
            oracle=bool(cfg["oracle"]),
            use_balance=cfg["balance"],
            seed=cfg["seed"],
            threshold=cfg["threshold"],
            grids=cfg["grids"],
            vote_threshold=cfg["vote_threshold"],
            error_kind=cfg["error"],
        )
    except ValueError as exc:
        raise DataError(str(exc))
    for g in GRANULARITIES:
        report = run.reports[g]
        write_segment_csv(report, out / f"pd_{g}.csv")
        if cfg["plots"]:
            plotting.pd_figure(report, out / f"pd_{g}.png")
        me, sup = report.mean_error, report.superiority
        sys.stdout.write(
            f"{g}: {report.n_segments} segments; mean error baseline {me['baseline']:.4f} model {me['model']:.4f}; "
            f"superiority baseline {sup['baseline']:.1%} model {sup['model']:.1%} ties {report.ties:.1%}\n"
        )
    write_summary(run, out / "pd_summary.json")


COMMANDS = {
    "generate": cmd_generate,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "pd-report": cmd_pd_report,
}


def _snapshot(out: Path) -> set:
    return {p for p in out.rglob("*")} if out.exists() else set()


def _remove_new(out: Path, before: set, out_existed: bool) -> None:
    created = sorted(_snapshot(out) - before, key=lambda p: len(p.parts), reverse=True)
    if not out_existed and out.exists():
        created.append(out)
    for p in created:
        try:
            p.rmdir() if p.is_dir() else p.unlink()
        except OSError:
            pass


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    command = args.command
    out: Optional[Path] = None
    before: set = set()
    out_existed = True
    try:
        cfg = resolve_config(command, args)
        if cfg["threads"] is not None and cfg["threads"] < 1:
            raise UsageError("--threads must be >= 1")
        set_threads(cfg["threads"])
        log.info("resolved %s config: %s", command, json.dumps(cfg, sort_keys=True))
        out = Path(cfg["out"])
        before = _snapshot(out)
        out_existed = out.exists()
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[command](cfg, out)
        _write_run_config(out, command, cfg)
        return EXIT_OK
    except UsageError as exc:
        code, msg = EXIT_USAGE, str(exc)
    except DataError as exc:
        code, msg = EXIT_DATA, str(exc)
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        code, msg = EXIT_INTERNAL, f"internal error: {type(exc).__name__}: {exc}"
    sys.stderr.write(f"defaultpred {command}: {msg}\n")
    if out is not None:
        _remove_new(out, before, out_existed)
    return code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

"""Experiment runner producing one metrics row per method."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .comb import COMB_FAMILIES, comb_fit, vote_rule
from .domain import DEFAULT_THRESHOLD, FirmPanel
from .features import LabeledDataset, balanced_subsample, build_features, train_test_split
from .learners import default_hyperparams, fit
from .metrics import CSV_COLUMNS, MetricsReport, evaluate

log = logging.getLogger(__name__)

METHODS = ("NAIVE", "MNB", "LOG", "GB", "RF", "DT", "BAG", "ADA", "COMB")

# (use_balance, balanced_training) for the four standard configurations
CONFIGURATIONS = {
    "loan_imbalanced": (False, False),
    "loan+balance_imbalanced": (True, False),
    "loan_balanced": (False, True),
    "loan+balance_balanced": (True, True),
}

BACC_NOTE = "BACC = (Re + 1 - Type-II) / 2, the mean of the true-positive and true-negative rates."


@dataclass(frozen=True)
class ExperimentConfig:
    reference_year: int = 2014
    use_balance: bool = False
    balanced_training: bool = False
    seed: int = 0
    methods: tuple = METHODS
    test_fraction: float = 0.3
    threshold: float = DEFAULT_THRESHOLD
    vote_threshold: int = 3
    grids: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {list(METHODS)}")

    @property
    def name(self) -> str:
        data = "loan+balance" if self.use_balance else "loan"
        return f"{data}_{'balanced' if self.balanced_training else 'imbalanced'}"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reports: dict = field(default_factory=dict)  # method -> MetricsReport
    errors: dict = field(default_factory=dict)  # method -> message
    member_reports: dict = field(default_factory=dict)  # COMB member label -> MetricsReport
    n_train: int = 0
    n_test: int = 0
    n_test_positive: int = 0

    def rows(self):
        for method in self.config.methods:
            yield method, self.reports.get(method), self.errors.get(method)


def split_for(config: ExperimentConfig, ds: LabeledDataset):
    """Holdout split; in balanced mode only the training part is balanced."""
    train, test = train_test_split(ds, config.test_fraction, config.seed)
    if config.balanced_training:
        train = balanced_subsample(train, config.seed)
    return train, test


def run_experiment(
    config: ExperimentConfig,
    panels: Optional[Sequence[FirmPanel]] = None,
    dataset: Optional[LabeledDataset] = None,
) -> ExperimentResult:
    """Featurize, split, train every requested method and score it on the
    untouched test set. A failing method is reported and skipped."""
    log.info("experiment %s config: %s", config.name, config.to_dict())
    if dataset is None:
        if panels is None:
            raise ValueError("run_experiment needs panels or a dataset")
        dataset = build_features(panels, config.reference_year, config.use_balance, config.threshold)
    train, test = split_for(config, dataset)
    result = ExperimentResult(config, n_train=len(train), n_test=len(test), n_test_positive=test.n_positive)

    fitted = {}
    for method in config.methods:
        if method == "COMB":
            continue
        try:
            hp = None if method == "NAIVE" else default_hyperparams(method)
            fitted[method] = fit(method, train, hp, config.seed)
            result.reports[method] = evaluate(fitted[method].predict(test.rows), test.labels)
        except Exception as exc:
            log.error("method %s failed: %s", method, exc)
            result.errors[method] = f"{type(exc).__name__}: {exc}"

    if "COMB" in config.methods:
        try:
            defaults = {fam: fitted[fam] for fam in COMB_FAMILIES if fam in fitted}
            comb = comb_fit(train, config.grids, config.seed, config.vote_threshold, defaults)
            votes = comb.votes(test.rows)
            result.reports["COMB"] = evaluate(vote_rule(votes, comb.vote_threshold), test.labels)
            for (label, _), v in zip(comb.members, votes):
                result.member_reports[label] = evaluate(v, test.labels)
        except Exception as exc:
            log.error("method COMB failed: %s", exc)
            result.errors["COMB"] = f"{type(exc).__name__}: {exc}"
    return result


def run_configurations(
    panels: Sequence[FirmPanel],
    names: Sequence[str] = tuple(CONFIGURATIONS),
    **kwargs,
) -> dict[str, ExperimentResult]:
    """Run several of the standard configurations, featurizing each data
    mode once."""
    datasets: dict[bool, LabeledDataset] = {}
    results = {}
    for name in names:
        use_balance, balanced = CONFIGURATIONS[name]
        config = ExperimentConfig(use_balance=use_balance, balanced_training=balanced, **kwargs)
        if use_balance not in datasets:
            datasets[use_balance] = build_features(panels, config.reference_year, use_balance, config.threshold)
        results[name] = run_experiment(config, dataset=datasets[use_balance])
    return results


# --- report writers -------------------------------------------------------


def format_table(result: ExperimentResult) -> str:
    header = f"{'':8}" + "".join(f"{c:>9}" for c in ("Pr", "Re", "F1", "Type-I", "Type-II", "BACC"))
    cfg = result.config
    lines = [
        f"# {cfg.name}: reference year {cfg.reference_year}, seed {cfg.seed}, "
        f"train {result.n_train} rows, test {result.n_test} rows ({result.n_test_positive} defaults)",
        header,
        "-" * len(header),
    ]
    for method, report, error in result.rows():
        if report is None:
            lines.append(f"{method:8}  failed: {error}")
            continue
        lines.append(f"{method:8}" + "".join(f"{v:9.2f}" for v in report.values()))
    lines += ["-" * len(header), BACC_NOTE]
    return "\n".join(lines) + "\n"


def write_csv(result: ExperimentResult, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", *CSV_COLUMNS])
        for method, report, _ in result.rows():
            if report is None:
                w.writerow([method] + [""] * len(CSV_COLUMNS))
            else:
                w.writerow([method, *(f"{v:.6f}" for v in report.values())])
    return path


def read_csv(path: Path) -> dict[str, dict[str, float]]:
    with open(path, newline="") as fh:
        return {
            row["method"]: {c: float(row[c]) for c in CSV_COLUMNS if row[c] != ""} for row in csv.DictReader(fh)
        }


def report_dict(report: MetricsReport) -> dict:
    out = {name: value for name, value in zip(CSV_COLUMNS, report.values())}
    out.update(asdict(report.matrix))
    out["degenerate"] = list(report.degenerate)
    return out

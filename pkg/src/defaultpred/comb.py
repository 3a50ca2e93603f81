"""COMB: ten tree-family models voting with a count threshold.

Each of DT, RF, BAG, ADA and GB contributes a default-hyperparameter member
and a grid-tuned member; a row is predicted as default when at least
``vote_threshold`` members predict default.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .learners import TrainedModel, default_hyperparams, fit, tune
from .learners.base import check_rows

log = logging.getLogger(__name__)

COMB_FAMILIES = ("DT", "RF", "BAG", "ADA", "GB")
VARIANTS = ("default", "tuned")
N_MEMBERS = len(COMB_FAMILIES) * len(VARIANTS)
MANIFEST_VERSION = 1

# desk-scale search spaces; dict entries override the family defaults
DEFAULT_GRIDS: dict[str, list[dict]] = {
    "DT": [{"max_depth": 4}, {"max_depth": 6}, {"max_depth": 8, "min_leaf": 5}, {"min_leaf": 10}],
    "RF": [{"n_trees": 50, "min_leaf": 3}, {"n_trees": 50, "max_depth": 10}],
    "BAG": [{"n_trees": 30, "min_leaf": 5}, {"n_trees": 30, "max_depth": 8}],
    "ADA": [{"n_rounds": 100}, {"n_rounds": 50, "base_depth": 2}],
    "GB": [{"n_rounds": 100, "learning_rate": 0.2}, {"n_rounds": 100, "base_depth": 2, "learning_rate": 0.3}],
}


class MemberError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CombModel:
    members: tuple  # of (label, TrainedModel), label like "RF:tuned"
    vote_threshold: int = 3

    def __post_init__(self):
        if len(self.members) != N_MEMBERS:
            raise ValueError(f"COMB needs exactly {N_MEMBERS} members, got {len(self.members)}")
        labels = [label for label, _ in self.members]
        expected = [f"{fam}:{var}" for fam in COMB_FAMILIES for var in VARIANTS]
        if sorted(labels) != sorted(expected):
            raise ValueError(f"COMB members must be one default and one tuned per family, got {labels}")
        if not 1 <= self.vote_threshold <= N_MEMBERS:
            raise ValueError(f"vote_threshold must lie in 1..{N_MEMBERS}")

    @property
    def feature_names(self) -> tuple:
        return self.members[0][1].feature_names

    def votes(self, rows) -> np.ndarray:
        """Member predictions, shape ``(10, n_rows)``."""
        X = check_rows(self.members[0][1], rows)
        return np.array([m.predict(X) for _, m in self.members], dtype=np.int8).reshape(N_MEMBERS, len(X))

    def predict(self, rows) -> np.ndarray:
        return comb_predict(self, rows)

    def save(self, directory) -> Path:
        """Write one JSON file per member plus ``comb.json`` referencing them."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        entries = []
        for i, (label, model) in enumerate(self.members):
            fam, var = label.split(":")
            name = f"member_{i:02d}_{fam}_{var}.json"
            model.save(directory / name)
            entries.append({"label": label, "family": fam, "variant": var, "path": name})
        manifest = {"version": MANIFEST_VERSION, "vote_threshold": self.vote_threshold, "members": entries}
        path = directory / "comb.json"
        path.write_text(json.dumps(manifest, indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "CombModel":
        path = Path(path)
        if path.is_dir():
            path = path / "comb.json"
        doc = json.loads(path.read_text())
        if doc.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported COMB manifest version {doc.get('version')!r}")
        members = tuple((e["label"], TrainedModel.load(path.parent / e["path"])) for e in doc["members"])
        return cls(members, doc["vote_threshold"])


def vote_rule(votes: np.ndarray, threshold: int) -> np.ndarray:
    """1 where at least ``threshold`` of the member votes (axis 0) are 1."""
    return (np.asarray(votes).sum(axis=0) >= threshold).astype(np.int8)


def comb_predict(model: CombModel, rows) -> np.ndarray:
    return vote_rule(model.votes(rows), model.vote_threshold)


def comb_fit(
    ds,
    grids: Optional[Mapping[str, list]] = None,
    seed: int = 0,
    vote_threshold: int = 3,
    default_members: Optional[Mapping[str, TrainedModel]] = None,
    validation_fraction: float = 0.3,
) -> CombModel:
    """Train the ten members on ``ds``.

    ``default_members`` may supply already-trained default-hyperparameter
    models (keyed by family) so an experiment does not train them twice.
    A tuned member whose winning hyperparameters equal the defaults reuses
    the default model, which is what retraining with the same seed yields.
    """
    grids = dict(DEFAULT_GRIDS if grids is None else grids)
    default_members = dict(default_members or {})
    members = []
    for fam in COMB_FAMILIES:
        try:
            base = default_members.get(fam)
            if base is None:
                base = fit(fam, ds, default_hyperparams(fam), seed)
            grid = grids.get(fam) or [default_hyperparams(fam)]
            hp = tune(fam, ds, grid, validation_fraction, seed)
            tuned = base if hp == base.hyperparams else fit(fam, ds, hp, seed)
        except Exception as exc:
            raise MemberError(f"COMB member {fam}: {exc}") from exc
        log.debug("COMB %s tuned hyperparameters: %s", fam, hp)
        members += [(f"{fam}:default", base), (f"{fam}:tuned", tuned)]
    return CombModel(tuple(members), vote_threshold)

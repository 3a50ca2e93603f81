"""Exhaustive grid search scored by held-out F1."""

from __future__ import annotations

from typing import Iterable, Union

import numpy as np

from ..metrics import confusion, metrics
from .base import HyperParams, TrainingError, default_hyperparams


def _candidate(family: str, entry: Union[HyperParams, dict]) -> HyperParams:
    if isinstance(entry, HyperParams):
        return entry
    return default_hyperparams(family).with_(**entry)


def tune(family: str, ds, grid: Iterable[Union[HyperParams, dict]], validation_fraction: float = 0.3, seed: int = 0) -> HyperParams:
    """Return the grid candidate with the best validation F1.

    Dict entries override the family defaults. Candidates are trained on a
    stratified split of ``ds``; ties go to the earliest candidate.
    """
    from . import fit
    from ..features import stratified_indices

    candidates = [_candidate(family, g) for g in grid]
    if not candidates:
        raise ValueError("tune: empty grid")
    if len(candidates) == 1:
        return candidates[0]
    train_idx, val_idx = stratified_indices(np.asarray(ds.labels), validation_fraction, seed)
    train, val = ds.subset(train_idx), ds.subset(val_idx)
    best, best_f1, failures = None, -1.0, []
    for hp in candidates:
        try:
            model = fit(family, train, hp, seed)
        except Exception as exc:  # collected and reported if every candidate fails
            failures.append(f"{hp}: {exc}")
            continue
        f1 = metrics(confusion(model.predict(val.rows), val.labels)).f1
        if f1 > best_f1:
            best, best_f1 = hp, f1
    if best is None:
        raise TrainingError(f"tune({family}): every candidate failed: " + "; ".join(failures))
    return best

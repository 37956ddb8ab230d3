"""Random-search hyperparameter tuning on the training partition."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import gbdt
from .metrics import macro_f1
from .pipeline import stratified_split

VALIDATION_FRACTION = 0.15


@dataclass(frozen=True)
class TrainingPartition:
    """The training split only. The tuner never gets to see test rows."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y lengths differ")


@dataclass(frozen=True)
class SearchSpace:
    learning_rate: tuple = (0.01, 1.0)  # log-uniform
    max_depth: tuple = (3, 10)  # inclusive
    n_estimators: tuple = (10, 100)  # inclusive
    random_state: int = 10
    l2_reg: float = 1.0
    min_samples_leaf: int = 5

    def sample(self, rng: np.random.Generator) -> gbdt.Hyperparameters:
        lo, hi = self.learning_rate
        lr = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        return gbdt.Hyperparameters(
            learning_rate=min(lr, 1.0),
            max_depth=int(rng.integers(self.max_depth[0], self.max_depth[1] + 1)),
            n_estimators=int(rng.integers(self.n_estimators[0], self.n_estimators[1] + 1)),
            l2_reg=self.l2_reg,
            min_samples_leaf=self.min_samples_leaf,
            random_state=self.random_state,
        )

    def contains(self, hp: gbdt.Hyperparameters) -> bool:
        return (self.learning_rate[0] <= hp.learning_rate <= self.learning_rate[1]
                and self.max_depth[0] <= hp.max_depth <= self.max_depth[1]
                and self.n_estimators[0] <= hp.n_estimators <= self.n_estimators[1])


@dataclass(frozen=True)
class TrialResult:
    index: int
    hyperparameters: gbdt.Hyperparameters
    f1: float
    seconds: float


def draw_trials(space: SearchSpace, n_trials: int, seed: int) -> list[gbdt.Hyperparameters]:
    rng = np.random.default_rng(seed)
    return [space.sample(rng) for _ in range(n_trials)]


def validation_split(part: TrainingPartition, seed: int):
    fit_idx, val_idx = stratified_split(part.y, VALIDATION_FRACTION, seed)
    return fit_idx, val_idx


def evaluate_params(part: TrainingPartition, hp: gbdt.Hyperparameters, seed: int) -> float:
    fit_idx, val_idx = validation_split(part, seed)
    model = gbdt.fit(part.X[fit_idx], part.y[fit_idx], hp)
    return macro_f1(part.y[val_idx], gbdt.predict(model, part.X[val_idx]))


def random_search(train: TrainingPartition, space: Optional[SearchSpace] = None,
                  n_trials: int = 30, seed: int = 0, progress=None):
    """Sample ``n_trials`` configurations and score each by validation macro F1.

    A stratified 15 % validation fold is carved once from ``train``; every
    trial fits on the rest. Returns ``(best, all_trials)``; ties go to the
    earlier trial.
    """
    if not isinstance(train, TrainingPartition):
        raise TypeError("random_search takes a TrainingPartition")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    space = space or SearchSpace()
    counts = np.bincount(np.asarray(train.y, dtype=int), minlength=4)
    if np.any(counts == 0):
        raise ValueError(f"classes {np.flatnonzero(counts == 0).tolist()} missing from the training partition")

    fit_idx, val_idx = validation_split(train, seed)
    X_fit, y_fit = train.X[fit_idx], train.y[fit_idx]
    X_val, y_val = train.X[val_idx], train.y[val_idx]

    trials = []
    for i, hp in enumerate(draw_trials(space, n_trials, seed)):
        start = time.perf_counter()
        model = gbdt.fit(X_fit, y_fit, hp)
        f1 = macro_f1(y_val, gbdt.predict(model, X_val))
        trials.append(TrialResult(i, hp, f1, time.perf_counter() - start))
        if progress is not None:
            progress(trials[-1])

    best = trials[0]
    for t in trials[1:]:
        if t.f1 > best.f1:
            best = t
    return best, trials


def best_params_document(best: TrialResult) -> dict:
    return {"trial": best.index, "validation_macro_f1": best.f1,
            "hyperparameters": asdict(best.hyperparameters)}


def write_trial_log(trials, fp, include_seconds: bool = False) -> None:
    cols = ["trial", "learning_rate", "max_depth", "n_estimators", "l2_reg",
            "min_samples_leaf", "random_state", "macro_f1"]
    if include_seconds:
        cols.append("seconds")
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(cols)
    for t in trials:
        hp = t.hyperparameters
        row = [t.index, repr(hp.learning_rate), hp.max_depth, hp.n_estimators, repr(hp.l2_reg),
               hp.min_samples_leaf, hp.random_state, repr(t.f1)]
        if include_seconds:
            row.append(f"{t.seconds:.3f}")
        w.writerow(row)

"""Time-series cross-validation, recursive feature elimination, grid search.

Rows are assumed pre-sorted chronologically, so index order is time order;
every plan guarantees that no validation row precedes a training row.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import learners
from .stats import pr_auc_mean


class TuningError(ValueError):
    pass


@dataclass
class CvPlan:
    folds: list[tuple[np.ndarray, np.ndarray]]
    n_folds: int

    def validate(self) -> None:
        for train_idx, val_idx in self.folds:
            if train_idx.size == 0 or val_idx.size == 0:
                raise TuningError("empty fold block")
            if train_idx.max() >= val_idx.min():
                raise TuningError("leakage: validation rows precede training rows")


def time_series_split(n_rows: int, n_folds: int = 2) -> CvPlan:
    """Expanding-window split over ``n_folds + 1`` consecutive blocks.

    Fold i trains on blocks 0..i and validates on block i+1; remainder rows
    go to the earliest blocks.
    """
    if n_folds < 1:
        raise TuningError("need at least one fold")
    if n_rows < n_folds + 1:
        raise TuningError(f"too few rows ({n_rows}) for {n_folds} folds")
    n_blocks = n_folds + 1
    base, remainder = divmod(n_rows, n_blocks)
    sizes = [base + (1 if b < remainder else 0) for b in range(n_blocks)]
    bounds = np.cumsum([0] + sizes)
    folds = []
    for i in range(n_folds):
        train_idx = np.arange(0, bounds[i + 1])
        val_idx = np.arange(bounds[i + 1], bounds[i + 2])
        folds.append((train_idx, val_idx))
    plan = CvPlan(folds=folds, n_folds=n_folds)
    plan.validate()
    return plan


def _cv_score(fit_fn, x, y, plan: CvPlan, metric) -> Optional[float]:
    """Mean validation metric across usable folds; None if every fold was
    skipped (single-class blocks or estimator errors)."""
    scores = []
    for train_idx, val_idx in plan.folds:
        if len(np.unique(y[val_idx])) < 2 or len(np.unique(y[train_idx])) < 2:
            warnings.warn("skipping single-class CV fold", stacklevel=3)
            continue
        try:
            model = fit_fn(x[train_idx], y[train_idx])
            scores.append(metric(y[val_idx], learners.predict_proba(model, x[val_idx])))
        except learners.LearnerError as exc:
            warnings.warn(f"skipping failed CV fold: {exc}", stacklevel=3)
            continue
    if not scores:
        return None
    return float(np.mean(scores))


@dataclass
class SelectionResult:
    selected: list[str]
    curve: list[tuple[int, float]]  # (subset size, CV metric)
    chosen_size: int
    sets_by_size: dict[int, list[str]] = field(default_factory=dict)


def rfecv(
    fit_fn: Callable[[np.ndarray, np.ndarray], object],
    x_train: np.ndarray,
    y_train: np.ndarray,
    column_names: Sequence[str],
    step: float | int = 1,
    cv_plan: Optional[CvPlan] = None,
    metric: Callable = pr_auc_mean,
) -> SelectionResult:
    """Recursive feature elimination scored by cross-validated metric.

    Each round scores the current subset per CV fold, then drops the
    ``step`` bottom-ranked features of a full-train fit (an integer count,
    or ceil of a fraction of the current size).  The best-scoring subset
    size wins, ties going to the smaller subset.
    """
    x = np.asarray(x_train, dtype=float)
    y = np.asarray(y_train)
    names = list(column_names)
    if x.shape[1] != len(names):
        raise TuningError("column names do not match matrix width")
    if isinstance(step, float) and not step.is_integer():
        if not 0.0 < step < 1.0:
            raise TuningError("fractional step must be in (0, 1)")
    elif int(step) < 1:
        raise TuningError("integer step must be >= 1")
    plan = cv_plan or time_series_split(x.shape[0], 2)
    plan.validate()

    current = list(range(x.shape[1]))
    curve: list[tuple[int, float]] = []
    sets_by_size: dict[int, list[str]] = {}
    while True:
        score = _cv_score(fit_fn, x[:, current], y, plan, metric)
        if score is None:
            raise TuningError("all CV folds skipped; metric undefined everywhere")
        curve.append((len(current), score))
        sets_by_size[len(current)] = [names[i] for i in current]
        if len(current) == 1:
            break
        full_model = fit_fn(x[:, current], y)
        ranking = learners.rank_features(full_model)  # least important first
        if isinstance(step, float) and not float(step).is_integer():
            n_drop = math.ceil(step * len(current))
        else:
            n_drop = int(step)
        n_drop = min(n_drop, len(current) - 1)
        doomed = set(ranking[:n_drop])
        current = [c for i, c in enumerate(current) if i not in doomed]

    chosen_size = min(
        (size for size, s in curve if s == max(s for _, s in curve)),
    )
    return SelectionResult(
        selected=sets_by_size[chosen_size],
        curve=sorted(curve),
        chosen_size=chosen_size,
        sets_by_size=sets_by_size,
    )


@dataclass
class GridSearchResult:
    best_params: dict
    best_score: float
    rows: list[dict]  # one row per configuration per fold

    def table_csv(self, path: str) -> None:
        if not self.rows:
            return
        param_keys = sorted(k for k in self.rows[0] if k not in ("fold", "metric"))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(param_keys + ["fold", "metric"]) + "\n")
            for row in self.rows:
                values = [str(row[k]) for k in param_keys]
                metric_s = "" if row["metric"] is None else f"{row['metric']:.10f}"
                fh.write(",".join(values + [str(row["fold"]), metric_s]) + "\n")


def grid_search(
    build_fn: Callable[..., Callable[[np.ndarray, np.ndarray], object]],
    param_grid: dict[str, Sequence],
    x_train: np.ndarray,
    y_train: np.ndarray,
    cv_plan: Optional[CvPlan] = None,
    metric: Callable = pr_auc_mean,
) -> GridSearchResult:
    """Exhaustive search over the grid; best = max mean validation metric,
    ties broken by the first point in deterministic lexicographic grid order
    (parameter names sorted, values in listed order).  A configuration that
    errors on every fold scores -inf and stays in the table.
    """
    if not param_grid or any(len(v) == 0 for v in param_grid.values()):
        raise TuningError("parameter grid must be nonempty and finite")
    x = np.asarray(x_train, dtype=float)
    y = np.asarray(y_train)
    plan = cv_plan or time_series_split(x.shape[0], 2)
    plan.validate()

    keys = sorted(param_grid)
    best_params = None
    best_score = -math.inf
    rows: list[dict] = []
    for combo in itertools.product(*(param_grid[k] for k in keys)):
        params = dict(zip(keys, combo))
        fit_fn = build_fn(**params)
        fold_scores = []
        for fold_i, (train_idx, val_idx) in enumerate(plan.folds):
            row = {**params, "fold": fold_i, "metric": None}
            if len(np.unique(y[val_idx])) >= 2 and len(np.unique(y[train_idx])) >= 2:
                try:
                    model = fit_fn(x[train_idx], y[train_idx])
                    row["metric"] = metric(y[val_idx], learners.predict_proba(model, x[val_idx]))
                except learners.LearnerError as exc:
                    warnings.warn(f"grid point {params} failed on fold {fold_i}: {exc}", stacklevel=2)
            rows.append(row)
            if row["metric"] is not None:
                fold_scores.append(row["metric"])
        score = float(np.mean(fold_scores)) if fold_scores else -math.inf
        if score > best_score:
            best_score = score
            best_params = params
    assert best_params is not None
    return GridSearchResult(best_params=best_params, best_score=best_score, rows=rows)

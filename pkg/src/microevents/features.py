"""Per-step feature assembly: mean pooling, train-fitted standardization and
Tukey outlier capping.

Capping is meant for the logistic-regression pipeline only; tree models
consume standardized but uncapped features.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .timegrid import StepDataset

TRAIN, TEST = "train", "test"


class FeatureError(ValueError):
    pass


@dataclass
class FeatureMatrix:
    x: np.ndarray  # (n_steps, n_features) float
    columns: list[str]
    labels: np.ndarray  # (n_steps,) int, 1 = event
    partition: np.ndarray  # (n_steps,) "train" / "test"
    step_ids: list[str]

    def __post_init__(self):
        if self.x.ndim != 2 or self.x.shape != (len(self.step_ids), len(self.columns)):
            raise FeatureError("inconsistent feature matrix dimensions")
        if not np.all(np.isfinite(self.x)):
            raise FeatureError("feature matrix contains non-finite values")

    @property
    def train_mask(self) -> np.ndarray:
        return self.partition == TRAIN

    def x_train(self) -> np.ndarray:
        return self.x[self.train_mask]

    def x_test(self) -> np.ndarray:
        return self.x[~self.train_mask]

    def y_train(self) -> np.ndarray:
        return self.labels[self.train_mask]

    def y_test(self) -> np.ndarray:
        return self.labels[~self.train_mask]

    def select(self, columns: Sequence[str]) -> "FeatureMatrix":
        idx = [self.columns.index(c) for c in columns]
        return FeatureMatrix(
            x=self.x[:, idx].copy(),
            columns=list(columns),
            labels=self.labels.copy(),
            partition=self.partition.copy(),
            step_ids=list(self.step_ids),
        )

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("step_id,label,partition," + ",".join(self.columns) + "\n")
            for i, sid in enumerate(self.step_ids):
                values = ",".join(f"{v:.12g}" for v in self.x[i])
                fh.write(f"{sid},{int(self.labels[i])},{self.partition[i]},{values}\n")

    @classmethod
    def from_csv(cls, path: str) -> "FeatureMatrix":
        with open(path, "r", encoding="utf-8") as fh:
            line = fh.readline()
            while line.startswith("#"):
                line = fh.readline()
            header = line.rstrip("\n").split(",")
            if header[:3] != ["step_id", "label", "partition"]:
                raise FeatureError("bad feature CSV header")
            columns = header[3:]
            step_ids, labels, partition, rows = [], [], [], []
            for line in fh:
                parts = line.rstrip("\n").split(",")
                step_ids.append(parts[0])
                labels.append(int(parts[1]))
                partition.append(parts[2])
                rows.append([float(v) for v in parts[3:]])
        return cls(
            x=np.asarray(rows, dtype=float),
            columns=columns,
            labels=np.asarray(labels, dtype=int),
            partition=np.asarray(partition, dtype=object),
            step_ids=step_ids,
        )


def pool_timestep(message_vectors: Iterable[np.ndarray]) -> np.ndarray:
    """Arithmetic mean of the per-message vectors in one time step."""
    vectors = [np.asarray(v, dtype=float) for v in message_vectors]
    if not vectors:
        raise FeatureError("cannot pool an empty time step")
    return np.mean(np.stack(vectors), axis=0)


def assemble_features(
    dataset: StepDataset,
    message_vectors: Mapping[str, np.ndarray],
    columns: Sequence[str],
) -> FeatureMatrix:
    """Pool per-message vectors into one row per time step, train rows first."""
    rows, labels, partition, step_ids = [], [], [], []
    for part, steps in ((TRAIN, dataset.train_steps), (TEST, dataset.test_steps)):
        for step in sorted(steps, key=lambda s: (s.start_day, s.label)):
            vectors = [message_vectors[mid] for mid in step.message_ids if mid in message_vectors]
            if not vectors:
                raise FeatureError(f"step {step.step_id} has no featurized messages")
            rows.append(pool_timestep(vectors))
            labels.append(1 if step.is_event else 0)
            partition.append(part)
            step_ids.append(step.step_id)
    return FeatureMatrix(
        x=np.stack(rows),
        columns=list(columns),
        labels=np.asarray(labels, dtype=int),
        partition=np.asarray(partition, dtype=object),
        step_ids=step_ids,
    )


# ---------------------------------------------------------------------------
# standardization (z = (x - mu) / sigma, fitted on the training partition)

@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    columns: list[str]
    dropped: list[str] = field(default_factory=list)


def fit_standardizer(fm: FeatureMatrix) -> Standardizer:
    """Column means and sample (n-1) standard deviations from train rows.

    Constant columns cannot be scaled and are scheduled for dropping.
    """
    xt = fm.x_train()
    if xt.shape[0] < 2:
        raise FeatureError("need at least 2 train rows to standardize")
    mu = xt.mean(axis=0)
    sigma = xt.std(axis=0, ddof=1)
    keep = sigma > 0.0
    dropped = [c for c, k in zip(fm.columns, keep) if not k]
    return Standardizer(
        mean=mu[keep],
        std=sigma[keep],
        columns=[c for c, k in zip(fm.columns, keep) if k],
        dropped=dropped,
    )


def apply_standardizer(standardizer: Standardizer, fm: FeatureMatrix) -> FeatureMatrix:
    sub = fm.select(standardizer.columns)
    sub.x = (sub.x - standardizer.mean) / standardizer.std
    return sub


# ---------------------------------------------------------------------------
# Tukey capping (hinge quartiles, 1.5 IQR fences from train rows)

@dataclass
class TukeyCapper:
    lower: np.ndarray
    upper: np.ndarray
    columns: list[str]


def _hinges(values: np.ndarray) -> tuple[float, float]:
    """Tukey hinges: medians of the median-split halves (median shared when
    the count is odd)."""
    s = np.sort(values)
    n = s.shape[0]
    half = (n + 1) // 2
    return float(np.median(s[:half])), float(np.median(s[n - half:]))


def fit_tukey(fm: FeatureMatrix) -> TukeyCapper:
    xt = fm.x_train()
    if xt.shape[0] < 1:
        raise FeatureError("no train rows for capping")
    lower = np.empty(xt.shape[1])
    upper = np.empty(xt.shape[1])
    for j in range(xt.shape[1]):
        q1, q3 = _hinges(xt[:, j])
        iqr = q3 - q1
        lower[j] = q1 - 1.5 * iqr
        upper[j] = q3 + 1.5 * iqr
    return TukeyCapper(lower=lower, upper=upper, columns=list(fm.columns))


def apply_tukey(capper: TukeyCapper, fm: FeatureMatrix) -> FeatureMatrix:
    if capper.columns != fm.columns:
        raise FeatureError("capper fitted on different columns")
    out = fm.select(fm.columns)
    out.x = np.clip(out.x, capper.lower, capper.upper)
    return out


SENTIMENT_SIMPLEX = ("sentiment_negative", "sentiment_neutral", "sentiment_positive")


def drop_redundant_simplex_columns(fm: FeatureMatrix, topic_prefix: str = "lda_topic__") -> FeatureMatrix:
    """Drop one column from each exactly-collinear block ahead of logistic
    fits: the topic shares sum to 1 and so do the sentiment shares, which
    leaves the information matrix singular if all columns enter the design.
    """
    drop: list[str] = []
    topic_cols = [c for c in fm.columns if c.startswith(topic_prefix)]
    if len(topic_cols) >= 2:
        drop.append(topic_cols[-1])
    if all(c in fm.columns for c in SENTIMENT_SIMPLEX):
        drop.append("sentiment_neutral")
    return fm.select([c for c in fm.columns if c not in drop])


def topic_feature_names(topic_names: Sequence[str] | None, k: int) -> list[str]:
    """``lda_topic__<name-or-index>`` column names."""
    if topic_names is None:
        return [f"lda_topic__{i}" for i in range(k)]
    if len(topic_names) != k:
        raise FeatureError("one topic name per topic required")
    return [f"lda_topic__{n}" for n in topic_names]

"""Estimators: logistic regression by IRLS, bagged CART forests and
gradient-boosted trees, plus feature rankings and permutation importance.

All three families are deterministic given their seeds and expose
``predict_proba`` event probabilities.  Feature rankings order columns from
least to most important, as consumed by recursive feature elimination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

SEPARATION_BETA_BOUND = 30.0


class LearnerError(ValueError):
    pass


class QuasiSeparationError(LearnerError):
    """Coefficients diverging on (quasi-)separable data."""


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _bernoulli_ll(y: np.ndarray, probs: np.ndarray) -> float:
    p = np.clip(probs, 1e-12, 1.0 - 1e-12)
    return float(np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


# ---------------------------------------------------------------------------
# logistic regression (IRLS / Newton-Raphson with step halving)

@dataclass
class LogisticModel:
    coef: np.ndarray  # intercept first
    std_errors: np.ndarray
    log_likelihood: float
    n_obs: int
    df_model: int
    n_iter: int
    ll_path: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.df_model

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.df_model:
            raise LearnerError(
                f"schema mismatch: model expects {self.df_model} features, got {x.shape[1]}"
            )
        return _sigmoid(np.column_stack([np.ones(x.shape[0]), x]) @ self.coef)


def fit_logistic(x: np.ndarray, y: np.ndarray, max_iter: int = 100, tol: float = 1e-8) -> LogisticModel:
    """Newton/IRLS maximum likelihood with observed-information standard
    errors.  Requires both classes; detects quasi-separation when any
    coefficient on standardized inputs exceeds +-30.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise LearnerError("labels must be binary 0/1")
    if len(np.unique(y)) < 2:
        raise LearnerError("both classes must be present")
    n, p = x.shape
    design = np.column_stack([np.ones(n), x])

    beta = np.zeros(p + 1)
    probs = _sigmoid(design @ beta)
    ll = _bernoulli_ll(y, probs)
    ll_path = [ll]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        w = np.clip(probs * (1.0 - probs), 1e-10, None)
        info = design.T @ (design * w[:, None])
        score = design.T @ (y - probs)
        if np.linalg.cond(info) > 1e12:
            raise LearnerError("singular information matrix (collinear features?)")
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise LearnerError(f"singular information matrix: {exc}") from exc

        # step halving keeps the log-likelihood non-decreasing
        new_ll = -math.inf
        for _ in range(40):
            candidate = beta + step
            new_ll = _bernoulli_ll(y, _sigmoid(design @ candidate))
            if new_ll >= ll - 1e-12:
                break
            step = step / 2.0
        beta = beta + step
        probs = _sigmoid(design @ beta)
        ll = new_ll
        ll_path.append(ll)

        if np.max(np.abs(beta)) > SEPARATION_BETA_BOUND:
            raise QuasiSeparationError("quasi-separation: diverging coefficients")
        if np.max(np.abs(step)) < tol:
            break

    w = np.clip(probs * (1.0 - probs), 1e-10, None)
    info = design.T @ (design * w[:, None])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise LearnerError(f"singular information matrix at convergence: {exc}") from exc
    return LogisticModel(
        coef=beta,
        std_errors=np.sqrt(np.diag(cov)),
        log_likelihood=ll,
        n_obs=n,
        df_model=p,
        n_iter=n_iter,
        ll_path=ll_path,
    )


# ---------------------------------------------------------------------------
# CART trees and bagged forests

@dataclass
class _Tree:
    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]  # event fraction at leaves (or additive value for GBDT)

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[0])
        stack = [(0, np.arange(x.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if self.feature[node] < 0:
                out[idx] = self.value[node]
                continue
            go_left = x[idx, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out


def _gini(w1: float, w0: float) -> float:
    total = w1 + w0
    if total <= 0:
        return 0.0
    p1 = w1 / total
    return 2.0 * p1 * (1.0 - p1)


def _best_gini_split(x, y, weights, feature_ids):
    """(feature, threshold, decrease): the split maximizing the weighted
    impurity decrease, or None when no split improves."""
    w1_total = float(np.sum(weights * y))
    w_total = float(np.sum(weights))
    parent = _gini(w1_total, w_total - w1_total)
    best = None
    for f in feature_ids:
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        wy = (weights * y)[order]
        wall = weights[order]
        cum_w1 = np.cumsum(wy)
        cum_w = np.cumsum(wall)
        for i in range(len(xs) - 1):
            if xs[i] == xs[i + 1]:
                continue
            wl1, wl = cum_w1[i], cum_w[i]
            wr1, wr = w1_total - wl1, w_total - wl
            decrease = parent - (wl / w_total) * _gini(wl1, wl - wl1) - (wr / w_total) * _gini(wr1, wr - wr1)
            if best is None or decrease > best[2] + 1e-15:
                best = (f, (xs[i] + xs[i + 1]) / 2.0, decrease)
    if best is None or best[2] <= 1e-12:
        return None
    return best


def _grow_cart(x, y, weights, max_depth, mtry, rng, importance, total_weight):
    tree = _Tree([], [], [], [], [])

    def add_node(idx: np.ndarray, depth: int) -> int:
        node = len(tree.feature)
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(-1)
        tree.right.append(-1)
        w = weights[idx]
        w1 = float(np.sum(w * y[idx]))
        wsum = float(np.sum(w))
        tree.value.append(w1 / wsum if wsum > 0 else 0.5)

        if depth >= max_depth or idx.size < 2 or len(np.unique(y[idx])) < 2:
            return node
        if mtry is None or mtry >= x.shape[1]:
            feature_ids = np.arange(x.shape[1])
        else:
            feature_ids = np.sort(rng.choice(x.shape[1], size=mtry, replace=False))
        split = _best_gini_split(x[idx], y[idx], w, feature_ids)
        if split is None:
            return node
        f, thr, decrease = split
        importance[f] += (wsum / total_weight) * decrease
        tree.feature[node] = f
        tree.threshold[node] = thr
        go_left = x[idx, f] <= thr
        tree.left[node] = add_node(idx[go_left], depth + 1)
        tree.right[node] = add_node(idx[~go_left], depth + 1)
        return node

    add_node(np.arange(x.shape[0]), 0)
    return tree


CLASS_WEIGHTINGS = ("none", "balanced", "subsample_balanced")


@dataclass
class ForestModel:
    trees: list[_Tree]
    feature_importances: np.ndarray
    n_features: int
    class_weighting: str
    max_depth: int
    seed: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise LearnerError(
                f"schema mismatch: model expects {self.n_features} features, got {x.shape[1]}"
            )
        acc = np.zeros(x.shape[0])
        for tree in self.trees:
            acc += tree.predict(x)
        return acc / len(self.trees)


def fit_forest(
    x: np.ndarray,
    y: np.ndarray,
    n_trees: int = 100,
    max_depth: int = 8,
    class_weighting: str = "none",
    seed: int = 0,
) -> ForestModel:
    """Bagged CART trees: bootstrap samples, Gini impurity with class
    weights, sqrt(p) features per split.  ``subsample_balanced`` stratifies
    each bootstrap to equal class counts instead of weighting.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise LearnerError("both classes must be present")
    if class_weighting not in CLASS_WEIGHTINGS:
        raise LearnerError(f"unknown class weighting: {class_weighting}")
    n, p = x.shape
    mtry = max(1, int(round(math.sqrt(p))))
    rng = np.random.default_rng(seed)

    weights = np.ones(n)
    if class_weighting == "balanced":
        for cls in (0.0, 1.0):
            weights[y == cls] = n / (2.0 * np.sum(y == cls))

    idx0 = np.flatnonzero(y == 0)
    idx1 = np.flatnonzero(y == 1)
    importance = np.zeros(p)
    trees = []
    for _ in range(n_trees):
        if class_weighting == "subsample_balanced":
            m = max(1, n // 2)
            boot = np.concatenate([rng.choice(idx0, m, replace=True), rng.choice(idx1, m, replace=True)])
        else:
            boot = rng.integers(0, n, n)
        xb, yb, wb = x[boot], y[boot], weights[boot]
        trees.append(_grow_cart(xb, yb, wb, max_depth, mtry, rng, importance, float(np.sum(wb)) * n_trees))

    total = importance.sum()
    if total > 0:
        importance = importance / total
    return ForestModel(
        trees=trees,
        feature_importances=importance,
        n_features=p,
        class_weighting=class_weighting,
        max_depth=max_depth,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# gradient-boosted trees on the logit scale

@dataclass
class BoostedModel:
    trees: list[_Tree]
    base_score: float
    learning_rate: float
    l2_lambda: float
    depth: int
    n_features: int
    preserve_input_order: bool
    feature_gains: np.ndarray = field(default_factory=lambda: np.zeros(0))
    train_losses: list[float] = field(default_factory=list)

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise LearnerError(
                f"schema mismatch: model expects {self.n_features} features, got {x.shape[1]}"
            )
        raw = np.full(x.shape[0], self.base_score)
        for tree in self.trees:
            raw += self.learning_rate * tree.predict(x)
        return raw

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision_function(x))


def _grow_gradient_tree(x, g, h, depth, l2_lambda, gains):
    tree = _Tree([], [], [], [], [])

    def leaf_value(idx):
        return float(np.sum(g[idx]) / (np.sum(h[idx]) + l2_lambda)) if idx.size else 0.0

    def score(gs, hs):
        return gs * gs / (hs + l2_lambda) if (hs + l2_lambda) > 0 else 0.0

    def add_node(idx: np.ndarray, d: int) -> int:
        node = len(tree.feature)
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.value.append(leaf_value(idx))
        if d >= depth or idx.size < 2:
            return node
        g_tot, h_tot = float(np.sum(g[idx])), float(np.sum(h[idx]))
        parent = score(g_tot, h_tot)
        best = None
        for f in range(x.shape[1]):
            order = np.argsort(x[idx, f], kind="stable")
            xs = x[idx[order], f]
            cg = np.cumsum(g[idx[order]])
            ch = np.cumsum(h[idx[order]])
            for i in range(len(xs) - 1):
                if xs[i] == xs[i + 1]:
                    continue
                gain = score(cg[i], ch[i]) + score(g_tot - cg[i], h_tot - ch[i]) - parent
                if best is None or gain > best[2] + 1e-15:
                    best = (f, (xs[i] + xs[i + 1]) / 2.0, gain)
        if best is None or best[2] <= 1e-12:
            return node
        f, thr, gain = best
        gains[f] += gain
        tree.feature[node] = f
        tree.threshold[node] = thr
        go_left = x[idx, f] <= thr
        tree.left[node] = add_node(idx[go_left], d + 1)
        tree.right[node] = add_node(idx[~go_left], d + 1)
        return node

    add_node(np.arange(x.shape[0]), 0)
    return tree


def fit_boosted(
    x: np.ndarray,
    y: np.ndarray,
    n_trees: int = 100,
    depth: int = 3,
    learning_rate: float = 0.1,
    l2_lambda: float = 1.0,
    class_weights: Optional[dict] = None,
    subsample: float = 1.0,
    preserve_input_order: bool = False,
    seed: int = 0,
) -> BoostedModel:
    """Gradient boosting on logistic loss; leaf value = sum(g)/(sum(h) + L2).

    ``preserve_input_order`` switches row subsampling from random draws to a
    deterministic chronological stride, keeping the temporal order of the
    training rows intact.
    """
    if learning_rate <= 0:
        raise LearnerError("learning_rate must be positive")
    if not 0.0 < subsample <= 1.0:
        raise LearnerError("subsample must be in (0, 1]")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise LearnerError("both classes must be present")
    n, p = x.shape
    sample_w = np.ones(n)
    if class_weights == "balanced":
        for cls in (0.0, 1.0):
            sample_w[y == cls] = n / (2.0 * np.sum(y == cls))
    elif isinstance(class_weights, dict):
        for cls, w in class_weights.items():
            sample_w[y == float(cls)] = w

    mean_y = float(np.sum(sample_w * y) / np.sum(sample_w))
    mean_y = min(max(mean_y, 1e-12), 1.0 - 1e-12)
    base = math.log(mean_y / (1.0 - mean_y))
    raw = np.full(n, base)
    rng = np.random.default_rng(seed)
    gains = np.zeros(p)
    trees: list[_Tree] = []
    losses: list[float] = []
    m_rows = max(2, int(round(subsample * n)))
    for round_i in range(n_trees):
        probs = _sigmoid(raw)
        losses.append(-_bernoulli_ll(y, probs))
        g = sample_w * (y - probs)
        h = np.clip(sample_w * probs * (1.0 - probs), 1e-12, None)
        if subsample >= 1.0:
            rows = np.arange(n)
        elif preserve_input_order:
            start = (round_i * m_rows) % n
            rows = np.sort(np.arange(start, start + m_rows) % n)
        else:
            rows = np.sort(rng.choice(n, size=m_rows, replace=False))
        tree = _grow_gradient_tree(x[rows], g[rows], h[rows], depth, l2_lambda, gains)
        trees.append(tree)
        raw += learning_rate * tree.predict(x)
    losses.append(-_bernoulli_ll(y, _sigmoid(raw)))

    return BoostedModel(
        trees=trees,
        base_score=base,
        learning_rate=learning_rate,
        l2_lambda=l2_lambda,
        depth=depth,
        n_features=p,
        preserve_input_order=preserve_input_order,
        feature_gains=gains,
        train_losses=losses,
    )


# ---------------------------------------------------------------------------
# JSON serialization

MODEL_SCHEMA_VERSION = 1


def _tree_to_dict(tree: _Tree) -> dict:
    return {
        "feature": [int(f) for f in tree.feature],
        "threshold": [float(t) for t in tree.threshold],
        "left": [int(i) for i in tree.left],
        "right": [int(i) for i in tree.right],
        "value": [float(v) for v in tree.value],
    }


def _tree_from_dict(obj: dict) -> _Tree:
    return _Tree(
        feature=list(obj["feature"]),
        threshold=list(obj["threshold"]),
        left=list(obj["left"]),
        right=list(obj["right"]),
        value=list(obj["value"]),
    )


def serialize_model(model) -> dict:
    """JSON-safe payload (coefficients or tree arrays) with a schema
    version field."""
    if isinstance(model, LogisticModel):
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "family": "logistic",
            "coef": model.coef.tolist(),
            "std_errors": model.std_errors.tolist(),
            "log_likelihood": model.log_likelihood,
            "n_obs": model.n_obs,
            "df_model": model.df_model,
            "n_iter": model.n_iter,
        }
    if isinstance(model, ForestModel):
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "family": "forest",
            "trees": [_tree_to_dict(t) for t in model.trees],
            "feature_importances": model.feature_importances.tolist(),
            "n_features": model.n_features,
            "class_weighting": model.class_weighting,
            "max_depth": model.max_depth,
            "seed": model.seed,
        }
    if isinstance(model, BoostedModel):
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "family": "gbdt",
            "trees": [_tree_to_dict(t) for t in model.trees],
            "base_score": model.base_score,
            "learning_rate": model.learning_rate,
            "l2_lambda": model.l2_lambda,
            "depth": model.depth,
            "n_features": model.n_features,
            "preserve_input_order": model.preserve_input_order,
            "feature_gains": model.feature_gains.tolist(),
        }
    raise LearnerError(f"cannot serialize {type(model).__name__}")


def deserialize_model(payload: dict):
    if payload.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise LearnerError(f"unsupported model schema version: {payload.get('schema_version')}")
    family = payload.get("family")
    if family == "logistic":
        return LogisticModel(
            coef=np.asarray(payload["coef"], dtype=float),
            std_errors=np.asarray(payload["std_errors"], dtype=float),
            log_likelihood=payload["log_likelihood"],
            n_obs=payload["n_obs"],
            df_model=payload["df_model"],
            n_iter=payload["n_iter"],
        )
    if family == "forest":
        return ForestModel(
            trees=[_tree_from_dict(t) for t in payload["trees"]],
            feature_importances=np.asarray(payload["feature_importances"], dtype=float),
            n_features=payload["n_features"],
            class_weighting=payload["class_weighting"],
            max_depth=payload["max_depth"],
            seed=payload["seed"],
        )
    if family == "gbdt":
        return BoostedModel(
            trees=[_tree_from_dict(t) for t in payload["trees"]],
            base_score=payload["base_score"],
            learning_rate=payload["learning_rate"],
            l2_lambda=payload["l2_lambda"],
            depth=payload["depth"],
            n_features=payload["n_features"],
            preserve_input_order=payload["preserve_input_order"],
            feature_gains=np.asarray(payload["feature_gains"], dtype=float),
        )
    raise LearnerError(f"unknown model family: {family}")


# ---------------------------------------------------------------------------
# shared surface

def predict_proba(model, x: np.ndarray) -> np.ndarray:
    """Event probability per row for any of the three families."""
    return model.predict_proba(np.asarray(x, dtype=float))


def rank_features(model) -> list[int]:
    """Column indices ordered least-important first (ties by index)."""
    if isinstance(model, LogisticModel):
        strength = np.abs(model.coef[1:])
    elif isinstance(model, ForestModel):
        strength = model.feature_importances
    elif isinstance(model, BoostedModel):
        strength = model.feature_gains
    else:
        raise LearnerError(f"cannot rank features of {type(model).__name__}")
    order = np.lexsort((np.arange(strength.shape[0]), strength))
    return [int(i) for i in order]


def permutation_importance(
    model,
    x: np.ndarray,
    y: np.ndarray,
    metric: Callable,
    n_repeats: int = 20,
    seed: int = 0,
    shuffler: Optional[Callable[[int, np.random.Generator], np.ndarray]] = None,
) -> np.ndarray:
    """Mean metric drop when each column is independently shuffled.

    ``shuffler(n, rng)`` overrides the permutation draw; the default is a
    uniform random permutation per repeat.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    baseline = metric(y, predict_proba(model, x))
    drops = np.zeros(x.shape[1])
    for j in range(x.shape[1]):
        acc = 0.0
        for _ in range(n_repeats):
            perm = shuffler(x.shape[0], rng) if shuffler else rng.permutation(x.shape[0])
            xp = x.copy()
            xp[:, j] = x[perm, j]
            acc += metric(y, predict_proba(model, xp))
        drops[j] = baseline - acc / n_repeats
    return drops

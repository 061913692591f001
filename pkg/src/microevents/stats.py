"""Evaluation metrics, permutation significance tests, effect sizes,
multiple-comparison corrections and logistic-regression diagnostics.

The headline metric is the mean PR-AUC over both class polarities: the event
class is scored once as the positive class and once as the negative class
(labels flipped, scores negated), and the two average precisions are
averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as sps

from . import learners


class StatsError(ValueError):
    pass


def _check_binary(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    if len(np.unique(y)) < 2:
        raise StatsError("both classes must be present")
    return y


# ---------------------------------------------------------------------------
# ranking metrics

def pr_auc(y, scores, positive_label: int = 1) -> float:
    """Average precision: sum of precision x recall increments over the
    descending unique score thresholds."""
    y = _check_binary(y)
    scores = np.asarray(scores, dtype=float)
    pos = (y == positive_label).astype(float)
    n_pos = pos.sum()

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = pos[order]
    tp = np.cumsum(sorted_pos)
    fp = np.cumsum(1.0 - sorted_pos)

    # one threshold per distinct score value: take the last index of each run
    boundaries = np.flatnonzero(np.diff(sorted_scores) != 0.0)
    idx = np.concatenate([boundaries, [len(sorted_scores) - 1]])

    precision = tp[idx] / (tp[idx] + fp[idx])
    recall = tp[idx] / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def pr_auc_mean(y, scores) -> float:
    """Mean of PR-AUC with events as the positive and as the negative class."""
    scores = np.asarray(scores, dtype=float)
    return 0.5 * (pr_auc(y, scores, positive_label=1) + pr_auc(y, -scores, positive_label=0))


def roc_auc(y, scores) -> float:
    """Rank-statistic ROC-AUC with half credit for ties (events positive)."""
    y = _check_binary(y)
    scores = np.asarray(scores, dtype=float)
    ranks = sps.rankdata(scores)
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _f1(y, pred, positive_label) -> float:
    tp = np.sum((pred == positive_label) & (y == positive_label))
    fp = np.sum((pred == positive_label) & (y != positive_label))
    fn = np.sum((pred != positive_label) & (y == positive_label))
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom > 0 else 0.0


def f1_mean(y, scores, threshold: float = 0.5) -> float:
    """F1 at the fixed threshold, averaged over both class polarities."""
    y = _check_binary(y)
    pred = (np.asarray(scores, dtype=float) >= threshold).astype(int)
    return 0.5 * (_f1(y, pred, 1) + _f1(y, pred, 0))


def confusion(y, predictions) -> np.ndarray:
    """2x2 matrix [[tn, fp], [fn, tp]]."""
    y = np.asarray(y)
    pred = np.asarray(predictions)
    out = np.zeros((2, 2), dtype=int)
    for truth in (0, 1):
        for guess in (0, 1):
            out[truth, guess] = int(np.sum((y == truth) & (pred == guess)))
    return out


def no_information_rate(y) -> float:
    y = np.asarray(y)
    return float(max(np.mean(y == 1), np.mean(y == 0)))


@dataclass
class MetricReport:
    pr_auc_mean: float
    roc_auc: float
    f1_mean: float
    confusion: np.ndarray
    no_information_rate: float

    def as_dict(self) -> dict:
        return {
            "pr_auc_mean": self.pr_auc_mean,
            "roc_auc": self.roc_auc,
            "f1_mean": self.f1_mean,
            "confusion": self.confusion.tolist(),
            "no_information_rate": self.no_information_rate,
        }


def metric_report(y, scores, threshold: float = 0.5) -> MetricReport:
    pred = (np.asarray(scores, dtype=float) >= threshold).astype(int)
    return MetricReport(
        pr_auc_mean=pr_auc_mean(y, scores),
        roc_auc=roc_auc(y, scores),
        f1_mean=f1_mean(y, scores, threshold),
        confusion=confusion(y, pred),
        no_information_rate=no_information_rate(y),
    )


# ---------------------------------------------------------------------------
# permutation test

@dataclass
class PermutationResult:
    p_value: float
    observed: float
    null_values: np.ndarray
    n_permutations: int


def permutation_test(
    y_test,
    scores,
    metric: Callable = pr_auc_mean,
    n_perm: int = 1000,
    seed: int = 0,
) -> PermutationResult:
    """Permute test labels against frozen scores; p = (1 + #{null >= obs}) /
    (n_perm + 1)."""
    y = _check_binary(np.asarray(y_test))
    scores = np.asarray(scores, dtype=float)
    observed = metric(y, scores)
    rng = np.random.default_rng(seed)
    null_values = np.empty(n_perm)
    for i in range(n_perm):
        null_values[i] = metric(rng.permutation(y), scores)
    p = (1.0 + float(np.sum(null_values >= observed))) / (n_perm + 1.0)
    return PermutationResult(p_value=p, observed=observed, null_values=null_values, n_permutations=n_perm)


# ---------------------------------------------------------------------------
# effect sizes

@dataclass
class EffectSize:
    feature: str
    delta: float
    ci_low: float
    ci_high: float


def cliffs_delta(a, b, alpha: float = 0.05, m_comparisons: int = 1, feature: str = "") -> EffectSize:
    """Cliff's delta over all cross-sample pairs with a Bonferroni-widened
    normal-approximation CI (consistent variance estimate)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise StatsError("both samples must be nonempty")
    n, m = a.size, b.size
    signs = np.sign(a[:, None] - b[None, :])
    delta = float(signs.mean())

    if n > 1 and m > 1:
        row_means = signs.mean(axis=1)
        col_means = signs.mean(axis=0)
        s_rows = np.sum((row_means - delta) ** 2)
        s_cols = np.sum((col_means - delta) ** 2)
        s_all = np.sum((signs - delta) ** 2)
        var = (m * m * s_rows + n * n * s_cols - s_all) / (n * m * (n - 1) * (m - 1))
        var = max(var, 0.0)
    else:
        var = (1.0 - delta * delta) / (n * m)

    z = sps.norm.ppf(1.0 - alpha / (2.0 * max(m_comparisons, 1)))
    half = z * math.sqrt(var)
    return EffectSize(
        feature=feature,
        delta=delta,
        ci_low=max(-1.0, delta - half),
        ci_high=min(1.0, delta + half),
    )


# ---------------------------------------------------------------------------
# multiple comparisons

@dataclass
class HolmResult:
    significant: list[bool]  # aligned with the input order
    thresholds: list[float]  # step-down thresholds, input order
    alpha: float


def holm_bonferroni(p_values: Sequence[float], alpha: float = 0.05) -> HolmResult:
    """Step-down Holm correction: reject p_(i) while p_(i) <= alpha/(m-i+1),
    stopping at the first failure."""
    p = list(p_values)
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    significant = [False] * m
    thresholds = [0.0] * m
    failed = False
    for rank, i in enumerate(order, start=1):
        thresholds[i] = alpha / (m - rank + 1)
        if not failed and p[i] <= thresholds[i]:
            significant[i] = True
        else:
            failed = True
    return HolmResult(significant=significant, thresholds=thresholds, alpha=alpha)


# ---------------------------------------------------------------------------
# logistic-regression diagnostics

@dataclass
class CoefficientRow:
    predictor: str
    estimate: float
    std_error: float
    z_value: float
    p_value: float
    vif: Optional[float]
    odds_ratio: float
    or_ci_low: float
    or_ci_high: float


@dataclass
class LrDiagnostics:
    llr_chi2: float
    llr_p: float
    df: int
    log_likelihood: float
    null_log_likelihood: float
    aic: float
    n_observations: int
    base_probability: float
    tjur: float
    cox_snell: float
    nagelkerke: float
    adj_mcfadden: float
    coefficients: list[CoefficientRow]
    linearity_p_values: dict[str, float]
    outlier_max_abs_residual: float
    outlier_bonferroni_p: float
    vif_flagged: list[str] = field(default_factory=list)


def variance_inflation_factors(x: np.ndarray) -> list[Optional[float]]:
    """VIF_j = 1 / (1 - R^2_j) from regressing column j on the others."""
    n, p = x.shape
    if p < 2:
        return [None] * p
    out: list[Optional[float]] = []
    for j in range(p):
        others = np.delete(x, j, axis=1)
        design = np.column_stack([np.ones(n), others])
        target = x[:, j]
        coef, *_ = np.linalg.lstsq(design, target, rcond=None)
        residual = target - design @ coef
        sst = np.sum((target - target.mean()) ** 2)
        if sst <= 0:
            out.append(None)
            continue
        r2 = 1.0 - np.sum(residual**2) / sst
        out.append(float(1.0 / (1.0 - r2)) if r2 < 1.0 else math.inf)
    return out


def tjur_r2(y, probs) -> float:
    y = np.asarray(y)
    probs = np.asarray(probs, dtype=float)
    return float(probs[y == 1].mean() - probs[y == 0].mean())


def lr_diagnostics(
    model: "learners.LogisticModel",
    null_model: "learners.LogisticModel",
    x_train: np.ndarray,
    y_train: np.ndarray,
    m_corrections: int = 1,
    alpha: float = 0.05,
    feature_names: Optional[Sequence[str]] = None,
) -> LrDiagnostics:
    """The model-quality battery: LLR test, pseudo-R2 family, VIFs, odds
    ratios with corrected CIs, the f*log(f) linearity check and the
    Bonferroni outlier test on studentized deviance residuals.
    """
    x_train = np.asarray(x_train, dtype=float)
    y = np.asarray(y_train)
    n, k = x_train.shape
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(k)]

    ll = model.log_likelihood
    ll0 = null_model.log_likelihood
    chi2 = 2.0 * (ll - ll0)
    llr_p = float(sps.chi2.sf(chi2, k)) if k > 0 else 1.0

    probs = learners.predict_proba(model, x_train)
    cox_snell = 1.0 - math.exp(2.0 * (ll0 - ll) / n)
    nagelkerke = cox_snell / (1.0 - math.exp(2.0 * ll0 / n))
    adj_mcfadden = 1.0 - (ll - k) / ll0

    vifs = variance_inflation_factors(x_train)
    z_corr = sps.norm.ppf(1.0 - alpha / (2.0 * max(m_corrections, 1)))
    rows: list[CoefficientRow] = []
    for j, name in enumerate(["(Intercept)"] + names):
        beta = model.coef[j]
        se = model.std_errors[j]
        z_val = beta / se if se > 0 else math.inf * np.sign(beta)
        p_val = float(2.0 * sps.norm.sf(abs(z_val)))
        rows.append(
            CoefficientRow(
                predictor=name,
                estimate=float(beta),
                std_error=float(se),
                z_value=float(z_val),
                p_value=p_val,
                vif=None if j == 0 else vifs[j - 1],
                odds_ratio=math.exp(beta),
                or_ci_low=math.exp(beta - z_corr * se),
                or_ci_high=math.exp(beta + z_corr * se),
            )
        )

    linearity = _box_tidwell(x_train, y, names)
    max_resid, bonf_p = _bonferroni_outlier(model, x_train, y)

    return LrDiagnostics(
        llr_chi2=float(chi2),
        llr_p=llr_p,
        df=k,
        log_likelihood=float(ll),
        null_log_likelihood=float(ll0),
        aic=float(2.0 * (k + 1) - 2.0 * ll),
        n_observations=n,
        base_probability=float(np.mean(y == 1)),
        tjur=tjur_r2(y, probs),
        cox_snell=float(cox_snell),
        nagelkerke=float(nagelkerke),
        adj_mcfadden=float(adj_mcfadden),
        coefficients=rows,
        linearity_p_values=linearity,
        outlier_max_abs_residual=max_resid,
        outlier_bonferroni_p=bonf_p,
        vif_flagged=[names[j] for j, v in enumerate(vifs) if v is not None and v > 10.0],
    )


def _box_tidwell(x: np.ndarray, y: np.ndarray, names: Sequence[str]) -> dict[str, float]:
    """Linearity check: for each feature, refit with its f*log(f) term (on a
    min-shifted positive copy) added and report that term's Wald p-value.

    One augmented refit per feature keeps the design small; separation or
    singularity in a refit propagates.
    """
    n, k = x.shape
    if k == 0:
        return {}
    shifted = x + (1e-6 - x.min(axis=0))
    terms = shifted * np.log(shifted)
    out: dict[str, float] = {}
    for j, name in enumerate(names):
        augmented = np.column_stack([x, terms[:, j]])
        refit = learners.fit_logistic(augmented, y)
        beta = refit.coef[1 + k]
        se = refit.std_errors[1 + k]
        z_val = beta / se if se > 0 else math.inf
        out[name] = float(2.0 * sps.norm.sf(abs(z_val)))
    return out


def _bonferroni_outlier(model, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Max |studentized deviance residual| with a Bonferroni-adjusted
    two-sided normal p-value over the n cases."""
    n = x.shape[0]
    probs = np.clip(learners.predict_proba(model, x), 1e-12, 1.0 - 1e-12)
    design = np.column_stack([np.ones(n), x])
    w = probs * (1.0 - probs)
    wx = design * w[:, None]
    info = design.T @ wx
    try:
        info_inv = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise learners.LearnerError(f"singular information matrix in outlier test: {exc}") from exc
    hat = np.einsum("ij,jk,ik->i", design, info_inv, design) * w
    hat = np.clip(hat, 0.0, 1.0 - 1e-9)
    dev = np.sqrt(-2.0 * (y * np.log(probs) + (1 - y) * np.log(1.0 - probs)))
    resid = np.sign(y - probs) * dev / np.sqrt(1.0 - hat)
    max_abs = float(np.max(np.abs(resid)))
    p = min(1.0, n * 2.0 * float(sps.norm.sf(max_abs)))
    return max_abs, p

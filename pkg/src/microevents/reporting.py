"""Report assembly: JSON payloads and Markdown tables for model performance
and the logistic-regression diagnostic battery, plus optional SVG plots."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .stats import EffectSize, HolmResult, LrDiagnostics, MetricReport, holm_bonferroni


@dataclass
class EstimatorResult:
    estimator: str
    metrics: MetricReport
    permutation_p: float
    selected_features: list[str]
    tuned_params: dict = field(default_factory=dict)
    selection_curve: list[tuple[int, float]] = field(default_factory=list)
    permutation_importance: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "metrics": self.metrics.as_dict(),
            "permutation_p": self.permutation_p,
            "selected_features": self.selected_features,
            "tuned_params": self.tuned_params,
            "selection_curve": [[int(n), float(s)] for n, s in self.selection_curve],
            "permutation_importance": self.permutation_importance,
        }


@dataclass
class ExperimentReport:
    dataset_name: str
    family: str
    alpha: float
    estimator_results: list[EstimatorResult]
    holm: HolmResult
    lr_diagnostics: Optional[LrDiagnostics] = None
    effect_sizes: list[EffectSize] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        payload = {
            "dataset_name": self.dataset_name,
            "family": self.family,
            "alpha": self.alpha,
            "estimators": [r.as_dict() for r in self.estimator_results],
            "holm": {
                "significant": self.holm.significant,
                "thresholds": self.holm.thresholds,
                "alpha": self.holm.alpha,
            },
            "effect_sizes": [asdict(e) for e in self.effect_sizes],
            "provenance": self.provenance,
        }
        if self.lr_diagnostics is not None:
            diag = asdict(self.lr_diagnostics)
            payload["lr_diagnostics"] = diag
        return payload

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1, sort_keys=True) + "\n"


def build_report(
    dataset_name: str,
    family: str,
    alpha: float,
    estimator_results: Sequence[EstimatorResult],
    lr_diagnostics: Optional[LrDiagnostics] = None,
    effect_sizes: Sequence[EffectSize] = (),
    provenance: Optional[dict] = None,
) -> ExperimentReport:
    """Holm-correct the permutation p-values across the run's estimators
    (the declared experiment family) and assemble the report object."""
    holm = holm_bonferroni([r.permutation_p for r in estimator_results], alpha)
    return ExperimentReport(
        dataset_name=dataset_name,
        family=family,
        alpha=alpha,
        estimator_results=list(estimator_results),
        holm=holm,
        lr_diagnostics=lr_diagnostics,
        effect_sizes=list(effect_sizes),
        provenance=provenance or {},
    )


# ---------------------------------------------------------------------------
# markdown rendering

def _p_fmt(p: float) -> str:
    return "<0.001" if p < 0.001 else f"{p:.3f}"


def performance_table_md(report: ExperimentReport) -> str:
    """Per-estimator performance block: PRAUC, P.test, F1-score, with a star
    on Holm-significant permutation tests."""
    lines = [
        f"### Model performance: {report.dataset_name}",
        "",
        "| Estimator | PRAUC | P.test | F1-score | ROC-AUC | NIR |",
        "|---|---|---|---|---|---|",
    ]
    for result, significant in zip(report.estimator_results, report.holm.significant):
        star = "*" if significant else ""
        m = result.metrics
        lines.append(
            f"| {result.estimator} | {m.pr_auc_mean:.2f} | {_p_fmt(result.permutation_p)}{star} "
            f"| {m.f1_mean:.2f} | {m.roc_auc:.2f} | {m.no_information_rate:.2f} |"
        )
    lines += [
        "",
        f"Permutation tests over {report.provenance.get('n_permutations', 1000)} permutations; "
        f"significance after Holm-Bonferroni within the '{report.family}' family is marked with a star (*).",
        "",
    ]
    return "\n".join(lines)


def lr_table_md(diag: LrDiagnostics, alpha: float = 0.05) -> str:
    """Logistic model table: coefficient block (Estimate, Std. Error,
    Z-value, Pr(>|z|), VIF) plus the fit-measurement block with the LLR test
    and the four pseudo-R2 values."""
    coef_p = [row.p_value for row in diag.coefficients]
    holm = holm_bonferroni(coef_p, alpha)
    lines = [
        "### Logistic regression model",
        "",
        "| Predictor | Estimate | Std. Error | Z-value | Pr(>\\|z\\|) | VIF |",
        "|---|---|---|---|---|---|",
    ]
    for row, significant in zip(diag.coefficients, holm.significant):
        star = "*" if significant else ""
        vif = "-" if row.vif is None else f"{row.vif:.2f}"
        lines.append(
            f"| {row.predictor} | {row.estimate:.2f} | {row.std_error:.2f} "
            f"| {row.z_value:.2f} | {_p_fmt(row.p_value)}{star} | {vif} |"
        )
    lines += [
        "",
        "#### Fit measurements",
        "",
        "| Measure | Value | Measure | Value |",
        "|---|---|---|---|",
        f"| LLR Test Chi2 | {diag.llr_chi2:.2f} | Observations | {diag.n_observations} |",
        f"| Log Likelihood | {diag.log_likelihood:.2f} | Null model Log Likelihood | {diag.null_log_likelihood:.2f} |",
        f"| LLR Test p-value | {_p_fmt(diag.llr_p)} | Degrees of freedom | {diag.df} |",
        f"| AIC | {diag.aic:.2f} | Adj. McFadden R2 | {diag.adj_mcfadden:.2f} |",
        f"| Null model base probability | {diag.base_probability:.2f} | Cox-Snell R2 | {diag.cox_snell:.2f} |",
        f"| | | Nagelkerke R2 | {diag.nagelkerke:.2f} |",
        f"| | | Tjur R2 | {diag.tjur:.2f} |",
        "",
    ]
    if diag.linearity_p_values:
        lines += [
            "#### Linearity check (f x log f augmentation)",
            "",
            "| Feature | augmented-term p |",
            "|---|---|",
        ]
        for name, p in diag.linearity_p_values.items():
            lines.append(f"| {name} | {_p_fmt(p)} |")
        lines.append("")
    lines += [
        "#### Influence",
        "",
        f"Max \\|studentized deviance residual\\| = {diag.outlier_max_abs_residual:.2f}, "
        f"Bonferroni outlier p = {_p_fmt(diag.outlier_bonferroni_p)}.",
    ]
    if diag.vif_flagged:
        lines.append("")
        lines.append("VIF > 10 flagged: " + ", ".join(diag.vif_flagged) + ".")
    lines.append("")
    return "\n".join(lines)


def effect_size_table_md(effect_sizes: Sequence[EffectSize]) -> str:
    lines = [
        "### Effect sizes (Cliff's delta, corrected CIs)",
        "",
        "| Feature | delta | CI low | CI high | |",
        "|---|---|---|---|---|",
    ]
    for e in effect_sizes:
        significant = "*" if (e.ci_low > 0 or e.ci_high < 0) else ""
        lines.append(f"| {e.feature} | {e.delta:.3f} | {e.ci_low:.3f} | {e.ci_high:.3f} | {significant} |")
    lines += ["", "Rows whose CI excludes 0 are marked with a star (*).", ""]
    return "\n".join(lines)


def report_markdown(report: ExperimentReport) -> str:
    parts = [
        f"# Experiment report: {report.dataset_name}",
        "",
        f"Family: {report.family}; alpha = {report.alpha}.",
        "",
        performance_table_md(report),
    ]
    if report.effect_sizes:
        parts.append(effect_size_table_md(report.effect_sizes))
    if report.lr_diagnostics is not None:
        parts.append(lr_table_md(report.lr_diagnostics, report.alpha))
    return "\n".join(parts)

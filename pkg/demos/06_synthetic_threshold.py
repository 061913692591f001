"""The detectability-threshold experiment at demo scale.

Generates synthetic corpora with a controlled fraction of event-related
messages per positive time step, runs the standard analysis pipeline on
each instance, and reports the worst-case permutation p per fraction.
The full-scale experiment lives in the acceptance suite
(tests/test_acceptance.py, criterion 7) and in the `sweep` CLI subcommand.
"""

from microevents.synthlab import (
    SyntheticConfig,
    SweepPipelineParams,
    detectability_sweep,
    spearman_rho,
)

# demo scale: fewer steps/instances than the acceptance configuration
base = SyntheticConfig(n_steps=120, messages_per_step=40)
params = SweepPipelineParams(lda_iterations=100, lda_burn_in=30, n_permutations=499)
fractions = [0.0, 0.2, 0.5]

print("running the sweep (3 fractions x 2 instances x 2 estimators)...")
sweep = detectability_sweep(
    base,
    fractions=fractions,
    n_instances=2,
    estimators=["logistic", "gbdt"],
    params=params,
    alpha=0.05,
    master_seed=1,
)

print("\nfraction  estimator  mean PR-AUC   worst-case p")
for row in sweep.summary:
    mean = "  n/a" if row.metric_mean is None else f"{row.metric_mean:.3f}"
    worst = "  n/a" if row.worst_p is None else f"{row.worst_p:.4f}"
    print(f"  {row.fraction:4}    {row.estimator:9}   {mean}        {worst}")

for name, threshold in sweep.thresholds.items():
    print(f"\n{name}: minimal significant fraction = {threshold}")
    means = [r.metric_mean for r in sweep.summary if r.estimator == name]
    print(f"  spearman(fraction, mean PR-AUC) = {spearman_rho(fractions, means):.2f}")

print(
    "\nNote: the reported real-data threshold was 0.25 on the original "
    "generator; the bundled parametric generator is a stand-in, so "
    "thresholds are compared, not matched."
)

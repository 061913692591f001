"""The whole pipeline end to end on the bundled fixture corpus: ingest ->
time steps -> topics + sentiment -> pooled features -> estimators ->
permutation tests -> diagnostics -> report files.

Equivalent CLI:
    microevents run --config <config.json> --out <dir>
"""

import json
import os
import tempfile

from microevents.fixtures import fixture_config, write_fixture_corpus
from microevents.runner import load_config, run_pipeline

workdir = tempfile.mkdtemp(prefix="microevents-demo-")
messages_path, events_path = write_fixture_corpus(os.path.join(workdir, "fixture"))
config = load_config(overrides=fixture_config(messages_path, events_path))

config_path = os.path.join(workdir, "config.json")
with open(config_path, "w", encoding="utf-8") as fh:
    json.dump(config, fh, indent=1)
print(f"resolved config written to {config_path}")

out_dir = os.path.join(workdir, "run")
report = run_pipeline(config, out_dir)

print(f"\ndataset: {report.dataset_name} (family {report.family})")
for result, significant in zip(report.estimator_results, report.holm.significant):
    star = " *" if significant else ""
    print(f"  {result.estimator:8} mean PR-AUC={result.metrics.pr_auc_mean:.3f} "
          f"perm p={result.permutation_p:.4f}{star} "
          f"({len(result.selected_features)} features)")

diag = report.lr_diagnostics
print(f"\nLR diagnostics: Tjur R2={diag.tjur:.3f}, Nagelkerke R2={diag.nagelkerke:.3f}, "
      f"LLR p={diag.llr_p:.3f}, outlier p={diag.outlier_bonferroni_p:.3f}")

print(f"\nartifacts under {out_dir}:")
for root, _dirs, files in sorted(os.walk(out_dir)):
    for name in sorted(files):
        rel = os.path.relpath(os.path.join(root, name), out_dir)
        print(f"  {rel}")
print("\nreport excerpt (report/report.md):")
with open(os.path.join(out_dir, "report", "report.md"), encoding="utf-8") as fh:
    print("\n".join(fh.read().splitlines()[:16]))

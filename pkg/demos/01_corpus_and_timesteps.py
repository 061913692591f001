"""From raw dumps to labeled 7-day time steps.

Builds the bundled two-package fixture corpus, filters messages by package,
splits chronologically, and constructs both time-step designs.
"""

import tempfile

from microevents.corpus import (
    chronological_split,
    filter_by_packages,
    import_messages,
    load_events_csv,
    union_corpus,
)
from microevents.fixtures import FIXTURE_PACKAGES, write_fixture_corpus
from microevents.timegrid import assemble_dataset, build_calendar_week_steps, build_event_based_steps

workdir = tempfile.mkdtemp(prefix="microevents-demo-")
messages_path, events_path = write_fixture_corpus(workdir)
print(f"fixture corpus written to {workdir}")

result = import_messages(messages_path, "canonical-jsonl")
events = load_events_csv(events_path)
print(f"imported {len(result.messages)} messages ({result.n_skipped} skipped), {len(events)} events")

per_package = filter_by_packages(result.messages, list(FIXTURE_PACKAGES))
for package, msgs in per_package.items():
    print(f"  {package}: {len(msgs)} messages")
corpus = union_corpus(per_package)

split = chronological_split(corpus, train_fraction=0.6)
print(f"chronological split at {split.split_instant:%Y-%m-%d}: "
      f"{len(split.train)} train / {len(split.test)} test messages")

for design, builder in (
    ("calendar_week", build_calendar_week_steps),
    ("event_based", build_event_based_steps),
):
    steps = builder(corpus, events, target_kind="minor")
    n_pos = sum(1 for s in steps if s.is_event)
    print(f"\n{design}: {len(steps)} steps, {n_pos} positives")
    dataset = assemble_dataset(steps, split, name=f"fixture-minor-{design}", target_kind="minor")
    print(f"  partitioned: {len(dataset.train_steps)} train / {len(dataset.test_steps)} test "
          f"(dropped {dataset.dropped_straddlers} straddlers, {dataset.dropped_empty} empty)")
    for step in dataset.train_steps[:3]:
        print(f"  {step.step_id}: label={step.label}, {len(step.message_ids)} messages")

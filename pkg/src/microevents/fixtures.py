"""Bundled two-package fixture corpus for end-to-end runs and demos.

About 2000 messages over 120 weeks for two fictional packages, with 12
release events (six per package, alternating minor/patch).  Message bodies
mention the owning package and lean on release vocabulary in the week after
each release, so the pipeline has a real (if modest) signal to find.
"""

from __future__ import annotations

import os
from datetime import datetime, timedelta, timezone

import numpy as np

from .corpus import Message, ReleaseEvent, write_events_csv, write_messages_jsonl
from .synthlab import SeedLexicon, load_background_vocab

FIXTURE_PACKAGES = ("falconkit", "krakenlib")
_START = datetime(2014, 1, 6, tzinfo=timezone.utc)  # a Monday
_N_WEEKS = 120
_RELEASE_WORDS = ["release", "update", "upgrade", "changelog", "announce", "version"]


def _package_events(package: str, offset_weeks: int) -> list[ReleaseEvent]:
    """Six minor releases roughly every 19 weeks; the two packages
    interleave so positives spread across the whole timeline."""
    events = []
    version = [1, 0, 0]
    for i in range(6):
        week = offset_weeks + 6 + 19 * i
        version = [version[0], version[1] + 1, 0]
        ts = _START + timedelta(weeks=week, days=2, hours=10)
        events.append(
            ReleaseEvent(
                package=package,
                version=".".join(map(str, version)),
                timestamp=ts,
                kind="minor",
            )
        )
    return events


def build_fixture_corpus(seed: int = 0) -> tuple[list[Message], list[ReleaseEvent]]:
    rng = np.random.default_rng(seed)
    lexicon = SeedLexicon.load()
    vocab = load_background_vocab(300, lexicon)

    events: list[ReleaseEvent] = []
    for i, package in enumerate(FIXTURE_PACKAGES):
        events.extend(_package_events(package, offset_weeks=9 * i))
    event_days = {(e.package, (e.timestamp.date() - _START.date()).days) for e in events}

    messages: list[Message] = []
    counter = 0
    for day in range(_N_WEEKS * 7):
        for package in FIXTURE_PACKAGES:
            near_release = any(
                (package, d) in event_days for d in range(day - 6, day + 1)
            )
            n_msgs = rng.poisson(1.15)
            for _ in range(n_msgs):
                length = max(4, int(rng.poisson(13)))
                words = [vocab[i] for i in rng.integers(0, len(vocab), size=length)]
                if near_release and rng.random() < 0.6:
                    k = int(rng.integers(1, 3))
                    for _ in range(k):
                        slot = int(rng.integers(0, len(words) + 1))
                        words.insert(slot, _RELEASE_WORDS[int(rng.integers(0, len(_RELEASE_WORDS)))])
                mention_inline = rng.random() < 0.7
                if mention_inline:
                    slot = int(rng.integers(0, len(words) + 1))
                    words.insert(slot, package)
                body = "<p>" + " ".join(words) + "</p>"
                if rng.random() < 0.25:
                    body += "<code>x = compute()</code>"
                tags = [package] if (not mention_inline or rng.random() < 0.3) else []
                ts = _START + timedelta(days=day, seconds=int(rng.integers(0, 86_400)))
                messages.append(
                    Message(id=f"f{counter:06d}", timestamp=ts, body_raw=body, tags=tags)
                )
                counter += 1
    messages.sort(key=lambda m: (m.timestamp, m.id))
    return messages, events


def write_fixture_corpus(directory: str, seed: int = 0) -> tuple[str, str]:
    """Persist the fixture to ``messages.jsonl`` and ``events.csv``."""
    os.makedirs(directory, exist_ok=True)
    messages, events = build_fixture_corpus(seed)
    messages_path = os.path.join(directory, "messages.jsonl")
    events_path = os.path.join(directory, "events.csv")
    write_messages_jsonl(messages, messages_path)
    write_events_csv(events, events_path)
    return messages_path, events_path


def fixture_config(messages_path: str, events_path: str, seed: int = 7) -> dict:
    """A pipeline config sized for the fixture corpus."""
    return {
        "seed": seed,
        "dataset": {
            "messages": messages_path,
            "events": events_path,
            "format": "canonical-jsonl",
            "packages": list(FIXTURE_PACKAGES),
            "event_kind": "minor",
            "design": "event_based",
            "train_fraction": 0.6,
        },
        "textprep": {"min_df": 5, "max_df_fraction": 0.5, "collocations": True},
        "lda": {"k": 5, "alpha": 0.5, "burn_in": 50, "total_iterations": 150, "fold_in_sweeps": 20},
        # 12 events leave CV folds too thin for per-fold logistic refits
        # (tiny folds separate trivially), so selection runs on trees only
        "tuning": {"cv_folds": 2, "rfecv_step": {"logistic": 0, "forest": 1, "gbdt": 1}, "grids": {}},
        "evaluation": {"n_permutations": 1000, "alpha": 0.05, "family": "fixture"},
        "report": {"formats": ["json", "markdown", "svg"]},
    }

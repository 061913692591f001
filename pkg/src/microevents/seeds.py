"""Deterministic seed fan-out: one master seed reproduces every stage.

Stage seeds are derived from the master seed plus a label path, e.g.
``derive_seed(master, "sweep", f, instance)``.  Labels are hashed with
crc32 (stable across platforms and processes) and folded through numpy's
SeedSequence.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed(master: int, *labels) -> int:
    entropy = [int(master) & 0xFFFFFFFF] + [
        zlib.crc32(str(label).encode("utf-8")) for label in labels
    ]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])

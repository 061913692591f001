"""Labeled 7-day time steps and per-kind classification datasets.

Two designs: one step per calendar week (ISO weeks, Monday-anchored, UTC),
and event-anchored steps starting on the event's day.  Control steps are
guaranteed free of events of any kind.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Optional

from .corpus import CorpusSplit, Message, ReleaseEvent

STEP_DAYS = 7
CONTROL = "control"
_SIGNIFICANCE = {"major": 3, "minor": 2, "patch": 1}


class TimegridError(ValueError):
    pass


@dataclass
class TimeStep:
    start_day: date
    end_day: date
    design: str  # "calendar_week" | "event_based"
    message_ids: list[str]
    label: str  # event kind or "control"
    anchor_event: Optional[ReleaseEvent] = None

    @property
    def step_id(self) -> str:
        return f"{self.design}:{self.start_day.isoformat()}"

    @property
    def is_event(self) -> bool:
        return self.label != CONTROL


@dataclass
class StepDataset:
    """Binary classification dataset of time steps, named
    ``[package][event kind][time step design]``."""

    name: str
    target_kind: str
    design: str
    train_steps: list[TimeStep]
    test_steps: list[TimeStep]
    split_instant: Optional[datetime] = None
    dropped_straddlers: int = 0
    dropped_empty: int = 0

    @property
    def steps(self) -> list[TimeStep]:
        return self.train_steps + self.test_steps


def _day(instant: datetime) -> date:
    return instant.astimezone(timezone.utc).date()


def _iso_week_start(d: date) -> date:
    return d - timedelta(days=d.weekday())


def _messages_by_day(messages: Iterable[Message]) -> dict[date, list[Message]]:
    byday: dict[date, list[Message]] = {}
    for m in messages:
        byday.setdefault(_day(m.timestamp), []).append(m)
    return byday


def _ids_in_window(byday: dict[date, list[Message]], start: date, end: date) -> list[str]:
    ids: list[str] = []
    d = start
    while d <= end:
        for m in byday.get(d, ()):
            ids.append(m.id)
        d += timedelta(days=1)
    return sorted(ids)


def build_calendar_week_steps(
    messages: list[Message], events: list[ReleaseEvent], target_kind: str
) -> list[TimeStep]:
    """One step per ISO week holding at least one message.

    A week containing events is labeled by its most significant one
    (major > minor > patch); event-free weeks are controls; weeks labeled
    with a non-target kind are excluded from the dataset.
    """
    if target_kind not in _SIGNIFICANCE:
        raise TimegridError(f"unknown event kind: {target_kind}")
    if not messages:
        raise TimegridError("empty message list")

    byday = _messages_by_day(messages)
    events_by_week: dict[date, list[ReleaseEvent]] = {}
    for e in events:
        events_by_week.setdefault(_iso_week_start(_day(e.timestamp)), []).append(e)

    steps: list[TimeStep] = []
    for week_start in sorted({_iso_week_start(d) for d in byday}):
        week_end = week_start + timedelta(days=STEP_DAYS - 1)
        ids = _ids_in_window(byday, week_start, week_end)
        week_events = events_by_week.get(week_start, [])
        if week_events:
            top = max(week_events, key=lambda e: (_SIGNIFICANCE[e.kind], e.timestamp))
            if top.kind != target_kind:
                continue  # labeled by another kind: neither positive nor control
            steps.append(TimeStep(week_start, week_end, "calendar_week", ids, top.kind, top))
        else:
            steps.append(TimeStep(week_start, week_end, "calendar_week", ids, CONTROL))
    return steps


def build_event_based_steps(
    messages: list[Message], events: list[ReleaseEvent], target_kind: str
) -> list[TimeStep]:
    """Steps anchored on target-kind events (event on day 0) plus controls.

    Events closer than 7 days yield overlapping steps that share messages.
    Controls are the second weeks of 14-day spans containing no event of any
    kind; the scan starts at the first message day, restarts at (event day +
    7) whenever a span is contaminated, and never emits the first week.
    """
    if target_kind not in _SIGNIFICANCE:
        raise TimegridError(f"unknown event kind: {target_kind}")
    if not messages:
        raise TimegridError("empty message list")

    byday = _messages_by_day(messages)
    first_day = min(byday)
    last_day = max(byday)
    all_event_days = sorted({_day(e.timestamp) for e in events})

    steps: list[TimeStep] = []
    anchored: set[date] = set()
    for e in sorted(events, key=lambda e: (e.timestamp, e.package, e.version)):
        if e.kind != target_kind:
            continue
        d0 = _day(e.timestamp)
        if d0 in anchored:
            continue  # same-kind events on one day collapse to one anchor
        anchored.add(d0)
        end = d0 + timedelta(days=STEP_DAYS - 1)
        steps.append(TimeStep(d0, end, "event_based", _ids_in_window(byday, d0, end), target_kind, e))

    def emit_controls_until(cursor: date, limit: date) -> date:
        # fit 14-day event-free spans into [cursor, limit]; the second week
        # becomes the control step, the first week is dropped
        while cursor + timedelta(days=2 * STEP_DAYS - 1) <= limit:
            span_end = cursor + timedelta(days=2 * STEP_DAYS - 1)
            ctrl_start = cursor + timedelta(days=STEP_DAYS)
            steps.append(
                TimeStep(
                    ctrl_start,
                    span_end,
                    "event_based",
                    _ids_in_window(byday, ctrl_start, span_end),
                    CONTROL,
                )
            )
            cursor += timedelta(days=2 * STEP_DAYS)
        return cursor

    cursor = first_day
    for event_day in all_event_days:
        if event_day >= cursor:
            cursor = emit_controls_until(cursor, event_day - timedelta(days=1))
        next_clear = event_day + timedelta(days=STEP_DAYS)  # scan restarts past the affected week
        if next_clear > cursor:
            cursor = next_clear
    emit_controls_until(cursor, last_day)

    steps.sort(key=lambda s: (s.start_day, s.label))
    return steps


def assemble_dataset(
    steps: list[TimeStep],
    corpus_split: CorpusSplit,
    name: str,
    target_kind: str,
) -> StepDataset:
    """Partition steps at the corpus split boundary.

    A step is train iff its last day ends on or before the boundary instant;
    steps straddling the boundary and steps without messages are dropped.
    Partitions with fewer than 2 steps or a single class are unusable.
    """
    boundary = _day(corpus_split.split_instant)
    train: list[TimeStep] = []
    test: list[TimeStep] = []
    n_straddle = 0
    n_empty = 0
    for s in steps:
        if not s.message_ids:
            n_empty += 1
            continue
        if s.end_day <= boundary:
            train.append(s)
        elif s.start_day > boundary:
            test.append(s)
        else:
            n_straddle += 1

    design = steps[0].design if steps else "calendar_week"
    ds = StepDataset(
        name=name,
        target_kind=target_kind,
        design=design,
        train_steps=train,
        test_steps=test,
        split_instant=corpus_split.split_instant,
        dropped_straddlers=n_straddle,
        dropped_empty=n_empty,
    )
    for part_name, part in (("train", train), ("test", test)):
        if len(part) < 2:
            raise TimegridError(f"unusable partition: {part_name} has {len(part)} steps")
        labels = {s.is_event for s in part}
        if len(labels) < 2:
            raise TimegridError(f"unusable partition: {part_name} is single-class")
    return ds


def write_steps_csv(steps: list[TimeStep], csv_path: str, sidecar_json_path: str) -> None:
    """Persist steps as CSV plus a sidecar JSON mapping step_id -> message ids."""
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step_id,design,start_day,end_day,label,n_messages\n")
        for s in steps:
            fh.write(
                f"{s.step_id},{s.design},{s.start_day.isoformat()},"
                f"{s.end_day.isoformat()},{s.label},{len(s.message_ids)}\n"
            )
    mapping = {s.step_id: s.message_ids for s in steps}
    with open(sidecar_json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(mapping, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_steps_csv(csv_path: str, sidecar_json_path: str) -> list[TimeStep]:
    with open(sidecar_json_path, "r", encoding="utf-8") as fh:
        mapping = json.load(fh)
    steps: list[TimeStep] = []
    with open(csv_path, "r", encoding="utf-8") as fh:
        line = fh.readline()
        while line.startswith("#"):
            line = fh.readline()
        header = line.strip().split(",")
        if header[:5] != ["step_id", "design", "start_day", "end_day", "label"]:
            raise TimegridError("bad steps CSV header")
        for line in fh:
            step_id, design, start_s, end_s, label, _n = line.strip().split(",")
            steps.append(
                TimeStep(
                    start_day=date.fromisoformat(start_s),
                    end_day=date.fromisoformat(end_s),
                    design=design,
                    message_ids=list(mapping.get(step_id, [])),
                    label=label,
                )
            )
    return steps

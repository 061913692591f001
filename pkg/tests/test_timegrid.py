from datetime import date, datetime, timedelta, timezone

import pytest

from microevents.corpus import CorpusSplit, Message, ReleaseEvent
from microevents.timegrid import (
    CONTROL,
    TimegridError,
    assemble_dataset,
    build_calendar_week_steps,
    build_event_based_steps,
    read_steps_csv,
    write_steps_csv,
)

BASE = date(2021, 1, 4)  # a Monday


def day(n):
    return BASE + timedelta(days=n)


def instant(n, hour=9):
    d = day(n)
    return datetime(d.year, d.month, d.day, hour, tzinfo=timezone.utc)


def msg(n, i=0):
    return Message(id=f"m{n}-{i}", timestamp=instant(n), body_raw=f"day {n}")


def event(n, kind, package="pkg", version="1.0.0"):
    return ReleaseEvent(package=package, version=version, timestamp=instant(n), kind=kind)


def daily_messages(n_days):
    return [msg(n) for n in range(n_days)]


class TestCalendarWeeks:
    def test_most_significant_event_labels_week(self):
        msgs = daily_messages(14)
        events = [event(2, "minor"), event(3, "patch")]
        steps = build_calendar_week_steps(msgs, events, "minor")
        labeled = {s.start_day: s.label for s in steps}
        assert labeled[day(0)] == "minor"
        assert labeled[day(7)] == CONTROL

    def test_week_without_events_is_control(self):
        steps = build_calendar_week_steps(daily_messages(7), [], "minor")
        assert [s.label for s in steps] == [CONTROL]

    def test_week_with_other_kind_excluded(self):
        msgs = daily_messages(14)
        steps = build_calendar_week_steps(msgs, [event(2, "major")], "minor")
        assert day(0) not in {s.start_day for s in steps}
        assert {s.label for s in steps} == {CONTROL}

    def test_weeks_partition_and_windows_are_7_days(self):
        steps = build_calendar_week_steps(daily_messages(28), [], "patch")
        starts = [s.start_day for s in steps]
        assert starts == [day(0), day(7), day(14), day(21)]
        assert all((s.end_day - s.start_day).days == 6 for s in steps)

    def test_empty_messages_error(self):
        with pytest.raises(TimegridError):
            build_calendar_week_steps([], [], "minor")


class TestEventBasedSteps:
    def test_overlapping_steps_share_messages(self):
        msgs = daily_messages(41)
        events = [
            event(10, "minor", version="1.1.0"),
            event(13, "minor", version="1.2.0"),
        ]
        steps = build_event_based_steps(msgs, events, "minor")
        positives = [s for s in steps if s.is_event]
        assert [(s.start_day, s.end_day) for s in positives] == [
            (day(10), day(16)),
            (day(13), day(19)),
        ]
        shared = set(positives[0].message_ids) & set(positives[1].message_ids)
        assert shared == {f"m{n}-0" for n in range(13, 17)}

    def test_control_is_second_week_of_event_free_fortnight(self):
        # events on days 10 and 13 leave days 20-33 event-free:
        # control = days 27-33, days 20-26 are dropped
        msgs = daily_messages(41)
        events = [event(10, "minor", version="1.1.0"), event(13, "minor", version="1.2.0")]
        steps = build_event_based_steps(msgs, events, "minor")
        controls = [s for s in steps if s.label == CONTROL]
        assert (controls[0].start_day, controls[0].end_day) == (day(27), day(33))
        used_days = {d for s in steps for d in range(41) if s.start_day <= day(d) <= s.end_day}
        assert not ({20, 21, 22, 23, 24, 25, 26} & used_days)

    def test_zero_events_controls_every_fourteen_days(self):
        steps = build_event_based_steps(daily_messages(42), [], "minor")
        assert all(s.label == CONTROL for s in steps)
        assert [(s.start_day, s.end_day) for s in steps] == [
            (day(7), day(13)),
            (day(21), day(27)),
            (day(35), day(41)),
        ]

    def test_same_day_same_kind_events_collapse(self):
        msgs = daily_messages(20)
        events = [
            event(3, "patch", package="a", version="1.0.1"),
            event(3, "patch", package="b", version="2.0.1"),
        ]
        steps = build_event_based_steps(msgs, events, "patch")
        assert sum(1 for s in steps if s.is_event) == 1

    def test_no_control_intersects_any_event_day(self):
        msgs = daily_messages(100)
        events = [event(n, k, version=f"1.{i}.0") for i, (n, k) in
                  enumerate([(5, "minor"), (30, "major"), (31, "patch"), (70, "minor")])]
        steps = build_event_based_steps(msgs, events, "minor")
        event_days = {day(5), day(30), day(31), day(70)}
        for s in steps:
            if s.label == CONTROL:
                covered = {s.start_day + timedelta(days=i) for i in range(7)}
                assert not (covered & event_days)

    def test_deterministic_rerun(self):
        msgs = daily_messages(60)
        events = [event(9, "minor"), event(22, "patch", version="1.0.1")]
        a = build_event_based_steps(msgs, events, "minor")
        b = build_event_based_steps(msgs, events, "minor")
        assert [(s.start_day, s.label, tuple(s.message_ids)) for s in a] == [
            (s.start_day, s.label, tuple(s.message_ids)) for s in b
        ]


class TestAssembleDataset:
    def _split(self, boundary_day):
        return CorpusSplit(train=[], test=[], split_instant=instant(boundary_day, hour=23))

    def test_partition_rule_and_straddler_drop(self):
        msgs = daily_messages(42)
        steps = build_calendar_week_steps(msgs, [event(2, "minor"), event(30, "minor", version="1.1.0")], "minor")
        ds = assemble_dataset(steps, self._split(20), "pkg-minor-cw", "minor")
        # week [14,20] ends exactly on the boundary -> train; [21,27] -> test
        assert {s.start_day for s in ds.train_steps} == {day(0), day(7), day(14)}
        assert all(s.start_day > day(20) for s in ds.test_steps)
        assert ds.dropped_straddlers == 0

        ds2 = assemble_dataset(steps, self._split(23), "pkg-minor-cw", "minor")
        assert day(21) not in {s.start_day for s in ds2.train_steps + ds2.test_steps}
        assert ds2.dropped_straddlers == 1

    def test_single_class_partition_errors(self):
        msgs = daily_messages(28)
        steps = build_calendar_week_steps(msgs, [], "minor")  # all controls
        with pytest.raises(TimegridError, match="unusable partition"):
            assemble_dataset(steps, self._split(13), "pkg-minor-cw", "minor")

    def test_csv_roundtrip(self, tmp_path):
        msgs = daily_messages(28)
        steps = build_calendar_week_steps(msgs, [event(2, "minor")], "minor")
        csv_path = str(tmp_path / "steps.csv")
        sidecar = str(tmp_path / "steps.json")
        write_steps_csv(steps, csv_path, sidecar)
        back = read_steps_csv(csv_path, sidecar)
        assert [(s.start_day, s.end_day, s.label, s.message_ids) for s in back] == [
            (s.start_day, s.end_day, s.label, s.message_ids) for s in steps
        ]

import io
import json
from datetime import datetime, timezone

import pytest

from microevents.corpus import (
    CorpusError,
    Message,
    chronological_split,
    classify_release,
    events_from_versions,
    filter_by_packages,
    import_messages,
    parse_utc,
    union_corpus,
)


def _jsonl(rows):
    return io.StringIO("\n".join(json.dumps(r) for r in rows) + "\n")


def _msg(i, ts, body="", tags=()):
    return Message(id=str(i), timestamp=parse_utc(ts), body_raw=body, tags=list(tags))


class TestImportMessages:
    def test_three_rows_in_timestamp_order(self):
        rows = [
            {"id": "b", "ts": "2015-01-02T00:00:00Z", "body": "two", "tags": []},
            {"id": "a", "ts": "2015-01-01T00:00:00Z", "body": "one", "tags": ["x"]},
            {"id": "c", "ts": "2015-01-03T00:00:00Z", "body": "three", "tags": []},
        ]
        result = import_messages(_jsonl(rows), "canonical-jsonl")
        assert [m.id for m in result.messages] == ["a", "b", "c"]
        assert result.n_skipped == 0

    def test_unparseable_date_skipped_and_counted(self):
        rows = [
            {"id": "a", "ts": "2015-01-01T00:00:00Z", "body": "", "tags": []},
            {"id": "b", "ts": "not-a-date", "body": "", "tags": []},
        ]
        result = import_messages(_jsonl(rows), "canonical-jsonl")
        assert len(result.messages) == 1
        assert result.n_skipped == 1

    def test_duplicate_id_rejected_with_error(self):
        rows = [
            {"id": "a", "ts": "2015-01-01T00:00:00Z", "body": "first", "tags": []},
            {"id": "a", "ts": "2015-01-02T00:00:00Z", "body": "second", "tags": []},
        ]
        result = import_messages(_jsonl(rows), "canonical-jsonl")
        assert len(result.messages) == 1
        assert result.messages[0].body_raw == "first"
        assert any("duplicate" in e for e in result.errors)

    def test_malformed_header_fatal(self):
        with pytest.raises(CorpusError, match="header"):
            import_messages(io.StringIO("<html>nope</html>\n"), "canonical-jsonl")

    def test_so_xml_rows(self):
        stream = io.StringIO(
            '<?xml version="1.0"?>\n<posts>\n'
            '<row Id="1" CreationDate="2014-05-01T10:00:00" Body="hello django" '
            'Tags="&lt;Python&gt;&lt;Django&gt;" />\n'
            "</posts>\n"
        )
        result = import_messages(stream, "so-xml-rows")
        assert len(result.messages) == 1
        msg = result.messages[0]
        assert msg.tags == ["python", "django"]
        assert msg.timestamp == datetime(2014, 5, 1, 10, 0, tzinfo=timezone.utc)


class TestFilterByPackages:
    def test_body_word_match(self):
        m = _msg(1, "2015-01-01T00:00:00Z", body="I love Django ORM")
        out = filter_by_packages([m], ["django"])
        assert [x.id for x in out["django"]] == ["1"]
        assert "django" in m.packages

    def test_tag_match_without_body_hit(self):
        m = _msg(1, "2015-01-01T00:00:00Z", body="webdriver stuff", tags=["selenium"])
        out = filter_by_packages([m], ["selenium"])
        assert [x.id for x in out["selenium"]] == ["1"]

    def test_word_boundary_rejects_embedded(self):
        m = _msg(1, "2015-01-01T00:00:00Z", body="djangos are not a package")
        out = filter_by_packages([m], ["django"])
        assert out["django"] == []

    def test_empty_package_list_errors(self):
        with pytest.raises(CorpusError):
            filter_by_packages([], [])

    def test_idempotent_and_order_independent(self):
        msgs = [
            _msg(1, "2015-01-01T00:00:00Z", body="django rocks"),
            _msg(2, "2015-01-02T00:00:00Z", body="selenium tests", tags=["selenium"]),
            _msg(3, "2015-01-03T00:00:00Z", body="django AND selenium"),
        ]
        first = filter_by_packages(msgs, ["django", "selenium"])
        second = filter_by_packages(list(reversed(msgs)), ["django", "selenium"])
        for p in ("django", "selenium"):
            assert {m.id for m in first[p]} == {m.id for m in second[p]}
        union = union_corpus(first)
        assert [m.id for m in union] == ["1", "2", "3"]


class TestClassifyRelease:
    @pytest.mark.parametrize(
        "prev,cur,kind",
        [("1.2.3", "2.0.0", "major"), ("1.2.3", "1.3.0", "minor"), ("1.2.3", "1.2.4", "patch")],
    )
    def test_semver_kinds(self, prev, cur, kind):
        assert classify_release(prev, cur) == kind

    def test_not_forward_errors(self):
        with pytest.raises(CorpusError, match="forward"):
            classify_release("1.2.3", "1.2.3")
        with pytest.raises(CorpusError, match="forward"):
            classify_release("2.0.0", "1.9.9")

    def test_prerelease_suffix_stripped(self):
        assert classify_release("1.2.3-rc1+build", "1.3.0-alpha") == "minor"

    def test_chain_rediff_bruteforce(self):
        # brute-force oracle: walk random increasing chains and re-derive kinds
        import random

        rng = random.Random(7)
        for _ in range(50):
            version = [rng.randint(0, 3), rng.randint(0, 5), rng.randint(0, 5)]
            chain = [tuple(version)]
            for _ in range(8):
                bump = rng.choice(["major", "minor", "patch"])
                if bump == "major":
                    version = [version[0] + 1, 0, 0]
                elif bump == "minor":
                    version = [version[0], version[1] + 1, 0]
                else:
                    version = [version[0], version[1], version[2] + 1]
                chain.append(tuple(version))
            for prev, cur in zip(chain, chain[1:]):
                kind = classify_release(".".join(map(str, prev)), ".".join(map(str, cur)))
                if cur[0] > prev[0]:
                    assert kind == "major"
                elif cur[1] > prev[1]:
                    assert kind == "minor"
                else:
                    assert kind == "patch"

    def test_events_from_versions_first_release_against_zero(self):
        events = events_from_versions(
            "pkg",
            [("1.0.0", parse_utc("2015-01-01T00:00:00Z")), ("1.0.1", parse_utc("2015-02-01T00:00:00Z"))],
        )
        assert [e.kind for e in events] == ["major", "patch"]


class TestChronologicalSplit:
    def _series(self, n):
        return [_msg(i, f"2015-01-{i + 1:02d}T00:00:00Z") for i in range(n)]

    def test_ten_messages(self):
        split = chronological_split(self._series(10))
        assert (len(split.train), len(split.test)) == (6, 4)

    def test_five_messages_floor(self):
        split = chronological_split(self._series(5), 0.6)
        assert (len(split.train), len(split.test)) == (3, 2)

    def test_all_equal_timestamps_error(self):
        msgs = [_msg(i, "2015-01-01T00:00:00Z") for i in range(10)]
        with pytest.raises(CorpusError, match="chronological"):
            chronological_split(msgs)

    def test_boundary_invariant(self):
        split = chronological_split(self._series(23), 0.6)
        assert max(m.timestamp for m in split.train) == split.split_instant
        assert split.split_instant < min(m.timestamp for m in split.test)

    def test_too_few_messages(self):
        with pytest.raises(CorpusError):
            chronological_split(self._series(1))

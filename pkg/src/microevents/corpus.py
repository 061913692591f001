"""Message and release-event ingestion, package filtering, chronological splits."""

from __future__ import annotations

import csv
import html
import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, TextIO

RELEASE_KINDS = ("major", "minor", "patch")


class CorpusError(ValueError):
    """Raised on unusable corpus inputs (bad streams, degenerate splits)."""


@dataclass
class Message:
    """One forum post.  Tags are lowercase; ``packages`` is filled by
    :func:`filter_by_packages`."""

    id: str
    timestamp: datetime
    body_raw: str
    tags: list[str] = field(default_factory=list)
    packages: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class ReleaseEvent:
    package: str
    version: str
    timestamp: datetime
    kind: str


@dataclass
class CorpusSplit:
    train: list[Message]
    test: list[Message]
    split_instant: datetime


@dataclass
class ImportResult:
    messages: list[Message]
    n_skipped: int = 0
    errors: list[str] = field(default_factory=list)


def parse_utc(value: str) -> datetime:
    """Parse an ISO-8601 instant as UTC, truncated to whole seconds."""
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def _iter_lines(source) -> Iterable[str]:
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


_XML_HEADS = ("<?xml", "<posts", "<row")


def import_messages(source: str | TextIO | Iterable[str], format: str = "canonical-jsonl") -> ImportResult:
    """Read a message dump into :class:`Message` objects sorted by timestamp.

    ``source`` is a path or an open text stream.  ``format`` is either
    ``canonical-jsonl`` (one object per line: id, ts, body, tags) or
    ``so-xml-rows`` (one ``<row .../>`` element per line with Id,
    CreationDate, Body and optional Tags attributes).

    Rows that fail to parse are skipped and counted; duplicated ids keep the
    first occurrence and record an error.  A stream whose first content line
    is not recognisable for the declared format is fatal.
    """
    if format not in ("canonical-jsonl", "so-xml-rows"):
        raise CorpusError(f"unknown message format: {format}")

    result = ImportResult(messages=[])
    seen_ids: set[str] = set()
    header_checked = False

    for lineno, line in enumerate(_iter_lines(source), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if not header_checked:
            header_checked = True
            if format == "so-xml-rows" and not stripped.startswith(_XML_HEADS):
                raise CorpusError("malformed stream header: expected XML rows")
            if format == "canonical-jsonl" and not stripped.startswith("{"):
                raise CorpusError("malformed stream header: expected JSON object lines")
        try:
            if format == "canonical-jsonl":
                msg = _parse_jsonl_row(stripped)
            else:
                msg = _parse_xml_row(stripped)
        except _SkipRow:
            continue
        except Exception as exc:
            result.n_skipped += 1
            result.errors.append(f"line {lineno}: {exc}")
            continue
        if msg.id in seen_ids:
            result.n_skipped += 1
            result.errors.append(f"line {lineno}: duplicate id {msg.id!r}")
            continue
        seen_ids.add(msg.id)
        result.messages.append(msg)

    result.messages.sort(key=lambda m: (m.timestamp, m.id))
    return result


class _SkipRow(Exception):
    """Line is structural markup (prolog, container tags), not a data row."""


def _parse_jsonl_row(line: str) -> Message:
    obj = json.loads(line)
    tags = [str(t).lower() for t in obj.get("tags", [])]
    return Message(
        id=str(obj["id"]),
        timestamp=parse_utc(str(obj["ts"])),
        body_raw=str(obj["body"]),
        tags=tags,
    )


def _parse_xml_row(line: str) -> Message:
    if not line.startswith("<row"):
        raise _SkipRow
    elem = ET.fromstring(line)
    attrs = elem.attrib
    if "Id" not in attrs or "CreationDate" not in attrs:
        raise ValueError("row missing Id or CreationDate")
    raw_tags = html.unescape(attrs.get("Tags", ""))
    tags = [t.lower() for t in re.findall(r"<([^<>]+)>", raw_tags)]
    return Message(
        id=attrs["Id"],
        timestamp=parse_utc(attrs["CreationDate"]),
        body_raw=attrs.get("Body", ""),
        tags=tags,
    )


def write_messages_jsonl(messages: Iterable[Message], path: str) -> None:
    """Persist messages in the canonical-jsonl interchange format."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for m in messages:
            obj = {
                "id": m.id,
                "ts": m.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "body": m.body_raw,
                "tags": m.tags,
            }
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")


def filter_by_packages(messages: Iterable[Message], package_names: list[str]) -> dict[str, list[Message]]:
    """Assign messages to packages by word-boundary body match or exact tag.

    A message may belong to several packages; each matched name is recorded
    in ``Message.packages``.  Matching is case-insensitive on the raw body;
    boundaries reject embedded hits such as "djangos" for "django".
    """
    if not package_names:
        raise CorpusError("package list must be nonempty")
    names = [p.lower() for p in package_names]
    patterns = {
        p: re.compile(r"(?<![0-9A-Za-z_])" + re.escape(p) + r"(?![0-9A-Za-z_])", re.IGNORECASE)
        for p in names
    }
    out: dict[str, list[Message]] = {p: [] for p in names}
    for msg in messages:
        tagset = set(msg.tags)
        for p in names:
            if p in tagset or patterns[p].search(msg.body_raw):
                msg.packages.add(p)
                out[p].append(msg)
    return out


def union_corpus(per_package: dict[str, list[Message]]) -> list[Message]:
    """Union of the per-package lists, deduplicated by id, timestamp order."""
    seen: set[str] = set()
    merged: list[Message] = []
    for p in sorted(per_package):
        for msg in per_package[p]:
            if msg.id not in seen:
                seen.add(msg.id)
                merged.append(msg)
    merged.sort(key=lambda m: (m.timestamp, m.id))
    return merged


_SEMVER_RE = re.compile(r"^v?(\d+)\.(\d+)\.(\d+)")


def parse_semver(version: str) -> tuple[int, int, int]:
    """MAJOR.MINOR.PATCH triple; pre-release / build-metadata suffixes ignored."""
    m = _SEMVER_RE.match(version.strip())
    if m is None:
        raise CorpusError(f"not a MAJOR.MINOR.PATCH version: {version!r}")
    return int(m.group(1)), int(m.group(2)), int(m.group(3))


def classify_release(prev_version: str, version: str) -> str:
    """Kind of the step from ``prev_version`` to ``version``."""
    prev = parse_semver(prev_version)
    cur = parse_semver(version)
    if cur <= prev:
        raise CorpusError(f"not a forward release: {prev_version} -> {version}")
    if cur[0] > prev[0]:
        return "major"
    if cur[1] > prev[1]:
        return "minor"
    return "patch"


def events_from_versions(package: str, releases: list[tuple[str, datetime]]) -> list[ReleaseEvent]:
    """Build kind-classified events from a package's (version, instant) history.

    Releases are ordered by timestamp; each kind comes from the delta to the
    preceding version.  The first release is classified against 0.0.0.
    """
    ordered = sorted(releases, key=lambda r: r[1])
    events = []
    prev = "0.0.0"
    for version, ts in ordered:
        events.append(ReleaseEvent(package, version, ts, classify_release(prev, version)))
        prev = version
    return events


def load_events_csv(path: str) -> list[ReleaseEvent]:
    """Events file: CSV with header ``package,version,ts``."""
    by_package: dict[str, list[tuple[str, datetime]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"package", "version", "ts"} <= set(reader.fieldnames):
            raise CorpusError("events file must have header package,version,ts")
        for row in reader:
            by_package.setdefault(row["package"].lower(), []).append(
                (row["version"], parse_utc(row["ts"]))
            )
    events: list[ReleaseEvent] = []
    for package in sorted(by_package):
        events.extend(events_from_versions(package, by_package[package]))
    events.sort(key=lambda e: (e.timestamp, e.package, e.version))
    return events


def write_events_csv(events: Iterable[ReleaseEvent], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("package,version,ts\n")
        for e in events:
            fh.write(f"{e.package},{e.version},{e.timestamp.strftime('%Y-%m-%dT%H:%M:%SZ')}\n")


def chronological_split(messages: list[Message], train_fraction: float = 0.6) -> CorpusSplit:
    """First ``train_fraction`` of messages (chronologically) vs the rest.

    The boundary may shift by at most one message to avoid splitting inside a
    run of identical timestamps; if no such cut exists the corpus has no
    usable chronological order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise CorpusError("train_fraction must be in (0, 1)")
    if len(messages) < 2:
        raise CorpusError("need at least 2 messages to split")
    ordered = sorted(messages, key=lambda m: (m.timestamp, m.id))
    n = len(ordered)
    # +1e-9 keeps exact fractions like 0.6*5 from flooring to 2
    base = int(train_fraction * n + 1e-9)
    for k in (base, base + 1, base - 1):
        if 1 <= k < n and ordered[k - 1].timestamp < ordered[k].timestamp:
            return CorpusSplit(
                train=ordered[:k], test=ordered[k:], split_instant=ordered[k - 1].timestamp
            )
    raise CorpusError("no chronological order at the split boundary")

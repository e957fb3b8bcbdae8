"""CSV ingestion and the JSONL / CSV result formats."""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator

from .dbscan import Clustering, EventKind
from .errors import DataError
from .geo import GpsRecord, PlanarRecord, canonical_order, project_to_plane
from .metrics import modularity, nmi

log = logging.getLogger(__name__)

_INT_ID = re.compile(r"-?[0-9]+")
MALFORMED_ABORT_FRACTION = 0.5


def parse_object_id(text: str):
    """Integer ids stay integers when they round-trip exactly ("7" -> 7, "007" stays text)."""
    text = text.strip()
    if _INT_ID.fullmatch(text) and str(int(text)) == text:
        return int(text)
    return text


def parse_timestamp(text: str) -> float:
    """Seconds as a real number, or an ISO-8601 instant (naive means UTC)."""
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
        moment = datetime.fromisoformat(iso)
        if moment.tzinfo is None:
            moment = moment.replace(tzinfo=timezone.utc)
        return moment.timestamp()
    if not math.isfinite(value):
        raise ValueError(f"non-finite timestamp {text!r}")
    return value


@dataclass
class ParseReport:
    records: list = field(default_factory=list)
    lines: int = 0
    malformed: int = 0
    header: bool = False
    errors: list[str] = field(default_factory=list)


def _looks_like_header(fields: list[str]) -> bool:
    if len(fields) != 4:
        return False
    try:
        float(fields[2])
        float(fields[3])
    except ValueError:
        return True
    return False


def parse_records(
    source: str | Path | IO[str],
    mode: str = "planar",
    *,
    strict: bool = False,
    ref: tuple[float, float] | None = None,
) -> ParseReport:
    """Read ``object_id,timestamp,a,b`` lines.

    ``mode`` is ``"planar"`` (a, b = x, y meters) or ``"geographic"``
    (a, b = lat, lon degrees, projected around ``ref`` or the first fix).
    Malformed lines are skipped and counted; ``strict`` turns the first one
    into a ``DataError``, and more than half malformed always aborts.
    """
    if mode not in ("planar", "geographic"):
        raise ValueError(f"unknown input mode {mode!r}")
    if isinstance(source, (str, Path)):
        try:
            handle = open(source, newline="", encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read {source}: {exc}") from exc
        with handle:
            return parse_records(handle, mode, strict=strict, ref=ref)

    report = ParseReport()
    for lineno, row in enumerate(csv.reader(source), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and _looks_like_header(row):
            report.header = True
            continue
        report.lines += 1
        try:
            if len(row) != 4:
                raise ValueError(f"expected 4 fields, got {len(row)}")
            oid = parse_object_id(row[0])
            if oid == "":
                raise ValueError("empty object id")
            ts = parse_timestamp(row[1])
            a, b = float(row[2]), float(row[3])
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError("non-finite coordinate")
            if mode == "geographic":
                fix = GpsRecord(oid, ts, a, b)
                if ref is None:
                    ref = (fix.lat, fix.lon)
                p = project_to_plane(fix.lat, fix.lon, ref)
                rec = PlanarRecord(oid, ts, p.x, p.y)
            else:
                rec = PlanarRecord(oid, ts, a, b)
        except ValueError as exc:
            report.malformed += 1
            msg = f"line {lineno}: {exc}"
            if strict:
                raise DataError(msg) from exc
            if len(report.errors) < 20:
                report.errors.append(msg)
            continue
        report.records.append(rec)
    if report.lines and report.malformed > MALFORMED_ABORT_FRACTION * report.lines:
        detail = "; ".join(report.errors[:5])
        raise DataError(f"{report.malformed} of {report.lines} lines malformed ({detail})")
    if report.malformed:
        log.warning("skipped %d malformed line(s)", report.malformed)
    return report


def write_records(records: Iterable[PlanarRecord], out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["object_id", "timestamp", "x", "y"])
    for r in records:
        w.writerow([r.object_id, repr(float(r.timestamp)), repr(float(r.x)), repr(float(r.y))])


# ------------------------------------------------------------------ step output
def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def step_record(result) -> OrderedDict:
    """JSON-ready description of one step; key order is fixed."""
    members = result.clustering.members()
    clusters = []
    dissolved = []
    for ev in result.events:
        if ev.kind is EventKind.DISSOLVE:
            dissolved.append(ev.prev_cluster_id)
            continue
        clusters.append(OrderedDict([
            ("id", ev.cur_cluster_id),
            ("prev", ev.prev_cluster_id),
            ("event", ev.kind.value),
            ("members", members[ev.cur_cluster_id]),
        ]))
    m = result.metrics
    return OrderedDict([
        ("step", result.k),
        ("eps", _num(result.eps)),
        ("clusters", clusters),
        ("dissolved", dissolved),
        ("outliers", result.clustering.outliers),
        ("qs", _num(m.qs)),
        ("nmi", _num(m.nmi_with_prev)),
        ("smoothed", m.smoothed),
        ("ms", round(m.processing_seconds * 1000.0, 3)),
    ])


def dump_step(result) -> str:
    return json.dumps(step_record(result), separators=(",", ":"))


SUMMARY_FIELDS = ["step", "t_start", "eps", "objects", "clusters", "outliers", "smoothed", "qs", "nmi", "ms"]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return v


def summary_row(result) -> list:
    m = result.metrics
    return [_cell(v) for v in (
        result.k, result.t_start, result.eps, m.objects, m.clusters, m.outliers, m.smoothed,
        m.qs, m.nmi_with_prev, round(m.processing_seconds * 1000.0, 3),
    )]


ASSIGNMENT_FIELDS = ["step", "object_id", "x", "y", "cluster"]


def assignment_rows(result) -> Iterator[list]:
    """Clustered locations of one step (adjusted coordinates, -1 for outliers)."""
    c = result.clustering
    for oid, (x, y), label in zip(c.ids, c.xy.tolist(), c.assignment.tolist()):
        yield [result.k, oid, repr(float(x)), repr(float(y)), label]


def read_assignments(source: str | Path | IO[str]) -> list[Clustering]:
    """Per-step clusterings from an assignments CSV, in step order."""
    if isinstance(source, (str, Path)):
        try:
            handle = open(source, newline="", encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read {source}: {exc}") from exc
        with handle:
            return read_assignments(handle)
    steps: dict[int, dict] = {}
    reader = csv.reader(source)
    for lineno, row in enumerate(reader, start=1):
        if not row:
            continue
        if lineno == 1 and row[0].strip() == "step":
            continue
        try:
            k = int(row[0])
            oid = parse_object_id(row[1])
            entry = (float(row[2]), float(row[3]), int(row[4]))
        except (ValueError, IndexError) as exc:
            raise DataError(f"assignments line {lineno}: {exc}") from exc
        steps.setdefault(k, {})[oid] = entry
    out = []
    for k in sorted(steps):
        rows = steps[k]
        ids = canonical_order(rows)
        out.append(Clustering.from_labels(
            ids, [rows[i][:2] for i in ids], [rows[i][2] for i in ids], k=k,
        ))
    return out


@dataclass
class Evaluation:
    steps: list[int]
    qs: list[float | None]
    nmi: list[float | None]

    @property
    def mean_qs(self):
        vals = [v for v in self.qs if v is not None]
        return sum(vals) / len(vals) if vals else None

    @property
    def mean_nmi(self):
        vals = [v for v in self.nmi if v is not None]
        return sum(vals) / len(vals) if vals else None


def evaluate(clusterings: list[Clustering], dist_floor: float = 1e-3) -> Evaluation:
    """Recompute per-step QS and step-to-step NMI.

    NMI compares consecutive listed steps; a step with no objects is not listed.
    """
    ev = Evaluation([], [], [])
    prev = None
    for c in clusterings:
        ev.steps.append(c.k)
        ev.qs.append(modularity(c, dist_floor) if len(c) >= 2 else None)
        ev.nmi.append(nmi(prev, c) if prev is not None else None)
        prev = c
    return ev


__all__ = [
    "ParseReport", "parse_records", "parse_object_id", "parse_timestamp", "write_records",
    "step_record", "dump_step", "SUMMARY_FIELDS", "summary_row", "ASSIGNMENT_FIELDS",
    "assignment_rows", "read_assignments", "Evaluation", "evaluate",
]

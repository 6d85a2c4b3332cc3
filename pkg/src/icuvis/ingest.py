"""Parsing and validation of detection streams and clinical event files.

Malformed lines never abort a parse: each one becomes a single entry in the
report's reject list and parsing continues with the next line.

Detection stream, one frame per line, tab separated::

    patient_id <TAB> 2023-05-02T14:00:00-04:00 <TAB> class,conf,x0,y0,x1,y1;...

Clinical events are comma separated with a header row.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Mapping, Optional, Union

from .domain import (
    DEFAULT_GEOMETRY,
    AcuityFlags,
    AcuityLabel,
    AcuityRecord,
    BoundingBox,
    CamIcu,
    Detection,
    DetectionFrame,
    DeliriumRecord,
    EventKind,
    FrameGeometry,
    PainRecord,
    PostureClass,
    ValidationError,
)

GAP_THRESHOLD = timedelta(seconds=5)

DETECTION_KIND = "detections"

PAIN_COLUMNS = ("patient_id", "timestamp", "dvprs")
ACUITY_COLUMNS = ("patient_id", "interval_end", "crrt", "ventilation", "vasopressor", "transfusion_ge_10u_24h")
DELIRIUM_COLUMNS = ("patient_id", "timestamp", "rass", "cam_icu", "gcs")

Source = Union[bytes, str, Iterable[bytes], io.IOBase]


@dataclass(frozen=True)
class Reject:
    source: str
    line_no: int
    reason: str
    text: str = ""


@dataclass(frozen=True)
class Gap:
    start: datetime
    end: datetime

    @property
    def seconds(self) -> float:
        return (self.end - self.start).total_seconds()


@dataclass(frozen=True)
class Coverage:
    patient_id: str
    first: datetime
    last: datetime
    frame_count: int
    gaps: tuple = ()

    @property
    def span_seconds(self) -> float:
        return (self.last - self.first).total_seconds()


@dataclass
class ValidationReport:
    total: Counter = field(default_factory=Counter)
    accepted: Counter = field(default_factory=Counter)
    rejects: list = field(default_factory=list)
    coverage: dict = field(default_factory=dict)
    orphans: list = field(default_factory=list)

    @property
    def rejected(self) -> Counter:
        return Counter(r.source for r in self.rejects)

    @property
    def ok(self) -> bool:
        return not self.rejects

    def reject(self, source: str, line_no: int, reason: str, text: str = ""):
        self.rejects.append(Reject(source, line_no, reason, text[:120]))

    def merge(self, other: "ValidationReport") -> "ValidationReport":
        self.total.update(other.total)
        self.accepted.update(other.accepted)
        self.rejects.extend(other.rejects)
        self.coverage.update(other.coverage)
        self.orphans.extend(other.orphans)
        return self

    def render(self) -> str:
        out = []
        kinds = sorted(set(self.total) | set(self.accepted))
        for kind in kinds:
            out.append(
                f"{kind}: {self.total[kind]} lines, {self.accepted[kind]} accepted, "
                f"{self.rejected[kind]} rejected"
            )
        for r in self.rejects:
            out.append(f"reject {r.source}:{r.line_no}: {r.reason}")
        for pid in sorted(self.coverage):
            c = self.coverage[pid]
            out.append(
                f"coverage {pid}: {c.frame_count} frames {c.first.isoformat()} .. "
                f"{c.last.isoformat()}, {len(c.gaps)} gaps"
            )
        for kind, pid, ts in self.orphans:
            out.append(f"orphan {kind} event for {pid} at {ts.isoformat()}")
        return "\n".join(out) + ("\n" if out else "")


@dataclass(frozen=True)
class CohortBundle:
    frames: Mapping[str, tuple] = field(default_factory=dict)
    pain: tuple = ()
    acuity: tuple = ()
    delirium: tuple = ()

    def events(self):
        yield from self.pain
        yield from self.acuity
        yield from self.delirium


# --- line reading --------------------------------------------------------


def _iter_lines(source: Source):
    """Yield raw byte lines without terminators; blank lines are dropped."""
    if isinstance(source, str):
        source = source.encode("utf-8")
    if isinstance(source, (bytes, bytearray)):
        chunks: Iterable[bytes] = bytes(source).split(b"\n")
    else:
        chunks = source
    for line_no, raw in enumerate(chunks, start=1):
        if isinstance(raw, str):
            raw = raw.encode("utf-8")
        raw = raw.rstrip(b"\r\n")
        if raw.strip():
            yield line_no, raw


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        t = datetime.fromisoformat(text)
    except ValueError:
        raise ValidationError(f"bad timestamp {text!r}") from None
    if t.tzinfo is None:
        raise ValidationError("timestamp has no zone offset")
    if t.microsecond:
        raise ValidationError("sub-second timestamp")
    return t


def _real(text: str, what: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"bad {what} {text!r}") from None
    if not math.isfinite(v):
        raise ValidationError(f"non-finite {what}")
    return v


# --- detection stream ----------------------------------------------------


def parse_detection(entry: str, geometry: FrameGeometry = DEFAULT_GEOMETRY) -> Detection:
    parts = entry.split(",")
    if len(parts) != 6:
        raise ValidationError("detection needs 6 fields")
    posture = PostureClass.from_token(parts[0].strip())
    conf = _real(parts[1], "confidence")
    if not 0.0 <= conf <= 1.0:
        raise ValidationError("confidence out of range")
    x0, y0, x1, y1 = (_real(p, "coordinate") for p in parts[2:])
    box = BoundingBox(x0, y0, x1, y1)
    if not box.within(geometry):
        raise ValidationError("bbox out of bounds")
    return Detection(box, posture, conf)


def parse_detection_line(line: str, geometry: FrameGeometry = DEFAULT_GEOMETRY) -> DetectionFrame:
    fields = line.split("\t")
    if len(fields) != 3:
        raise ValidationError(f"expected 3 tab-separated fields, got {len(fields)}")
    pid = fields[0].strip()
    if not pid:
        raise ValidationError("empty patient_id")
    ts = parse_timestamp(fields[1])
    body = fields[2].strip()
    dets = tuple(parse_detection(e, geometry) for e in body.split(";")) if body else ()
    return DetectionFrame(pid, ts, dets)


def parse_detection_stream(
    source: Source,
    geometry: FrameGeometry = DEFAULT_GEOMETRY,
    name: str = DETECTION_KIND,
):
    """Parse a detection stream into per-patient frame tuples.

    Returns ``(frames, report)``; ``frames`` maps patient id (sorted) to a
    tuple of frames with strictly increasing timestamps.
    """
    report = ValidationReport()
    streams: dict = defaultdict(list)
    for line_no, raw in _iter_lines(source):
        report.total[name] += 1
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            report.reject(name, line_no, "invalid utf-8", raw.decode("utf-8", "replace"))
            continue
        try:
            frame = parse_detection_line(text, geometry)
        except ValidationError as exc:
            report.reject(name, line_no, exc.reason, text)
            continue
        stream = streams[frame.patient_id]
        if stream and frame.timestamp <= stream[-1].timestamp:
            report.reject(name, line_no, "non-monotonic", text)
            continue
        stream.append(frame)
        report.accepted[name] += 1
    frames = {pid: tuple(streams[pid]) for pid in sorted(streams)}
    return frames, report


def _fmt_real(x: float) -> str:
    # repr is the shortest string that round-trips to the same double
    return repr(float(x))


def format_detection_line(frame: DetectionFrame) -> str:
    dets = ";".join(
        ",".join(
            (
                d.posture.token,
                _fmt_real(d.confidence),
                _fmt_real(d.bbox.x_min),
                _fmt_real(d.bbox.y_min),
                _fmt_real(d.bbox.x_max),
                _fmt_real(d.bbox.y_max),
            )
        )
        for d in frame.detections
    )
    return f"{frame.patient_id}\t{frame.timestamp.isoformat()}\t{dets}"


def write_detection_stream(frames: Mapping[str, Iterable[DetectionFrame]], fh) -> int:
    n = 0
    for pid in sorted(frames):
        for frame in frames[pid]:
            fh.write(format_detection_line(frame))
            fh.write("\n")
            n += 1
    return n


# --- clinical events -----------------------------------------------------


def _bool(text: str, what: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y", "t"):
        return True
    if t in ("0", "false", "no", "n", "f"):
        return False
    raise ValidationError(f"bad boolean for {what}: {text!r}")


def _int(text: str, what: str) -> int:
    t = text.strip()
    try:
        return int(t)
    except ValueError:
        raise ValidationError(f"{what} {t!r} is not an integer") from None


def _opt(text: Optional[str]) -> Optional[str]:
    if text is None:
        return None
    t = text.strip()
    return t or None


def _pain_row(row):
    if len(row) != 3:
        raise ValidationError(f"expected 3 fields, got {len(row)}")
    pid = row[0].strip()
    return PainRecord(pid, parse_timestamp(row[1]), _int(row[2], "DVPRS"))


def _acuity_row(row):
    if len(row) not in (6, 7):
        raise ValidationError(f"expected 6 or 7 fields, got {len(row)}")
    pid = row[0].strip()
    flags = AcuityFlags(*(_bool(v, c) for v, c in zip(row[2:6], ACUITY_COLUMNS[2:])))
    rec = AcuityRecord(pid, parse_timestamp(row[1]), flags)
    if len(row) == 7 and _opt(row[6]):
        try:
            stated = AcuityLabel(row[6].strip().lower())
        except ValueError:
            raise ValidationError(f"bad acuity label {row[6]!r}") from None
        if stated is not rec.label:
            raise ValidationError("acuity label inconsistent with flags")
    return rec


def _delirium_row(row):
    if len(row) not in (5, 6):
        raise ValidationError(f"expected 5 or 6 fields, got {len(row)}")
    pid = row[0].strip()
    rass = _opt(row[2])
    cam = _opt(row[3])
    gcs = _opt(row[4])
    explicit = _opt(row[5]) if len(row) == 6 else None
    if cam is not None:
        try:
            cam_v = CamIcu(cam.lower())
        except ValueError:
            raise ValidationError(f"bad CAM-ICU value {cam!r}") from None
    else:
        cam_v = None
    return DeliriumRecord(
        pid,
        parse_timestamp(row[1]),
        rass=_int(rass, "RASS") if rass is not None else None,
        cam_icu=cam_v,
        gcs=_int(gcs, "GCS") if gcs is not None else None,
        delirious=_bool(explicit, "delirious") if explicit is not None else None,
    )


_ROW_PARSERS = {
    EventKind.PAIN: (PAIN_COLUMNS, _pain_row),
    EventKind.ACUITY: (ACUITY_COLUMNS, _acuity_row),
    EventKind.DELIRIUM: (DELIRIUM_COLUMNS, _delirium_row),
}


def parse_clinical_events(source: Source, kind: EventKind, name: Optional[str] = None):
    """Parse a clinical event CSV. Returns ``(records, report)``.

    The first non-blank line must be the header; it is not counted as a record.
    """
    kind = EventKind(kind)
    name = name or kind.value
    columns, parse_row = _ROW_PARSERS[kind]
    report = ValidationReport()
    records = []
    header_seen = False
    for line_no, raw in _iter_lines(source):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            report.total[name] += 1
            report.reject(name, line_no, "invalid utf-8", raw.decode("utf-8", "replace"))
            continue
        try:
            row = next(csv.reader([text]))
        except csv.Error as exc:
            row = None
            err = str(exc)
        if not header_seen:
            header_seen = True
            if row is not None and tuple(c.strip().lower() for c in row[: len(columns)]) == columns:
                continue
            # no header: fall through and treat as a data line
        report.total[name] += 1
        if row is None:
            report.reject(name, line_no, f"csv error: {err}", text)
            continue
        try:
            rec = parse_row(row)
            if not rec.patient_id:
                raise ValidationError("empty patient_id")
        except ValidationError as exc:
            report.reject(name, line_no, exc.reason, text)
            continue
        records.append(rec)
        report.accepted[name] += 1
    return records, report


def format_event_rows(records, kind: EventKind) -> str:
    """Serialize records to the CSV layout read by ``parse_clinical_events``."""
    kind = EventKind(kind)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind is EventKind.PAIN:
        w.writerow(PAIN_COLUMNS)
        for r in records:
            w.writerow((r.patient_id, r.timestamp.isoformat(), r.dvprs))
    elif kind is EventKind.ACUITY:
        w.writerow(ACUITY_COLUMNS + ("label",))
        for r in records:
            w.writerow(
                (r.patient_id, r.interval_end.isoformat(), *(int(f) for f in r.flags), r.label.value)
            )
    else:
        w.writerow(DELIRIUM_COLUMNS + ("delirious",))
        for r in records:
            w.writerow(
                (
                    r.patient_id,
                    r.timestamp.isoformat(),
                    "" if r.rass is None else r.rass,
                    "" if r.cam_icu is None else r.cam_icu.value,
                    "" if r.gcs is None else r.gcs,
                    "" if r.delirious is None else int(r.delirious),
                )
            )
    return buf.getvalue()


# --- cohort --------------------------------------------------------------


def frame_coverage(pid: str, frames, gap_threshold: timedelta = GAP_THRESHOLD) -> Coverage:
    gaps = []
    for prev, cur in zip(frames, frames[1:]):
        if cur.timestamp - prev.timestamp > gap_threshold:
            gaps.append(Gap(prev.timestamp, cur.timestamp))
    return Coverage(pid, frames[0].timestamp, frames[-1].timestamp, len(frames), tuple(gaps))


def validate_cohort(bundle: CohortBundle, gap_threshold: timedelta = GAP_THRESHOLD) -> ValidationReport:
    """Coverage spans, gaps and orphan events. Reporting only, never raises."""
    report = ValidationReport()
    for pid, frames in bundle.frames.items():
        if frames:
            report.coverage[pid] = frame_coverage(pid, frames, gap_threshold)
    for ev in bundle.events():
        if not bundle.frames.get(ev.patient_id):
            report.orphans.append((ev.kind.value, ev.patient_id, ev.timestamp))
    return report


def load_cohort(
    detections=None,
    pain=None,
    acuity=None,
    delirium=None,
    geometry: FrameGeometry = DEFAULT_GEOMETRY,
):
    """Parse whichever inputs are given (paths or byte sources) into a bundle.

    Returns ``(bundle, report)`` where the report merges every parse report
    with the cohort-level coverage and orphan checks.
    """
    report = ValidationReport()
    frames = {}
    if detections is not None:
        frames, r = parse_detection_stream(_read(detections), geometry)
        report.merge(r)
    records = {}
    for kind, src in ((EventKind.PAIN, pain), (EventKind.ACUITY, acuity), (EventKind.DELIRIUM, delirium)):
        if src is None:
            records[kind] = ()
            continue
        recs, r = parse_clinical_events(_read(src), kind)
        report.merge(r)
        records[kind] = tuple(recs)
    bundle = CohortBundle(frames, records[EventKind.PAIN], records[EventKind.ACUITY], records[EventKind.DELIRIUM])
    report.merge(validate_cohort(bundle))
    return bundle, report


def _read(src):
    if isinstance(src, (bytes, bytearray)):
        return src
    if hasattr(src, "read"):
        return src.read()
    with open(src, "rb") as fh:
        return fh.read()

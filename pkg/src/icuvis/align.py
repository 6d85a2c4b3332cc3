"""Event-to-frame temporal alignment.

Every clinical event owns a half-open span ``[t + start, t + end)`` relative
to its timestamp. Pain and delirium spans stop 15 minutes short of the event,
which keeps the caregiver's own visit for the assessment out of the window.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, tzinfo
from typing import Optional, Sequence

from .domain import DeliriumLabel, EventKind, Phase, classify_phase

_BIAS_EXCLUSION = timedelta(minutes=-15)


@dataclass(frozen=True)
class WindowPolicy:
    pain: tuple = (timedelta(minutes=-30), timedelta(minutes=-15))
    delirium: tuple = (timedelta(minutes=-60), timedelta(minutes=-15))
    acuity: tuple = (timedelta(hours=-4), timedelta(0))
    min_frames: int = 60

    def __post_init__(self):
        for kind in EventKind:
            start, end = self.offsets(kind)
            if not start < end:
                raise ValueError(f"{kind.value} window: start must precede end")
        for kind in (EventKind.PAIN, EventKind.DELIRIUM):
            if self.offsets(kind)[1] > _BIAS_EXCLUSION:
                raise ValueError(f"{kind.value} window must end at least 15 min before the event")
        if self.min_frames < 1:
            raise ValueError("min_frames must be >= 1")

    def offsets(self, kind: EventKind) -> tuple:
        return getattr(self, EventKind(kind).value)


_DURATION = re.compile(r"^\s*([+-]?)\s*(\d+(?:\.\d+)?)\s*(s|sec|m|min|h|hr)?\s*$", re.I)
_UNIT_SECONDS = {None: 60, "s": 1, "sec": 1, "m": 60, "min": 60, "h": 3600, "hr": 3600}


def parse_duration(text: str) -> timedelta:
    """``-30m``, ``-4h``, ``90s``, ``0``; a bare number means minutes."""
    m = _DURATION.match(text)
    if not m:
        raise ValueError(f"bad duration {text!r}")
    sign = -1 if m.group(1) == "-" else 1
    unit = m.group(3).lower() if m.group(3) else None
    return timedelta(seconds=sign * float(m.group(2)) * _UNIT_SECONDS[unit])


def parse_offsets(text: str) -> tuple:
    """Parse ``"-30m,-15m"`` into a (start, end) offset pair."""
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"window needs 'start,end', got {text!r}")
    return parse_duration(parts[0]), parse_duration(parts[1])


@dataclass(frozen=True)
class EventRef:
    kind: EventKind
    patient_id: str
    timestamp: datetime
    label: object
    record: object = field(default=None, compare=False, repr=False)

    @classmethod
    def of(cls, record) -> "EventRef":
        return cls(record.kind, record.patient_id, record.timestamp, record.label, record)


@dataclass(frozen=True)
class AlignedWindow:
    event: EventRef
    start: datetime
    end: datetime
    phase: Phase
    frames: tuple = ()

    @property
    def span(self) -> tuple:
        return self.start, self.end


@dataclass(frozen=True)
class Exclusion:
    event: EventRef
    reason: str
    frame_count: int = 0


def align_window(event, policy: WindowPolicy = WindowPolicy()) -> tuple:
    start, end = policy.offsets(event.kind)
    t = event.timestamp
    return t + start, t + end


def select_frames(frames: Sequence, span: tuple) -> tuple:
    """Frames with ``start <= timestamp < end``; ``frames`` must be time sorted."""
    start, end = span
    key = _timestamp
    lo = bisect.bisect_left(frames, start, key=key)
    hi = bisect.bisect_left(frames, end, lo=lo, key=key)
    return tuple(frames[lo:hi])


def _timestamp(frame):
    return frame.timestamp


def build_windows(bundle, policy: WindowPolicy = WindowPolicy(), tz: Optional[tzinfo] = None):
    """One window per admissible event, plus the list of excluded events.

    Events are taken in bundle order (pain, acuity, delirium).
    """
    windows, excluded = [], []
    for record in bundle.events():
        ref = EventRef.of(record)
        if ref.label is DeliriumLabel.EXCLUDED:
            excluded.append(Exclusion(ref, "outcome unassessable"))
            continue
        stream = bundle.frames.get(ref.patient_id, ())
        span = align_window(ref, policy)
        frames = select_frames(stream, span)
        if not frames:
            excluded.append(Exclusion(ref, "no coverage"))
            continue
        if len(frames) < policy.min_frames:
            excluded.append(Exclusion(ref, f"insufficient coverage ({len(frames)} < {policy.min_frames} frames)", len(frames)))
            continue
        windows.append(AlignedWindow(ref, span[0], span[1], classify_phase(ref.timestamp, tz), frames))
    return windows, excluded

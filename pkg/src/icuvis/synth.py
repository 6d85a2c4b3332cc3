"""Seeded synthetic cohorts with planted occupancy effects.

Each event gets a block of frames inside its aligned window. Within a block,
visitor presence is a discrete-time birth-death chain: every frame one visitor
arrives with probability ``arrival_rate * cadence / 3600`` and each present
visitor leaves with probability ``cadence / (60 * mean_dwell)``. The patient
is seen lying in bed independently per frame. The stationary expected person
count is therefore ``lying_probability + arrival_rate * mean_dwell / 60``.

Randomness: one master generator (event schedule) plus one generator per
patient derived from ``(seed, patient_index)``, so output does not depend on
how many worker threads build the patients.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Mapping, Optional

import numpy as np

from .align import WindowPolicy
from .domain import (
    AcuityFlags,
    AcuityRecord,
    BoundingBox,
    CamIcu,
    Detection,
    DetectionFrame,
    DeliriumRecord,
    EventKind,
    PainRecord,
    PostureClass,
)
from .ingest import CohortBundle, format_event_rows, write_detection_stream
from .metrics import WindowMetrics

GROUP_LABELS = {
    EventKind.PAIN: ("no_mild", "moderate_severe", "none", "mild", "moderate", "severe"),
    EventKind.ACUITY: ("stable", "unstable"),
    EventKind.DELIRIUM: ("non_delirious", "delirious"),
}

_DVPRS_RANGE = {
    "no_mild": (0, 4),
    "moderate_severe": (5, 10),
    "none": (0, 0),
    "mild": (1, 4),
    "moderate": (5, 6),
    "severe": (7, 10),
}

DEFAULT_START = datetime(2023, 5, 1, tzinfo=timezone(timedelta(hours=-4)))

LYING_BOX = BoundingBox(200.0, 250.0, 440.0, 400.0)


def visitor_box(k: int) -> BoundingBox:
    x0 = 10.0 + (k % 12) * 52.0
    y0 = 60.0 + ((k // 12) % 4) * 120.0
    return BoundingBox(x0, y0, x0 + 40.0, y0 + 110.0)


@dataclass(frozen=True)
class GroupSpec:
    label: str
    count: int
    arrival_rate: float = 0.0  # visitors per hour
    mean_dwell: float = 2.0  # minutes

    @property
    def expected_visitors(self) -> float:
        return self.arrival_rate * self.mean_dwell / 60.0


@dataclass(frozen=True)
class OutcomeSchedule:
    groups: tuple
    day_fraction: float = 0.5

    def group(self, label: str) -> GroupSpec:
        for g in self.groups:
            if g.label == label:
                return g
        raise KeyError(label)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    patients: int = 10
    cadence_s: int = 1
    lying_probability: float = 0.9
    frames_per_window: int = 900
    start: datetime = DEFAULT_START
    confidence: float = 0.9
    confidence_jitter: float = 0.0
    outcomes: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.patients < 1:
            raise ValueError("patients must be >= 1")
        if self.cadence_s < 1:
            raise ValueError("cadence must be a whole number of seconds >= 1")
        if not 0.0 <= self.lying_probability <= 1.0:
            raise ValueError("lying_probability must lie in [0, 1]")
        if self.frames_per_window < 1:
            raise ValueError("frames_per_window must be >= 1")
        if self.start.utcoffset() is None:
            raise ValueError("start needs a zone offset")
        lo, hi = self.confidence - self.confidence_jitter, self.confidence + self.confidence_jitter
        if self.confidence_jitter < 0 or lo < 0 or hi > 1:
            raise ValueError("confidence +/- jitter must stay within [0, 1]")
        for kind, sched in self.outcomes.items():
            kind = EventKind(kind)
            if not 0.0 <= sched.day_fraction <= 1.0:
                raise ValueError(f"{kind.value}: day_fraction must lie in [0, 1]")
            for g in sched.groups:
                if g.label not in GROUP_LABELS[kind]:
                    raise ValueError(f"{kind.value}: unknown group {g.label!r}")
                if g.count < 0:
                    raise ValueError(f"{kind.value}.{g.label}: negative count")
                if g.arrival_rate < 0 or not g.mean_dwell > 0:
                    raise ValueError(f"{kind.value}.{g.label}: rates must be non-negative, dwell positive")
                if g.arrival_rate * self.cadence_s / 3600.0 > 1.0:
                    raise ValueError(f"{kind.value}.{g.label}: arrival probability per frame exceeds 1")
                if self.cadence_s / (60.0 * g.mean_dwell) > 1.0:
                    raise ValueError(f"{kind.value}.{g.label}: departure probability per frame exceeds 1")


def plant_effect(config: SynthConfig, outcome: EventKind, group_means: Mapping[str, float]) -> SynthConfig:
    """Set each group's arrival rate so its stationary occupancy hits the target.

    Solves ``arrival_rate * mean_dwell / 60 = target - lying_probability`` with
    the group's dwell held fixed.
    """
    outcome = EventKind(outcome)
    sched = config.outcomes[outcome]
    groups = []
    for g in sched.groups:
        if g.label in group_means:
            target = group_means[g.label]
            excess = target - config.lying_probability
            if excess < -1e-12:
                raise ValueError(
                    f"infeasible target {target} for {outcome.value}.{g.label}: "
                    f"below lying probability {config.lying_probability}"
                )
            g = replace(g, arrival_rate=max(excess, 0.0) * 60.0 / g.mean_dwell)
        groups.append(g)
    unknown = set(group_means) - {g.label for g in sched.groups}
    if unknown:
        raise ValueError(f"{outcome.value}: no such groups {sorted(unknown)}")
    outcomes = dict(config.outcomes)
    outcomes[outcome] = replace(sched, groups=tuple(groups))
    return replace(config, outcomes=outcomes)


# reference combined-stratum visitation averages per outcome group
DEFAULT_TARGETS = {
    EventKind.PAIN: {"no_mild": 1.64, "moderate_severe": 1.55},
    EventKind.ACUITY: {"stable": 1.52, "unstable": 1.68},
    EventKind.DELIRIUM: {"non_delirious": 1.56, "delirious": 1.76},
}
DEFAULT_COUNTS = {
    EventKind.PAIN: {"no_mild": 60, "moderate_severe": 30},
    EventKind.ACUITY: {"stable": 60, "unstable": 30},
    EventKind.DELIRIUM: {"non_delirious": 40, "delirious": 20},
}


def default_schedule(kind: EventKind, mean_dwell: float = 2.0) -> OutcomeSchedule:
    return OutcomeSchedule(tuple(GroupSpec(g, n, 0.0, mean_dwell) for g, n in DEFAULT_COUNTS[kind].items()))


def default_config(seed: int = 0, **overrides) -> SynthConfig:
    cfg = SynthConfig(seed=seed, outcomes={k: default_schedule(k) for k in EventKind}, **overrides)
    for kind, means in DEFAULT_TARGETS.items():
        cfg = plant_effect(cfg, kind, means)
    return cfg


@dataclass(frozen=True)
class LedgerRow:
    kind: EventKind
    patient_id: str
    timestamp: datetime
    group: str
    expected_occupancy: float
    realized: WindowMetrics


@dataclass(frozen=True)
class _Planned:
    kind: EventKind
    group: GroupSpec
    day: bool
    patient: int
    timestamp: Optional[datetime] = None


def _schedule(config: SynthConfig, rng: np.random.Generator) -> list:
    planned = []
    for kind in EventKind:
        sched = config.outcomes.get(kind)
        if sched is None:
            continue
        for g in sched.groups:
            for _ in range(g.count):
                planned.append((kind, g, sched.day_fraction))
    order = rng.permutation(len(planned))
    day_draw = rng.random(len(planned))
    minute_draw = rng.integers(0, 360, len(planned))
    midnight = config.start.replace(hour=0, minute=0, second=0, microsecond=0)
    slots = {}
    out = []
    for i, idx in enumerate(order):
        kind, g, day_fraction = planned[idx]
        patient = i % config.patients
        day = bool(day_draw[i] < day_fraction)
        n = slots.get((patient, day), 0)
        slots[(patient, day)] = n + 1
        # day slots 10:00-15:59, night slots 22:00-03:59; spans never collide
        hour = 10 if day else 22
        ts = midnight + timedelta(days=n, hours=hour, minutes=int(minute_draw[i]))
        out.append(_Planned(kind, g, day, patient, ts))
    return out


def _patient_id(i: int) -> str:
    return f"P{i + 1:03d}"


def _simulate(events: list, config: SynthConfig, rng: np.random.Generator):
    """Per-frame (lying flags, visitor counts) for every event block of one patient."""
    f = config.frames_per_window
    c = config.cadence_s
    p_arr = np.array([e.group.arrival_rate * c / 3600.0 for e in events])
    p_dep = np.array([c / (60.0 * e.group.mean_dwell) for e in events])
    mu = np.array([e.group.expected_visitors for e in events])
    visitors = np.empty((len(events), f), dtype=np.int64)
    x = rng.poisson(mu)
    for t in range(f):
        visitors[:, t] = x
        x = x - rng.binomial(x, p_dep) + (rng.random(len(events)) < p_arr)
    lying = rng.random((len(events), f)) < config.lying_probability
    return lying, visitors


def _frame_block(ev, policy: WindowPolicy, config: SynthConfig):
    start_off, end_off = policy.offsets(ev.kind)
    span_s = int((end_off - start_off).total_seconds())
    n = min(config.frames_per_window, span_s // config.cadence_s)
    first = ev.timestamp + end_off - timedelta(seconds=n * config.cadence_s)
    return first, n


def _build_patient(index: int, events: list, config: SynthConfig, policy: WindowPolicy):
    pid = _patient_id(index)
    rng = np.random.default_rng([config.seed, index + 1])
    if not events:
        return pid, (), [], [], [], []
    events = sorted(events, key=lambda e: e.timestamp)
    lying, visitors = _simulate(events, config, rng)
    jitter = config.confidence_jitter
    cache: dict = {}
    boxes = [visitor_box(k) for k in range(int(visitors.max()) + 1)]

    def dets(lie: bool, v: int):
        if jitter:
            confs = np.round(config.confidence + rng.uniform(-jitter, jitter, int(lie) + v), 3)
            out = []
            if lie:
                out.append(Detection(LYING_BOX, PostureClass.LYING_IN_BED, float(confs[0])))
            out.extend(Detection(boxes[k], PostureClass.STANDING, float(confs[int(lie) + k])) for k in range(v))
            return tuple(out)
        key = (lie, v)
        hit = cache.get(key)
        if hit is None:
            out = [Detection(LYING_BOX, PostureClass.LYING_IN_BED, config.confidence)] if lie else []
            out.extend(Detection(boxes[k], PostureClass.STANDING, config.confidence) for k in range(v))
            hit = cache[key] = tuple(out)
        return hit

    frames, ledger, pain, acuity, delirium = [], [], [], [], []
    step = timedelta(seconds=config.cadence_s)
    for e, ev in enumerate(events):
        first, n = _frame_block(ev, policy, config)
        lie_row = lying[e, :n].tolist()
        vis_row = visitors[e, :n].tolist()
        t = first
        for k in range(n):
            frames.append(DetectionFrame(pid, t, dets(lie_row[k], vis_row[k])))
            t += step
        counts = lying[e, :n].astype(np.int64) + visitors[e, :n]
        realized = WindowMetrics(float(counts.mean()), float(counts.var()), float(lying[e, :n].mean()), n)
        expected = config.lying_probability + ev.group.expected_visitors
        ledger.append(LedgerRow(ev.kind, pid, ev.timestamp, ev.group.label, expected, realized))
        label = ev.group.label
        if ev.kind is EventKind.PAIN:
            lo, hi = _DVPRS_RANGE[label]
            pain.append(PainRecord(pid, ev.timestamp, int(rng.integers(lo, hi + 1))))
        elif ev.kind is EventKind.ACUITY:
            if label == "unstable":
                bits = rng.integers(1, 16)
                flags = AcuityFlags(*(bool(bits >> b & 1) for b in range(4)))
            else:
                flags = AcuityFlags()
            acuity.append(AcuityRecord(pid, ev.timestamp, flags))
        else:
            cam = CamIcu.POSITIVE if label == "delirious" else CamIcu.NEGATIVE
            delirium.append(
                DeliriumRecord(pid, ev.timestamp, rass=int(rng.integers(-3, 5)), cam_icu=cam, gcs=int(rng.integers(8, 16)))
            )
    return pid, tuple(frames), ledger, pain, acuity, delirium


def generate_cohort(config: SynthConfig, threads: int = 1, policy: WindowPolicy = WindowPolicy()):
    """Build ``(bundle, ledger)``; deterministic for a given config and seed."""
    master = np.random.default_rng([config.seed, 0])
    planned = _schedule(config, master)
    per_patient = [[] for _ in range(config.patients)]
    for ev in planned:
        per_patient[ev.patient].append(ev)

    def work(i):
        return _build_patient(i, per_patient[i], config, policy)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(config.patients)))
    else:
        results = [work(i) for i in range(config.patients)]
    frames = {}
    ledger, pain, acuity, delirium = [], [], [], []
    for pid, fr, led, pa, ac, de in results:
        if fr:
            frames[pid] = fr
        ledger += led
        pain += pa
        acuity += ac
        delirium += de
    bundle = CohortBundle(frames, tuple(pain), tuple(acuity), tuple(delirium))
    return bundle, ledger


LEDGER_COLUMNS = (
    "kind",
    "patient_id",
    "timestamp",
    "group",
    "expected_occupancy",
    "visitation_mean",
    "visitation_variance",
    "lying_proportion",
    "frame_count",
)


def format_ledger(ledger) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEDGER_COLUMNS)
    for r in ledger:
        m = r.realized
        w.writerow(
            (
                r.kind.value,
                r.patient_id,
                r.timestamp.isoformat(),
                r.group,
                repr(r.expected_occupancy),
                repr(m.visitation_mean),
                repr(m.visitation_variance),
                repr(m.lying_proportion),
                m.frame_count,
            )
        )
    return buf.getvalue()


COHORT_FILES = {
    "detections": "detections.tsv",
    EventKind.PAIN: "pain.csv",
    EventKind.ACUITY: "acuity.csv",
    EventKind.DELIRIUM: "delirium.csv",
    "ledger": "ledger.csv",
}


def write_cohort(bundle: CohortBundle, ledger, out_dir) -> dict:
    """Write the cohort in the ingest formats. Returns ``{role: path}``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {role: os.path.join(out_dir, name) for role, name in COHORT_FILES.items()}
    with open(paths["detections"], "w", encoding="utf-8", newline="\n") as fh:
        write_detection_stream(bundle.frames, fh)
    for kind, recs in ((EventKind.PAIN, bundle.pain), (EventKind.ACUITY, bundle.acuity), (EventKind.DELIRIUM, bundle.delirium)):
        with open(paths[kind], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_event_rows(recs, kind))
    with open(paths["ledger"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_ledger(ledger))
    return paths

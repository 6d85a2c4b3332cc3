"""Plain ``key = value`` configuration files and run settings."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from datetime import timedelta, timezone, tzinfo
from typing import Optional

from .align import WindowPolicy, parse_offsets
from .domain import EventKind
from .metrics import DEFAULT_POLICY, CountingPolicy
from .synth import DEFAULT_TARGETS, GROUP_LABELS, GroupSpec, OutcomeSchedule, SynthConfig, default_schedule, plant_effect
from .ingest import parse_timestamp


class ConfigError(ValueError):
    pass


def parse_kv(text: str, source: str = "<config>") -> dict:
    """Lines of ``key = value``; ``#`` starts a comment, blank lines ignored."""
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{n}: empty key")
        out[key.lower()] = value
    return out


def read_kv(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_kv(fh.read(), str(path))


def parse_tz(text: str) -> tzinfo:
    """A fixed offset like ``-04:00`` / ``UTC``, or an IANA zone name."""
    t = text.strip()
    if t.upper() in ("UTC", "Z"):
        return timezone.utc
    if t[:1] in "+-" and ":" in t:
        sign = -1 if t[0] == "-" else 1
        hh, mm = t[1:].split(":")
        return timezone(sign * timedelta(hours=int(hh), minutes=int(mm)))
    from zoneinfo import ZoneInfo

    return ZoneInfo(t)


@dataclass(frozen=True)
class RunConfig:
    detections: Optional[str] = None
    pain: Optional[str] = None
    acuity: Optional[str] = None
    delirium: Optional[str] = None
    out: Optional[str] = None
    policy: WindowPolicy = field(default_factory=WindowPolicy)
    counting: CountingPolicy = DEFAULT_POLICY
    tz: Optional[tzinfo] = None
    adjust: str = "none"
    seed: int = 0
    threads: int = 1

    def inputs(self) -> dict:
        return {k: getattr(self, k) for k in ("detections", "pain", "acuity", "delirium") if getattr(self, k)}


def apply_analysis_keys(cfg: RunConfig, kv: dict) -> RunConfig:
    policy = cfg.policy
    changes = {}
    for kind in EventKind:
        key = f"window.{kind.value}"
        if key in kv:
            changes[kind.value] = parse_offsets(kv[key])
    if "window.min_frames" in kv:
        changes["min_frames"] = int(kv["window.min_frames"])
    if changes:
        policy = replace(policy, **changes)
    updates = {"policy": policy}
    if "metrics.counting_classes" in kv:
        updates["counting"] = CountingPolicy.from_tokens(kv["metrics.counting_classes"])
    if "facility.tz" in kv:
        updates["tz"] = parse_tz(kv["facility.tz"])
    if "analysis.adjust" in kv:
        updates["adjust"] = kv["analysis.adjust"]
    for role in ("detections", "pain", "acuity", "delirium"):
        if f"input.{role}" in kv:
            updates[role] = kv[f"input.{role}"]
    return replace(cfg, **updates)


_SCALARS = {
    "seed": int,
    "patients": int,
    "cadence_s": int,
    "lying_probability": float,
    "frames_per_window": int,
    "confidence": float,
    "confidence_jitter": float,
}


def synth_config_from_kv(kv: dict, seed: Optional[int] = None) -> SynthConfig:
    """Build a generator config from parsed key-value pairs.

    Scalar keys (``seed``, ``patients``, ``lying_probability``, ...) override
    the defaults. Any ``<outcome>.<group>.<field>`` key replaces that outcome's
    default schedule with the groups named in the file; ``field`` is one of
    ``count``, ``arrival_rate``, ``mean_dwell`` or ``target`` (solved for the
    arrival rate). ``<outcome>.day_fraction`` sets the day share of events and
    ``mean_dwell`` the default dwell in minutes. Outcomes not mentioned keep the
    default schedule and planted targets.
    """
    scalars = {key: conv(kv[key]) for key, conv in _SCALARS.items() if key in kv}
    if "start" in kv:
        scalars["start"] = parse_timestamp(kv["start"])
    if seed is not None:
        scalars["seed"] = seed
    dwell = float(kv.get("mean_dwell", 2.0))

    day_fraction = {}
    fields: dict = {}
    for key, value in kv.items():
        if key in _SCALARS or key in ("start", "mean_dwell"):
            continue
        parts = key.split(".")
        try:
            kind = EventKind(parts[0])
        except ValueError:
            raise ConfigError(f"unknown config key {key!r}") from None
        if parts[1:] == ["day_fraction"]:
            day_fraction[kind] = float(value)
        elif len(parts) == 3 and parts[1] in GROUP_LABELS[kind] and parts[2] in _GROUP_FIELDS:
            fields.setdefault(kind, {}).setdefault(parts[1], {})[parts[2]] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")

    outcomes, targets = {}, {}
    for kind in EventKind:
        if kind in fields:
            groups = []
            for label, spec in fields[kind].items():
                groups.append(
                    GroupSpec(
                        label,
                        int(spec.get("count", 0)),
                        float(spec.get("arrival_rate", 0.0)),
                        float(spec.get("mean_dwell", dwell)),
                    )
                )
                if "target" in spec:
                    targets.setdefault(kind, {})[label] = float(spec["target"])
            sched = OutcomeSchedule(tuple(groups))
        else:
            sched = default_schedule(kind, dwell)
            targets[kind] = dict(DEFAULT_TARGETS[kind])
        if kind in day_fraction:
            sched = replace(sched, day_fraction=day_fraction[kind])
        outcomes[kind] = sched
    cfg = SynthConfig(outcomes=outcomes, **scalars)
    for kind, means in targets.items():
        cfg = plant_effect(cfg, kind, means)
    return cfg


_GROUP_FIELDS = ("count", "arrival_rate", "mean_dwell", "target")


def resolve_input_dir(path: str) -> dict:
    names = {"detections": "detections.tsv", "pain": "pain.csv", "acuity": "acuity.csv", "delirium": "delirium.csv"}
    found = {}
    for role, name in names.items():
        p = os.path.join(path, name)
        if os.path.exists(p):
            found[role] = p
    return found

"""Shared domain types and the deterministic labeling rules.

Everything here is immutable and pure. Records are plain frozen dataclasses;
labels derived from clinical scores are exposed as properties so a record can
never disagree with its own label.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import datetime, time, tzinfo
from typing import Optional

FRAME_WIDTH = 640
FRAME_HEIGHT = 576
FRAME_RATE_HZ = 1.0

DAY_START = time(7, 0)
NIGHT_START = time(19, 0)


class ValidationError(ValueError):
    """A record violates a domain invariant.

    ``record`` names the offending record (patient id, line number, ...) when
    the caller knows it.
    """

    def __init__(self, message: str, record: Optional[str] = None):
        self.reason = message
        self.record = record
        super().__init__(f"{record}: {message}" if record else message)


class PostureClass(enum.Enum):
    LYING_IN_BED = "lying_in_bed"
    STANDING = "standing"
    SITTING_BED = "sitting_bed"
    SITTING_CHAIR = "sitting_chair"
    ASSISTED_MOBILITY = "assisted"

    @property
    def token(self) -> str:
        return self.value

    @classmethod
    def from_token(cls, token: str) -> "PostureClass":
        try:
            return _POSTURE_BY_TOKEN[token]
        except KeyError:
            raise ValidationError(f"unknown posture token {token!r}") from None


_POSTURE_BY_TOKEN = {p.value: p for p in PostureClass}


@dataclass(frozen=True)
class FrameGeometry:
    width: float = FRAME_WIDTH
    height: float = FRAME_HEIGHT

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValidationError("frame geometry must be positive")


DEFAULT_GEOMETRY = FrameGeometry()


@dataclass(frozen=True, slots=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValidationError("bbox has non-finite coordinate")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError("degenerate bbox")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def within(self, geometry: FrameGeometry = DEFAULT_GEOMETRY) -> bool:
        return (
            self.x_min >= 0
            and self.y_min >= 0
            and self.x_max <= geometry.width
            and self.y_max <= geometry.height
        )


@dataclass(frozen=True, slots=True)
class Detection:
    bbox: BoundingBox
    posture: PostureClass
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence!r} outside [0, 1]")


@dataclass(frozen=True, slots=True)
class DetectionFrame:
    patient_id: str
    timestamp: datetime
    detections: tuple = ()


def require_aware(t: datetime, what: str = "timestamp") -> datetime:
    if t.tzinfo is None or t.utcoffset() is None:
        raise ValidationError(f"{what} has no zone offset")
    return t


# --- phase ---------------------------------------------------------------


class Phase(enum.Enum):
    DAY = "day"
    NIGHT = "night"


def classify_phase(t: datetime, tz: Optional[tzinfo] = None) -> Phase:
    """Day iff the local clock reads within [07:00, 19:00).

    ``tz`` converts to the facility zone first; by default the timestamp's own
    offset is taken as local time.
    """
    require_aware(t)
    local = t.astimezone(tz) if tz is not None else t
    clock = local.time()
    return Phase.DAY if DAY_START <= clock < NIGHT_START else Phase.NIGHT


# --- pain ----------------------------------------------------------------


class PainSeverity(enum.IntEnum):
    NONE = 0
    MILD = 1
    MODERATE = 2
    SEVERE = 3

    @property
    def group(self) -> "PainGroup":
        return PainGroup.NO_MILD if self <= PainSeverity.MILD else PainGroup.MODERATE_SEVERE


class PainGroup(enum.Enum):
    NO_MILD = "no_mild"
    MODERATE_SEVERE = "moderate_severe"


def pain_severity(dvprs: int, record: Optional[str] = None) -> PainSeverity:
    if isinstance(dvprs, bool) or not isinstance(dvprs, int):
        raise ValidationError(f"DVPRS score {dvprs!r} is not an integer", record)
    if not 0 <= dvprs <= 10:
        raise ValidationError(f"DVPRS score {dvprs} outside [0, 10]", record)
    if dvprs == 0:
        return PainSeverity.NONE
    if dvprs <= 4:
        return PainSeverity.MILD
    if dvprs <= 6:
        return PainSeverity.MODERATE
    return PainSeverity.SEVERE


def pain_group(dvprs: int, record: Optional[str] = None) -> PainGroup:
    return pain_severity(dvprs, record).group


# --- acuity --------------------------------------------------------------


class AcuityLabel(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class AcuityFlags:
    crrt: bool = False
    ventilation: bool = False
    vasopressor: bool = False
    transfusion_ge_10u_24h: bool = False

    def __iter__(self):
        return iter((self.crrt, self.ventilation, self.vasopressor, self.transfusion_ge_10u_24h))


def acuity_label(flags: AcuityFlags) -> AcuityLabel:
    return AcuityLabel.UNSTABLE if any(flags) else AcuityLabel.STABLE


# --- delirium ------------------------------------------------------------


class CamIcu(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNASSESSABLE = "unassessable"


class DeliriumLabel(enum.Enum):
    NON_DELIRIOUS = "non_delirious"
    DELIRIOUS = "delirious"
    EXCLUDED = "excluded"


# RASS at or below this is too sedated for a CAM-ICU assessment.
RASS_UNASSESSABLE_MAX = -4


def delirium_label(record: "DeliriumRecord") -> DeliriumLabel:
    if record.delirious is not None:
        return DeliriumLabel.DELIRIOUS if record.delirious else DeliriumLabel.NON_DELIRIOUS
    if record.rass is None or record.cam_icu is None:
        raise ValidationError(
            "delirium record needs an explicit label or both RASS and CAM-ICU", record.patient_id
        )
    if record.rass <= RASS_UNASSESSABLE_MAX:
        return DeliriumLabel.EXCLUDED
    if record.cam_icu is CamIcu.POSITIVE:
        return DeliriumLabel.DELIRIOUS
    if record.cam_icu is CamIcu.NEGATIVE:
        return DeliriumLabel.NON_DELIRIOUS
    return DeliriumLabel.EXCLUDED


# --- clinical records ----------------------------------------------------


class EventKind(enum.Enum):
    PAIN = "pain"
    ACUITY = "acuity"
    DELIRIUM = "delirium"


@dataclass(frozen=True)
class PainRecord:
    patient_id: str
    timestamp: datetime
    dvprs: int

    kind = EventKind.PAIN

    def __post_init__(self):
        require_aware(self.timestamp)
        pain_severity(self.dvprs, self.patient_id)

    @property
    def severity(self) -> PainSeverity:
        return pain_severity(self.dvprs)

    @property
    def label(self) -> PainGroup:
        return self.severity.group


@dataclass(frozen=True)
class AcuityRecord:
    patient_id: str
    interval_end: datetime
    flags: AcuityFlags = field(default_factory=AcuityFlags)

    kind = EventKind.ACUITY

    def __post_init__(self):
        require_aware(self.interval_end)

    @property
    def timestamp(self) -> datetime:
        return self.interval_end

    @property
    def label(self) -> AcuityLabel:
        return acuity_label(self.flags)


@dataclass(frozen=True)
class DeliriumRecord:
    patient_id: str
    timestamp: datetime
    rass: Optional[int] = None
    cam_icu: Optional[CamIcu] = None
    gcs: Optional[int] = None
    delirious: Optional[bool] = None

    kind = EventKind.DELIRIUM

    def __post_init__(self):
        require_aware(self.timestamp)
        if self.rass is not None and not -5 <= self.rass <= 4:
            raise ValidationError(f"RASS {self.rass} outside [-5, 4]", self.patient_id)
        if self.gcs is not None and not 3 <= self.gcs <= 15:
            raise ValidationError(f"GCS {self.gcs} outside [3, 15]", self.patient_id)
        delirium_label(self)

    @property
    def label(self) -> DeliriumLabel:
        return delirium_label(self)

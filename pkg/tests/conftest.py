from datetime import datetime, timedelta, timezone

import pytest

from icuvis.domain import BoundingBox, Detection, DetectionFrame, PostureClass

EDT = timezone(timedelta(hours=-4))


def ts(hh, mm=0, ss=0, day=2):
    return datetime(2023, 5, day, hh, mm, ss, tzinfo=EDT)


def det(posture=PostureClass.LYING_IN_BED, conf=0.9, box=(10, 10, 100, 100)):
    return Detection(BoundingBox(*map(float, box)), posture, conf)


def frame(t, *postures, pid="P01"):
    return DetectionFrame(pid, t, tuple(det(p) for p in postures))


def stream(start, n, *postures, pid="P01", step=1):
    return tuple(frame(start + timedelta(seconds=i * step), *postures, pid=pid) for i in range(n))


@pytest.fixture
def t0():
    return ts(14)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")

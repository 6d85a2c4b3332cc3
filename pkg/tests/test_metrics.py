import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from icuvis.domain import PostureClass as P
from icuvis.metrics import CountingPolicy, person_count, window_metrics

from conftest import frame, ts


def two_pass(counts):
    n = len(counts)
    mean = sum(counts) / n
    return mean, sum((c - mean) ** 2 for c in counts) / n


def frames_with_counts(counts, lying_all=True):
    out = []
    for i, c in enumerate(counts):
        postures = ([P.LYING_IN_BED] if lying_all and c else []) + [P.STANDING] * (c - (1 if lying_all and c else 0))
        out.append(frame(ts(10, 0, i % 60).replace(minute=i // 60), *postures))
    return out


def test_person_count_default_policy(t0):
    assert person_count(frame(t0, P.LYING_IN_BED, P.STANDING)) == 2
    assert person_count(frame(t0, P.SITTING_CHAIR)) == 0
    assert person_count(frame(t0)) == 0


def test_person_count_custom_policy(t0):
    pol = CountingPolicy.from_tokens("sitting_chair,standing")
    assert person_count(frame(t0, P.SITTING_CHAIR, P.LYING_IN_BED, P.STANDING), pol) == 2
    with pytest.raises(ValueError):
        CountingPolicy(frozenset())


def test_counts_1_1_2():
    m = window_metrics(frames_with_counts([1, 1, 2]))
    mean, var = two_pass([1, 1, 2])
    assert m.visitation_mean == pytest.approx(4 / 3, rel=1e-15) == mean
    assert m.visitation_variance == pytest.approx(2 / 9, rel=1e-15)
    assert var == pytest.approx(2 / 9, rel=1e-15)
    assert m.frame_count == 3


def test_all_lying():
    m = window_metrics([frame(ts(10, 0, i), P.LYING_IN_BED) for i in range(30)])
    assert (m.visitation_mean, m.visitation_variance, m.lying_proportion) == (1.0, 0.0, 1.0)


def test_all_empty():
    m = window_metrics([frame(ts(10, 0, i), P.SITTING_BED) for i in range(5)])
    assert (m.visitation_mean, m.visitation_variance, m.lying_proportion) == (0.0, 0.0, 0.0)


def test_lying_is_frame_level(t0):
    m = window_metrics([frame(t0, P.LYING_IN_BED, P.LYING_IN_BED), frame(ts(14, 0, 1), P.STANDING)])
    assert m.lying_proportion == 0.5


def test_empty_window():
    with pytest.raises(ValueError, match="empty window"):
        window_metrics([])


counts_st = st.lists(st.integers(0, 6), min_size=1, max_size=60)


@given(counts_st, st.randoms(use_true_random=False))
def test_permutation_invariant(counts, rnd):
    frames = frames_with_counts(counts)
    shuffled = frames[:]
    rnd.shuffle(shuffled)
    assert window_metrics(frames) == window_metrics(shuffled)


@given(counts_st)
def test_zero_variance_iff_constant(counts):
    m = window_metrics(frames_with_counts(counts))
    assert (m.visitation_variance == 0) == (len(set(counts)) == 1)
    assert 0 <= m.lying_proportion <= 1 and m.visitation_variance >= 0


@given(st.lists(st.integers(0, 6), min_size=1, max_size=30).map(lambda c: c * 2))
def test_adding_mean_frame(counts):
    # doubled lists have integer-valued means only sometimes; keep those
    s = sum(counts)
    if s % len(counts):
        return
    mu = s // len(counts)
    before = window_metrics(frames_with_counts(counts))
    after = window_metrics(frames_with_counts(counts + [mu]))
    assert after.visitation_mean == before.visitation_mean
    assert after.visitation_variance <= before.visitation_variance


def test_matches_two_pass_on_random_windows():
    rng = random.Random(11)
    for _ in range(500):
        counts = [rng.randint(0, 5) for _ in range(rng.randint(1, 400))]
        m = window_metrics(frames_with_counts(counts))
        mean, var = two_pass(counts)
        assert math.isclose(m.visitation_mean, mean, rel_tol=1e-12)
        assert math.isclose(m.visitation_variance, var, rel_tol=1e-12, abs_tol=0 if var else 1e-300)

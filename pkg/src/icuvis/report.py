"""Outcome association analysis and table rendering.

For each outcome, the three window metrics are compared between the two
outcome groups within the Day, Night and Combined strata using Mann-Whitney U.
Normality of each group is checked first and recorded as a note only.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .align import AlignedWindow
from .domain import AcuityLabel, DeliriumLabel, EventKind, PainGroup, PainSeverity, Phase
from .metrics import DEFAULT_POLICY, CountingPolicy, WindowMetrics, window_metrics
from .stats import DegenerateSampleError, TestResult, adjust, dagostino_k2, kruskal_wallis, mann_whitney_u
from .stats.normality import MIN_OMNIBUS_N


class Metric(enum.Enum):
    VISITATION_AVERAGE = "visitation_average"
    VISITATION_VARIANCE = "visitation_variance"
    LYING_PROPORTION = "lying_proportion"

    def of(self, m: WindowMetrics) -> float:
        if self is Metric.VISITATION_AVERAGE:
            return m.visitation_mean
        if self is Metric.VISITATION_VARIANCE:
            return m.visitation_variance
        return m.lying_proportion


class Stratum(enum.Enum):
    DAY = "day"
    NIGHT = "night"
    COMBINED = "combined"


METRIC_TITLES = {
    Metric.VISITATION_AVERAGE: "Visitation Average",
    Metric.VISITATION_VARIANCE: "Visitation Variance",
    Metric.LYING_PROPORTION: "Lying in Bed Proportion",
}

OUTCOME_TITLES = {
    EventKind.PAIN: "Pain Associations with Model Metrics",
    EventKind.ACUITY: "Patient Acuity Associations with Model Metrics",
    EventKind.DELIRIUM: "Delirium Associations with Model Metrics",
}

# (reference group, comparison group); U is reported for the reference group
OUTCOME_GROUPS = {
    EventKind.PAIN: (PainGroup.NO_MILD, PainGroup.MODERATE_SEVERE),
    EventKind.ACUITY: (AcuityLabel.STABLE, AcuityLabel.UNSTABLE),
    EventKind.DELIRIUM: (DeliriumLabel.NON_DELIRIOUS, DeliriumLabel.DELIRIOUS),
}

GROUP_TITLES = {
    PainGroup.NO_MILD: "No/Mild pain",
    PainGroup.MODERATE_SEVERE: "Moderate/High Pain",
    AcuityLabel.STABLE: "Stable",
    AcuityLabel.UNSTABLE: "Unstable",
    DeliriumLabel.NON_DELIRIOUS: "Non-Delirious",
    DeliriumLabel.DELIRIOUS: "Delirium",
}

MIN_GROUP_N = 2
INSUFFICIENT = "insufficient data"


@dataclass(frozen=True)
class WindowResult:
    window: AlignedWindow
    metrics: WindowMetrics

    @property
    def kind(self) -> EventKind:
        return self.window.event.kind

    @property
    def phase(self) -> Phase:
        return self.window.phase

    @property
    def group(self):
        label = self.window.event.label
        return label.group if isinstance(label, PainSeverity) else label


def measure_windows(windows: Sequence[AlignedWindow], policy: CountingPolicy = DEFAULT_POLICY, threads: int = 1):
    def one(w):
        return WindowResult(w, window_metrics(w.frames, policy))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, windows))
    return [one(w) for w in windows]


@dataclass(frozen=True)
class GroupStats:
    label: object
    n: int
    mean: float
    std: float
    min: float
    max: float

    @classmethod
    def of(cls, label, values: Sequence[float]) -> "GroupStats":
        n = len(values)
        if n == 0:
            nan = float("nan")
            return cls(label, 0, nan, nan, nan, nan)
        mean = math.fsum(values) / n
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
        return cls(label, n, mean, std, min(values), max(values))


@dataclass(frozen=True)
class AssociationRow:
    outcome: EventKind
    metric: Metric
    stratum: Stratum
    groups: tuple
    test: Optional[TestResult] = None
    adjusted_p: Optional[float] = None
    notes: tuple = ()


def _in_stratum(r: WindowResult, stratum: Stratum) -> bool:
    if stratum is Stratum.COMBINED:
        return True
    return r.phase.value == stratum.value


def _fmt_p(p: float) -> str:
    if p < 1e-3:
        return f"{p:.2e}"
    return f"{p:.3f}"


def _normality_note(label, values) -> str:
    tag = getattr(label, "value", str(label))
    if len(values) < MIN_OMNIBUS_N:
        return f"normality[{tag}]: skipped (n<{MIN_OMNIBUS_N})"
    try:
        res = dagostino_k2(values)
    except DegenerateSampleError:
        return f"normality[{tag}]: skipped (zero variance)"
    verdict = "rejected" if res.p_value < 0.05 else "not rejected"
    return f"normality[{tag}]: K2={res.statistic:.3f} p={_fmt_p(res.p_value)} {verdict}"


def run_association(results: Sequence[WindowResult], outcome: EventKind, adjust_method: str = "none") -> list:
    """Nine rows (3 metrics x Day/Night/Combined) comparing the outcome's two groups."""
    outcome = EventKind(outcome)
    ref, cmp_ = OUTCOME_GROUPS[outcome]
    mine = [r for r in results if r.kind is outcome]
    rows = []
    for metric in Metric:
        for stratum in Stratum:
            sub = [r for r in mine if _in_stratum(r, stratum)]
            a = [metric.of(r.metrics) for r in sub if r.group is ref]
            b = [metric.of(r.metrics) for r in sub if r.group is cmp_]
            groups = (GroupStats.of(ref, a), GroupStats.of(cmp_, b))
            notes = [_normality_note(ref, a), _normality_note(cmp_, b)]
            test = None
            if len(a) < MIN_GROUP_N or len(b) < MIN_GROUP_N:
                notes.insert(0, INSUFFICIENT)
            else:
                try:
                    test = mann_whitney_u(a, b)
                except DegenerateSampleError as exc:
                    notes.insert(0, str(exc))
            rows.append(AssociationRow(outcome, metric, stratum, groups, test, None, tuple(notes)))
    if adjust_method != "none":
        tested = [i for i, r in enumerate(rows) if r.test is not None]
        adj = adjust([rows[i].test.p_value for i in tested], adjust_method)
        for i, p in zip(tested, adj):
            r = rows[i]
            rows[i] = AssociationRow(r.outcome, r.metric, r.stratum, r.groups, r.test, p, r.notes + (f"adjusted: {adjust_method}",))
    return rows


def run_pain_four_group(results: Sequence[WindowResult]) -> TestResult:
    """Kruskal-Wallis on visitation average across the four pain severities."""
    groups = []
    for sev in PainSeverity:
        vals = [
            r.metrics.visitation_mean
            for r in results
            if r.kind is EventKind.PAIN and r.window.event.record.severity is sev
        ]
        if vals:
            groups.append((sev, vals))
    if len(groups) < 2:
        raise ValueError("need at least two non-empty pain groups")
    res = kruskal_wallis([v for _, v in groups])
    present = "groups: " + ",".join(s.name.lower() for s, _ in groups)
    return TestResult(res.statistic, res.p_value, res.n, res.method, res.notes + (present,))


# --- rendering -----------------------------------------------------------

CSV_COLUMNS = ("outcome", "metric", "stratum", "group", "n", "mean", "std", "min", "max", "u_statistic", "p", "adjusted_p", "notes")


def _f2(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.2f}"


def _render_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        for g in r.groups:
            w.writerow(
                (
                    r.outcome.value,
                    r.metric.value,
                    r.stratum.value,
                    g.label.value,
                    g.n,
                    _f2(g.mean),
                    _f2(g.std),
                    _f2(g.min),
                    _f2(g.max),
                    "" if r.test is None else f"{r.test.statistic:.1f}",
                    "" if r.test is None else _fmt_p(r.test.p_value),
                    "" if r.adjusted_p is None else _fmt_p(r.adjusted_p),
                    "; ".join(r.notes),
                )
            )
    return buf.getvalue()


def _cell_mean(g: GroupStats) -> str:
    return "-" if g.n == 0 else f"{g.mean:.2f} ({g.std:.2f})"


def _cell_range(g: GroupStats) -> str:
    return "-" if g.n == 0 else f"{g.max:.2f} ({g.min:.2f})"


def _render_text(rows) -> str:
    out = []
    by_outcome = {}
    for r in rows:
        by_outcome.setdefault(r.outcome, []).append(r)
    for outcome in EventKind:
        table = by_outcome.get(outcome)
        if not table:
            continue
        adjusted = any(r.adjusted_p is not None for r in table)
        g0, g1 = (GROUP_TITLES[g] for g in OUTCOME_GROUPS[outcome])
        header = ["Model Metrics", f"{g0} N", "Mean (STD)", "Max (Min)", f"{g1} N", "Mean (STD)", "Max (Min)", "p-value"]
        if adjusted:
            header.append("adj. p")
        body = []
        for metric in Metric:
            body.append([METRIC_TITLES[metric]] + [""] * (len(header) - 1))
            for r in (r for r in table if r.metric is metric):
                a, b = r.groups
                p = INSUFFICIENT if r.test is None and INSUFFICIENT in r.notes else (
                    "n/a" if r.test is None else _fmt_p(r.test.p_value)
                )
                line = ["    " + r.stratum.value.capitalize(), str(a.n), _cell_mean(a), _cell_range(a),
                        str(b.n), _cell_mean(b), _cell_range(b), p]
                if adjusted:
                    line.append("" if r.adjusted_p is None else _fmt_p(r.adjusted_p))
                body.append(line)
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
        out.append(OUTCOME_TITLES[outcome])
        out.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
        out.append("  ".join("-" * w for w in widths))
        out.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in body)
        out.append("")
    return "\n".join(out)


def render_report(rows: Sequence[AssociationRow], fmt: str = "text") -> str:
    if fmt == "csv":
        return _render_csv(rows)
    if fmt == "text":
        return _render_text(rows)
    raise ValueError(f"unknown format {fmt!r}")


def render_four_group(res: TestResult) -> str:
    return f"Pain four-group Kruskal-Wallis (visitation average): H={res.statistic:.3f} p={_fmt_p(res.p_value)} n={list(res.n)}\n"


HIST_BIN_WIDTH = 0.25


def histogram_bins(results: Sequence[WindowResult], width: float = HIST_BIN_WIDTH) -> str:
    """CSV of visitation-average histogram counts per outcome, group and phase."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("outcome", "group", "stratum", "bin_start", "bin_end", "count"))
    for outcome in EventKind:
        mine = [r for r in results if r.kind is outcome]
        if not mine:
            continue
        top = max(r.metrics.visitation_mean for r in mine)
        nbins = max(1, int(math.floor(top / width)) + 1)
        for group in OUTCOME_GROUPS[outcome]:
            for phase in Phase:
                counts = [0] * nbins
                for r in mine:
                    if r.group is group and r.phase is phase:
                        counts[min(int(r.metrics.visitation_mean // width), nbins - 1)] += 1
                for i, c in enumerate(counts):
                    w.writerow((outcome.value, group.value, phase.value, f"{i * width:.2f}", f"{(i + 1) * width:.2f}", c))
    return buf.getvalue()

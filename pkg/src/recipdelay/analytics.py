"""Reciprocal-relation extraction and the delay measurements built on it."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np

from .temporal_graph import DynamicDigraph

WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")
WEDNESDAY = 2
# 2007-10-31, the day-0 anchor of the original crawl, was a Wednesday.
DEFAULT_ANCHOR_WEEKDAY = WEDNESDAY
DEFAULT_DELAY_CUTOFF = 50
DEGREE_THRESHOLDS = (10, 2000)
COMMON_NEIGHBOR_EDGES = (0, 20, 40, 60, 80, 100)


class FitError(ValueError):
    pass


class ReciprocalRelation(NamedTuple):
    u: Hashable
    v: Hashable
    t1: int
    t2: int
    delay: int


@dataclass(frozen=True)
class DensificationFit:
    slope: float
    intercept: float
    t_min: int
    t_max: int
    residual_rms: float
    points: int


@dataclass(frozen=True)
class DelayHistogram:
    cutoff: int
    counts: np.ndarray  # counts[d] for d = 0..cutoff
    overflow: int
    total: int


# -- extraction ---------------------------------------------------------------

def extract_reciprocal_relations(g: DynamicDigraph) -> list[ReciprocalRelation]:
    """One relation per mutually-linked pair, initiator = earlier edge.

    Same-day pairs are ordered by stream position. The result is sorted by
    (t2, t1, stream position of the initiating edge).
    """
    out = []
    for u, v, info in g.edges():
        back = g.edge(v, u)
        if back is None:
            continue
        if (info.day, info.position) < (back.day, back.position):
            out.append((back.day, info.day, info.position, ReciprocalRelation(u, v, info.day, back.day, back.day - info.day)))
    out.sort(key=lambda r: r[:3])
    return [r[3] for r in out]


# -- evolution statistics -------------------------------------------------------

def _cumulative(days: Iterable[int], length: int) -> np.ndarray:
    arr = np.fromiter(days, dtype=np.int64)
    if length <= 0:
        return np.zeros(0, dtype=np.int64)
    return np.cumsum(np.bincount(arr, minlength=length)[:length])


def growth_series(g: DynamicDigraph, relations: Sequence[ReciprocalRelation] | None = None) -> list[tuple[int, int, int, int]]:
    """Rows ``(t, n(t), e(t), reciprocal_count(t))`` for t = 0..max day."""
    t_max = g.max_day
    if t_max < 0:
        return []
    if relations is None:
        relations = extract_reciprocal_relations(g)
    length = t_max + 1
    n = _cumulative((g.join_day(v) for v in g.nodes()), length)
    e = _cumulative((info.day for _, _, info in g.edges()), length)
    r = _cumulative((rel.t2 for rel in relations), length)
    return [(t, int(n[t]), int(e[t]), int(r[t])) for t in range(length)]


def reciprocity_rate_series(g: DynamicDigraph, relations: Sequence[ReciprocalRelation] | None = None) -> list[tuple[int, float]]:
    """Fraction of the edges existing at t whose reverse edge also exists at t."""
    rows = growth_series(g, relations)
    return [(t, (2.0 * r / e) if e else 0.0) for t, _, e, r in rows]


def densification_fit(g: DynamicDigraph, t_range: tuple[int, int] | None = None) -> DensificationFit:
    """Least-squares line through (log n(t), log e(t)), one point per day."""
    t_max = g.max_day
    lo, hi = (0, t_max) if t_range is None else t_range
    hi = min(hi, t_max)
    ts, xs, ys = [], [], []
    for t in range(max(lo, 0), hi + 1):
        n, e = g.snapshot_counts(t)
        if n >= 2 and e >= 1:
            ts.append(t)
            xs.append(math.log(n))
            ys.append(math.log(e))
    return _loglog_fit(np.array(xs), np.array(ys), ts)


def _loglog_fit(x: np.ndarray, y: np.ndarray, ts: Sequence[int]) -> DensificationFit:
    if len(x) < 3:
        raise FitError(f"densification fit needs at least 3 snapshots, got {len(x)}")
    if np.ptp(x) == 0:
        raise FitError("node count is constant over the fit range")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, intercept])
    return DensificationFit(
        slope=float(slope),
        intercept=float(intercept),
        t_min=int(ts[0]),
        t_max=int(ts[-1]),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        points=len(x),
    )


def delay_histogram(relations: Iterable[ReciprocalRelation], cutoff: int = DEFAULT_DELAY_CUTOFF) -> DelayHistogram:
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    counts = np.zeros(cutoff + 1, dtype=np.int64)
    overflow = total = 0
    for rel in relations:
        total += 1
        if rel.delay > cutoff:
            overflow += 1
        else:
            counts[rel.delay] += 1
    return DelayHistogram(cutoff, counts, overflow, total)


def loglog_slope(hist: DelayHistogram) -> float:
    """Slope of log(count) vs log(delay) over nonzero bins with delay >= 1."""
    d = np.arange(1, hist.cutoff + 1)
    c = hist.counts[1:]
    mask = c > 0
    if mask.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(d[mask]), np.log(c[mask]), 1)
    return float(slope)


# -- temporal patterns ---------------------------------------------------------

def day_of_week(t: int, anchor_weekday: int = DEFAULT_ANCHOR_WEEKDAY) -> int:
    """Weekday of day index ``t`` (0 = Monday) given the weekday of day 0."""
    if not 0 <= anchor_weekday <= 6:
        raise ValueError("anchor_weekday must be in 0..6")
    return (anchor_weekday + t) % 7


def is_weekend(t: int, anchor_weekday: int = DEFAULT_ANCHOR_WEEKDAY) -> bool:
    return day_of_week(t, anchor_weekday) >= 5


def _group_mean(keys: Iterable, delays: Iterable[int]) -> dict:
    sums: dict = defaultdict(int)
    counts: dict = defaultdict(int)
    for k, d in zip(keys, delays):
        sums[k] += d
        counts[k] += 1
    return {k: (sums[k] / counts[k], counts[k]) for k in sums}


def avg_delay_by_join_time(
    relations: Sequence[ReciprocalRelation],
    g: DynamicDigraph,
    role: str = "source",
    bucket_width: int = 30,
) -> list[tuple[int, float, int]]:
    """Rows ``(bucket_start, mean_delay, count)``; empty buckets are omitted."""
    if bucket_width < 1:
        raise ValueError("bucket_width must be >= 1")
    if role not in ("source", "target"):
        raise ValueError(f"role must be 'source' or 'target', not {role!r}")
    keys = [g.join_day(r.u if role == "source" else r.v) // bucket_width for r in relations]
    stats = _group_mean(keys, (r.delay for r in relations))
    return [(b * bucket_width, m, c) for b, (m, c) in sorted(stats.items())]


def weekly_patterns(
    relations: Sequence[ReciprocalRelation], anchor_weekday: int = DEFAULT_ANCHOR_WEEKDAY
) -> tuple[list[float], list[int]]:
    """Mean delay by weekday of initiation, and completions by weekday of t2.

    Weekdays with no initiations get NaN for the mean.
    """
    sums = [0] * 7
    counts = [0] * 7
    completions = [0] * 7
    for r in relations:
        wd = day_of_week(r.t1, anchor_weekday)
        sums[wd] += r.delay
        counts[wd] += 1
        completions[day_of_week(r.t2, anchor_weekday)] += 1
    means = [s / c if c else float("nan") for s, c in zip(sums, counts)]
    return means, completions


def delay_sequences(relations: Iterable[ReciprocalRelation], delay_cutoff: int | None = None) -> dict:
    """Each target user's delays in reciprocation order (t2, then t1)."""
    seqs: dict = defaultdict(list)
    for r in relations:
        if delay_cutoff is not None and r.delay > delay_cutoff:
            continue
        seqs[r.v].append((r.t2, r.t1, r.delay))
    return {v: [d for *_, d in sorted(items, key=lambda x: x[:2])] for v, items in seqs.items()}


def sequential_pk_error(
    relations: Sequence[ReciprocalRelation],
    k_values: Iterable[int] = range(1, 9),
    delay_cutoff: int = DEFAULT_DELAY_CUTOFF,
) -> list[tuple[int, float, float, int]]:
    """Pooled error of predicting each delay by the mean of the previous k.

    Returns rows ``(k, MAE, RMSE, n_predictions)``; a k with no predictable
    points gets NaN errors.
    """
    if delay_cutoff <= 0:
        raise ValueError("delay_cutoff must be positive")
    seqs = delay_sequences(relations, delay_cutoff)
    rows = []
    for k in k_values:
        if k < 1:
            raise ValueError("k must be >= 1")
        errs = []
        for seq in seqs.values():
            if len(seq) <= k:
                continue
            arr = np.asarray(seq, dtype=float)
            csum = np.concatenate([[0.0], np.cumsum(arr)])
            idx = np.arange(k, len(arr))
            pred = (csum[idx] - csum[idx - k]) / k
            errs.append(arr[idx] - pred)
        if errs:
            e = np.concatenate(errs)
            rows.append((k, float(np.mean(np.abs(e))), float(np.sqrt(np.mean(e**2))), len(e)))
        else:
            rows.append((k, float("nan"), float("nan"), 0))
    return rows


# -- structural patterns ---------------------------------------------------------

def degree_bucket(degree: int, thresholds: tuple[int, int] = DEGREE_THRESHOLDS) -> str:
    low, high = thresholds
    if degree < low:
        return "low"
    if degree > high:
        return "high"
    return "normal"


def avg_delay_by_degree_bucket(
    relations: Sequence[ReciprocalRelation],
    g: DynamicDigraph,
    degree_kind: str = "in",
    role: str = "source",
    thresholds: tuple[int, int] = DEGREE_THRESHOLDS,
) -> list[tuple[str, float, int]]:
    """Mean delay for low / normal / high degree at the initiating day.

    All three rows are always present; an empty bucket has NaN mean.
    """
    low, high = thresholds
    if not low < high:
        raise ValueError("thresholds must satisfy low < high")
    if degree_kind not in ("in", "out"):
        raise ValueError(f"degree_kind must be 'in' or 'out', not {degree_kind!r}")
    if role not in ("source", "target"):
        raise ValueError(f"role must be 'source' or 'target', not {role!r}")
    query = g.indegree_at if degree_kind == "in" else g.outdegree_at
    keys = [degree_bucket(query(r.u if role == "source" else r.v, r.t1), thresholds) for r in relations]
    stats = _group_mean(keys, (r.delay for r in relations))
    return [(b, *stats.get(b, (float("nan"), 0))) for b in ("low", "normal", "high")]


def common_neighbor_range(count: int) -> str:
    edges = COMMON_NEIGHBOR_EDGES
    for lo, hi in zip(edges, edges[1:]):
        if lo <= count < hi:
            return f"[{lo},{hi})"
    return f"[{edges[-1]},inf)"


COMMON_NEIGHBOR_RANGES = tuple(common_neighbor_range(c) for c in COMMON_NEIGHBOR_EDGES)


def avg_delay_by_common_neighbors(
    relations: Sequence[ReciprocalRelation], g: DynamicDigraph, kind: str = "followees"
) -> list[tuple[str, float, int]]:
    """Mean delay over the six fixed common-neighbour ranges, evaluated at t1."""
    if kind not in ("followees", "followers"):
        raise ValueError(f"kind must be 'followees' or 'followers', not {kind!r}")
    query = g.common_followees_at if kind == "followees" else g.common_followers_at
    keys = [common_neighbor_range(query(r.u, r.v, r.t1)) for r in relations]
    stats = _group_mean(keys, (r.delay for r in relations))
    return [(rng, *stats.get(rng, (float("nan"), 0))) for rng in COMMON_NEIGHBOR_RANGES]


# -- CSV output ------------------------------------------------------------------

def format_value(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    return str(x)


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(x) for x in row])

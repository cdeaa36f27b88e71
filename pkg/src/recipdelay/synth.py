"""Seeded synthetic follow networks with planted reciprocation delays.

Users arrive with exponentially growing intensity, follow targets chosen
by preferential attachment on indegree, and each follow is reciprocated
with probability ``p_reciprocate`` after a delay drawn from

    max(1, round_half_up(x . w_star + offset(v) + noise))

where ``x`` is the relation's feature vector on its initiating day,
computed by :func:`recipdelay.features.extract_features` on the graph as
generated so far.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .analytics import DEFAULT_ANCHOR_WEEKDAY, DEFAULT_DELAY_CUTOFF
from .features import DEFAULT_K, N_FEATURES, DelayHistory, extract_features
from .temporal_graph import DynamicDigraph, TemporalEdge

# Raw-feature coefficients (FEATURE_NAMES order).
DEFAULT_W_STAR = (
    0.0,     # t_u
    0.0,     # t_v
    -0.004,  # age_u
    0.01,    # age_v
    -1.5,    # weekend
    0.15,    # avg_prev_k_delays_v
    0.15,    # avg_all_delays_v
    -0.02,   # indeg_u
    0.03,    # indeg_v
    -0.01,   # outdeg_u
    0.02,    # outdeg_v
    -0.3,    # common_followees
    -0.3,    # common_followers
    4.0,     # bias
)


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 500
    horizon: int = 365
    growth: float = 3.0
    initial_follows: int = 3
    follow_rate: float = 0.2
    pa_strength: float = 1.0
    p_reciprocate: float = 0.6
    w_star: tuple = DEFAULT_W_STAR
    sigma_user: float = 5.0
    sigma_noise: float = 0.5
    k: int = DEFAULT_K
    fill_value: float = 5.0
    history_cutoff: int | None = DEFAULT_DELAY_CUTOFF
    anchor_weekday: int = DEFAULT_ANCHOR_WEEKDAY
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_reciprocate <= 1.0:
            raise ValueError("p_reciprocate must be in [0, 1]")
        if self.sigma_user < 0 or self.sigma_noise < 0 or self.pa_strength < 0 or self.follow_rate < 0:
            raise ValueError("scales and rates must be nonnegative")
        if self.n_users < 2 or self.horizon < 1:
            raise ValueError("need at least 2 users and 1 day")
        if len(self.w_star) != N_FEATURES:
            raise ValueError(f"w_star must have {N_FEATURES} entries")


class PlantedRelation(NamedTuple):
    u: str
    v: str
    t1: int
    t2: int
    planted_delay: int
    offset_v: float


@dataclass
class SynthResult:
    edges: list[TemporalEdge]
    truth: list[PlantedRelation]
    features: dict = field(default_factory=dict)  # (u, v, t1) -> x at initiation
    offsets: dict = field(default_factory=dict)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _arrival_days(n: int, horizon: int, growth: float, rng: np.random.Generator) -> np.ndarray:
    q = rng.random(n)
    if growth == 0:
        t = q * horizon
    else:
        t = horizon * np.log1p(q * math.expm1(growth)) / growth
    days = np.minimum(np.floor(t).astype(np.int64), horizon - 1)
    days[:2] = 0
    return np.sort(days)


def generate(config: SynthConfig = SynthConfig()) -> SynthResult:
    rng = np.random.default_rng(config.seed)
    w_star = np.asarray(config.w_star, dtype=float)
    names = [f"u{i}" for i in range(config.n_users)]
    arrivals = _arrival_days(config.n_users, config.horizon, config.growth, rng)
    offsets = rng.normal(0.0, config.sigma_user, config.n_users) if config.sigma_user > 0 else np.zeros(config.n_users)

    g = DynamicDigraph()
    history = DelayHistory(delay_cutoff=config.history_cutoff)
    edges: list[TemporalEdge] = []
    truth: list[PlantedRelation] = []
    feats: dict = {}
    pending: set = set()
    queue: list = []  # (t2, t1, seq, u, v, delay)
    present: list[int] = []
    in_tickets: list[int] = []  # dst of every edge, for indegree-proportional draws
    seq = 0
    next_arrival = 0

    def add(src: int, dst: int, day: int) -> None:
        g.add_edge(names[src], names[dst], day)
        edges.append(TemporalEdge(names[src], names[dst], day))
        in_tickets.append(dst)

    def pick_target(src: int) -> int | None:
        n_base = len(present)
        mass_pa = config.pa_strength * len(in_tickets)
        for _ in range(20):
            if rng.random() * (n_base + mass_pa) < n_base:
                dst = present[int(rng.integers(n_base))]
            else:
                dst = in_tickets[int(rng.integers(len(in_tickets)))]
            if dst == src:
                continue
            a, b = names[src], names[dst]
            if g.has_edge(a, b) or g.has_edge(b, a) or (src, dst) in pending or (dst, src) in pending:
                continue
            return dst
        return None

    for t in range(config.horizon):
        # follow-backs due today, in initiation order
        due = []
        while queue and queue[0][0] == t:
            due.append(heapq.heappop(queue))
        for t2, t1, _, u, v, delay in due:
            pending.discard((u, v))
            add(v, u, t2)
            history.add(names[v], t2, delay)
            truth.append(PlantedRelation(names[u], names[v], t1, t2, delay, float(offsets[v])))

        initiated: list[tuple[int, int]] = []
        while next_arrival < config.n_users and arrivals[next_arrival] == t:
            newcomer = next_arrival
            next_arrival += 1
            present.append(newcomer)
            for _ in range(config.initial_follows):
                if len(present) < 2:
                    break
                dst = pick_target(newcomer)
                if dst is not None:
                    add(newcomer, dst, t)
                    initiated.append((newcomer, dst))
        n_active = int(rng.poisson(config.follow_rate * len(present))) if len(present) > 1 else 0
        for _ in range(n_active):
            src = present[int(rng.integers(len(present)))]
            dst = pick_target(src)
            if dst is not None:
                add(src, dst, t)
                initiated.append((src, dst))

        # features see every edge dated <= t
        for u, v in initiated:
            x = extract_features(
                g, history, names[u], names[v], t, config.k, config.fill_value, config.anchor_weekday
            )
            feats[(names[u], names[v], t)] = x
            if rng.random() >= config.p_reciprocate:
                continue
            noise = rng.normal(0.0, config.sigma_noise) if config.sigma_noise > 0 else 0.0
            delay = max(1, round_half_up(float(x @ w_star) + float(offsets[v]) + noise))
            if t + delay >= config.horizon:
                continue  # censored by the end of the observation window
            pending.add((u, v))
            heapq.heappush(queue, (t + delay, t, seq, u, v, delay))
            seq += 1

    return SynthResult(
        edges=edges,
        truth=truth,
        features=feats,
        offsets={names[i]: float(o) for i, o in enumerate(offsets)},
    )


def planted_delay(x, w_star, offset: float, noise: float = 0.0) -> int:
    return max(1, round_half_up(float(np.asarray(x) @ np.asarray(w_star)) + offset + noise))


def plant_power_law_growth(
    exponent: float,
    n_start: int = 20,
    n_final: int = 2000,
    days: int = 200,
    c: float = 1.0,
    seed: int = 0,
) -> list[TemporalEdge]:
    """Edge stream whose cumulative counts follow e(t) = round(c * n(t)^exponent)."""
    if not 1.0 <= exponent <= 2.0:
        raise ValueError("exponent must be in [1, 2]")
    if n_start < 3 or n_final < n_start or days < 3:
        raise ValueError("need 3 <= n_start <= n_final and days >= 3")
    rng = np.random.default_rng(seed)
    edges: list[TemporalEdge] = []
    existing: set = set()
    n_cur = 0

    def try_add(a: int, b: int, day: int) -> bool:
        if a == b or (a, b) in existing:
            return False
        existing.add((a, b))
        edges.append(TemporalEdge(f"n{a}", f"n{b}", day))
        return True

    for t in range(days):
        n_t = round(n_start * (n_final / n_start) ** (t / (days - 1)))
        if t == 0:
            for i in range(n_t):
                try_add(i, (i + 1) % n_t, 0)
        else:
            for i in range(n_cur, n_t):
                try_add(i, int(rng.integers(i)), t)
        n_cur = max(n_cur, n_t)
        e_t = min(round(c * n_cur**exponent), n_cur * (n_cur - 1))
        while len(existing) < e_t:
            try_add(int(rng.integers(n_cur)), int(rng.integers(n_cur)), t)
    return edges


def write_truth(path: str | Path, truth: list[PlantedRelation]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "t1", "t2", "planted_delay", "offset_v"])
        for r in truth:
            w.writerow([r.u, r.v, r.t1, r.t2, r.planted_delay, repr(r.offset_v)])

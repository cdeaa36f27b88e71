"""Per-relation feature vectors and the training dataset built from them.

Every feature is computed from what is observable on the initiating day t1:
graph queries count edges dated <= t1, and the target user's delay history
only includes relations completed strictly before t1.
"""

from __future__ import annotations

import bisect
import csv
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

from .analytics import (
    DEFAULT_ANCHOR_WEEKDAY,
    DEFAULT_DELAY_CUTOFF,
    ReciprocalRelation,
    day_of_week,
    is_weekend,
)
from .temporal_graph import DynamicDigraph

__all__ = [
    "FEATURE_NAMES",
    "N_FEATURES",
    "DEFAULT_K",
    "Dataset",
    "DatasetError",
    "DelayHistory",
    "Standardizer",
    "build_dataset",
    "day_of_week",
    "extract_features",
    "is_weekend",
    "read_dataset",
    "write_dataset",
]

FEATURE_NAMES = (
    "t_u",
    "t_v",
    "age_u",  # t1 - t_u
    "age_v",  # t1 - t_v
    "weekend",
    "avg_prev_k_delays_v",
    "avg_all_delays_v",
    "indeg_u",
    "indeg_v",
    "outdeg_u",
    "outdeg_v",
    "common_followees",
    "common_followers",
    "bias",
)
N_FEATURES = len(FEATURE_NAMES)
DEFAULT_K = 4
SCALER_FORMAT = "recipdelay-scaler/1"


class DatasetError(ValueError):
    pass


class DelayHistory:
    """Completed delays per target user, queryable by completion time."""

    def __init__(self, relations: Iterable[ReciprocalRelation] = (), delay_cutoff: int | None = None):
        self.delay_cutoff = delay_cutoff
        self._t2: dict[Hashable, list[int]] = defaultdict(list)
        self._delays: dict[Hashable, list[int]] = defaultdict(list)
        self._csum: dict[Hashable, list[float]] = {}
        for r in sorted(relations, key=lambda r: (r.t2, r.t1)):
            self.add(r.v, r.t2, r.delay)

    def add(self, v: Hashable, t2: int, delay: int) -> None:
        """Record a completed reciprocation; completions must arrive in t2 order."""
        if self.delay_cutoff is not None and delay > self.delay_cutoff:
            return
        t2s = self._t2[v]
        if t2s and t2 < t2s[-1]:
            raise ValueError("history must be filled in completion order")
        t2s.append(t2)
        self._delays[v].append(delay)
        self._csum.pop(v, None)

    def before(self, v: Hashable, t1: int) -> list[int]:
        """Delays of ``v`` completed strictly before day ``t1``, oldest first."""
        t2s = self._t2.get(v)
        if not t2s:
            return []
        return self._delays[v][: bisect.bisect_left(t2s, t1)]

    def summary(self, v: Hashable, t1: int, k: int) -> tuple[float, float, int]:
        """(mean of last k, mean of all, count) of ``v``'s history before t1."""
        t2s = self._t2.get(v)
        m = bisect.bisect_left(t2s, t1) if t2s else 0
        if m == 0:
            return float("nan"), float("nan"), 0
        cs = self._csum.get(v)
        if cs is None or len(cs) != len(t2s) + 1:
            cs = [0.0]
            for d in self._delays[v]:
                cs.append(cs[-1] + d)
            self._csum[v] = cs
        j = max(0, m - k)
        return (cs[m] - cs[j]) / (m - j), cs[m] / m, m


def extract_features(
    g: DynamicDigraph,
    history: DelayHistory,
    u: Hashable,
    v: Hashable,
    t1: int,
    k: int = DEFAULT_K,
    fill_value: float = 0.0,
    anchor_weekday: int = DEFAULT_ANCHOR_WEEKDAY,
) -> np.ndarray:
    """The 13 relation features plus a trailing constant 1, in FEATURE_NAMES order."""
    t_u = g.join_day(u)
    t_v = g.join_day(v)
    avg_k, avg_all, count = history.summary(v, t1, k)
    if count == 0:
        avg_k = avg_all = fill_value
    return np.array(
        [
            t_u,
            t_v,
            t1 - t_u,
            t1 - t_v,
            1.0 if is_weekend(t1, anchor_weekday) else 0.0,
            avg_k,
            avg_all,
            g.indegree_at(u, t1),
            g.indegree_at(v, t1),
            g.outdegree_at(u, t1),
            g.outdegree_at(v, t1),
            g.common_followees_at(u, v, t1),
            g.common_followers_at(u, v, t1),
            1.0,
        ],
        dtype=float,
    )


@dataclass(frozen=True)
class Standardizer:
    """Column z-scoring; the bias column (last) is left untouched."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        mean[-1] = 0.0
        std[-1] = 1.0
        std[std == 0] = 1.0
        return cls(mean, std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.std + self.mean

    def to_text(self) -> str:
        lines = [f"format = {SCALER_FORMAT}", f"d = {len(self.mean)}"]
        lines.append("mean = " + " ".join(repr(float(x)) for x in self.mean))
        lines.append("std = " + " ".join(repr(float(x)) for x in self.std))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Standardizer":
        kv = {}
        for line in text.splitlines():
            if line.strip() and not line.startswith("#"):
                key, _, val = line.partition("=")
                kv[key.strip()] = val.strip()
        if kv.get("format") != SCALER_FORMAT:
            raise DatasetError(f"unsupported scaler format {kv.get('format')!r}")
        mean = np.array([float(x) for x in kv["mean"].split()])
        std = np.array([float(x) for x in kv["std"].split()])
        if len(mean) != int(kv["d"]) or len(std) != len(mean):
            raise DatasetError("scaler dimension mismatch")
        return cls(mean, std)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


@dataclass
class Dataset:
    """Feature matrix, delay targets and per-row relation metadata.

    ``X`` holds raw features unless ``scaler`` is set, in which case the
    non-bias columns are standardized with it. ``histories`` (the target
    user's completed delays before t1, per row) feed the P1/Pk baselines
    and are not serialized.
    """

    X: np.ndarray
    y: np.ndarray | None
    u: list
    v: list
    t1: np.ndarray
    group: np.ndarray
    fill_value: float
    scaler: Standardizer | None = None
    histories: list | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n_groups(self) -> int:
        return len(np.unique(self.group))

    def subset(self, idx: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(
            self,
            X=self.X[idx],
            y=None if self.y is None else self.y[idx],
            u=[self.u[i] for i in idx],
            v=[self.v[i] for i in idx],
            t1=self.t1[idx],
            group=self.group[idx],
            histories=None if self.histories is None else [self.histories[i] for i in idx],
        )

    def standardized(self, scaler: Standardizer | None = None) -> "Dataset":
        """Return a copy with standardized X (fitting a scaler on self if none given)."""
        if self.scaler is not None:
            raise DatasetError("dataset is already standardized")
        scaler = Standardizer.fit(self.X) if scaler is None else scaler
        return replace(self, X=scaler.transform(self.X), scaler=scaler)

    def raw(self) -> "Dataset":
        if self.scaler is None:
            return self
        return replace(self, X=self.scaler.inverse_transform(self.X), scaler=None)


def build_dataset(
    g: DynamicDigraph,
    relations: Sequence[ReciprocalRelation],
    k: int = DEFAULT_K,
    delay_cutoff: int | None = DEFAULT_DELAY_CUTOFF,
    standardize: bool = True,
    fill_value: float | None = None,
    anchor_weekday: int = DEFAULT_ANCHOR_WEEKDAY,
    history: DelayHistory | None = None,
) -> Dataset:
    """Feature rows for every relation with delay <= ``delay_cutoff``.

    The cold-start fill defaults to the mean delay of the kept rows. Group
    ids number target users in order of first appearance.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    kept = [r for r in relations if delay_cutoff is None or r.delay <= delay_cutoff]
    if not kept:
        raise DatasetError("no relations left after applying the delay cutoff")
    if history is None:
        history = DelayHistory(relations, delay_cutoff)
    y = np.array([r.delay for r in kept], dtype=float)
    fill = float(y.mean()) if fill_value is None else float(fill_value)
    X = np.empty((len(kept), N_FEATURES))
    for i, r in enumerate(kept):
        X[i] = extract_features(g, history, r.u, r.v, r.t1, k, fill, anchor_weekday)
    groups: dict = {}
    gid = np.array([groups.setdefault(r.v, len(groups)) for r in kept], dtype=np.int64)
    ds = Dataset(
        X=X,
        y=y,
        u=[r.u for r in kept],
        v=[r.v for r in kept],
        t1=np.array([r.t1 for r in kept], dtype=np.int64),
        group=gid,
        fill_value=fill,
        histories=[history.before(r.v, r.t1) for r in kept],
    )
    return ds.standardized() if standardize else ds


# -- serialization --------------------------------------------------------------

def _scaler_path(path: Path) -> Path:
    return path.with_name(path.name + ".scaler")


def write_dataset(path: str | Path, ds: Dataset) -> None:
    """CSV ``u,v,t1,group,f1..f14[,y]`` plus a ``.scaler`` sidecar when standardized.

    Floats are written with ``repr`` so a reload is bit-identical.
    """
    path = Path(path)
    header = ["u", "v", "t1", "group"] + [f"f{j + 1}" for j in range(ds.d)]
    if ds.y is not None:
        header.append("y")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(ds)):
            row = [ds.u[i], ds.v[i], int(ds.t1[i]), int(ds.group[i])]
            row += [repr(float(x)) for x in ds.X[i]]
            if ds.y is not None:
                row.append(repr(float(ds.y[i])))
            w.writerow(row)
    sidecar = _scaler_path(path)
    meta = [f"format = {SCALER_FORMAT}", f"fill_value = {ds.fill_value!r}"]
    if ds.scaler is not None:
        sidecar.write_text(ds.scaler.to_text() + f"fill_value = {ds.fill_value!r}\n", encoding="utf-8")
    else:
        sidecar.write_text("\n".join(meta + ["standardized = no"]) + "\n", encoding="utf-8")


def read_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ["u", "v", "t1", "group"]:
            raise DatasetError(f"{path}: not a dataset CSV (bad header)")
        has_y = header[-1] == "y"
        n_feat = len(header) - 4 - int(has_y)
        u, v, t1, grp, X, y = [], [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            u.append(row[0])
            v.append(row[1])
            t1.append(int(row[2]))
            grp.append(int(row[3]))
            X.append([float(x) for x in row[4 : 4 + n_feat]])
            if has_y:
                y.append(float(row[-1]))
    scaler = None
    fill = float("nan")
    sidecar = _scaler_path(path)
    if sidecar.exists():
        text = sidecar.read_text(encoding="utf-8")
        for line in text.splitlines():
            key, _, val = line.partition("=")
            if key.strip() == "fill_value":
                fill = float(val)
        if "standardized = no" not in text:
            scaler = Standardizer.from_text(text)
    return Dataset(
        X=np.array(X, dtype=float).reshape(len(u), n_feat),
        y=np.array(y, dtype=float) if has_y else None,
        u=u,
        v=v,
        t1=np.array(t1, dtype=np.int64),
        group=np.array(grp, dtype=np.int64),
        fill_value=fill,
        scaler=scaler,
    )

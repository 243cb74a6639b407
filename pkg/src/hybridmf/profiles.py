"""Implicit feedback scoring and rating-matrix assembly."""

from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .data import INTERACTION_TYPES, Dataset, InteractionEvent
from .errors import ConfigError, EmptyMatrixError, SchemaError, ShapeError

CATEGORIES = ("direct", "social", "reading")


class ProfileSelector(enum.Enum):
    ALL = "all"
    DIRECT = "direct"
    SOCIAL = "social"
    READING = "reading"

    @property
    def categories(self) -> tuple[str, ...]:
        return CATEGORIES if self is ProfileSelector.ALL else (self.value,)

    @classmethod
    def parse(cls, token: str) -> "ProfileSelector":
        aliases = {"allinteraction": "all", "directonly": "direct",
                   "socialonly": "social", "readingonly": "reading"}
        key = token.strip().lower().replace("_", "").replace("-", "")
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(f"unknown profile selector {token!r}") from None


@dataclass(frozen=True)
class WeightTable:
    """Interaction type -> (weight, category)."""

    entries: Mapping[str, tuple[float, str]]

    def __post_init__(self):
        for itype, (weight, category) in self.entries.items():
            if category not in CATEGORIES:
                raise ConfigError(f"{itype}: unknown category {category!r}")
            if not math.isfinite(weight) or weight < 0:
                raise ConfigError(f"{itype}: weight must be finite and >= 0, got {weight!r}")
        missing = [t for t in INTERACTION_TYPES if t not in self.entries]
        if missing:
            raise ConfigError(f"weight table lacks entries for {', '.join(missing)}")
        for category in CATEGORIES:
            if not any(c == category for _, c in self.entries.values()):
                raise ConfigError(f"category {category!r} has no member types")

    @property
    def types(self) -> frozenset[str]:
        return frozenset(self.entries)

    def weight(self, itype: str) -> float:
        return self.entries[itype][0]

    def category(self, itype: str) -> str:
        return self.entries[itype][1]

    def scaled(self, factor: float) -> "WeightTable":
        return WeightTable({t: (w * factor, c) for t, (w, c) in self.entries.items()})

    @classmethod
    def default(cls) -> "WeightTable":
        with resources.files("hybridmf").joinpath("default_weights.csv").open(encoding="utf-8") as fh:
            return cls.parse(fh.read(), source="default_weights.csv")

    @classmethod
    def load(cls, path) -> "WeightTable":
        return cls.parse(Path(path).read_text(encoding="utf-8"), source=str(path))

    @classmethod
    def parse(cls, text: str, source: str = "<weights>") -> "WeightTable":
        entries: dict[str, tuple[float, str]] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#") or line.replace(" ", "") == "interaction_type,weight,category":
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ConfigError(f"{source}:{lineno}: expected interaction_type,weight,category")
            itype, weight, category = parts
            if itype in entries:
                raise ConfigError(f"{source}:{lineno}: duplicate entry for {itype}")
            try:
                w = float(weight)
            except ValueError:
                raise ConfigError(f"{source}:{lineno}: weight {weight!r} is not a number") from None
            if category.lower() not in CATEGORIES:
                raise ConfigError(f"{source}:{lineno}: unknown category {category!r}")
            entries[itype] = (w, category.lower())
        return cls(entries)

    def dump(self) -> str:
        lines = ["interaction_type,weight,category"]
        lines += [f"{t},{w!r},{c}" for t, (w, c) in self.entries.items()]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class NormalizationSpec:
    method: str = "log1p_then_minmax"
    rating_min: float = 0.0
    rating_max: float = 5.0

    def __post_init__(self):
        if self.method not in ("none", "minmax", "log1p_then_minmax"):
            raise ConfigError(f"unknown normalization method {self.method!r}")
        if not (math.isfinite(self.rating_min) and math.isfinite(self.rating_max)):
            raise ConfigError("rating bounds must be finite")
        if self.rating_min >= self.rating_max:
            raise ConfigError("rating_min must be < rating_max")

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.rating_min, self.rating_max)

    def apply(self, scores: np.ndarray) -> np.ndarray:
        scores = np.asarray(scores, dtype=np.float64)
        if self.method == "none":
            return scores.copy()
        values = np.log1p(scores) if self.method == "log1p_then_minmax" else scores
        lo, hi = self.rating_min, self.rating_max
        vmin, vmax = values.min(), values.max()
        if vmax == vmin:
            return np.full_like(values, hi)
        out = lo + (values - vmin) / (vmax - vmin) * (hi - lo)
        return np.clip(out, lo, hi)


@dataclass(frozen=True, eq=False)
class RatingMatrix:
    """Sparse user x item ratings; the stored entries are the known-pair set.

    Entries are kept as parallel ``rows``/``cols``/``vals`` arrays sorted by
    ``(row, col)``.
    """

    users: tuple[str, ...]
    items: tuple[str, ...]
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    bounds: tuple[float, float] | None = (0.0, 5.0)

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        vals = np.ascontiguousarray(self.vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise ShapeError("rows, cols and vals must be 1-d arrays of equal length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= len(self.users) or cols.min() < 0 or cols.max() >= len(self.items):
                raise ShapeError("entry index out of range")
            keys = rows * max(len(self.items), 1) + cols
            if np.any(np.diff(keys) <= 0):
                raise ShapeError("entries must be sorted by (row, col) without duplicates")
        if not np.all(np.isfinite(vals)):
            raise ShapeError("ratings must be finite")
        for name, arr in (("rows", rows), ("cols", cols), ("vals", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "items", tuple(self.items))

    @classmethod
    def from_triples(cls, users: Sequence[str], items: Sequence[str],
                     triples: Iterable[tuple[int, int, float]], bounds=(0.0, 5.0)) -> "RatingMatrix":
        triples = sorted(triples)
        arr = np.array(triples, dtype=np.float64).reshape(-1, 3)
        return cls(tuple(users), tuple(items), arr[:, 0].astype(np.int64),
                   arr[:, 1].astype(np.int64), arr[:, 2], bounds)

    @classmethod
    def from_dense(cls, dense, bounds=(0.0, 5.0)) -> "RatingMatrix":
        """Build from a 2-d array where NaN marks an unknown rating."""
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(~np.isnan(dense))
        users = tuple(f"u{u}" for u in range(dense.shape[0]))
        items = tuple(f"i{i}" for i in range(dense.shape[1]))
        return cls(users, items, rows, cols, dense[rows, cols], bounds)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.users), len(self.items))

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def __len__(self):
        return self.nnz

    @property
    def density(self) -> float:
        m, n = self.shape
        return self.nnz / (m * n) if m and n else 0.0

    def to_dense(self, fill: float = np.nan) -> np.ndarray:
        out = np.full(self.shape, fill)
        out[self.rows, self.cols] = self.vals
        return out

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)

    def keys(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def entries(self):
        for r, c, v in zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()):
            yield self.users[r], self.items[c], v

    def select(self, mask: np.ndarray) -> "RatingMatrix":
        """Subset of entries, keeping the same user and item index lists."""
        mask = np.asarray(mask, dtype=bool)
        return RatingMatrix(self.users, self.items, self.rows[mask], self.cols[mask],
                            self.vals[mask], self.bounds)

    def same_as(self, other: "RatingMatrix", atol: float = 0.0) -> bool:
        return (self.users == other.users and self.items == other.items
                and np.array_equal(self.rows, other.rows) and np.array_equal(self.cols, other.cols)
                and bool(np.all(np.abs(self.vals - other.vals) <= atol)))


def feedback_score(events_for_pair: Sequence[InteractionEvent], weights: WeightTable,
                   selector: ProfileSelector = ProfileSelector.ALL) -> float:
    """Weighted sum of interaction values for one (user, post) pair.

    Each category is summed separately in event order and the selected
    category sums are then added direct, social, reading, so the all-category
    score is bit-identical to adding the three single-category scores.
    """
    if len({(e.user_id, e.post_id) for e in events_for_pair}) > 1:
        raise ValueError("feedback_score expects events for a single (user, post) pair")
    partial = dict.fromkeys(CATEGORIES, 0.0)
    for e in events_for_pair:
        if e.interaction_type not in weights.entries:
            raise SchemaError(f"internal: no weight for interaction type {e.interaction_type!r}")
        w, cat = weights.entries[e.interaction_type]
        partial[cat] += w * e.value
    return _combine(partial, selector)


def _combine(partial, selector):
    total = 0.0
    for cat in selector.categories:
        total += partial[cat]
    return total


def raw_scores(dataset: Dataset, weights: WeightTable,
               selector: ProfileSelector) -> dict[tuple[str, str], float]:
    """Feedback score per (user, post) pair that has at least one event, zero scores included."""
    partials: dict[tuple[str, str], dict[str, float]] = defaultdict(lambda: dict.fromkeys(CATEGORIES, 0.0))
    wmap = weights.entries
    for e in dataset.events:
        try:
            w, cat = wmap[e.interaction_type]
        except KeyError:
            raise SchemaError(f"internal: no weight for interaction type {e.interaction_type!r}") from None
        partials[(e.user_id, e.post_id)][cat] += w * e.value
    return {key: _combine(p, selector) for key, p in partials.items()}


def build_rating_matrix(dataset: Dataset, weights: WeightTable,
                        selector: ProfileSelector = ProfileSelector.ALL,
                        norm: NormalizationSpec | None = None) -> RatingMatrix:
    """Score every (user, post) pair, drop zero scores and normalise the rest.

    Users and posts without a surviving entry do not get a row/column. Both
    index lists are sorted.
    """
    norm = norm or NormalizationSpec()
    scores = {k: s for k, s in raw_scores(dataset, weights, selector).items() if s != 0.0}
    if not scores:
        raise EmptyMatrixError(f"no nonzero feedback scores for selector {selector.value!r}")
    users = sorted({u for u, _ in scores})
    items = sorted({p for _, p in scores})
    uidx = {u: i for i, u in enumerate(users)}
    iidx = {p: i for i, p in enumerate(items)}
    keys = sorted((uidx[u], iidx[p]) for u, p in scores)
    rows = np.array([k[0] for k in keys], dtype=np.int64)
    cols = np.array([k[1] for k in keys], dtype=np.int64)
    raw = np.array([scores[(users[r], items[c])] for r, c in keys], dtype=np.float64)
    bounds = norm.bounds if norm.method != "none" else None
    return RatingMatrix(tuple(users), tuple(items), rows, cols, norm.apply(raw), bounds)


def category_coverage(dataset: Dataset, weights: WeightTable) -> dict[str, tuple[int, int]]:
    """Per category: (number of events, number of distinct users with an event)."""
    counts = dict.fromkeys(CATEGORIES, 0)
    users: dict[str, set[str]] = {c: set() for c in CATEGORIES}
    for e in dataset.events:
        cat = weights.category(e.interaction_type)
        counts[cat] += 1
        users[cat].add(e.user_id)
    return {c: (counts[c], len(users[c])) for c in CATEGORIES}


def write_ratings(ratings: RatingMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "post_id", "rating"])
        for u, p, v in ratings.entries():
            w.writerow([u, p, repr(v)])


def read_ratings(path, bounds=(0.0, 5.0)) -> RatingMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["user_id", "post_id", "rating"]:
            raise ConfigError(f"{path}: expected header user_id,post_id,rating")
        triples = [(r[0], r[1], float(r[2])) for r in reader if r]
    if not triples:
        raise EmptyMatrixError(f"{path}: no ratings")
    users = sorted({t[0] for t in triples})
    items = sorted({t[1] for t in triples})
    uidx = {u: i for i, u in enumerate(users)}
    iidx = {p: i for i, p in enumerate(items)}
    return RatingMatrix.from_triples(users, items, [(uidx[u], iidx[p], v) for u, p, v in triples], bounds)

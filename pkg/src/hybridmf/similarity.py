"""TF-IDF post profiles and the sparse symmetric cosine-similarity matrix."""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .data import Post
from .errors import ConfigError, ShapeError

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str, stop_words: Iterable[str] | None = None) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop 1-character tokens."""
    tokens = [t for t in _TOKEN.findall(text.lower()) if len(t) >= 2]
    if stop_words:
        stop = {w.lower() for w in stop_words}
        tokens = [t for t in tokens if t not in stop]
    return tokens


def read_stop_words(path) -> set[str]:
    return {w for w in Path(path).read_text(encoding="utf-8").split() if w}


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    document_frequency: dict[str, int]
    n_docs: int

    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}

    def idf(self, term: str) -> float:
        return math.log(self.n_docs / self.document_frequency[term])


@dataclass(frozen=True)
class TfidfProfile:
    post_id: str
    vector: dict[int, float]

    @property
    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.vector.values()))


def build_tfidf(posts: Sequence[Post], stop_words: Iterable[str] | None = None
                ) -> tuple[Vocabulary, list[TfidfProfile]]:
    """Raw term counts weighted by the unsmoothed ``ln(N / df)``.

    Terms present in every document have zero idf; they stay in the
    vocabulary but never appear in a vector.
    """
    if not posts:
        raise ValueError("build_tfidf needs at least one post")
    counts = [Counter(tokenize(p.text, stop_words)) for p in posts]
    df: Counter[str] = Counter()
    for c in counts:
        df.update(c.keys())
    terms = tuple(sorted(df))
    index = {t: i for i, t in enumerate(terms)}
    n_docs = len(posts)
    idf = {t: math.log(n_docs / df[t]) for t in terms}
    profiles = []
    for post, c in zip(posts, counts):
        vec = {index[t]: tf * idf[t] for t, tf in sorted(c.items()) if idf[t] > 0.0}
        profiles.append(TfidfProfile(post.post_id, dict(sorted(vec.items()))))
    return Vocabulary(terms, dict(df), n_docs), profiles


def cosine(a: TfidfProfile, b: TfidfProfile) -> float:
    """Cosine of two profiles; zero if either vector is empty."""
    na, nb = a.norm, b.norm
    if na == 0.0 or nb == 0.0:
        return 0.0
    dot = 0.0
    for key in sorted(a.vector.keys() & b.vector.keys()):
        dot += a.vector[key] * b.vector[key]
    return dot / (na * nb)


def tfidf_matrix(profiles: Sequence[TfidfProfile], n_terms: int | None = None) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for p in profiles:
        for k in sorted(p.vector):
            indices.append(k)
            data.append(p.vector[k])
        indptr.append(len(indices))
    if n_terms is None:
        n_terms = max(indices) + 1 if indices else 0
    mat = sp.csr_matrix((np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64),
                         np.array(indptr, dtype=np.int64)), shape=(len(profiles), n_terms))
    mat.sort_indices()
    return mat


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Upper-triangular storage (``rows <= cols``) of a symmetric similarity matrix.

    ``exact`` marks a matrix built without top-k truncation; the factorizer then
    treats every item pair as active, with unstored pairs at similarity 0.
    """

    items: tuple[str, ...]
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    exact: bool = False

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        vals = np.ascontiguousarray(self.vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ShapeError("rows, cols and vals must have equal length")
        if len(rows):
            if np.any(rows > cols):
                raise ShapeError("similarity entries must satisfy row <= col")
            if cols.max() >= len(self.items) or rows.min() < 0:
                raise ShapeError("similarity index out of range")
            if np.any((vals < 0) | (vals > 1)):
                raise ShapeError("similarities must lie in [0, 1]")
        order = np.lexsort((cols, rows))
        for name, arr in (("rows", rows[order]), ("cols", cols[order]), ("vals", vals[order])):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self):
        return len(self.vals)

    @property
    def n_items(self) -> int:
        return len(self.items)

    def lookup(self, j: int, n: int) -> float:
        a, b = (j, n) if j <= n else (n, j)
        lo = np.searchsorted(self.rows, a, side="left")
        hi = np.searchsorted(self.rows, a, side="right")
        pos = lo + np.searchsorted(self.cols[lo:hi], b)
        if pos < hi and self.cols[pos] == b:
            return float(self.vals[pos])
        return 0.0

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_items, self.n_items))
        out[self.rows, self.cols] = self.vals
        out[self.cols, self.rows] = self.vals
        return out

    def restrict(self, items: Sequence[str]) -> "SimilarityMatrix":
        """Re-index onto *items*; ids missing from this matrix get no entries."""
        pos = {p: i for i, p in enumerate(items)}
        new = np.array([pos.get(p, -1) for p in self.items], dtype=np.int64)
        a, b = new[self.rows], new[self.cols]
        keep = (a >= 0) & (b >= 0)
        a, b, v = a[keep], b[keep], self.vals[keep]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return SimilarityMatrix(tuple(items), lo, hi, v, self.exact)


def build_similarity(profiles: Sequence[TfidfProfile], top_k: int = 50, threshold: float = 0.01,
                     block_size: int = 512) -> SimilarityMatrix:
    """Keep each item's ``top_k`` most similar items above ``threshold``, symmetrised by union.

    Ties at the cut-off go to the lower item index. Items with a nonzero
    profile get ``S_jj = 1``. ``top_k >= n - 1`` keeps every pair above the
    threshold and flags the result as exact.
    """
    if top_k < 1:
        raise ConfigError("top_k must be a positive integer")
    if not 0.0 <= threshold < 1.0:
        raise ConfigError("threshold must lie in [0, 1)")
    n = len(profiles)
    items = tuple(p.post_id for p in profiles)
    X = tfidf_matrix(profiles)
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    nonzero = norms > 0.0
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=nonzero)
    Xn = sp.csr_matrix(sp.diags(scale) @ X)
    Xn.sort_indices()
    XnT = sp.csr_matrix(Xn.T)
    XnT.sort_indices()
    keep_k = min(top_k, max(n - 1, 0))

    pairs: dict[tuple[int, int], float] = {}
    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        block = (Xn[start:stop] @ XnT).toarray()
        local = np.arange(stop - start)
        block[local, start + local] = -np.inf
        if keep_k == 0:
            continue
        order = np.argsort(-block, axis=1, kind="stable")[:, :keep_k]
        top = np.take_along_axis(block, order, axis=1)
        for r, c in zip(*np.nonzero(top > threshold)):
            j, m = start + int(r), int(order[r, c])
            key = (j, m) if j < m else (m, j)
            if key not in pairs:
                pairs[key] = min(float(top[r, c]), 1.0)

    for j in np.flatnonzero(nonzero):
        pairs[(int(j), int(j))] = 1.0
    keys = sorted(pairs)
    rows = np.array([k[0] for k in keys], dtype=np.int64)
    cols = np.array([k[1] for k in keys], dtype=np.int64)
    vals = np.array([pairs[k] for k in keys], dtype=np.float64)
    return SimilarityMatrix(items, rows, cols, vals, exact=top_k >= n - 1)


def write_similarity(sim: SimilarityMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["post_id_j", "post_id_n", "similarity"])
        for j, n, v in zip(sim.rows.tolist(), sim.cols.tolist(), sim.vals.tolist()):
            w.writerow([sim.items[j], sim.items[n], repr(v)])


def read_similarity(path, items: Sequence[str] | None = None, exact: bool = False) -> SimilarityMatrix:
    """Load a similarity file; when *items* is given, entries are re-indexed onto it."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["post_id_j", "post_id_n", "similarity"]:
            raise ConfigError(f"{path}: expected header post_id_j,post_id_n,similarity")
        triples = [(r[0], r[1], float(r[2])) for r in reader if r]
    if items is None:
        items = sorted({t[0] for t in triples} | {t[1] for t in triples})
    pos = {p: i for i, p in enumerate(items)}
    rows, cols, vals = [], [], []
    for a, b, v in triples:
        if a in pos and b in pos:
            i, j = sorted((pos[a], pos[b]))
            rows.append(i)
            cols.append(j)
            vals.append(v)
    return SimilarityMatrix(tuple(items), np.array(rows, dtype=np.int64),
                            np.array(cols, dtype=np.int64), np.array(vals), exact)

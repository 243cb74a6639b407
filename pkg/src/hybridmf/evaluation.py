"""Per-user holdout split, error and top-k metrics, and the profile x model grid."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigError, HybridMFError, UndefinedMetricError
from .factorization import FactorModel, Hyperparams, predict_entries, train
from .profiles import (NormalizationSpec, ProfileSelector, RatingMatrix, WeightTable,
                       build_rating_matrix)
from .similarity import SimilarityMatrix, build_similarity, build_tfidf

log = logging.getLogger(__name__)

REPORT_HEADER = ("selector", "model", "d", "lambda", "alpha", "rmse", "mae",
                 "precision_at_k", "recall_at_k", "f1_at_k", "n_test_pairs")
MODEL_KINDS = ("basic", "hybrid")


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie strictly between 0 and 1")


@dataclass(frozen=True)
class RelevanceRule:
    threshold: float | None = None

    def resolve(self, bounds: tuple[float, float] | None) -> float:
        if self.threshold is not None:
            if bounds is not None and not bounds[0] <= self.threshold <= bounds[1]:
                raise ConfigError(f"relevance threshold {self.threshold} outside rating bounds {bounds}")
            return self.threshold
        if bounds is None:
            raise ConfigError("unbounded ratings need an explicit relevance threshold")
        return (bounds[0] + bounds[1]) / 2


@dataclass
class MetricReport:
    rmse: float
    mae: float
    precision_at_k: float
    recall_at_k: float
    f1_at_k: float
    k: int
    n_test_pairs: int
    selector: str = ""
    model: str = ""
    hyperparams: dict = field(default_factory=dict)

    def row(self) -> list[str]:
        hp = self.hyperparams
        return [self.selector, self.model, str(hp.get("d", "")),
                f"{hp.get('lambda', float('nan')):.6f}", f"{hp.get('alpha', float('nan')):.6f}",
                f"{self.rmse:.6f}", f"{self.mae:.6f}", f"{self.precision_at_k:.6f}",
                f"{self.recall_at_k:.6f}", f"{self.f1_at_k:.6f}", str(self.n_test_pairs)]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(ratings: RatingMatrix, spec: SplitSpec) -> tuple[RatingMatrix, RatingMatrix]:
    """Per-user holdout.

    A user with ``c >= 2`` ratings sends ``round(test_fraction * c)`` of them
    (half rounds up) to the test side; users with one rating stay in train.
    Both halves keep the input's user and item index lists.
    """
    rng = np.random.default_rng(spec.seed)
    is_test = np.zeros(ratings.nnz, dtype=bool)
    starts = np.searchsorted(ratings.rows, np.arange(len(ratings.users) + 1))
    for u in range(len(ratings.users)):
        lo, hi = starts[u], starts[u + 1]
        count = hi - lo
        if count < 2:
            continue
        n_test = _round_half_up(spec.test_fraction * count)
        if n_test:
            is_test[lo + rng.choice(count, size=n_test, replace=False)] = True
    return ratings.select(~is_test), ratings.select(is_test)


def rmse_mae(predictions: Iterable[tuple[float, float]]) -> tuple[float, float]:
    """RMSE and MAE over ``(true, predicted)`` pairs."""
    pairs = np.asarray(list(predictions), dtype=np.float64).reshape(-1, 2)
    return rmse_mae_arrays(pairs[:, 0], pairs[:, 1])


def rmse_mae_arrays(true, pred) -> tuple[float, float]:
    true = np.asarray(true, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if true.size == 0:
        raise UndefinedMetricError("RMSE/MAE undefined on an empty prediction list")
    if not (np.all(np.isfinite(true)) and np.all(np.isfinite(pred))):
        raise ValueError("predictions must be finite")
    err = np.abs(true - pred)
    # scale by the largest error so tiny residuals do not underflow when squared
    top = float(err.max())
    rmse = top * math.sqrt(float(np.mean((err / top) ** 2))) if top > 0 else 0.0
    mae = float(np.mean(err))
    # equal |errors| can put mae one ulp above rmse
    assert mae <= rmse * (1 + 1e-12) + 1e-300, (mae, rmse)
    return rmse, min(mae, rmse)


def precision_recall_f1(ranked: Sequence[Sequence], relevant: Sequence[set], k: int
                        ) -> tuple[float, float, float]:
    """Macro-averaged precision@k and recall@k over users with a relevant item.

    ``ranked[u]`` is user u's candidate list, best first. F1 is the harmonic
    mean of the two averages.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    precisions, recalls = [], []
    for cands, rel in zip(ranked, relevant):
        if not rel:
            continue
        taken = list(cands)[:k]
        hits = sum(1 for c in taken if c in rel)
        precisions.append(hits / len(taken) if taken else 0.0)
        recalls.append(hits / len(rel))
    if not precisions:
        raise UndefinedMetricError("no user has a relevant held-out item")
    p = float(np.mean(precisions))
    r = float(np.mean(recalls))
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


def topk_f1_from_scores(score: Callable[[int, np.ndarray], np.ndarray], train: RatingMatrix,
                        test: RatingMatrix, k: int, rule: RelevanceRule | None = None,
                        candidates: str = "test") -> tuple[float, float, float]:
    """Top-k precision/recall/F1 given a scoring function ``score(u, items)``.

    ``candidates="test"`` ranks each user's held-out items only;
    ``"all-unrated"`` ranks every item the user has no training rating for.
    Ties go to the lower item index.
    """
    if candidates not in ("test", "all-unrated"):
        raise ConfigError(f"unknown candidate mode {candidates!r}")
    threshold = (rule or RelevanceRule()).resolve(test.bounds or train.bounds)
    n_items = len(test.items)
    t_starts = np.searchsorted(test.rows, np.arange(len(test.users) + 1))
    r_starts = np.searchsorted(train.rows, np.arange(len(train.users) + 1))
    ranked, relevant = [], []
    for u in range(len(test.users)):
        cols = test.cols[t_starts[u]:t_starts[u + 1]]
        vals = test.vals[t_starts[u]:t_starts[u + 1]]
        rel = set(cols[vals >= threshold].tolist())
        if not rel:
            continue
        if candidates == "test":
            cand = cols
        else:
            mask = np.ones(n_items, dtype=bool)
            mask[train.cols[r_starts[u]:r_starts[u + 1]]] = False
            cand = np.flatnonzero(mask)
        s = np.asarray(score(u, cand), dtype=np.float64)
        order = np.lexsort((cand, -s))
        ranked.append(cand[order][:k].tolist())
        relevant.append(rel)
    return precision_recall_f1(ranked, relevant, k)


def topk_f1(model: FactorModel, train: RatingMatrix, test: RatingMatrix, k: int = 10,
            rule: RelevanceRule | None = None, candidates: str = "test") -> tuple[float, float, float]:
    return topk_f1_from_scores(lambda u, items: model.Q[items] @ model.P[u], train, test, k, rule,
                               candidates)


def evaluate(model: FactorModel, train: RatingMatrix, test: RatingMatrix, k: int = 10,
             rule: RelevanceRule | None = None, candidates: str = "test",
             clamp: bool = True) -> MetricReport:
    pred = predict_entries(model, test.rows, test.cols)
    bounds = test.bounds
    if clamp and bounds is not None:
        pred = np.clip(pred, *bounds)
    rmse, mae = rmse_mae_arrays(test.vals, pred)
    p, r, f1 = topk_f1(model, train, test, k, rule, candidates)
    return MetricReport(rmse, mae, p, r, f1, k, test.nnz, hyperparams=model.hyperparams.to_dict())


class GridCellError(HybridMFError):
    def __init__(self, selector, model, cause):
        self.cell = (selector, model)
        self.cause = cause
        super().__init__(f"cell ({selector}, {model}): {cause}")


def build_content_similarity(dataset: Dataset, top_k: int = 50, threshold: float = 0.01,
                             stop_words=None) -> SimilarityMatrix:
    _, profiles = build_tfidf(list(dataset.posts), stop_words)
    return build_similarity(profiles, top_k, threshold)


def run_experiment_grid(dataset: Dataset, weights: WeightTable, hp: Hyperparams, spec: SplitSpec,
                        rule: RelevanceRule | None = None, *, norm: NormalizationSpec | None = None,
                        selectors: Sequence[ProfileSelector] | None = None,
                        models: Sequence[str] = MODEL_KINDS, k: int = 10, top_k: int = 50,
                        threshold: float = 0.01, candidates: str = "test", clamp: bool = True,
                        stop_words=None, sim: SimilarityMatrix | None = None) -> list[MetricReport]:
    """Train and evaluate every (profile selector, model kind) cell.

    The content similarity is computed once over all posts and re-indexed
    onto each cell's item list. Basic cells force ``alpha = 0``.
    """
    selectors = list(selectors or ProfileSelector)
    for kind in models:
        if kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {kind!r}")
    if sim is None and "hybrid" in models:
        sim = build_content_similarity(dataset, top_k, threshold, stop_words)
    reports = []
    for selector in sorted(selectors, key=list(ProfileSelector).index):
        try:
            ratings = build_rating_matrix(dataset, weights, selector, norm)
            train_r, test_r = split(ratings, spec)
        except HybridMFError as exc:
            raise GridCellError(selector.value, "*", exc) from exc
        for kind in sorted(models, key=MODEL_KINDS.index):
            try:
                if kind == "basic":
                    cell_hp, cell_sim = hp.replace(alpha=0.0), None
                else:
                    cell_hp, cell_sim = hp, sim.restrict(ratings.items)
                model, report = train(train_r, cell_sim, cell_hp)
                metrics = evaluate(model, train_r, test_r, k, rule, candidates, clamp)
            except HybridMFError as exc:
                raise GridCellError(selector.value, kind, exc) from exc
            metrics.selector = selector.value
            metrics.model = kind
            log.info("%s/%s rmse=%.4f mae=%.4f f1@%d=%.4f (%d epochs, %.1fs)", selector.value, kind,
                     metrics.rmse, metrics.mae, k, metrics.f1_at_k, len(report.losses), report.seconds)
            reports.append(metrics)
    return reports


def report_csv(reports: Sequence[MetricReport]) -> str:
    lines = [",".join(REPORT_HEADER)]
    lines += [",".join(r.row()) for r in reports]
    return "\n".join(lines) + "\n"


def write_report_csv(reports: Sequence[MetricReport], path) -> None:
    Path(path).write_text(report_csv(reports), encoding="utf-8")

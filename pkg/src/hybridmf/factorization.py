"""Matrix factorization with an optional content-similarity regularizer.

Objective (``alpha = 0`` gives the plain model)::

    1/2 sum_{(u,i) in C} (R_ui - P_u.Q_i)^2
      + lambda/2 (|P|_F^2 + |Q|_F^2)
      + alpha/2 sum_{(j,n) in A} (S_jn - Q_j.Q_n)^2

``A`` is a set of *ordered* item pairs built by :func:`regularizer_pairs`:
each stored off-diagonal similarity appears as both ``(j, n)`` and ``(n, j)``,
each diagonal entry once. The item gradient is therefore

    dQ_i = -sum_u e_ui P_u + lambda Q_i - 2 alpha sum_{n:(i,n) in A} (S_in - Q_i.Q_n) Q_n
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, DivergenceError, InputError, ShapeError
from .profiles import RatingMatrix
from .similarity import SimilarityMatrix

MODEL_FORMAT = "hybridmf-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    d: int = 16
    lam: float = 0.05
    alpha: float = 0.1
    learning_rate: float = 0.02
    epochs: int = 200
    seed: int = 0
    init_scale: float = 0.1
    include_diagonal: bool = True
    zero_samples: int = 10
    max_halvings: int = 20

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.lam < 0 or self.alpha < 0:
            raise ConfigError("lambda and alpha must be >= 0")
        if self.learning_rate <= 0 or self.init_scale <= 0:
            raise ConfigError("learning_rate and init_scale must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.zero_samples < 0 or self.max_halvings < 0:
            raise ConfigError("zero_samples and max_halvings must be >= 0")

    def replace(self, **changes) -> "Hyperparams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Hyperparams":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class FactorModel:
    P: np.ndarray
    Q: np.ndarray
    hyperparams: Hyperparams
    users: tuple[str, ...]
    items: tuple[str, ...]
    seen_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    seen_cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        P = np.ascontiguousarray(self.P, dtype=np.float64)
        Q = np.ascontiguousarray(self.Q, dtype=np.float64)
        if P.ndim != 2 or Q.ndim != 2 or P.shape[1] != Q.shape[1]:
            raise ShapeError(f"incompatible factor shapes {P.shape} and {Q.shape}")
        if P.shape[0] != len(self.users) or Q.shape[0] != len(self.items):
            raise ShapeError("factor rows must match the user and item lists")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "seen_rows", np.asarray(self.seen_rows, dtype=np.int64))
        object.__setattr__(self, "seen_cols", np.asarray(self.seen_cols, dtype=np.int64))

    @classmethod
    def from_factors(cls, P, Q, hyperparams: Hyperparams | None = None) -> "FactorModel":
        P, Q = np.atleast_2d(np.asarray(P, dtype=float)), np.atleast_2d(np.asarray(Q, dtype=float))
        hp = hyperparams or Hyperparams(d=P.shape[1])
        return cls(P, Q, hp, tuple(f"u{u}" for u in range(P.shape[0])),
                   tuple(f"i{i}" for i in range(Q.shape[0])))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.P.shape[0], self.Q.shape[0], self.P.shape[1])

    def predicted_matrix(self) -> np.ndarray:
        return self.P @ self.Q.T

    def seen_items(self, u: int) -> np.ndarray:
        return self.seen_cols[self.seen_rows == u]


@dataclass
class TrainingReport:
    objective: str
    initial_loss: float
    losses: list[float]
    seconds: float
    final_learning_rate: float
    halvings: int
    stopped_early: bool
    backend: str

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else self.initial_loss

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"epoch,{self.objective}\n")
            fh.write(f"0,{self.initial_loss!r}\n")
            for epoch, value in enumerate(self.losses, start=1):
                fh.write(f"{epoch},{value!r}\n")


@dataclass(frozen=True, eq=False)
class RegPairs:
    """Ordered item pairs ``(rows[e], cols[e])`` with target similarity ``vals[e]``."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    def __len__(self):
        return len(self.vals)

    @classmethod
    def empty(cls) -> "RegPairs":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))


def regularizer_pairs(sim: SimilarityMatrix, include_diagonal: bool = True,
                      zero_samples: int = 0, seed: int = 0) -> RegPairs:
    """Expand a similarity matrix into the ordered pair set summed by the regularizer.

    For an exact matrix every ordered pair ``(j, n)`` is active, unstored ones
    with similarity 0. Otherwise only stored pairs are active, plus
    ``zero_samples`` random unstored partners per item (both orders, target 0),
    drawn once from *seed*.
    """
    n = sim.n_items
    if sim.exact:
        dense = sim.to_dense()
        j, m = np.divmod(np.arange(n * n, dtype=np.int64), n)
        keep = np.ones(n * n, dtype=bool) if include_diagonal else j != m
        return RegPairs(j[keep], m[keep], dense.ravel()[keep])

    diag = sim.rows == sim.cols
    off_r, off_c, off_v = sim.rows[~diag], sim.cols[~diag], sim.vals[~diag]
    parts_r = [off_r, off_c]
    parts_c = [off_c, off_r]
    parts_v = [off_v, off_v]
    if include_diagonal:
        parts_r.append(sim.rows[diag])
        parts_c.append(sim.cols[diag])
        parts_v.append(sim.vals[diag])
    if zero_samples > 0 and n > 1:
        rng = np.random.default_rng(seed)
        src = np.repeat(np.arange(n, dtype=np.int64), zero_samples)
        dst = rng.integers(0, n, size=src.shape, dtype=np.int64)
        stored = np.concatenate([off_r * n + off_c, off_c * n + off_r])
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        ok = (src != dst) & ~np.isin(lo * n + hi, stored)
        key = np.unique(lo[ok] * n + hi[ok])
        a, b = np.divmod(key, n)
        parts_r += [a, b]
        parts_c += [b, a]
        parts_v += [np.zeros(len(a)), np.zeros(len(a))]
    rows = np.concatenate(parts_r)
    cols = np.concatenate(parts_c)
    vals = np.concatenate(parts_v)
    order = np.lexsort((cols, rows))
    return RegPairs(np.ascontiguousarray(rows[order]), np.ascontiguousarray(cols[order]),
                    np.ascontiguousarray(vals[order], dtype=np.float64))


def _check_shapes(model: FactorModel, ratings: RatingMatrix) -> None:
    m, n, _ = model.shape
    if ratings.shape != (m, n):
        raise ShapeError(f"model is {m}x{n} but ratings are {ratings.shape[0]}x{ratings.shape[1]}")


def _resolve_pairs(model: FactorModel, sim, pairs) -> RegPairs | None:
    hp = model.hyperparams
    if hp.alpha == 0:
        return None
    if pairs is not None:
        return pairs
    if sim is None:
        raise InputError("alpha > 0 requires a similarity matrix")
    if sim.n_items != model.Q.shape[0]:
        raise ShapeError(f"similarity covers {sim.n_items} items, model has {model.Q.shape[0]}")
    return regularizer_pairs(sim, hp.include_diagonal)


def _objective(K, P, Q, ratings, lam, alpha, pairs):
    # overflow shows up as a non-finite value, which the trainer checks for
    with np.errstate(over="ignore", invalid="ignore"):
        value = 0.5 * K.rating_sse(ratings.rows, ratings.cols, ratings.vals, P, Q) \
            + lam / 2 * (K.frob_sq(P) + K.frob_sq(Q))
        if alpha > 0 and pairs is not None:
            value += alpha / 2 * K.pair_sse(pairs.rows, pairs.cols, pairs.vals, Q)
    return value


def _gradient(K, P, Q, ratings, lam, alpha, pairs):
    dP = lam * P
    dQ = lam * Q
    K.rating_grad(ratings.rows, ratings.cols, ratings.vals, P, Q, dP, dQ)
    if alpha > 0 and pairs is not None:
        K.pair_grad(pairs.rows, pairs.cols, pairs.vals, Q, dQ, alpha)
    return dP, dQ


def predict(model: FactorModel, u: int, i: int) -> float:
    """Inner product ``P_u . Q_i``; unclamped."""
    m, n, _ = model.shape
    if not (0 <= u < m and 0 <= i < n):
        raise IndexError(f"index ({u}, {i}) outside {m}x{n} model")
    return float(np.dot(model.P[u], model.Q[i]))


def predict_entries(model: FactorModel, rows, cols) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    return np.einsum("ij,ij->i", model.P[rows], model.Q[cols])


def loss(model: FactorModel, ratings: RatingMatrix, sim: SimilarityMatrix | None = None,
         pairs: RegPairs | None = None) -> float:
    """Training objective of *model* on *ratings*.

    Summation is sequential in storage order, evaluated as
    ``0.5 * sse + lam / 2 * (|P|^2 + |Q|^2) [+ alpha / 2 * pair_sse]``.
    With ``alpha == 0`` the similarity argument is ignored.
    """
    _check_shapes(model, ratings)
    hp = model.hyperparams
    pairs = _resolve_pairs(model, sim, pairs)
    return _objective(kernels.active(), model.P, model.Q, ratings, hp.lam, hp.alpha, pairs)


def gradients(model: FactorModel, ratings: RatingMatrix, sim: SimilarityMatrix | None = None,
              pairs: RegPairs | None = None) -> tuple[np.ndarray, np.ndarray]:
    _check_shapes(model, ratings)
    hp = model.hyperparams
    pairs = _resolve_pairs(model, sim, pairs)
    return _gradient(kernels.active(), model.P, model.Q, ratings, hp.lam, hp.alpha, pairs)


def train(ratings: RatingMatrix, sim: SimilarityMatrix | None, hp: Hyperparams
          ) -> tuple[FactorModel, TrainingReport]:
    """Full-batch gradient descent with step halving.

    An epoch whose step would raise the objective (or make it non-finite) is
    retried with half the learning rate; the reduced rate carries over to
    later epochs. After ``max_halvings`` failed retries training stops.
    """
    if ratings.nnz == 0:
        raise InputError("cannot train on an empty rating matrix")
    pairs = None
    if hp.alpha > 0:
        if sim is None:
            raise InputError("alpha > 0 requires a similarity matrix")
        if sim.items != ratings.items:
            raise ShapeError("similarity items are not aligned with the rating matrix columns")
        pairs = regularizer_pairs(sim, hp.include_diagonal, hp.zero_samples,
                                  seed=int(np.random.SeedSequence([hp.seed, 1]).generate_state(1)[0]))
    K = kernels.active()
    m, n = ratings.shape
    rng = np.random.default_rng(hp.seed)
    P = rng.uniform(-hp.init_scale, hp.init_scale, size=(m, hp.d))
    Q = rng.uniform(-hp.init_scale, hp.init_scale, size=(n, hp.d))

    started = time.perf_counter()
    current = initial = _objective(K, P, Q, ratings, hp.lam, hp.alpha, pairs)
    if not math.isfinite(current):
        raise DivergenceError(0)
    eta = hp.learning_rate
    losses: list[float] = []
    halvings = 0
    stopped = False
    for epoch in range(1, hp.epochs + 1):
        dP, dQ = _gradient(K, P, Q, ratings, hp.lam, hp.alpha, pairs)
        accepted = saw_finite = False
        for attempt in range(hp.max_halvings + 1):
            if attempt:
                eta /= 2
                halvings += 1
            P_new = P - eta * dP
            Q_new = Q - eta * dQ
            value = _objective(K, P_new, Q_new, ratings, hp.lam, hp.alpha, pairs)
            if math.isfinite(value):
                saw_finite = True
                if value <= current:
                    accepted = True
                    break
        if not accepted:
            if not saw_finite:
                raise DivergenceError(epoch, "loss non-finite after all step halvings")
            stopped = True
            break
        P, Q, current = P_new, Q_new, value
        losses.append(current)

    model = FactorModel(P, Q, hp, ratings.users, ratings.items, ratings.rows.copy(), ratings.cols.copy())
    report = TrainingReport(
        objective="L^" if hp.alpha > 0 else "L",
        initial_loss=initial,
        losses=losses,
        seconds=time.perf_counter() - started,
        final_learning_rate=eta,
        halvings=halvings,
        stopped_early=stopped,
        backend=kernels.backend(),
    )
    return model, report


# -- model container ------------------------------------------------------------


def model_to_dict(model: FactorModel, config: dict | None = None) -> dict:
    m, n, d = model.shape
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "m": m,
        "n": n,
        "d": d,
        "hyperparams": model.hyperparams.to_dict(),
        "users": list(model.users),
        "items": list(model.items),
        "P": model.P.tolist(),
        "Q": model.Q.tolist(),
        "seen": [model.seen_rows.tolist(), model.seen_cols.tolist()],
        "config": config or {},
    }


def save_model(model: FactorModel, path, config: dict | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, config)) + "\n", encoding="utf-8")


def load_model(path) -> FactorModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not a model file ({exc})") from None
    if data.get("format") != MODEL_FORMAT:
        raise InputError(f"{path}: not a {MODEL_FORMAT} file")
    if data.get("version") != MODEL_VERSION:
        raise InputError(f"{path}: unsupported model version {data.get('version')!r}")
    d = data["d"]
    P = np.array(data["P"], dtype=np.float64).reshape(data["m"], d)
    Q = np.array(data["Q"], dtype=np.float64).reshape(data["n"], d)
    seen_r, seen_c = data.get("seen", [[], []])
    return FactorModel(P, Q, Hyperparams.from_dict(data["hyperparams"]), tuple(data["users"]),
                       tuple(data["items"]), np.array(seen_r, dtype=np.int64),
                       np.array(seen_c, dtype=np.int64))

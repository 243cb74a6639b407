"""Independent reference implementations used as test oracles.

Everything here is plain Python loops over dense arrays so that it shares no
code path with the package.
"""

import math
from collections import Counter

import numpy as np

from hybridmf.data import Post
from hybridmf.factorization import FactorModel, Hyperparams
from hybridmf.profiles import RatingMatrix
from hybridmf.similarity import SimilarityMatrix, tokenize


def naive_loss(R, P, Q, lam, alpha=0.0, S=None, diagonal=True):
    """Objective over a dense R (NaN = unknown) and a dense similarity matrix S.

    Every ordered item pair contributes to the similarity term.
    """
    sse = 0.0
    for u in range(R.shape[0]):
        for i in range(R.shape[1]):
            if not np.isnan(R[u, i]):
                pred = 0.0
                for f in range(P.shape[1]):
                    pred += P[u, f] * Q[i, f]
                sse += (R[u, i] - pred) ** 2
    frob = 0.0
    for A in (P, Q):
        for x in A.ravel():
            frob += x * x
    value = 0.5 * sse + lam / 2 * frob
    if alpha:
        pair = 0.0
        for j in range(Q.shape[0]):
            for n in range(Q.shape[0]):
                if j == n and not diagonal:
                    continue
                dot = 0.0
                for f in range(Q.shape[1]):
                    dot += Q[j, f] * Q[n, f]
                pair += (S[j, n] - dot) ** 2
        value += alpha / 2 * pair
    return value


def random_instance(rng, m, n, d, density=0.6):
    R = np.where(rng.random((m, n)) < density, rng.uniform(0, 5, (m, n)), np.nan)
    R[0, 0] = rng.uniform(0, 5)
    S = rng.random((n, n))
    S = (S + S.T) / 2
    np.fill_diagonal(S, 1.0)
    P = rng.normal(0, 0.5, (m, d))
    Q = rng.normal(0, 0.5, (n, d))
    return R, S, P, Q


def exact_similarity(S):
    """Wrap a dense symmetric matrix as an exact (all-pairs) SimilarityMatrix."""
    n = S.shape[0]
    j, k = np.triu_indices(n)
    keep = S[j, k] > 0
    return SimilarityMatrix(tuple(f"i{i}" for i in range(n)), j[keep], k[keep], S[j, k][keep], exact=True)


def model_for(R, P, Q, lam=0.0, alpha=0.0):
    hp = Hyperparams(d=P.shape[1], lam=lam, alpha=alpha)
    m, n = R.shape
    return FactorModel(P, Q, hp, tuple(f"u{u}" for u in range(m)), tuple(f"i{i}" for i in range(n)))


def ratings_for(R):
    return RatingMatrix.from_dense(R)


def central_difference(f, X, h=1e-5):
    grad = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        old = X[idx]
        X[idx] = old + h
        up = f()
        X[idx] = old - h
        down = f()
        X[idx] = old
        grad[idx] = (up - down) / (2 * h)
    return grad


def brute_tfidf(texts):
    """Dense tf-idf by direct counting, independent of build_tfidf."""
    docs = [tokenize(t) for t in texts]
    vocab = sorted({w for d in docs for w in d})
    N = len(docs)
    out = np.zeros((N, len(vocab)))
    for r, d in enumerate(docs):
        c = Counter(d)
        for k, w in enumerate(vocab):
            df = sum(1 for other in docs if w in other)
            out[r, k] = c[w] * math.log(N / df)
    return vocab, out


def brute_cosine(X):
    n = X.shape[0]
    S = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            na = math.sqrt(sum(x * x for x in X[a]))
            nb = math.sqrt(sum(x * x for x in X[b]))
            if na and nb:
                S[a, b] = sum(X[a, t] * X[b, t] for t in range(X.shape[1])) / (na * nb)
    return S


def brute_topk(S, top_k, threshold):
    """Dense reference for the keep-top-k, symmetrise-by-union rule."""
    n = S.shape[0]
    kept = set()
    for j in range(n):
        others = sorted((m for m in range(n) if m != j), key=lambda m: (-S[j, m], m))[:top_k]
        kept |= {tuple(sorted((j, m))) for m in others if S[j, m] > threshold}
    out = np.zeros((n, n))
    for j, m in kept:
        out[j, m] = out[m, j] = S[j, m]
    for j in range(n):
        if S[j, j] > 0:
            out[j, j] = 1.0
    return out


FIVE_DOCS = [
    "solar panel energy grid solar storage",
    "energy storage battery grid",
    "football match goal striker",
    "striker goal penalty match match",
    "battery solar energy price",
]


def posts_of(texts):
    return [Post(f"p{i}", t) for i, t in enumerate(texts)]

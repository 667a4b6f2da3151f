"""Batch NMF topic model, squared-Frobenius loss, Lee–Seung multiplicative updates."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import rng as rngmod
from .topicmodel import DocTopics, normalize_rows, read_matrix, write_matrix
from .topicmodel import top_words as _top_words

EPS = 1e-12
# above this many cells the objective is evaluated without densifying the corpus
DENSE_LIMIT = 4_000_000


@dataclass
class NmfModel:
    """``corpus.T ≈ W @ H`` with W (vocab × t) and H (t × docs), both nonnegative.

    Columns of W sum to 1; H carries the scale.
    """

    W: np.ndarray
    H: np.ndarray
    t: int
    seed: int
    iters: int
    objective_trace: list = field(default_factory=list)
    terms: list = None

    @property
    def topic_word(self):
        """(t, vocab) topic-word weights."""
        return self.W.T

    def save(self, prefix):
        prefix = Path(prefix)
        header = {"method": "nmf", "t": self.t, "seed": self.seed, "iters": self.iters,
                  "vocab": self.W.shape[0], "docs": self.H.shape[1]}
        write_matrix(prefix.with_name(prefix.name + ".W.txt"), self.W, header)
        write_matrix(prefix.with_name(prefix.name + ".H.txt"), self.H, header)

    @classmethod
    def load(cls, prefix, terms=None):
        prefix = Path(prefix)
        W, header = read_matrix(prefix.with_name(prefix.name + ".W.txt"))
        H, _ = read_matrix(prefix.with_name(prefix.name + ".H.txt"))
        return cls(W, H, int(header["t"]), int(header["seed"]), int(header["iters"]), [], terms)


def _as_term_doc(corpus):
    """Accept (docs × vocab) counts, sparse or dense; return the (vocab × docs) target."""
    if sp.issparse(corpus):
        A = sp.csr_matrix(corpus.T, dtype=float)
    else:
        A = np.asarray(corpus, dtype=float).T
    if A.shape[0] == 0 or A.shape[1] == 0:
        raise ValueError("empty corpus")
    return A


def _objective(A, W, H, A_sq, AHt=None):
    if not sp.issparse(A):
        R = A - W @ H
        return float(np.einsum("ij,ij->", R, R))
    if AHt is None:
        AHt = A @ H.T
    cross = float(np.einsum("ij,ij->", W, AHt))
    quad = float(np.einsum("ij,ij->", W.T @ W, H @ H.T))
    return max(A_sq - 2.0 * cross + quad, 0.0)


def train_nmf(corpus, t, max_iters=400, tol=1e-5, seed=0, terms=None):
    """Fit an NMF topic model to a (docs × vocab) count matrix.

    Factors start from seeded uniform draws in (0, 1]. Each iteration updates H
    then W; training stops after ``max_iters`` or when the relative decrease in
    ``||C.T - W H||_F^2`` falls below ``tol`` (``tol=0`` runs every iteration).
    ``objective_trace`` holds the objective at initialization and after each
    iteration.
    """
    A = _as_term_doc(corpus)
    m, n = A.shape
    if not 1 <= t <= min(m, n):
        raise ValueError(f"t must be in [1, {min(m, n)}]")
    if sp.issparse(A) and m * n <= DENSE_LIMIT:
        A = A.toarray()
    gen = rngmod.make_rng(seed, stream=0)
    W = rngmod.uniform_open(gen, (m, t))
    H = rngmod.uniform_open(gen, (t, n))
    A_sq = float(A.multiply(A).sum()) if sp.issparse(A) else float(np.einsum("ij,ij->", A, A))

    trace = [_objective(A, W, H, A_sq)]
    it = 0
    for it in range(1, max_iters + 1):
        WtA = np.asarray(W.T @ A) if not sp.issparse(A) else np.asarray((A.T @ W).T)
        H *= WtA / ((W.T @ W) @ H + EPS)
        AHt = np.asarray(A @ H.T)
        W *= AHt / (W @ (H @ H.T) + EPS)
        obj = _objective(A, W, H, A_sq)
        prev = trace[-1]
        trace.append(obj)
        if prev > 0 and (prev - obj) / prev < tol:
            break
        if obj == 0.0:
            break

    scale = W.sum(axis=0)
    scale[scale == 0] = 1.0
    W = W / scale
    H = H * scale[:, None]
    return NmfModel(W, H, t, seed, it, trace, terms)


def reconstruction_error(model, corpus):
    """Frobenius norm ``||C.T - W H||_F`` (not squared)."""
    A = _as_term_doc(corpus)
    A = A.toarray() if sp.issparse(A) else A
    return float(np.linalg.norm(A - model.W @ model.H))


def top_words(model, topic, n, terms=None):
    terms = terms if terms is not None else model.terms
    if not 0 <= topic < model.t:
        raise IndexError(f"topic {topic} out of range for t={model.t}")
    if terms is None:
        raise ValueError("model has no vocabulary; pass terms")
    return _top_words(model.W[:, topic], terms, n)


def doc_topics(model, doc):
    """Topic weights of document ``doc`` normalized to sum 1."""
    if not 0 <= doc < model.H.shape[1]:
        raise IndexError(f"document {doc} out of range")
    col = model.H[:, doc]
    total = col.sum()
    if total <= 0:
        return DocTopics(np.full(model.t, 1.0 / model.t), True)
    return DocTopics(col / total, False)


def doc_topic_matrix(model):
    """(docs, t) normalized weights and the mask of all-zero (degenerate) documents."""
    return normalize_rows(model.H.T)

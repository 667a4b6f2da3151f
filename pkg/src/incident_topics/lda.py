"""LDA topic model fitted by collapsed Gibbs sampling.

Token order is fixed (document index, then position within the document) and
every sweep consumes one block of uniforms from the seeded stream, so a
``(corpus, params, seed)`` triple always yields the same model.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp

from . import rng as rngmod
from .topicmodel import DocTopics, read_matrix, write_matrix
from .topicmodel import top_words as _top_words

CHECK_EVERY = 50
SAMPLE_EVERY = 10


class CountTableError(RuntimeError):
    """Raised when the sampler's count tables disagree with its assignments."""


@dataclass
class LdaModel:
    phi: np.ndarray      # (t, vocab), rows sum to 1
    theta: np.ndarray    # (docs, t), rows sum to 1
    alpha: float
    eta_w: float
    t: int
    seed: int
    iters: int = 0
    burn_in: int = 0
    checkpoints: list = field(default_factory=list)
    terms: list = None
    empty_docs: np.ndarray = None

    @property
    def topic_word(self):
        return self.phi

    def save(self, prefix):
        prefix = Path(prefix)
        header = {"method": "lda", "t": self.t, "alpha": repr(self.alpha), "eta_w": repr(self.eta_w),
                  "iters": self.iters, "burn_in": self.burn_in, "seed": self.seed}
        write_matrix(prefix.with_name(prefix.name + ".phi.txt"), self.phi, header)
        write_matrix(prefix.with_name(prefix.name + ".theta.txt"), self.theta, header)

    @classmethod
    def load(cls, prefix, terms=None):
        prefix = Path(prefix)
        phi, h = read_matrix(prefix.with_name(prefix.name + ".phi.txt"))
        theta, _ = read_matrix(prefix.with_name(prefix.name + ".theta.txt"))
        return cls(phi, theta, float(h["alpha"]), float(h["eta_w"]), int(h["t"]), int(h["seed"]),
                   int(h["iters"]), int(h["burn_in"]), [], terms)


def _flatten_corpus(corpus):
    """Token arrays (doc, word) from a (docs × vocab) count matrix, in row-major order."""
    C = sp.csr_matrix(corpus)
    counts = C.data.astype(np.int64)
    if np.any(counts != C.data) or np.any(counts < 0):
        raise ValueError("corpus must hold nonnegative integer counts")
    words = np.repeat(C.indices.astype(np.int64), counts)
    docs = np.repeat(np.repeat(np.arange(C.shape[0], dtype=np.int64), np.diff(C.indptr)), counts)
    return docs, words, C.shape


@numba.njit(cache=True)
def _sweep(docs, words, z, ndk, nkw, nk, alpha, eta_w, u):
    t = nk.shape[0]
    V = nkw.shape[1]
    p = np.empty(t)
    for i in range(docs.shape[0]):
        d = docs[i]
        w = words[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for j in range(t):
            total += (ndk[d, j] + alpha) * (nkw[j, w] + eta_w) / (nk[j] + V * eta_w)
            p[j] = total
        target = u[i] * total
        k = 0
        while k < t - 1 and p[k] <= target:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


@numba.njit(cache=True)
def _sweep_frozen(words, z, ndk, phi_cols, alpha, u):
    """One pass over a single new document with topic-word probabilities fixed."""
    t = ndk.shape[0]
    p = np.empty(t)
    for i in range(words.shape[0]):
        k = z[i]
        ndk[k] -= 1
        total = 0.0
        for j in range(t):
            total += (ndk[j] + alpha) * phi_cols[j, i]
            p[j] = total
        target = u[i] * total
        k = 0
        while k < t - 1 and p[k] <= target:
            k += 1
        z[i] = k
        ndk[k] += 1


def check_counts(docs, words, z, ndk, nkw, nk, doc_lengths):
    """Verify the count tables against a recount from the assignments."""
    t, V = nkw.shape
    ok = (np.array_equal(ndk.sum(axis=1), doc_lengths)
          and np.array_equal(nkw.sum(axis=1), nk)
          and np.array_equal(ndk.sum(axis=0), nk)
          and np.array_equal(ndk, _recount(docs, z, (ndk.shape[0], t)))
          and np.array_equal(nkw, _recount(z, words, (t, V)))
          and ndk.min() >= 0 and nkw.min() >= 0)
    if not ok:
        raise CountTableError("Gibbs count tables are inconsistent with assignments")


def _recount(rows, cols, shape):
    out = np.zeros(shape, dtype=np.int64)
    np.add.at(out, (rows, cols), 1)
    return out


def train_lda(corpus, t, alpha=None, eta_w=0.01, iters=1000, burn_in=500, seed=0, terms=None):
    """Fit LDA to a (docs × vocab) count matrix by collapsed Gibbs sampling.

    ``alpha`` defaults to ``50 / t``. After ``burn_in`` sweeps, every tenth
    sweep contributes a smoothed estimate of phi and theta; the model holds
    their average. Count tables are audited every 50 sweeps and after the
    last one.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    if alpha is None:
        alpha = 50.0 / t
    if alpha <= 0 or eta_w <= 0:
        raise ValueError("alpha and eta_w must be positive")
    if iters <= burn_in or burn_in < 0:
        raise ValueError("iters must exceed burn_in")
    docs, words, (n_docs, V) = _flatten_corpus(corpus)
    if n_docs == 0 or V == 0 or len(words) == 0:
        raise ValueError("empty corpus")

    gen = rngmod.make_rng(seed, stream=3)
    z = np.minimum((rngmod.uniform(gen, len(words)) * t).astype(np.int64), t - 1)
    ndk = _recount(docs, z, (n_docs, t))
    nkw = _recount(z, words, (t, V))
    nk = nkw.sum(axis=1)
    doc_lengths = np.bincount(docs, minlength=n_docs)

    phi_sum = np.zeros((t, V))
    theta_sum = np.zeros((n_docs, t))
    samples = 0
    checkpoints = []
    for sweep in range(1, iters + 1):
        _sweep(docs, words, z, ndk, nkw, nk, float(alpha), float(eta_w), rngmod.uniform(gen, len(words)))
        if sweep % CHECK_EVERY == 0 or sweep == iters:
            check_counts(docs, words, z, ndk, nkw, nk, doc_lengths)
            checkpoints.append(sweep)
        if sweep > burn_in and (sweep - burn_in) % SAMPLE_EVERY == 0:
            phi_sum += (nkw + eta_w) / (nk[:, None] + V * eta_w)
            theta_sum += (ndk + alpha) / (doc_lengths[:, None] + t * alpha)
            samples += 1
    if samples == 0:
        phi_sum += (nkw + eta_w) / (nk[:, None] + V * eta_w)
        theta_sum += (ndk + alpha) / (doc_lengths[:, None] + t * alpha)
        samples = 1
    phi = phi_sum / samples
    theta = theta_sum / samples
    # averaging leaves rows a few ulps off 1
    phi /= phi.sum(axis=1, keepdims=True)
    theta /= theta.sum(axis=1, keepdims=True)
    return LdaModel(phi, theta, float(alpha), float(eta_w), t, seed, iters, burn_in, checkpoints, terms,
                    doc_lengths == 0)


def log_likelihood(model, corpus):
    """Plug-in log likelihood ``sum_d sum_w c_dw log sum_k theta_dk phi_kw``."""
    C = sp.csr_matrix(corpus)
    if C.shape[1] != model.phi.shape[1]:
        raise ValueError("corpus vocabulary does not match the model")
    if C.shape[0] != model.theta.shape[0]:
        raise ValueError("corpus has a different number of documents than the model")
    rows = np.repeat(np.arange(C.shape[0]), np.diff(C.indptr))
    p = np.einsum("ik,ki->i", model.theta[rows], model.phi[:, C.indices])
    return float(np.dot(C.data, np.log(p)))


def infer_doc_topics(model, bow, iters=200, seed=0):
    """Topic mixture of an unseen bag-of-words with phi held fixed.

    ``bow`` maps word id -> count (or is a :class:`~incident_topics.textpipe.BagOfWords`).
    The second half of the sweeps is averaged.
    """
    counts = getattr(bow, "counts", bow)
    t, V = model.phi.shape
    if not counts:
        return DocTopics(np.full(t, 1.0 / t), True)
    ids = np.array(sorted(counts), dtype=np.int64)
    if ids.min() < 0 or ids.max() >= V:
        raise ValueError("word id outside the model vocabulary")
    words = np.repeat(ids, [counts[i] for i in ids])
    phi_cols = np.ascontiguousarray(model.phi[:, words])
    gen = rngmod.make_rng(seed, stream=4)
    z = np.minimum((rngmod.uniform(gen, len(words)) * t).astype(np.int64), t - 1)
    ndk = np.bincount(z, minlength=t).astype(np.int64)
    acc = np.zeros(t)
    kept = 0
    for sweep in range(iters):
        _sweep_frozen(words, z, ndk, phi_cols, model.alpha, rngmod.uniform(gen, len(words)))
        if sweep >= iters // 2:
            acc += (ndk + model.alpha) / (len(words) + t * model.alpha)
            kept += 1
    w = acc / kept
    return DocTopics(w / w.sum(), False)


def top_words(model, topic, n, terms=None):
    terms = terms if terms is not None else model.terms
    if not 0 <= topic < model.t:
        raise IndexError(f"topic {topic} out of range for t={model.t}")
    if terms is None:
        raise ValueError("model has no vocabulary; pass terms")
    return _top_words(model.phi[topic], terms, n)


def doc_topics(model, doc):
    if not 0 <= doc < model.theta.shape[0]:
        raise IndexError(f"document {doc} out of range")
    return DocTopics(model.theta[doc].copy(), False)


def doc_topic_matrix(model):
    """(docs, t) mixtures and the mask of empty (degenerate) training documents."""
    empty = model.empty_docs
    if empty is None:
        empty = np.zeros(model.theta.shape[0], dtype=bool)
    return model.theta.copy(), empty.copy()

"""Ground-truth generators and brute-force oracles.

Planted topic corpora stand in for the incident narratives and Gaussian
mixtures stand in for incident locations; both know the truth they were drawn
from, which the recovery tests compare against.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import rng as rngmod
from .textpipe import Corpus, Dictionary, vectorize


@dataclass(frozen=True)
class PlantedCorpusSpec:
    t: int = 5
    vocab_per_topic: int = 100
    docs: int = 2000
    doc_length: float = 50.0
    topic_mixing: float = 0.1
    seed: int = 0
    # within-topic word probabilities fall off as rank ** -zipf
    zipf: float = 1.0


@dataclass
class PlantedCorpus:
    corpus: Corpus
    token_lists: list
    assignments: np.ndarray
    # per topic, the block's terms in decreasing planted probability
    planted_words: list
    word_probs: np.ndarray


def planted_term(topic, j, spec):
    tw = len(str(spec.t - 1))
    vw = len(str(spec.vocab_per_topic - 1))
    return f"t{topic:0{tw}d}w{j:0{vw}d}"


def generate_corpus(spec):
    """Draw a corpus whose documents each belong to one planted topic.

    A document of planted topic ``k`` takes each word from block ``k`` with
    probability ``1 - topic_mixing`` (Zipf-weighted within the block) and
    otherwise uniformly from the whole vocabulary. Lengths are Poisson with
    mean ``doc_length``, at least 1.
    """
    if spec.t < 1 or spec.vocab_per_topic < 1 or spec.docs < 1:
        raise ValueError("t, vocab_per_topic and docs must be positive")
    if not 0.0 <= spec.topic_mixing <= 1.0:
        raise ValueError("topic_mixing must lie in [0, 1]")
    V = spec.t * spec.vocab_per_topic
    terms = [planted_term(k, j, spec) for k in range(spec.t) for j in range(spec.vocab_per_topic)]
    block = 1.0 / np.arange(1, spec.vocab_per_topic + 1) ** spec.zipf
    block /= block.sum()

    gen = rngmod.make_rng(spec.seed, stream=1)
    assignments = rngmod.categorical(gen, np.full(spec.t, 1.0 / spec.t), spec.docs)
    lengths = np.maximum(rngmod.poisson(gen, spec.doc_length, spec.docs), 1)
    total = int(lengths.sum())
    off_topic = rngmod.uniform(gen, total) < spec.topic_mixing
    in_block = rngmod.categorical(gen, block, total)
    uniform_word = np.minimum((rngmod.uniform(gen, total) * V).astype(np.int64), V - 1)
    doc_of_token = np.repeat(np.arange(spec.docs), lengths)
    word_ids = np.where(off_topic, uniform_word,
                        assignments[doc_of_token] * spec.vocab_per_topic + in_block)

    dictionary = Dictionary(terms)
    bounds = np.concatenate([[0], np.cumsum(lengths)])
    token_lists = [[terms[w] for w in word_ids[bounds[d]:bounds[d + 1]]] for d in range(spec.docs)]
    docs = [vectorize([toks], dictionary, str(d)) for d, toks in enumerate(token_lists)]

    planted = [[planted_term(k, j, spec) for j in range(spec.vocab_per_topic)] for k in range(spec.t)]
    probs = np.full((spec.t, V), spec.topic_mixing / V)
    for k in range(spec.t):
        probs[k, k * spec.vocab_per_topic:(k + 1) * spec.vocab_per_topic] += (1 - spec.topic_mixing) * block
    return PlantedCorpus(Corpus(dictionary, docs), token_lists, assignments, planted, probs)


@dataclass(frozen=True)
class SpatialMixtureSpec:
    """Isotropic Gaussian components, one per label; label ids are 0..M-1 in order."""

    components: tuple = ((0, (-2.0, 0.0), 1.0), (1, (2.0, 0.0), 1.0))
    rho: tuple = (0.5, 0.5)
    n: int = 20_000
    seed: int = 0


class MixtureRatio:
    """Closed-form ``r_m(x) = f_m(x) / sum_j rho_j f_j(x)`` for a Gaussian mixture."""

    def __init__(self, spec):
        self.centers = np.array([c[1] for c in spec.components], dtype=float)
        self.sigmas = np.array([c[2] for c in spec.components], dtype=float)
        self.rho = np.asarray(spec.rho, dtype=float)

    def log_component_densities(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d2 = ((x[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        return -d2 / (2 * self.sigmas ** 2) - np.log(2 * np.pi * self.sigmas ** 2)

    def __call__(self, x):
        """(n_points, M) array of analytic ratios at ``x``."""
        logf = self.log_component_densities(x)
        logmix = logsumexp(logf + np.log(self.rho), axis=1, keepdims=True)
        return np.exp(logf - logmix)


def _check_mixture(spec):
    labels = [c[0] for c in spec.components]
    if labels != list(range(len(labels))):
        raise ValueError("component labels must be 0..M-1 in order")
    rho = np.asarray(spec.rho, dtype=float)
    if len(rho) != len(labels) or np.any(rho <= 0) or abs(rho.sum() - 1.0) > 1e-12:
        raise ValueError("rho must be a positive vector on the simplex, one entry per component")
    if any(c[2] <= 0 for c in spec.components):
        raise ValueError("sigmas must be positive")


def generate_mixture(spec):
    """Sample ``spec.n`` labeled points; returns ``(points, labels, ratio)``.

    ``points`` is (n, 2), ``labels`` (n,) ints, ``ratio`` a :class:`MixtureRatio`.
    """
    _check_mixture(spec)
    gen = rngmod.make_rng(spec.seed, stream=2)
    labels = rngmod.categorical(gen, spec.rho, spec.n)
    return _place(spec, labels, gen), labels, MixtureRatio(spec)


def _place(spec, labels, gen):
    z = rngmod.gauss(gen, 2 * len(labels)).reshape(len(labels), 2)
    centers = np.array([c[1] for c in spec.components], dtype=float)
    sigmas = np.array([c[2] for c in spec.components], dtype=float)
    return centers[labels] + sigmas[labels, None] * z


def place_points(spec, labels, seed):
    """Locations for externally chosen labels, each from its own component."""
    _check_mixture(spec)
    return _place(spec, np.asarray(labels, dtype=np.int64), rngmod.make_rng(seed, stream=6))


def _distances(points, x):
    dx = points[:, 0] - x[0]
    dy = points[:, 1] - x[1]
    return np.sqrt(dx * dx + dy * dy)


def brute_force_counts(points, labels, n_labels, x, k):
    """``(R, N)`` by sorting all n distances from ``x``."""
    points = np.asarray(points, dtype=float)
    if not 1 <= k <= len(points):
        raise ValueError("k must be in [1, n]")
    d = _distances(points, np.asarray(x, dtype=float))
    R = np.sort(d)[k - 1]
    N = np.bincount(np.asarray(labels)[d <= R], minlength=n_labels).astype(np.int64)
    return R, N


def brute_force_dre(points, labels, rho_hat, x, k):
    """Density-ratio estimate at ``x`` by full sort; the oracle for the kd-tree path."""
    rho_hat = np.asarray(rho_hat, dtype=float)
    if np.any(rho_hat <= 0):
        raise ValueError("every label needs at least one point")
    _, N = brute_force_counts(points, labels, len(rho_hat), x, k)
    return (N / k) / rho_hat

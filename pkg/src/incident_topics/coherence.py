"""UMass topic coherence and the coherence-versus-topic-count sweep."""

import csv
import math

import numpy as np
import scipy.sparse as sp

from . import lda, nmf


class DocFreqIndex:
    """Document frequencies of single terms and term pairs for one corpus.

    Built from a (docs × vocab) count matrix; only presence matters. Pair
    counts are computed on demand from the binary incidence matrix.
    """

    def __init__(self, corpus, terms=None):
        B = sp.csc_matrix(corpus, dtype=float)
        B.data = np.ones_like(B.data)
        B.eliminate_zeros()
        self._B = B
        self.n_docs = B.shape[0]
        self.doc_freq = np.asarray(B.sum(axis=0)).ravel().astype(np.int64)
        self.terms = list(terms) if terms is not None else None
        self._ids = {t: i for i, t in enumerate(self.terms)} if self.terms is not None else None

    def word_id(self, word):
        if isinstance(word, (int, np.integer)):
            idx = int(word)
            if not 0 <= idx < len(self.doc_freq):
                raise KeyError(f"word id {idx} outside vocabulary")
            return idx
        if self._ids is None or word not in self._ids:
            raise KeyError(f"term {word!r} not in corpus vocabulary")
        return self._ids[word]

    def df(self, word):
        return int(self.doc_freq[self.word_id(word)])

    def pair_counts(self, ids):
        """Symmetric matrix of co-document counts among ``ids`` (diagonal = D(w))."""
        sub = self._B[:, list(ids)]
        return np.rint((sub.T @ sub).toarray()).astype(np.int64)

    def co_df(self, w1, w2):
        i, j = self.word_id(w1), self.word_id(w2)
        return int(self.pair_counts([i, j])[0, 1]) if i != j else self.df(i)

    def _label(self, idx):
        return self.terms[idx] if self.terms is not None else idx

    def order_by_frequency(self, words):
        """Word ids sorted by document frequency descending, ties by term ascending."""
        ids = [self.word_id(w) for w in words]
        return sorted(ids, key=lambda i: (-self.doc_freq[i], self._label(i)))


def umass_topic(top_words, index):
    """UMass coherence ``sum_{i<j} ln((D(w_i, w_j) + 1) / D(w_i))``.

    Words are first ordered so that more frequent words (by document
    frequency) come first, which makes ``w_i`` the more common word of every
    pair. Raises ``KeyError`` for a word that occurs in no document.
    """
    ids = index.order_by_frequency(top_words)
    for i in ids:
        if index.doc_freq[i] < 1:
            raise KeyError(f"term {index._label(i)!r} does not occur in the corpus")
    pairs = index.pair_counts(ids)
    total = 0.0
    for a in range(len(ids)):
        da = index.doc_freq[ids[a]]
        for b in range(a + 1, len(ids)):
            total += math.log((pairs[a, b] + 1) / da)
    return total


def model_top_words(model, n_top, terms):
    module = nmf if isinstance(model, nmf.NmfModel) else lda
    return [[w for w, _ in module.top_words(model, k, n_top, terms)] for k in range(model.t)]


def umass_model(model, index, n_top=10, terms=None):
    """Mean UMass coherence over the model's topics, ``n_top`` words each."""
    terms = terms if terms is not None else (model.terms or index.terms)
    return float(np.mean([umass_topic(words, index) for words in model_top_words(model, n_top, terms)]))


def train(method, corpus, t, seed, **params):
    if method == "nmf":
        return nmf.train_nmf(corpus, t, seed=seed, **params)
    if method == "lda":
        return lda.train_lda(corpus, t, seed=seed, **params)
    raise ValueError(f"unknown method {method!r}")


def coherence_sweep(corpus, t_min=2, t_max=19, trainer="nmf", seed=0, terms=None, n_top=10, index=None,
                    **params):
    """Train one model per topic count and score it; returns ``[(t, coherence), ...]``."""
    if not 2 <= t_min <= t_max:
        raise ValueError("need 2 <= t_min <= t_max")
    if index is None:
        index = DocFreqIndex(corpus, terms)
    rows = []
    for t in range(t_min, t_max + 1):
        model = train(trainer, corpus, t, seed, terms=terms, **params)
        rows.append((t, umass_model(model, index, n_top=n_top, terms=terms)))
    return rows


def write_sweep_csv(path, rows_by_method):
    """CSV ``t,method,coherence``; ``rows_by_method`` maps method -> sweep rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "method", "coherence"])
        for method, rows in rows_by_method.items():
            for t, score in rows:
                w.writerow([t, method, repr(float(score))])

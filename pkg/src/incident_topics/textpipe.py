"""Narrative preprocessing: tokens, stopwords, 2-grams, TF-IDF pruning, bag-of-words.

A tokenized document is a ``list[list[str]]``: a list of sentences, each a
list of lowercase alphanumeric tokens. Bigram terms are joined with ``_``.
"""

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp

_SENTENCE_END = re.compile(r"[.!?]")
_NON_TOKEN = re.compile(r"[^a-z0-9]")
BIGRAM_JOINER = "_"


def tokenize(text):
    """Split ``text`` into sentences of cleaned lowercase tokens.

    Sentences end at ``.``, ``!`` or ``?``; inside a sentence tokens are
    whitespace-delimited, lowercased and stripped of every character outside
    ``[a-z0-9]``. Tokens and sentences left empty are dropped.

    >>> tokenize("The DOG barked. It ran!")
    [['the', 'dog', 'barked'], ['it', 'ran']]
    """
    doc = []
    for chunk in _SENTENCE_END.split(text):
        sentence = [tok for tok in (_NON_TOKEN.sub("", w) for w in chunk.lower().split()) if tok]
        if sentence:
            doc.append(sentence)
    return doc


def normalize_term(term):
    return _NON_TOKEN.sub("", term.lower())


def load_stoplist(path=None):
    """Stopword set, normalized with the same character rule as :func:`tokenize`.

    With no ``path`` the bundled 179-word English list is used. Entries such as
    ``don't`` become ``dont`` so they can match tokenizer output.
    """
    if path is None:
        text = resources.files("incident_topics").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = {normalize_term(line) for line in text.splitlines()}
    words.discard("")
    return frozenset(words)


def remove_stopwords(doc, stoplist):
    if not stoplist:
        raise ValueError("stoplist must be nonempty")
    out = []
    for sentence in doc:
        kept = [tok for tok in sentence if tok not in stoplist]
        if kept:
            out.append(kept)
    return out


def add_bigrams(doc):
    """Append ``w1_w2`` for each adjacent token pair, per sentence."""
    return [s + [a + BIGRAM_JOINER + b for a, b in zip(s, s[1:])] for s in doc]


def flatten(doc):
    return [tok for sentence in doc for tok in sentence]


@dataclass(frozen=True)
class TfIdfScore:
    doc: int
    term: str
    tf: int
    idf: float
    score: float


def document_frequencies(docs):
    """Per-term document counts; merged from per-document sets so order is irrelevant."""
    df = Counter()
    for doc in docs:
        df.update(set(flatten(doc)))
    return df


def score_tfidf(docs):
    """TF-IDF for every (document, distinct term) pair.

    ``tf`` is the raw in-document count and ``idf = ln(N / df)``. Scores are
    returned grouped by document, terms in first-occurrence order.
    """
    n = len(docs)
    if n < 2:
        raise ValueError("TF-IDF needs at least 2 documents")
    df = document_frequencies(docs)
    idf = {term: math.log(n / count) for term, count in df.items()}
    scores = []
    for d, doc in enumerate(docs):
        for term, tf in Counter(flatten(doc)).items():
            scores.append(TfIdfScore(d, term, tf, idf[term], tf * idf[term]))
    return scores


def tfidf_threshold(scores, quantile):
    values = np.array([s.score for s in scores])
    return float(np.quantile(values, quantile))


def prune_low_tfidf(docs, scores, quantile=0.2):
    """Drop every occurrence of (doc, term) pairs scoring strictly below the threshold.

    The threshold is the corpus-wide ``quantile`` of all pair scores (linear
    interpolation). Pairs tied with the threshold are kept, so a corpus whose
    scores are all equal is left untouched. A term removed from one document
    survives elsewhere wherever its own score clears the threshold.
    """
    if not 0.0 <= quantile < 1.0:
        raise ValueError("quantile must lie in [0, 1)")
    if not scores:
        return [list(map(list, doc)) for doc in docs]
    tau = tfidf_threshold(scores, quantile)
    drop = {(s.doc, s.term) for s in scores if s.score < tau}
    out = []
    for d, doc in enumerate(docs):
        pruned = []
        for sentence in doc:
            kept = [tok for tok in sentence if (d, tok) not in drop]
            if kept:
                pruned.append(kept)
        out.append(pruned)
    return out


class Dictionary:
    """Bijective term <-> id map with ids assigned in lexicographic term order."""

    def __init__(self, terms):
        self.id2token = sorted(set(terms))
        self.token2id = {t: i for i, t in enumerate(self.id2token)}

    def __len__(self):
        return len(self.id2token)

    def __contains__(self, term):
        return term in self.token2id

    def __eq__(self, other):
        return isinstance(other, Dictionary) and self.id2token == other.id2token

    def __repr__(self):
        return f"Dictionary({len(self)} terms)"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, term in enumerate(self.id2token):
                fh.write(f"{term}\t{i}\n")

    @classmethod
    def load(cls, path):
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                term, idx = line.rstrip("\n").split("\t")
                pairs.append((int(idx), term))
        pairs.sort()
        if [i for i, _ in pairs] != list(range(len(pairs))):
            raise ValueError(f"{path}: ids are not contiguous")
        return cls(t for _, t in pairs)


def build_dictionary(docs):
    d = Dictionary(tok for doc in docs for tok in flatten(doc))
    if len(d) == 0:
        raise ValueError("empty vocabulary")
    return d


@dataclass
class BagOfWords:
    doc_id: str
    counts: dict = field(default_factory=dict)
    skipped: int = 0

    def total(self):
        return sum(self.counts.values())


def vectorize(doc, dictionary, doc_id=""):
    """Sparse count vector of ``doc``; terms missing from the dictionary are tallied in ``skipped``."""
    counts = Counter()
    skipped = 0
    for tok in flatten(doc):
        idx = dictionary.token2id.get(tok)
        if idx is None:
            skipped += 1
        else:
            counts[idx] += 1
    return BagOfWords(doc_id, dict(sorted(counts.items())), skipped)


@dataclass
class Corpus:
    """Bag-of-words documents over a fixed :class:`Dictionary`."""

    dictionary: Dictionary
    docs: list

    def __len__(self):
        return len(self.docs)

    @property
    def doc_ids(self):
        return [d.doc_id for d in self.docs]

    def to_matrix(self):
        """(n_docs, vocab) CSR matrix of counts."""
        rows, cols, vals = [], [], []
        for i, bow in enumerate(self.docs):
            for j, c in bow.counts.items():
                rows.append(i)
                cols.append(j)
                vals.append(c)
        return sp.csr_matrix((np.array(vals, dtype=float), (rows, cols)),
                             shape=(len(self.docs), len(self.dictionary)))

    def doc_word_lists(self):
        """Per-document arrays of distinct word ids (used for document-frequency counts)."""
        return [np.fromiter(bow.counts.keys(), dtype=np.int64, count=len(bow.counts)) for bow in self.docs]

    def save(self, dict_path, corpus_path):
        self.dictionary.save(dict_path)
        with open(corpus_path, "w", encoding="utf-8", newline="\n") as fh:
            for bow in self.docs:
                parts = [bow.doc_id] + [f"{j}:{c}" for j, c in sorted(bow.counts.items())]
                fh.write(" ".join(parts) + "\n")

    @classmethod
    def load(cls, dict_path, corpus_path):
        dictionary = Dictionary.load(dict_path)
        docs = []
        with open(corpus_path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                counts = {}
                for pair in parts[1:]:
                    j, c = pair.split(":")
                    counts[int(j)] = int(c)
                docs.append(BagOfWords(parts[0], counts))
        return cls(dictionary, docs)

    @classmethod
    def from_token_lists(cls, token_lists, doc_ids=None, dictionary=None):
        """Corpus from flat token lists (each treated as a single sentence)."""
        docs = [[list(toks)] if toks else [] for toks in token_lists]
        if dictionary is None:
            dictionary = build_dictionary(docs)
        if doc_ids is None:
            doc_ids = [str(i) for i in range(len(docs))]
        return cls(dictionary, [vectorize(doc, dictionary, did) for doc, did in zip(docs, doc_ids)])


@dataclass
class PipelineResult:
    tokens: list
    no_stopwords: list
    with_bigrams: list
    scores: list
    pruned: list
    corpus: Corpus
    stats: dict


def _count_tokens(docs):
    return sum(len(s) for doc in docs for s in doc)


def preprocess(texts, stoplist, quantile=0.2, doc_ids=None):
    """Run every stage on raw narratives and keep each intermediate result."""
    if doc_ids is None:
        doc_ids = [str(i) for i in range(len(texts))]
    tokens = [tokenize(t) for t in texts]
    no_stop = [remove_stopwords(d, stoplist) for d in tokens]
    bigrams = [add_bigrams(d) for d in no_stop]
    scores = score_tfidf(bigrams)
    pruned = prune_low_tfidf(bigrams, scores, quantile)
    dictionary = build_dictionary(pruned)
    corpus = Corpus(dictionary, [vectorize(d, dictionary, i) for d, i in zip(pruned, doc_ids)])
    stats = {
        "docs_in": len(texts),
        "docs_nonempty_out": sum(1 for b in corpus.docs if b.counts),
        "tokens": _count_tokens(tokens),
        "tokens_after_stopwords": _count_tokens(no_stop),
        "removed_stopwords": _count_tokens(tokens) - _count_tokens(no_stop),
        "bigrams_added": _count_tokens(bigrams) - _count_tokens(no_stop),
        "tokens_after_bigrams": _count_tokens(bigrams),
        "tfidf_pairs": len(scores),
        "tfidf_threshold": tfidf_threshold(scores, quantile),
        "removed_tfidf": _count_tokens(bigrams) - _count_tokens(pruned),
        "tokens_out": _count_tokens(pruned),
        "vocab_size": len(dictionary),
    }
    return PipelineResult(tokens, no_stop, bigrams, scores, pruned, corpus, stats)

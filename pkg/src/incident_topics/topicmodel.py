"""Pieces shared by the NMF and LDA trainers."""

from typing import NamedTuple

import numpy as np


class DocTopics(NamedTuple):
    weights: np.ndarray
    degenerate: bool


def top_words(weights, terms, n):
    """``n`` largest entries of a topic's word-weight vector as ``(term, weight)``.

    Ordered by weight descending, ties broken by term ascending.
    """
    weights = np.asarray(weights, dtype=float)
    if n > len(weights):
        raise ValueError("n exceeds vocabulary size")
    order = sorted(range(len(weights)), key=lambda j: (-weights[j], terms[j]))
    return [(terms[j], float(weights[j])) for j in order[:n]]


def greedy_match(score):
    """Greedy one-to-one matching on a (rows, cols) similarity matrix.

    Repeatedly pairs the highest remaining entry; returns ``{row: col}``.
    """
    score = np.array(score, dtype=float)
    match = {}
    rows, cols = score.shape
    for _ in range(min(rows, cols)):
        i, j = np.unravel_index(np.argmax(score), score.shape)
        match[int(i)] = int(j)
        score[i, :] = -np.inf
        score[:, j] = -np.inf
    return match


def normalize_rows(m, degenerate_fill=True):
    """Row-normalize to sum 1; all-zero rows become uniform and are flagged."""
    m = np.asarray(m, dtype=float)
    sums = m.sum(axis=1, keepdims=True)
    degenerate = (sums[:, 0] <= 0)
    out = np.divide(m, sums, out=np.zeros_like(m), where=sums > 0)
    if degenerate_fill:
        out[degenerate] = 1.0 / m.shape[1]
    return out, degenerate


def write_matrix(path, m, header):
    """Dense matrix as text, 17 significant digits, ``# key=value`` header lines first."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in header.items():
            fh.write(f"# {key}={value}\n")
        fh.write(f"# rows={m.shape[0]}\n# cols={m.shape[1]}\n")
        for row in m:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix(path):
    header, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
            elif line.strip():
                rows.append([float(v) for v in line.split()])
    m = np.array(rows, dtype=float).reshape(int(header["rows"]), int(header["cols"]))
    return m, header

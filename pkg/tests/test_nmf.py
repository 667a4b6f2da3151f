import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from incident_topics import nmf, synth
from incident_topics.topicmodel import greedy_match
from support import topic_overlaps


@pytest.fixture(scope="module")
def planted():
    return synth.generate_corpus(synth.PlantedCorpusSpec(seed=3))


@pytest.fixture(scope="module")
def planted_model(planted):
    return nmf.train_nmf(planted.corpus.to_matrix(), 5, seed=0, terms=planted.corpus.dictionary.id2token)


def test_rank_one_exact():
    C = np.array([[2.0, 4.0], [1.0, 2.0]])
    model = nmf.train_nmf(C, 1, max_iters=500, tol=0)
    assert nmf.reconstruction_error(model, C) <= 1e-6


def test_identity_like():
    C = 3.0 * np.eye(6)
    model = nmf.train_nmf(C, 6, max_iters=500, tol=0)
    assert nmf.reconstruction_error(model, C) <= 1e-6


def test_rejects_bad_t():
    with pytest.raises(ValueError):
        nmf.train_nmf(np.ones((3, 4)), 4)
    with pytest.raises(ValueError):
        nmf.train_nmf(np.ones((3, 4)), 0)


def test_sparse_and_dense_agree():
    gen = np.random.default_rng(1)
    C = gen.poisson(1.0, size=(30, 20)).astype(float)
    a = nmf.train_nmf(C, 3, max_iters=50, tol=0, seed=4)
    b = nmf.train_nmf(sp.csr_matrix(C), 3, max_iters=50, tol=0, seed=4)
    np.testing.assert_allclose(a.W, b.W, rtol=1e-10, atol=1e-14)


def test_trace_formula_matches_dense(monkeypatch):
    gen = np.random.default_rng(2)
    C = sp.csr_matrix(gen.poisson(0.5, size=(40, 25)).astype(float))
    dense = nmf.train_nmf(C, 4, max_iters=30, tol=0, seed=1)
    monkeypatch.setattr(nmf, "DENSE_LIMIT", 0)
    traced = nmf.train_nmf(C, 4, max_iters=30, tol=0, seed=1)
    np.testing.assert_allclose(traced.objective_trace, dense.objective_trace, rtol=1e-9)


def test_objective_monotone_and_columns_normalized(planted_model):
    tr = np.array(planted_model.objective_trace)
    assert np.all(np.diff(tr) <= 1e-10 * tr[:-1])
    np.testing.assert_allclose(planted_model.W.sum(axis=0), 1.0)
    assert planted_model.W.min() >= 0 and planted_model.H.min() >= 0


def test_planted_recovery(planted, planted_model):
    overlaps = topic_overlaps(planted_model.topic_word, planted.corpus.dictionary.id2token, planted.planted_words)
    assert min(overlaps) >= 7


def test_top_words_in_planted_block(planted, planted_model):
    terms = planted.corpus.dictionary.id2token
    score = np.array([[sum(w in set(p) for w, _ in nmf.top_words(planted_model, k, 10))
                       for k in range(5)] for p in planted.planted_words])
    for p, k in greedy_match(score).items():
        assert {w for w, _ in nmf.top_words(planted_model, k, 10)} <= set(planted.planted_words[p])
    assert len(terms) == 500


def test_deterministic(planted):
    C = planted.corpus.to_matrix()
    a = nmf.train_nmf(C, 5, max_iters=20, seed=9)
    b = nmf.train_nmf(C, 5, max_iters=20, seed=9)
    assert np.array_equal(a.W, b.W) and np.array_equal(a.H, b.H)


def test_zero_stays_zero():
    C = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    model = nmf.train_nmf(C, 2, max_iters=5, tol=0)
    assert model.W.min() >= 0
    # multiplicative update on an exact zero
    W = np.array([[0.0, 0.5], [0.3, 0.2]])
    H = np.array([[0.1, 0.4], [0.7, 0.2]])
    A = np.array([[1.0, 2.0], [3.0, 0.5]])
    W2 = W * (A @ H.T) / (W @ (H @ H.T) + nmf.EPS)
    assert W2[0, 0] == 0.0


@given(arrays(np.float64, (6, 5), elements=st.floats(0, 5)), st.integers(1, 4), st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_descent_property(C, t, seed):
    if C.sum() == 0:
        return
    model = nmf.train_nmf(C, t, max_iters=60, tol=0, seed=seed)
    tr = np.array(model.objective_trace)
    assert np.all(np.diff(tr) <= 1e-10 * np.maximum(tr[:-1], 1e-300) + 1e-12)
    assert model.W.min() >= 0 and model.H.min() >= 0


def test_one_hot_top_word():
    W = np.zeros((3, 1))
    W[1, 0] = 1.0
    model = nmf.NmfModel(W, np.ones((1, 2)), 1, 0, 0, terms=["arrest", "cocaine", "vehicle"])
    assert nmf.top_words(model, 0, 1) == [("cocaine", 1.0)]


def test_top_words_rescaling_invariant(planted_model):
    W = planted_model.W.copy()
    H = planted_model.H.copy()
    W[:, 2] *= 7.5
    H[2] /= 7.5
    scaled = nmf.NmfModel(W, H, 5, 0, 0, terms=planted_model.terms)
    for k in range(5):
        assert [w for w, _ in nmf.top_words(scaled, k, 10)] == [w for w, _ in nmf.top_words(planted_model, k, 10)]


def test_top_words_bad_topic(planted_model):
    with pytest.raises(IndexError):
        nmf.top_words(planted_model, 5, 3)


def test_doc_topics_single_topic_docs():
    pc = synth.generate_corpus(synth.PlantedCorpusSpec(t=3, vocab_per_topic=30, docs=300, topic_mixing=0.0,
                                                       seed=1))
    model = nmf.train_nmf(pc.corpus.to_matrix(), 3, seed=0, terms=pc.corpus.dictionary.id2token)
    theta, degenerate = nmf.doc_topic_matrix(model)
    assert not degenerate.any()
    best = np.argmax(theta, axis=1)
    conf = np.zeros((3, 3))
    np.add.at(conf, (pc.assignments, best), 1)
    match = greedy_match(conf)
    weights = theta[np.arange(300), [match[a] for a in pc.assignments]]
    assert np.mean(weights >= 0.9) >= 0.95
    assert nmf.doc_topics(model, 0).weights.sum() == pytest.approx(1.0)


def test_doc_topics_t1():
    model = nmf.train_nmf(np.array([[1.0, 2.0], [0.0, 3.0]]), 1)
    for d in range(2):
        assert nmf.doc_topics(model, d).weights.tolist() == [1.0]


def test_doc_topics_shape_example():
    # H column with mass 0.2 / 0.8 on two topics
    model = nmf.NmfModel(np.eye(2), np.array([[0.4], [1.6]]), 2, 0, 0)
    np.testing.assert_allclose(nmf.doc_topics(model, 0).weights, [0.2, 0.8])


def test_degenerate_doc():
    model = nmf.NmfModel(np.eye(2), np.array([[0.0, 1.0], [0.0, 1.0]]), 2, 0, 0)
    dt = nmf.doc_topics(model, 0)
    assert dt.degenerate and dt.weights.tolist() == [0.5, 0.5]


def test_save_load_roundtrip(tmp_path, planted_model):
    planted_model.save(tmp_path / "m")
    back = nmf.NmfModel.load(tmp_path / "m")
    assert np.array_equal(back.W, planted_model.W)
    assert np.array_equal(back.H, planted_model.H)
    assert back.t == 5

"""Recovery metrics shared by the topic-model tests."""

import numpy as np

from incident_topics.topicmodel import greedy_match


def topic_overlaps(topic_word, terms, planted_words, n=10):
    """Top-``n`` overlap of each planted topic with its greedily matched model topic."""
    order = np.argsort(-np.asarray(topic_word), axis=1, kind="stable")[:, :n]
    found = [{terms[j] for j in row} for row in order]
    truth = [set(words[:n]) for words in planted_words]
    score = np.array([[len(f & p) for f in found] for p in truth])
    match = greedy_match(score)
    return [int(score[k, match[k]]) for k in range(len(truth))]


def purity(doc_topic, assignments):
    """Fraction of documents whose argmax topic is the one matched to their planted topic."""
    assignments = np.asarray(assignments)
    best = np.argmax(doc_topic, axis=1)
    t = doc_topic.shape[1]
    confusion = np.zeros((t, t))
    np.add.at(confusion, (assignments, best), 1)
    match = greedy_match(confusion)
    return float(np.mean(best == np.array([match[a] for a in assignments])))

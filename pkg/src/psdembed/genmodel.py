"""Probabilistic scoring under the trained link model.

A bigram's probability is the independence baseline scaled by the
exponentiated interaction: ``exp(v_i . v_j + residual) * u_i * u_j``, where
the residual is whatever part of the log-ratio target the inner product did
not explain. Residuals are recomputed per pair from the target statistics,
never stored densely. Window and document scoring assume interactions of the
context words with the focus word add up in log space; the pointwise
interaction statistic below measures how far a trigram distribution deviates
from exactly that assumption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stats import PmiTarget

__all__ = [
    "ModelHandle",
    "ResidualView",
    "bigram_joint",
    "window_joint",
    "window_conditional",
    "document_log_likelihood",
    "pointwise_interaction",
    "interaction_information",
    "trigram_distribution",
    "model_perplexity_report",
    "PerplexityReport",
]


class ModelHandle:
    """Read-only bundle of everything scoring needs.

    ``vectors`` is (rank, vocab_size) with column i the embedding of word i;
    ``pmi`` supplies the regression target for residual lookups and may be a
    :class:`~psdembed.stats.PmiTarget`, a dense array, or None when residuals
    are never requested. ``vocab`` is optional and only used to map string
    tokens.
    """

    def __init__(self, vectors: np.ndarray, unigrams: np.ndarray,
                 pmi=None, window: int = 5, vocab=None):
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.unigrams = np.asarray(unigrams, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be 2-d (rank, vocab_size)")
        if self.vectors.shape[1] != self.unigrams.shape[0]:
            raise ValueError(
                f"vectors cover {self.vectors.shape[1]} words but unigrams "
                f"cover {self.unigrams.shape[0]}"
            )
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        if isinstance(pmi, np.ndarray) and pmi.shape != (
                self.vocab_size, self.vocab_size):
            raise ValueError("dense pmi must be vocab_size x vocab_size")
        self.pmi = pmi
        self.window = window
        self.vocab = vocab

    @property
    def vocab_size(self) -> int:
        return self.vectors.shape[1]

    @property
    def rank(self) -> int:
        return self.vectors.shape[0]

    def inner(self, i: int, j: int) -> float:
        return float(self.vectors[:, i] @ self.vectors[:, j])

    def pmi_at(self, i: int, j: int) -> float:
        if self.pmi is None:
            raise ValueError(
                "model has no PMI target attached; residual scoring needs one"
            )
        if isinstance(self.pmi, PmiTarget):
            return self.pmi.at(i, j)
        return float(self.pmi[i, j])

    def encode(self, tokens) -> np.ndarray:
        """Map tokens (strings or ids) to ids, erroring on unknown tokens."""
        ids = np.empty(len(tokens), dtype=np.int64)
        for pos, token in enumerate(tokens):
            if isinstance(token, str):
                if self.vocab is None or token not in self.vocab:
                    raise ValueError(f"out-of-vocabulary token: {token!r}")
                ids[pos] = self.vocab.id(token)
            else:
                ids[pos] = int(token)
                if not 0 <= ids[pos] < self.vocab_size:
                    raise ValueError(f"out-of-vocabulary token id: {token!r}")
        return ids


class ResidualView:
    """On-demand residuals: target log-ratio minus embedding inner product.

    Plugging a residual from this view back into the bigram link reproduces
    the smoothed joint probability exactly.
    """

    def __init__(self, model: ModelHandle):
        self.model = model

    def at(self, i: int, j: int) -> float:
        return self.model.pmi_at(i, j) - self.model.inner(i, j)

    def context_sum(self, context_ids: np.ndarray, focus: int) -> float:
        return sum(self.at(int(c), focus) for c in context_ids)


def bigram_joint(i: int, j: int, model: ModelHandle) -> float:
    """Joint probability of context word ``i`` with focus word ``j``."""
    residual = ResidualView(model).at(i, j)
    interaction = model.inner(i, j) + residual
    return math.exp(interaction) * model.unigrams[i] * model.unigrams[j]


def window_joint(ids, model: ModelHandle, use_residuals: bool = True) -> float:
    """Probability of a short window under the additive-interaction link.

    Every in-window ordered pair (earlier, later) contributes one interaction
    term; the window must not exceed ``model.window + 1`` tokens.
    """
    ids = model.encode(ids)
    if ids.size > model.window + 1:
        raise ValueError(
            f"window of {ids.size} tokens exceeds context size {model.window}"
        )
    residuals = ResidualView(model) if use_residuals else None
    log_prob = float(np.log(model.unigrams[ids]).sum())
    for later in range(1, ids.size):
        focus = int(ids[later])
        context = ids[:later]
        log_prob += float(
            model.vectors[:, focus] @ model.vectors[:, context].sum(axis=1)
        )
        if residuals is not None:
            log_prob += residuals.context_sum(context, focus)
    return math.exp(log_prob)


def window_conditional(focus, context, model: ModelHandle,
                       use_residuals: bool = True,
                       exact_normalize: bool = False) -> float:
    """Probability of ``focus`` given the words in its context window.

    An empty context degenerates to the unigram probability. The additive
    link is an approximation and does not sum to one over the vocabulary;
    ``exact_normalize`` renormalizes it explicitly (only sensible for small
    vocabularies).
    """
    context = model.encode(context)
    if context.size > model.window:
        raise ValueError(
            f"context of {context.size} words exceeds window {model.window}"
        )
    focus = int(model.encode([focus])[0])

    def score(candidate: int) -> float:
        if not context.size:
            return float(model.unigrams[candidate])
        value = float(
            model.vectors[:, candidate]
            @ model.vectors[:, context].sum(axis=1)
        )
        if use_residuals:
            value += ResidualView(model).context_sum(context, candidate)
        return float(model.unigrams[candidate]) * math.exp(value)

    probability = score(focus)
    if exact_normalize:
        normalizer = sum(score(w) for w in range(model.vocab_size))
        probability /= normalizer
    return probability


def document_log_likelihood(doc, model: ModelHandle,
                            use_residuals: bool = True) -> float:
    """Log-probability of a document, windows clipped at the document start."""
    ids = model.encode(doc)
    residuals = ResidualView(model) if use_residuals else None
    total = float(np.log(model.unigrams[ids]).sum())
    for position in range(1, ids.size):
        focus = int(ids[position])
        context = ids[max(0, position - model.window):position]
        total += float(
            model.vectors[:, focus] @ model.vectors[:, context].sum(axis=1)
        )
        if residuals is not None:
            total += residuals.context_sum(context, focus)
    return total


def _validate_trigram_joint(joint: np.ndarray) -> np.ndarray:
    joint = np.asarray(joint, dtype=np.float64)
    if joint.ndim != 3:
        raise ValueError(
            f"expected a 3-d joint distribution, got shape {joint.shape}"
        )
    if (joint < 0).any():
        raise ValueError("joint distribution has negative entries")
    total = joint.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"joint distribution sums to {total}, expected 1")
    return joint


def pointwise_interaction(joint: np.ndarray, outcomes=None):
    """Pointwise interaction information of a trigram distribution.

    For axes (x1, x2, y) the statistic at one outcome is

        log [p(x1) p(x2) p(y) p(x1, x2, y)] - log [p(x1, x2) p(x1, y) p(x2, y)]

    Returns ``(table, expectation)`` where ``table`` holds the value at every
    supported (positive-probability) outcome and NaN elsewhere, and
    ``expectation`` is the average under the joint, which equals the
    interaction information I(y; x1, x2) - I(y; x1) - I(y; x2). When
    ``outcomes`` is given, only those index triples are evaluated and a zero
    probability at any of them is an error (the log is undefined there).
    """
    joint = _validate_trigram_joint(joint)
    p1 = joint.sum(axis=(1, 2))
    p2 = joint.sum(axis=(0, 2))
    py = joint.sum(axis=(0, 1))
    p12 = joint.sum(axis=2)
    p1y = joint.sum(axis=1)
    p2y = joint.sum(axis=0)

    def value_at(i: int, j: int, k: int) -> float:
        parts = (p1[i], p2[j], py[k], joint[i, j, k],
                 p12[i, j], p1y[i, k], p2y[j, k])
        if min(parts) <= 0.0:
            raise ValueError(
                f"zero probability at evaluated outcome ({i}, {j}, {k}); "
                "the pointwise value is undefined there"
            )
        return (math.log(p1[i]) + math.log(p2[j]) + math.log(py[k])
                + math.log(joint[i, j, k]) - math.log(p12[i, j])
                - math.log(p1y[i, k]) - math.log(p2y[j, k]))

    if outcomes is not None:
        values = np.array([value_at(*outcome) for outcome in outcomes])
        weights = np.array([joint[outcome] for outcome in outcomes])
        return values, float(values @ weights)

    table = np.full(joint.shape, np.nan)
    expectation = 0.0
    for i, j, k in zip(*np.nonzero(joint)):
        table[i, j, k] = value_at(int(i), int(j), int(k))
        expectation += joint[i, j, k] * table[i, j, k]
    return table, float(expectation)


def _mutual_information(joint_2d: np.ndarray) -> float:
    pa = joint_2d.sum(axis=1)
    pb = joint_2d.sum(axis=0)
    support = joint_2d > 0
    ratio = joint_2d[support] / np.outer(pa, pb)[support]
    return float(np.sum(joint_2d[support] * np.log(ratio)))


def interaction_information(joint: np.ndarray) -> float:
    """I(y; x1, x2) - I(y; x1) - I(y; x2), computed from marginalizations.

    This is an independent route to the expectation of
    :func:`pointwise_interaction`; the two must agree.
    """
    joint = _validate_trigram_joint(joint)
    n1, n2, _ = joint.shape
    pair_vs_y = joint.reshape(n1 * n2, joint.shape[2])
    return (_mutual_information(pair_vs_y)
            - _mutual_information(joint.sum(axis=1))
            - _mutual_information(joint.sum(axis=0)))


def trigram_distribution(documents, limit: int) -> np.ndarray:
    """Empirical distribution of consecutive token-id triples.

    Only triples whose three ids are all below ``limit`` are counted; windows
    do not cross document boundaries.
    """
    joint = np.zeros((limit, limit, limit))
    for doc in documents:
        ids = np.asarray(doc, dtype=np.int64)
        for t in range(2, ids.size):
            i, j, k = ids[t - 2], ids[t - 1], ids[t]
            if i < limit and j < limit and k < limit:
                joint[i, j, k] += 1.0
    total = joint.sum()
    if total == 0:
        raise ValueError(
            f"no consecutive triples with all ids below {limit} were found"
        )
    return joint / total


@dataclass
class PerplexityReport:
    """Per-document log-likelihoods with and without residual terms."""

    rows: list[tuple[int, int, float, float]]

    @property
    def total_tokens(self) -> int:
        return sum(row[1] for row in self.rows)

    def perplexity(self, use_residuals: bool = True) -> float:
        column = 2 if use_residuals else 3
        total = sum(row[column] for row in self.rows)
        return math.exp(-total / self.total_tokens)

    def to_tsv(self) -> str:
        lines = ["doc\ttokens\tlog_likelihood\tlog_likelihood_no_residual"]
        for doc_id, tokens, with_res, without in self.rows:
            lines.append(f"{doc_id}\t{tokens}\t{with_res:.6f}\t{without:.6f}")
        lines.append(
            f"#perplexity\t{self.total_tokens}"
            f"\t{self.perplexity(True):.6f}\t{self.perplexity(False):.6f}"
        )
        return "\n".join(lines) + "\n"


def model_perplexity_report(documents, model: ModelHandle) -> PerplexityReport:
    """Average per-token likelihood over sample documents, with and without
    residual terms. Neither mode is guaranteed to dominate the other; the
    report simply states both."""
    rows = []
    for doc_id, doc in enumerate(documents):
        if len(doc) == 0:
            continue
        with_res = document_log_likelihood(doc, model, use_residuals=True)
        without = document_log_likelihood(doc, model, use_residuals=False)
        rows.append((doc_id, len(doc), with_res, without))
    if not rows:
        raise ValueError("no non-empty documents in the sample")
    return PerplexityReport(rows)

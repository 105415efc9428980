"""Scikit-learn style front end for the whole training pipeline."""

from __future__ import annotations

from itertools import chain

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .blockwise import (
    DEFAULT_PENALTY_TIERS,
    RegularizationSchedule,
    plan_blocks,
    train_blockwise,
)
from .corpus import build_vocabulary, count_cooccurrences, tokenize
from .embeddings import WordVectors
from .psd_solver import BcdConfig

__all__ = ["PsdEmbedding"]


def _as_token_documents(raw, token_pattern):
    """Normalize fit/transform input into a list of token lists.

    Accepts an iterable of documents where each document is either a raw
    string (tokenized here) or an already-tokenized sequence of strings.
    """
    if isinstance(raw, str):
        raise ValueError(
            "expected an iterable of documents, got a single string; wrap it "
            "in a list"
        )
    documents = []
    for doc in raw:
        if isinstance(doc, str):
            documents.append(tokenize(doc, token_pattern))
        else:
            documents.append(list(doc))
    return documents


class PsdEmbedding(BaseEstimator, TransformerMixin):
    """Learn word embeddings from documents; transform documents to vectors.

    Fitting counts windowed co-occurrences, builds the smoothed PMI target,
    solves the most frequent ``core_size`` words jointly as a weighted
    low-rank PSD approximation, and regresses every remaining word against
    the core with per-word ridge penalties that grow with rarity.
    ``transform`` maps each document to the mean of its word vectors
    (out-of-vocabulary tokens are ignored; a document with no known tokens
    becomes the zero vector).

    Parameters
    ----------
    rank : embedding dimensionality.
    window : context size; the window covers the preceding tokens.
    min_count, max_vocab : vocabulary frequency cutoff and size cap.
    smoothing : back-off weight toward the unigram product, in [0, 1].
    cut_fraction : fraction of observed bigrams whose weight saturates at 1.
    iterations, init_scale, convergence_tol : descent-solver settings.
    core_size : words solved jointly; None means the whole vocabulary.
    block_size : noncore words regressed per strip.
    penalty_tiers : (core-size multiple, penalty) bands for noncore ridge
        penalties; None as the multiple means unbounded.
    token_pattern : regex for tokenizing raw string documents.
    jobs : worker threads for per-word ridge solves.
    """

    def __init__(self, rank: int = 100, window: int = 5, min_count: int = 5,
                 max_vocab=None, smoothing: float = 0.02,
                 cut_fraction: float = 0.0002, iterations: int = 5,
                 init_scale: float = 0.5, convergence_tol: float = 1e-5,
                 core_size=None, block_size: int = 50_000,
                 penalty_tiers=DEFAULT_PENALTY_TIERS, token_pattern=None,
                 jobs: int = 1):
        self.rank = rank
        self.window = window
        self.min_count = min_count
        self.max_vocab = max_vocab
        self.smoothing = smoothing
        self.cut_fraction = cut_fraction
        self.iterations = iterations
        self.init_scale = init_scale
        self.convergence_tol = convergence_tol
        self.core_size = core_size
        self.block_size = block_size
        self.penalty_tiers = penalty_tiers
        self.token_pattern = token_pattern
        self.jobs = jobs

    def fit(self, X, y=None):
        documents = _as_token_documents(X, self.token_pattern)
        vocab = build_vocabulary(chain.from_iterable(documents),
                                 min_count=self.min_count,
                                 max_size=self.max_vocab)
        counts = count_cooccurrences(documents, vocab, self.window)
        core_size = (len(vocab) if self.core_size is None
                     else min(self.core_size, len(vocab)))
        plan = plan_blocks(len(vocab), core_size, self.block_size)
        schedule = RegularizationSchedule.tiered(core_size,
                                                 self.penalty_tiers)
        config = BcdConfig(rank=self.rank, iterations=self.iterations,
                           init_scale=self.init_scale,
                           convergence_tol=self.convergence_tol)
        result = train_blockwise(
            counts, plan, schedule, config,
            smoothing=self.smoothing, cut_fraction=self.cut_fraction,
            jobs=self.jobs,
        )
        self.vocab_ = vocab
        self.counts_ = counts
        self.embeddings_ = result.vectors.T
        self.solver_errors_ = result.solver_errors
        self.plan_ = plan
        if hasattr(self, "_word_vectors"):
            del self._word_vectors
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "embeddings_")
        documents = _as_token_documents(X, self.token_pattern)
        output = np.zeros((len(documents), self.embeddings_.shape[1]))
        for row, tokens in enumerate(documents):
            ids = self.vocab_.encode(tokens)
            if ids.size:
                output[row] = self.embeddings_[ids].mean(axis=0)
        return output

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "embeddings_")
        return np.array(
            [f"embedding{i}" for i in range(self.embeddings_.shape[1])]
        )

    def vector(self, word: str) -> np.ndarray:
        check_is_fitted(self, "embeddings_")
        return self.embeddings_[self.vocab_.id(word)]

    def similarity(self, first: str, second: str) -> float:
        return self.to_word_vectors().similarity(first, second)

    def most_similar(self, word: str, topn: int = 10):
        return self.to_word_vectors().most_similar(word, topn)

    def to_word_vectors(self) -> WordVectors:
        check_is_fitted(self, "embeddings_")
        if not hasattr(self, "_word_vectors"):
            self._word_vectors = WordVectors(self.vocab_.words,
                                             self.embeddings_)
        return self._word_vectors

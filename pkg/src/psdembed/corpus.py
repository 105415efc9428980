"""Corpus ingestion: tokenization, vocabulary building and windowed
context-focus co-occurrence counting.

The ``window`` tokens to the left of each focus word form its context, and
windows never cross document boundaries. Out-of-vocabulary tokens are dropped
before windowing, so a context window closes over removed tokens. Counting is
associative over document shards (see :func:`merge_counts`), which is what
makes sharded/parallel counting safe.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "EmptyCorpusError",
    "Vocabulary",
    "CooccurrenceCounts",
    "tokenize",
    "iter_token_documents",
    "build_vocabulary",
    "count_cooccurrences",
    "merge_counts",
]

_DEFAULT_TOKEN_PATTERN = re.compile(r"[0-9a-z]+")

# Buffered (context, focus) pairs before flushing into the sparse accumulator.
_PAIR_FLUSH = 2_000_000


class EmptyCorpusError(ValueError):
    """No usable tokens survived reading or frequency filtering."""


def tokenize(text: str, pattern=None) -> list[str]:
    """Lowercase ``text`` and split it into alphanumeric runs.

    ``pattern`` may be a compiled regex or a regex string whose matches define
    the tokens; the default keeps runs of ``[0-9a-z]`` after lowercasing, so
    punctuation and hyphens split tokens.
    """
    if pattern is None:
        pattern = _DEFAULT_TOKEN_PATTERN
    elif isinstance(pattern, str):
        pattern = re.compile(pattern)
    return pattern.findall(text.lower())


def iter_token_documents(paths, pattern=None) -> Iterator[list[str]]:
    """Yield tokenized documents from plain-text files.

    A blank line ends the current document; a file boundary always does.
    Files must be UTF-8 (a decode error propagates as ``UnicodeDecodeError``).
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    for path in paths:
        pending: list[str] = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    pending.extend(tokenize(line, pattern))
                elif pending:
                    yield pending
                    pending = []
        if pending:
            yield pending


@dataclass
class Vocabulary:
    """Frequency-ranked word list with a dense word <-> id mapping.

    Words are ordered by non-increasing corpus frequency with ties broken
    lexicographically, so id 0 is always the most frequent word. ``counts``
    holds the corpus token frequency of each word.
    """

    words: list[str]
    counts: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.words = list(self.words)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if len(self.words) != self.counts.shape[0]:
            raise ValueError("words and counts must have the same length")
        for i in range(1, len(self.words)):
            a, b = self.counts[i - 1], self.counts[i]
            if b > a or (b == a and self.words[i] < self.words[i - 1]):
                raise ValueError(
                    "vocabulary must be sorted by decreasing frequency with "
                    "lexicographic tie-breaking"
                )
        self.index = {word: i for i, word in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValueError("vocabulary contains duplicate words")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word) -> bool:
        return word in self.index

    def id(self, word: str) -> int:
        return self.index[word]

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        """Map tokens to ids, silently dropping out-of-vocabulary tokens."""
        index = self.index
        return np.array(
            [index[t] for t in tokens if t in index], dtype=np.int64
        )

    def save_tsv(self, path) -> None:
        """Write ``word<TAB>count`` lines in rank order."""
        with open(path, "w", encoding="utf-8") as handle:
            for word, count in zip(self.words, self.counts):
                handle.write(f"{word}\t{count}\n")

    @classmethod
    def load_tsv(cls, path) -> "Vocabulary":
        words, counts = [], []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                word, count = line.rstrip("\n").split("\t")
                words.append(word)
                counts.append(int(count))
        if not words:
            raise EmptyCorpusError(f"vocabulary file {path} is empty")
        return cls(words, np.array(counts, dtype=np.int64))


def build_vocabulary(tokens: Iterable[str], min_count: int = 1,
                     max_size: int | None = None) -> Vocabulary:
    """Build a frequency-ranked vocabulary from a flat token stream.

    Words seen fewer than ``min_count`` times are dropped, then the list is
    truncated to the ``max_size`` most frequent words.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    if max_size is not None and max_size < 1:
        raise ValueError(f"max_size must be >= 1, got {max_size}")
    frequencies = Counter(tokens)
    if not frequencies:
        raise EmptyCorpusError("token stream is empty")
    kept = [(w, c) for w, c in frequencies.items() if c >= min_count]
    if not kept:
        raise EmptyCorpusError(
            f"no token appears at least min_count={min_count} times"
        )
    kept.sort(key=lambda item: (-item[1], item[0]))
    if max_size is not None:
        kept = kept[:max_size]
    words = [w for w, _ in kept]
    counts = np.array([c for _, c in kept], dtype=np.int64)
    return Vocabulary(words, counts)


@dataclass
class CooccurrenceCounts:
    """Sparse context-to-focus pair counts plus per-word token counts.

    ``pairs[i, j]`` is the number of windows in which word ``i`` appeared in
    the left context of focus word ``j``. Counts are stored as float64 so the
    same structure can hold fractional (smoothed) values.
    """

    pairs: sp.csr_matrix
    unigram_counts: np.ndarray
    window: int

    def __post_init__(self):
        self.unigram_counts = np.asarray(self.unigram_counts, dtype=np.int64)
        if self.pairs.shape[0] != self.pairs.shape[1]:
            raise ValueError("pair count matrix must be square")
        if self.pairs.shape[0] != self.unigram_counts.shape[0]:
            raise ValueError("pair matrix and unigram counts disagree on size")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        self.pairs = self.pairs.tocsr()
        self.pairs.sum_duplicates()
        self.pairs.sort_indices()

    @property
    def vocab_size(self) -> int:
        return self.pairs.shape[0]

    @property
    def total_pairs(self) -> float:
        return float(self.pairs.sum())

    @property
    def total_tokens(self) -> int:
        return int(self.unigram_counts.sum())

    def pair_count(self, context: int, focus: int) -> float:
        return float(self.pairs[context, focus])

    def save_tsv(self, path) -> None:
        """Write a ``#W=.. c=.. total=..`` header then ``i<TAB>j<TAB>count``
        triplets in row-major order."""
        coo = self.pairs.tocoo()
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(
                f"#W={self.vocab_size} c={self.window} "
                f"total={self.total_pairs:.17g}\n"
            )
            for i, j, value in zip(coo.row, coo.col, coo.data):
                handle.write(f"{i}\t{j}\t{value:.17g}\n")

    @classmethod
    def load_tsv(cls, path, unigram_counts) -> "CooccurrenceCounts":
        """Read counts written by :meth:`save_tsv`.

        Unigram token counts are not part of the triplet format, so the caller
        supplies them (normally the vocabulary counts of the same corpus).
        """
        with open(path, encoding="utf-8") as handle:
            header = handle.readline()
            match = re.match(
                r"#W=(\d+) c=(\d+) total=([^\s]+)\s*$", header
            )
            if not match:
                raise ValueError(f"malformed counts header in {path}: {header!r}")
            size, window = int(match.group(1)), int(match.group(2))
            total = float(match.group(3))
            rows, cols, data = [], [], []
            for line in handle:
                if not line.strip():
                    continue
                i, j, value = line.split("\t")
                rows.append(int(i))
                cols.append(int(j))
                data.append(float(value))
        pairs = sp.coo_matrix(
            (data, (rows, cols)), shape=(size, size), dtype=np.float64
        ).tocsr()
        counts = cls(pairs, unigram_counts, window)
        if abs(counts.total_pairs - total) > 1e-6 * max(total, 1.0):
            raise ValueError(
                f"counts file {path} is inconsistent: header total {total} "
                f"vs sum {counts.total_pairs}"
            )
        return counts


class _PairAccumulator:
    """Buffers (context, focus) id pairs and folds them into a CSR matrix."""

    def __init__(self, size: int):
        self.size = size
        self.matrix = sp.csr_matrix((size, size), dtype=np.float64)
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._buffered = 0

    def add(self, rows: np.ndarray, cols: np.ndarray) -> None:
        self._rows.append(rows)
        self._cols.append(cols)
        self._buffered += rows.shape[0]
        if self._buffered >= _PAIR_FLUSH:
            self.flush()

    def flush(self) -> None:
        if not self._buffered:
            return
        rows = np.concatenate(self._rows)
        cols = np.concatenate(self._cols)
        chunk = sp.coo_matrix(
            (np.ones(rows.shape[0]), (rows, cols)),
            shape=(self.size, self.size),
        ).tocsr()
        self.matrix = self.matrix + chunk
        self._rows, self._cols, self._buffered = [], [], 0


def count_cooccurrences(documents, vocab: Vocabulary,
                        window: int) -> CooccurrenceCounts:
    """Count left-context co-occurrences over tokenized documents.

    For each in-vocabulary focus position ``t`` the counts of
    ``(token[t - k], token[t])`` are incremented for ``k = 1..min(window, t)``,
    where positions index the document after out-of-vocabulary removal.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    size = len(vocab)
    unigrams = np.zeros(size, dtype=np.int64)
    accumulator = _PairAccumulator(size)
    for tokens in documents:
        ids = vocab.encode(tokens)
        if ids.size == 0:
            continue
        unigrams += np.bincount(ids, minlength=size)
        for k in range(1, min(window, ids.size - 1) + 1):
            accumulator.add(ids[:-k], ids[k:])
    accumulator.flush()
    return CooccurrenceCounts(accumulator.matrix, unigrams, window)


def merge_counts(first: CooccurrenceCounts,
                 second: CooccurrenceCounts) -> CooccurrenceCounts:
    """Combine counts from two disjoint corpus shards."""
    if first.window != second.window:
        raise ValueError("cannot merge counts with different window sizes")
    if first.vocab_size != second.vocab_size:
        raise ValueError("cannot merge counts over different vocabularies")
    return CooccurrenceCounts(
        first.pairs + second.pairs,
        first.unigram_counts + second.unigram_counts,
        first.window,
    )

"""Embedding tables: the word2vec text format plus a lookup wrapper.

Vector components are written with ``repr`` so a written file parses back to
bit-identical float64 values; that exactness is what makes block-granular
training checkpoints resumable without drift.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "WordVectors",
    "write_word2vec",
    "read_word2vec",
    "read_partial_word2vec",
    "append_word2vec_rows",
]


def _format_row(word: str, vector: np.ndarray) -> str:
    return word + " " + " ".join(repr(float(v)) for v in vector) + "\n"


def write_word2vec(path, words, matrix: np.ndarray) -> None:
    """Write ``<n_words> <dim>`` then one ``word v1 .. vdim`` line per word."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape[0] != len(words):
        raise ValueError(
            f"{len(words)} words but {matrix.shape[0]} vector rows"
        )
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{len(words)} {matrix.shape[1]}\n")
        for word, row in zip(words, matrix):
            handle.write(_format_row(word, row))


def append_word2vec_rows(path, words, matrix: np.ndarray) -> None:
    """Append rows to an existing file (used for block checkpointing)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "a", encoding="utf-8") as handle:
        for word, row in zip(words, matrix):
            handle.write(_format_row(word, row))
        handle.flush()


def read_partial_word2vec(path):
    """Read a possibly incomplete file; returns (n_declared, words, matrix).

    A trailing torn line (from an interrupted write) is dropped, so only
    fully written rows count.
    """
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path} has a malformed embedding header")
        declared, dim = int(header[0]), int(header[1])
        words, rows = [], []
        for line in handle:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1 or not line.endswith("\n"):
                break
            words.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    matrix = (np.array(rows, dtype=np.float64) if rows
              else np.zeros((0, dim)))
    return declared, words, matrix


def read_word2vec(path) -> "WordVectors":
    declared, words, matrix = read_partial_word2vec(path)
    if len(words) != declared:
        raise ValueError(
            f"{path} declares {declared} words but holds {len(words)} rows"
        )
    return WordVectors(words, matrix)


class WordVectors:
    """Word -> vector lookup over a dense (n_words, dim) matrix."""

    def __init__(self, words, matrix: np.ndarray):
        self.words = list(words)
        self.matrix = np.asarray(matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.words):
            raise ValueError("matrix must be (n_words, dim)")
        self.index = {word: i for i, word in enumerate(self.words)}
        self._unit = None

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word) -> bool:
        return word in self.index

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def vector(self, word: str) -> np.ndarray:
        return self.matrix[self.index[word]]

    def unit(self) -> np.ndarray:
        """Row-normalized matrix; zero vectors stay zero."""
        if self._unit is None:
            norms = np.linalg.norm(self.matrix, axis=1, keepdims=True)
            norms[norms == 0] = 1.0
            self._unit = self.matrix / norms
        return self._unit

    def similarity(self, first: str, second: str) -> float:
        unit = self.unit()
        return float(unit[self.index[first]] @ unit[self.index[second]])

    def most_similar(self, word: str, topn: int = 10):
        unit = self.unit()
        scores = unit @ unit[self.index[word]]
        scores[self.index[word]] = -np.inf
        order = np.argsort(-scores)[:topn]
        return [(self.words[i], float(scores[i])) for i in order]

    def save(self, path) -> None:
        write_word2vec(path, self.words, self.matrix)

"""Benchmark harness: similarity correlations and analogy accuracy.

Similarity datasets are scored by the Spearman correlation between human
ratings and embedding cosines; analogy questions ``a : a* :: b : ?`` are
answered over unit-normalized vectors with the additive and multiplicative
cosine objectives, never returning one of the three question words. Items
touching out-of-vocabulary words are skipped and counted toward coverage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .embeddings import WordVectors

__all__ = [
    "spearman",
    "load_similarity_dataset",
    "load_analogy_dataset",
    "similarity_eval",
    "analogy_answer",
    "analogy_eval",
    "SimilarityResult",
    "AnalogyResult",
    "EvalReport",
]

MUL_EPSILON = 0.001


def spearman(xs, ys) -> float:
    """Spearman rank correlation with average ranks for ties."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError(
            f"inputs must be equal-length vectors, got {xs.shape} and {ys.shape}"
        )
    if xs.size < 2:
        raise ValueError("need at least two observations")
    rank_x = rankdata(xs, method="average")
    rank_y = rankdata(ys, method="average")
    if np.ptp(rank_x) == 0 or np.ptp(rank_y) == 0:
        raise ValueError(
            "rank correlation undefined: an input has zero rank variance"
        )
    return float(np.corrcoef(rank_x, rank_y)[0, 1])


def load_similarity_dataset(path):
    """Read ``word1 word2 score`` lines (tab or whitespace separated).

    Words are lowercased to match the tokenizer. Duplicate unordered pairs
    are rejected.
    """
    pairs = []
    seen = set()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace("\t", " ").split()
            if len(parts) < 3:
                raise ValueError(
                    f"{path}:{line_no}: expected 'word1 word2 score'"
                )
            first, second = parts[0].lower(), parts[1].lower()
            key = (min(first, second), max(first, second))
            if key in seen:
                raise ValueError(
                    f"{path}:{line_no}: duplicate pair {first!r}/{second!r}"
                )
            seen.add(key)
            rating = float(parts[2])
            if not np.isfinite(rating):
                raise ValueError(f"{path}:{line_no}: non-finite rating")
            pairs.append((first, second, rating))
    return pairs


def load_analogy_dataset(path):
    """Read whitespace-separated ``a a* b b*`` quadruples.

    Section header lines starting with ``:`` are skipped. The four words of a
    question must be distinct.
    """
    questions = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            line = line.strip()
            if not line or line.startswith(":") or line.startswith("#"):
                continue
            parts = [p.lower() for p in line.split()]
            if len(parts) != 4:
                raise ValueError(
                    f"{path}:{line_no}: expected four words, got {len(parts)}"
                )
            if len(set(parts)) != 4:
                raise ValueError(
                    f"{path}:{line_no}: question words must be distinct"
                )
            questions.append(tuple(parts))
    return questions


@dataclass
class SimilarityResult:
    name: str
    rho: float
    n_items: int
    n_scored: int

    @property
    def coverage(self) -> float:
        return self.n_scored / self.n_items

    @property
    def n_skipped(self) -> int:
        return self.n_items - self.n_scored


@dataclass
class AnalogyResult:
    name: str
    accuracy_add: float
    accuracy_mul: float
    n_items: int
    n_scored: int

    @property
    def coverage(self) -> float:
        return self.n_scored / self.n_items

    @property
    def n_skipped(self) -> int:
        return self.n_items - self.n_scored


def similarity_eval(vectors: WordVectors, dataset,
                    name: str = "similarity") -> SimilarityResult:
    """Spearman correlation between human ratings and embedding cosines."""
    human, cosine = [], []
    for first, second, rating in dataset:
        if first in vectors and second in vectors:
            human.append(rating)
            cosine.append(vectors.similarity(first, second))
    if len(human) < 2:
        raise ValueError(
            f"dataset {name!r}: only {len(human)} of {len(dataset)} pairs "
            "are in vocabulary; cannot correlate"
        )
    return SimilarityResult(name, spearman(human, cosine),
                            len(dataset), len(human))


def _question_scores(vectors: WordVectors, a: str, a_star: str, b: str):
    unit = vectors.unit()
    cos_a = unit @ unit[vectors.index[a]]
    cos_a_star = unit @ unit[vectors.index[a_star]]
    cos_b = unit @ unit[vectors.index[b]]
    add = cos_b - cos_a + cos_a_star
    mul = (((cos_b + 1.0) / 2.0) * ((cos_a_star + 1.0) / 2.0)
           / ((cos_a + 1.0) / 2.0 + MUL_EPSILON))
    excluded = [vectors.index[w] for w in (a, a_star, b)]
    add[excluded] = -np.inf
    mul[excluded] = -np.inf
    return add, mul


def analogy_answer(vectors: WordVectors, a: str, a_star: str, b: str,
                   method: str = "add"):
    """Predicted completion of ``a : a* :: b : ?`` or None on OOV input.

    Ties resolve to the lowest word id, so answers are deterministic.
    """
    if method not in ("add", "mul"):
        raise ValueError(f"method must be 'add' or 'mul', got {method!r}")
    if any(w not in vectors for w in (a, a_star, b)):
        return None
    add, mul = _question_scores(vectors, a, a_star, b)
    scores = add if method == "add" else mul
    return vectors.words[int(np.argmax(scores))]


def analogy_eval(vectors: WordVectors, dataset,
                 name: str = "analogy") -> AnalogyResult:
    """Accuracy of both analogy objectives over the in-vocabulary questions."""
    scored = correct_add = correct_mul = 0
    for a, a_star, b, b_star in dataset:
        if any(w not in vectors for w in (a, a_star, b, b_star)):
            continue
        scored += 1
        add, mul = _question_scores(vectors, a, a_star, b)
        if vectors.words[int(np.argmax(add))] == b_star:
            correct_add += 1
        if vectors.words[int(np.argmax(mul))] == b_star:
            correct_mul += 1
    if scored == 0:
        raise ValueError(
            f"dataset {name!r}: no question has all four words in vocabulary"
        )
    return AnalogyResult(name, correct_add / scored, correct_mul / scored,
                         len(dataset), scored)


@dataclass
class EvalReport:
    """Scores for every evaluated dataset, renderable as one table row."""

    similarities: list[SimilarityResult] = field(default_factory=list)
    analogies: list[AnalogyResult] = field(default_factory=list)

    def _columns(self):
        columns = []
        for result in self.similarities:
            columns.append((result.name, f"{result.rho:.3f}",
                            result.coverage))
        for result in self.analogies:
            cell = f"{result.accuracy_add:.3f} / {result.accuracy_mul:.3f}"
            columns.append((result.name, cell, result.coverage))
        return columns

    def to_markdown(self) -> str:
        columns = self._columns()
        header = "| Metric | " + " | ".join(c[0] for c in columns) + " |"
        rule = "|---" * (len(columns) + 1) + "|"
        scores = "| score | " + " | ".join(c[1] for c in columns) + " |"
        coverage = "| coverage | " + " | ".join(
            f"{c[2]:.3f}" for c in columns) + " |"
        return "\n".join([header, rule, scores, coverage]) + "\n"

    def to_tsv(self) -> str:
        columns = self._columns()
        lines = [
            "metric\t" + "\t".join(c[0] for c in columns),
            "score\t" + "\t".join(c[1] for c in columns),
            "coverage\t" + "\t".join(f"{c[2]:.3f}" for c in columns),
        ]
        return "\n".join(lines) + "\n"

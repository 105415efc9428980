"""Scaling beyond the core vocabulary by online blockwise regression.

The most frequent words (the core) are solved jointly by the PSD descent
solver. Every remaining word is then regressed against the fixed core
embeddings with a closed-form weighted ridge solve, one consecutive block of
words at a time, so only one core-by-block strip of statistics is dense in
memory at any point. Blocks of rare-by-rare statistics are never touched;
they are too sparse to constrain anything.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .corpus import CooccurrenceCounts
from .psd_solver import BcdConfig, bcd_solve
from .stats import (
    pmi_target,
    smooth_bigrams,
    symmetrize,
    symmetrized_core,
    unigram_distribution,
    weight_matrix,
)

__all__ = [
    "BlockPlan",
    "plan_blocks",
    "RegularizationSchedule",
    "SingularRidgeError",
    "ridge_solve_word",
    "solve_block",
    "train_blockwise",
    "TrainResult",
]

DEFAULT_BLOCK_SIZE = 50_000

# Penalty bands beyond the core, as (rank multiple of core size, penalty).
# None means unbounded. The band edges scale with the core size.
DEFAULT_PENALTY_TIERS = ((3.2, 2.0), (5.2, 4.0), (None, 8.0))


class SingularRidgeError(np.linalg.LinAlgError):
    """Unpenalized ridge system is rank-deficient for some word."""


@dataclass(frozen=True)
class BlockPlan:
    """Partition of word ids into a core prefix plus consecutive blocks."""

    vocab_size: int
    core_size: int
    block_size: int

    def groups(self) -> list[range]:
        groups = [range(0, self.core_size)]
        start = self.core_size
        while start < self.vocab_size:
            stop = min(start + self.block_size, self.vocab_size)
            groups.append(range(start, stop))
            start = stop
        return groups

    @property
    def n_groups(self) -> int:
        return len(self.groups())


def plan_blocks(vocab_size: int, core_size: int,
                block_size: int = DEFAULT_BLOCK_SIZE) -> BlockPlan:
    """Split ``[0, vocab_size)`` into the core prefix plus fixed-size blocks."""
    if not 1 <= core_size <= vocab_size:
        raise ValueError(
            f"core_size must be in [1, {vocab_size}], got {core_size}"
        )
    if block_size < 1:
        raise ValueError(f"block_size must be >= 1, got {block_size}")
    return BlockPlan(vocab_size, core_size, block_size)


class RegularizationSchedule:
    """Maps a word's frequency rank to its ridge penalty.

    Penalties must never decrease with rank: rarer words have noisier
    statistics and need at least as much shrinkage.
    """

    def __init__(self, penalty_of: Callable[[int], float]):
        self.penalty_of = penalty_of

    def penalties(self, ranks: np.ndarray) -> np.ndarray:
        values = np.array([float(self.penalty_of(int(r))) for r in ranks])
        if (values < 0).any():
            raise ValueError("ridge penalties must be non-negative")
        order = np.argsort(ranks, kind="stable")
        if (np.diff(values[order]) < 0).any():
            raise ValueError("ridge penalties must be non-decreasing in rank")
        return values

    @classmethod
    def zero(cls) -> "RegularizationSchedule":
        return cls(lambda rank: 0.0)

    @classmethod
    def constant(cls, value: float) -> "RegularizationSchedule":
        if value < 0:
            raise ValueError("penalty must be non-negative")
        return cls(lambda rank: value)

    @classmethod
    def tiered(cls, core_size: int,
               tiers=DEFAULT_PENALTY_TIERS) -> "RegularizationSchedule":
        """Zero inside the core, then stepped penalties over rank bands whose
        edges are multiples of the core size."""
        resolved = []
        for edge, penalty in tiers:
            resolved.append((None if edge is None else edge * core_size,
                             float(penalty)))

        def penalty_of(rank: int) -> float:
            if rank < core_size:
                return 0.0
            for edge, penalty in resolved:
                if edge is None or rank < edge:
                    return penalty
            return resolved[-1][1]

        return cls(penalty_of)


def ridge_solve_word(core_design: np.ndarray, targets: np.ndarray,
                     weights: np.ndarray, penalty: float,
                     word=None) -> np.ndarray:
    """Closed-form minimizer of the weighted ridge objective for one word.

    Minimizes ``sum_a weights[a] * (targets[a] - core_design[a] @ v)**2
    + penalty * ||v||**2`` where ``core_design`` rows are the fixed core
    embeddings. Raises :class:`SingularRidgeError` when ``penalty`` is zero
    and the weighted design is rank-deficient.
    """
    core_design = np.asarray(core_design, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if core_design.ndim != 2:
        raise ValueError("core_design must be 2-d (n_core, rank)")
    n_core, rank = core_design.shape
    if targets.shape != (n_core,) or weights.shape != (n_core,):
        raise ValueError("targets and weights must be length n_core vectors")
    if (weights < 0).any():
        raise ValueError("ridge weights must be non-negative")
    if penalty < 0:
        raise ValueError("ridge penalty must be non-negative")
    weighted_design = core_design * weights[:, None]
    gram = core_design.T @ weighted_design
    if penalty > 0:
        gram[np.diag_indices(rank)] += penalty
    rhs = weighted_design.T @ targets
    try:
        factor = scipy.linalg.cho_factor(gram, check_finite=False)
        return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        label = "word" if word is None else f"word {word!r}"
        raise SingularRidgeError(
            f"unpenalized ridge system for {label} is singular: the weighted "
            "core design is rank-deficient (add a positive penalty)"
        ) from exc


def solve_block(core_design: np.ndarray, targets: np.ndarray,
                weights: np.ndarray, penalties: np.ndarray,
                words=None, jobs: int = 1) -> np.ndarray:
    """Solve every word of a block independently against the fixed core.

    ``targets`` and ``weights`` are (n_core, n_words) strips; column ``i``
    belongs to word ``i``. Words whose weights vanish entirely keep the prior
    mean (the zero vector) when they carry a positive penalty. Columns are
    independent, so execution order (or thread count) cannot change results.
    """
    n_core, n_words = targets.shape
    rank = core_design.shape[1]
    vectors = np.zeros((rank, n_words))

    def solve_one(i: int) -> None:
        column_weights = weights[:, i]
        if penalties[i] > 0 and not column_weights.any():
            return
        word = None if words is None else words[i]
        vectors[:, i] = ridge_solve_word(
            core_design, targets[:, i], column_weights, penalties[i], word=word
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(solve_one, range(n_words)))
    else:
        for i in range(n_words):
            solve_one(i)
    return vectors


@dataclass
class TrainResult:
    """Full-vocabulary embeddings plus the core solver error trajectory."""

    vectors: np.ndarray
    solver_errors: np.ndarray
    plan: BlockPlan


def train_blockwise(counts: CooccurrenceCounts, plan: BlockPlan,
                    schedule: RegularizationSchedule, config: BcdConfig, *,
                    smoothing: float = 0.02, cut_fraction: float = 0.0002,
                    core_vectors: np.ndarray | None = None,
                    resume: dict[int, np.ndarray] | None = None,
                    on_group_done=None, jobs: int = 1) -> TrainResult:
    """Train embeddings for the whole vocabulary.

    The core block is solved by the PSD descent solver on the symmetrized
    core statistics (skipped when ``core_vectors`` is supplied); every later
    group is solved by per-word ridge regression against the core strip.
    ``resume`` maps group index -> already-solved vectors, and
    ``on_group_done(group_index, vectors)`` fires after each group so callers
    can checkpoint.
    """
    if plan.vocab_size != counts.vocab_size:
        raise ValueError(
            f"plan covers {plan.vocab_size} words but counts hold "
            f"{counts.vocab_size}"
        )
    unigrams = unigram_distribution(counts)
    smoothed = smooth_bigrams(counts, unigrams, smoothing)
    weights = weight_matrix(smoothed, cut_fraction)
    pmi = pmi_target(smoothed, unigrams)
    groups = plan.groups()
    core = groups[0]
    resume = resume or {}

    solver_errors = np.array([])
    if core_vectors is None:
        core_target, core_weights = symmetrized_core(pmi, weights, core)
        factor, solver_errors = bcd_solve(core_target, core_weights, config)
        core_vectors = factor.vectors
    else:
        core_vectors = np.asarray(core_vectors, dtype=np.float64)
        if core_vectors.shape != (config.rank, len(core)):
            raise ValueError(
                f"core_vectors must have shape ({config.rank}, {len(core)}), "
                f"got {core_vectors.shape}"
            )

    vectors = np.zeros((config.rank, plan.vocab_size))
    vectors[:, core.start:core.stop] = core_vectors
    if on_group_done is not None:
        on_group_done(0, core_vectors)

    # A contiguous copy keeps BLAS kernel choices, and therefore float
    # rounding, identical between fresh and resumed runs.
    core_design = np.ascontiguousarray(core_vectors.T)
    for k, group in enumerate(groups[1:], start=1):
        if k in resume:
            block_vectors = np.asarray(resume[k], dtype=np.float64)
            if block_vectors.shape != (config.rank, len(group)):
                raise ValueError(f"resumed group {k} has wrong shape")
            vectors[:, group.start:group.stop] = block_vectors
            continue
        pmi_cb = pmi.block(core, group)
        pmi_bc = pmi.block(group, core)
        weight_cb = weights.block(core, group)
        weight_bc = weights.block(group, core)
        targets, fused_weights = symmetrize(pmi_cb, pmi_bc,
                                            weight_cb, weight_bc)
        penalties = schedule.penalties(np.arange(group.start, group.stop))
        block_vectors = solve_block(
            core_design, targets, fused_weights, penalties,
            words=list(group), jobs=jobs,
        )
        vectors[:, group.start:group.stop] = block_vectors
        if on_group_done is not None:
            on_group_done(k, block_vectors)
    return TrainResult(vectors, solver_errors, plan)

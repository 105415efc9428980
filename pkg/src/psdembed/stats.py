"""Smoothed corpus statistics feeding the solver.

Raw pair counts become: a unigram probability vector, an interpolated
(smoothed) joint bigram probability matrix, a per-bigram confidence weight
matrix in [0, 1], and the log-ratio (PMI) regression target. Everything is
materialized block by block so the full dense vocabulary-squared matrix never
has to exist in memory; the block boundaries come from the training plan.
"""

from __future__ import annotations

import json
import math

import numpy as np
import scipy.sparse as sp

from .corpus import CooccurrenceCounts

__all__ = [
    "unigram_distribution",
    "SmoothedBigrams",
    "smooth_bigrams",
    "WeightMatrix",
    "weight_matrix",
    "PmiTarget",
    "pmi_target",
    "symmetrize",
    "symmetrized_core",
    "save_block",
    "load_block",
]

_BLOCK_MAGIC = b"PSDBLK1\n"


def _as_range(indices, size) -> range:
    if isinstance(indices, range):
        return indices
    if isinstance(indices, slice):
        start, stop, step = indices.indices(size)
        if step != 1:
            raise ValueError("only contiguous blocks are supported")
        return range(start, stop)
    raise TypeError(f"block indices must be a range or slice, got {indices!r}")


def unigram_distribution(counts: CooccurrenceCounts) -> np.ndarray:
    """Per-word probability estimated from in-vocabulary token frequencies."""
    total = counts.unigram_counts.sum()
    if total <= 0:
        raise ValueError("cannot estimate unigram probabilities: zero tokens")
    return counts.unigram_counts / float(total)


class SmoothedBigrams:
    """Joint bigram probabilities interpolated with the unigram product.

    ``prob(i, j) = (1 - smoothing) * empirical(i, j) + smoothing * u[i] * u[j]``

    With ``smoothing > 0`` every entry is strictly positive, which is what
    makes the log transform downstream finite everywhere. The matrix is never
    stored densely; :meth:`block` materializes rectangular pieces on demand.
    """

    def __init__(self, empirical: sp.csr_matrix, unigrams: np.ndarray,
                 smoothing: float):
        if not 0.0 <= smoothing <= 1.0:
            raise ValueError(
                f"smoothing weight must lie in [0, 1], got {smoothing}"
            )
        self.empirical = empirical.tocsr()
        self.unigrams = np.asarray(unigrams, dtype=np.float64)
        self.smoothing = float(smoothing)
        if self.empirical.shape[0] != self.empirical.shape[1]:
            raise ValueError("empirical joint must be square")
        if self.empirical.shape[0] != self.unigrams.shape[0]:
            raise ValueError("joint matrix and unigram vector disagree on size")

    @property
    def size(self) -> int:
        return self.empirical.shape[0]

    def block(self, rows, cols) -> np.ndarray:
        """Dense block of smoothed joint probabilities."""
        rows = _as_range(rows, self.size)
        cols = _as_range(cols, self.size)
        empirical = self.empirical[rows.start:rows.stop,
                                   cols.start:cols.stop].toarray()
        backoff = np.outer(self.unigrams[rows.start:rows.stop],
                           self.unigrams[cols.start:cols.stop])
        return (1.0 - self.smoothing) * empirical + self.smoothing * backoff

    def dense(self) -> np.ndarray:
        return self.block(range(self.size), range(self.size))

    def at(self, i: int, j: int) -> float:
        empirical = self.empirical[i, j]
        return ((1.0 - self.smoothing) * empirical
                + self.smoothing * self.unigrams[i] * self.unigrams[j])

    def observed_offdiagonal(self) -> np.ndarray:
        """Smoothed values at the observed (count > 0) off-diagonal pairs.

        Diagonal pairs never carry weight, so they are excluded from the
        saturation calibration performed by :class:`WeightMatrix`.
        """
        coo = self.empirical.tocoo()
        keep = (coo.row != coo.col) & (coo.data > 0)
        values = ((1.0 - self.smoothing) * coo.data[keep]
                  + self.smoothing
                  * self.unigrams[coo.row[keep]]
                  * self.unigrams[coo.col[keep]])
        return values


def smooth_bigrams(counts: CooccurrenceCounts, unigrams: np.ndarray,
                   smoothing: float) -> SmoothedBigrams:
    """Interpolate the empirical joint with the unigram outer product."""
    total = counts.total_pairs
    if total <= 0:
        raise ValueError("cannot smooth empty co-occurrence counts")
    empirical = counts.pairs.multiply(1.0 / total).tocsr()
    return SmoothedBigrams(empirical, unigrams, smoothing)


class WeightMatrix:
    """Per-bigram confidence weights in [0, 1].

    Off the diagonal the weight is ``sqrt(prob) / cut_value`` capped at 1;
    the cap point is calibrated so the requested fraction of observed
    off-diagonal bigrams saturates. Diagonal entries get weight 0 because a
    word's co-occurrence with itself says nothing usable about its vector.
    """

    def __init__(self, smoothed: SmoothedBigrams, cut_fraction: float = 0.0002):
        if not 0.0 < cut_fraction < 1.0:
            raise ValueError(
                f"cut_fraction must lie strictly between 0 and 1, got {cut_fraction}"
            )
        observed = smoothed.observed_offdiagonal()
        if observed.size == 0:
            raise ValueError(
                "no observed off-diagonal bigrams to calibrate weights against"
            )
        rank = min(observed.size,
                   max(1, math.ceil(cut_fraction * observed.size)))
        kth_largest = np.partition(observed, observed.size - rank)[
            observed.size - rank
        ]
        self.cut_value = math.sqrt(kth_largest)
        self.cut_fraction = float(cut_fraction)
        self.smoothed = smoothed

    @property
    def size(self) -> int:
        return self.smoothed.size

    def block(self, rows, cols) -> np.ndarray:
        rows = _as_range(rows, self.size)
        cols = _as_range(cols, self.size)
        weights = np.sqrt(self.smoothed.block(rows, cols)) / self.cut_value
        np.clip(weights, 0.0, 1.0, out=weights)
        overlap_start = max(rows.start, cols.start)
        overlap_stop = min(rows.stop, cols.stop)
        if overlap_start < overlap_stop:
            diag = np.arange(overlap_start, overlap_stop)
            weights[diag - rows.start, diag - cols.start] = 0.0
        return weights

    def dense(self) -> np.ndarray:
        return self.block(range(self.size), range(self.size))


def weight_matrix(smoothed: SmoothedBigrams,
                  cut_fraction: float = 0.0002) -> WeightMatrix:
    """Build the residual confidence weights for a smoothed joint."""
    return WeightMatrix(smoothed, cut_fraction)


class PmiTarget:
    """Log-ratio regression target derived from the smoothed joint.

    ``pmi(i, j) = log prob(i, j) - log u[i] - log u[j]``

    which is also ``log conditional(j | i) - log u[j]`` for the conditional
    ``prob(i, j) / u[i]``; the conditional matrix is derived on demand rather
    than stored.
    """

    def __init__(self, smoothed: SmoothedBigrams, unigrams: np.ndarray):
        unigrams = np.asarray(unigrams, dtype=np.float64)
        if (unigrams <= 0).any():
            raise ValueError(
                "unigram probabilities contain zeros; smooth the joint "
                "distribution (smoothing > 0) before taking logs"
            )
        if smoothed.smoothing == 0.0:
            nnz_needed = smoothed.size * smoothed.size
            if (smoothed.empirical.nnz < nnz_needed
                    or (smoothed.empirical.data <= 0).any()):
                raise ValueError(
                    "joint distribution has zero entries; smooth it "
                    "(smoothing > 0) before building the log-ratio target"
                )
        self.smoothed = smoothed
        self.unigrams = unigrams
        self._log_unigrams = np.log(unigrams)

    @property
    def size(self) -> int:
        return self.smoothed.size

    def block(self, rows, cols) -> np.ndarray:
        rows = _as_range(rows, self.size)
        cols = _as_range(cols, self.size)
        values = np.log(self.smoothed.block(rows, cols))
        values -= self._log_unigrams[rows.start:rows.stop, None]
        values -= self._log_unigrams[None, cols.start:cols.stop]
        return values

    def conditional_block(self, rows, cols) -> np.ndarray:
        """Block of ``prob(col | row)`` probabilities."""
        rows = _as_range(rows, self.size)
        cols = _as_range(cols, self.size)
        joint = self.smoothed.block(rows, cols)
        return joint / self.unigrams[rows.start:rows.stop, None]

    def dense(self) -> np.ndarray:
        return self.block(range(self.size), range(self.size))

    def at(self, i: int, j: int) -> float:
        return (math.log(self.smoothed.at(i, j))
                - self._log_unigrams[i] - self._log_unigrams[j])


def pmi_target(smoothed: SmoothedBigrams, unigrams: np.ndarray) -> PmiTarget:
    """Build the PMI regression target from smoothed statistics."""
    return PmiTarget(smoothed, unigrams)


def symmetrize(pmi_ab: np.ndarray, pmi_ba: np.ndarray,
               weights_ab: np.ndarray, weights_ba: np.ndarray):
    """Fuse the two directed views of a block pair into one target.

    Returns ``(target, weight_sum)`` where ``weight_sum`` is the entry-wise
    sum of the two directed weights (it can reach 2 where both saturate) and
    ``target`` is the weight-averaged PMI with 0/0 defined as 0.
    """
    pmi_ab = np.asarray(pmi_ab, dtype=np.float64)
    pmi_ba = np.asarray(pmi_ba, dtype=np.float64)
    weights_ab = np.asarray(weights_ab, dtype=np.float64)
    weights_ba = np.asarray(weights_ba, dtype=np.float64)
    if pmi_ab.shape != weights_ab.shape or pmi_ba.shape != weights_ba.shape:
        raise ValueError("PMI and weight blocks must have matching shapes")
    if pmi_ab.shape != pmi_ba.T.shape:
        raise ValueError(
            f"directed blocks do not conform: {pmi_ab.shape} vs {pmi_ba.shape}"
        )
    weight_sum = weights_ab + weights_ba.T
    numerator = pmi_ab * weights_ab + (pmi_ba * weights_ba).T
    with np.errstate(invalid="ignore", divide="ignore"):
        target = np.where(weight_sum > 0, numerator / weight_sum, 0.0)
    return target, weight_sum


def symmetrized_core(pmi: PmiTarget, weights: WeightMatrix, core: range):
    """Symmetric PMI target and solver weights for the core-core block.

    The fused weight of the two directed views is halved so every entry stays
    in [0, 1], which the descent solver requires for its error guarantee.
    """
    pmi_block = pmi.block(core, core)
    weight_block = weights.block(core, core)
    target, weight_sum = symmetrize(pmi_block, pmi_block,
                                    weight_block, weight_block)
    return target, weight_sum / 2.0


def save_block(path, values: np.ndarray, *, rows: range, cols: range,
               vocab_size: int, smoothing=None, cut_value=None) -> None:
    """Write a dense block with a small self-describing header.

    The format is a magic line, a JSON header line (row range, column range,
    vocabulary size, smoothing weight, weight cap), then raw float64 bytes in
    row-major order.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.shape != (len(rows), len(cols)):
        raise ValueError(
            f"block shape {values.shape} does not match ranges "
            f"{len(rows)}x{len(cols)}"
        )
    header = {
        "rows": [rows.start, rows.stop],
        "cols": [cols.start, cols.stop],
        "vocab_size": int(vocab_size),
        "smoothing": smoothing,
        "cut_value": cut_value,
        "dtype": "float64",
    }
    with open(path, "wb") as handle:
        handle.write(_BLOCK_MAGIC)
        handle.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        handle.write(b"\n")
        handle.write(values.tobytes())


def load_block(path):
    """Read a block written by :func:`save_block`; returns (values, header)."""
    with open(path, "rb") as handle:
        magic = handle.read(len(_BLOCK_MAGIC))
        if magic != _BLOCK_MAGIC:
            raise ValueError(f"{path} is not a block file")
        header = json.loads(handle.readline().decode("utf-8"))
        rows = header["rows"]
        cols = header["cols"]
        shape = (rows[1] - rows[0], cols[1] - cols[0])
        values = np.frombuffer(handle.read(), dtype=np.float64).reshape(shape)
    return values.copy(), header

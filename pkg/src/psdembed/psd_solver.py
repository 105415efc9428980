"""Weighted low-rank positive-semidefinite approximation of a symmetric
target matrix.

The solver alternates between filling low-confidence entries with the current
reconstruction and projecting back onto the rank-limited PSD cone via
eigendecomposition. With entry weights in [0, 1] the weighted squared error
never increases across iterations. Factoring through eigenvalues rather than
singular values matters: a truncated SVD can keep a direction whose
eigenvalue is negative and thereby flip the sign of reconstructed
correlations (see :func:`svd_trap_demo`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BcdConfig",
    "PsdFactor",
    "psd_approximate",
    "bcd_solve",
    "weighted_frobenius_sq",
    "svd_trap_demo",
    "SvdTrapReport",
]


@dataclass
class BcdConfig:
    """Solver settings: factor rank, iteration budget, initial scale of the
    starting reconstruction, and the relative-improvement early-stop
    threshold (0 disables early stopping)."""

    rank: int
    iterations: int = 5
    init_scale: float = 0.5
    convergence_tol: float = 1e-5

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be non-negative")


@dataclass
class PsdFactor:
    """Rank-limited PSD factorization ``X = vectors.T @ vectors``.

    ``vectors`` has shape (rank, n); column i is the embedding of item i.
    ``eigenvalues`` holds the retained eigenvalues in descending order,
    zero-padded when fewer than ``rank`` are positive, so the reconstruction
    is PSD of rank at most ``rank`` by construction.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def rank(self) -> int:
        return self.vectors.shape[0]

    def gram(self) -> np.ndarray:
        return self.vectors.T @ self.vectors


def _require_symmetric(matrix: np.ndarray, name: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got {matrix.shape}")
    if not np.isfinite(matrix).all():
        raise np.linalg.LinAlgError(f"{name} contains non-finite entries")
    scale = np.abs(matrix).max()
    if np.abs(matrix - matrix.T).max() > 1e-10 * max(scale, 1e-30):
        raise ValueError(f"{name} is not symmetric")
    return matrix


def _fix_eigenvector_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Removes the per-backend sign ambiguity of eigenvectors so the factor is
    deterministic.
    """
    anchor = np.abs(vectors).argmax(axis=0)
    signs = np.sign(vectors[anchor, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def psd_approximate(matrix: np.ndarray, rank: int) -> PsdFactor:
    """Nearest rank-limited PSD matrix in Frobenius norm, as a factor.

    Eigendecomposes the symmetric input and keeps at most ``rank`` of the
    largest strictly positive eigenvalues; factor rows beyond the number of
    positive eigenvalues are zero so the embedding dimension stays fixed.
    """
    matrix = _require_symmetric(matrix, "matrix")
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    eigenvalues = eigenvalues[::-1]
    eigenvectors = _fix_eigenvector_signs(eigenvectors[:, ::-1])
    keep = min(rank, int(np.count_nonzero(eigenvalues > 0)))
    n = matrix.shape[0]
    vectors = np.zeros((rank, n))
    retained = np.zeros(rank)
    if keep:
        vectors[:keep] = np.sqrt(eigenvalues[:keep])[:, None] \
            * eigenvectors[:, :keep].T
        retained[:keep] = eigenvalues[:keep]
    return PsdFactor(vectors, retained)


def weighted_frobenius_sq(matrix: np.ndarray, weights: np.ndarray) -> float:
    """Entry-weighted squared Frobenius norm ``sum_ij w_ij * a_ij**2``."""
    matrix = np.asarray(matrix, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if matrix.shape != weights.shape:
        raise ValueError(
            f"shape mismatch: matrix {matrix.shape} vs weights {weights.shape}"
        )
    if (weights < 0).any():
        raise ValueError("weights must be non-negative")
    return float(np.sum(weights * matrix * matrix))


def bcd_solve(target: np.ndarray, weights: np.ndarray, config: BcdConfig):
    """Approximate ``target`` by a rank-limited PSD matrix under entry weights.

    Each iteration rebuilds the working matrix as ``w*target + (1-w)*X`` and
    re-projects it onto the PSD cone of rank at most ``config.rank``. Returns
    ``(factor, errors)`` where ``errors[t]`` is the weighted squared error
    after iteration ``t + 1``; the trajectory is non-increasing because the
    weights stay within [0, 1].
    """
    target = _require_symmetric(target, "target")
    weights = _require_symmetric(weights, "weights")
    if target.shape != weights.shape:
        raise ValueError(
            f"shape mismatch: target {target.shape} vs weights {weights.shape}"
        )
    if weights.min() < 0.0 or weights.max() > 1.0:
        raise ValueError(
            "solver weights must lie in [0, 1]; larger weights void the "
            "monotone-error guarantee"
        )
    reconstruction = config.init_scale * target
    factor = None
    errors = []
    for _ in range(config.iterations):
        filled = weights * target + (1.0 - weights) * reconstruction
        factor = psd_approximate(filled, config.rank)
        reconstruction = factor.gram()
        errors.append(weighted_frobenius_sq(target - reconstruction, weights))
        if len(errors) >= 2:
            previous, current = errors[-2], errors[-1]
            if previous <= 0.0:
                break
            if (config.convergence_tol > 0.0
                    and (previous - current) / previous < config.convergence_tol):
                break
    return factor, np.asarray(errors)


# Two demonstration targets with identical singular values (3, 2, 1) but
# different spectra: the first has eigenvalues (3, 2, 1), the second
# (-3, 2, 1), so its dominant singular direction carries negative curvature.
TRAP_DEMO_MATRICES = {
    "positive-spectrum": np.array([
        [1.4, 0.8, 0.0],
        [0.8, 2.6, 0.0],
        [0.0, 0.0, 2.0],
    ]),
    "negative-principal": np.array([
        [0.2, -1.6, 0.0],
        [-1.6, -2.2, 0.0],
        [0.0, 0.0, 2.0],
    ]),
}


@dataclass
class TrapEntry:
    matrix_name: str
    route: str
    factor: np.ndarray
    first_second_inner: float


@dataclass
class SvdTrapReport:
    """Side-by-side rank-2 factors from truncated SVD vs eigendecomposition."""

    entries: list[TrapEntry] = field(default_factory=list)

    def entry(self, matrix_name: str, route: str) -> TrapEntry:
        for item in self.entries:
            if item.matrix_name == matrix_name and item.route == route:
                return item
        raise KeyError((matrix_name, route))

    def render(self) -> str:
        lines = []
        for name, matrix in TRAP_DEMO_MATRICES.items():
            lines.append(f"matrix {name}:")
            for row in matrix:
                lines.append("    " + "  ".join(f"{v:6.2f}" for v in row))
            for route in ("svd", "eigen"):
                item = self.entry(name, route)
                lines.append(f"  {route} factor rows:")
                for row in item.factor:
                    lines.append(
                        "    " + "  ".join(f"{v:7.3f}" for v in row)
                    )
                sign = "> 0" if item.first_second_inner > 0 else "< 0"
                lines.append(
                    f"  {route}: word1.word2 = "
                    f"{item.first_second_inner:+.3f} ({sign})"
                )
            lines.append("")
        return "\n".join(lines)


def _svd_factor(matrix: np.ndarray, rank: int) -> np.ndarray:
    left, singular, _ = np.linalg.svd(matrix)
    left = _fix_eigenvector_signs(left[:, :rank])
    return np.sqrt(singular[:rank])[:, None] * left.T


def svd_trap_demo() -> SvdTrapReport:
    """Show how truncated SVD can flip the sign of a reconstructed
    correlation while the eigen route preserves it.

    For the matrix whose principal eigenvalue is negative, the SVD route
    keeps that direction (its singular value is the largest) and reports the
    first two items as positively correlated even though their target entry
    is negative; the eigen route keeps only positive-curvature directions and
    preserves the negative correlation.
    """
    report = SvdTrapReport()
    for name, matrix in TRAP_DEMO_MATRICES.items():
        svd_factor = _svd_factor(matrix, 2)
        eigen_factor = psd_approximate(matrix, 2).vectors
        for route, factor in (("svd", svd_factor), ("eigen", eigen_factor)):
            inner = float(factor[:, 0] @ factor[:, 1])
            report.entries.append(TrapEntry(name, route, factor, inner))
    return report

"""Block decomposition of R^N and the associated quadratic norms.

Blocks are contiguous index ranges; any permutation of coordinates is
assumed to have been applied when the problem was assembled, so a block
view is a zero-copy slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "BlockPartition",
    "BlockMetric",
    "WeightVector",
    "block_view",
    "scatter",
    "block_norm",
    "conjugate_block_norm",
    "weighted_norm",
]

# Blocks at or below this size use a direct factorization for B^{-1} g;
# larger blocks fall back to CG on the SPD system.
_DIRECT_SOLVE_CAP = 600


@dataclass(frozen=True)
class BlockPartition:
    """Decomposition of R^N into n contiguous blocks of sizes N_i."""

    sizes: tuple[int, ...]
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError("block sizes must be positive integers")
        object.__setattr__(self, "sizes", sizes)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        object.__setattr__(self, "offsets", tuple(int(o) for o in offsets))

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def N(self) -> int:
        return self.offsets[-1]

    def range(self, i: int) -> slice:
        if not 0 <= i < self.n:
            raise IndexError(f"block index {i} out of range [0, {self.n})")
        return slice(self.offsets[i], self.offsets[i + 1])


def block_view(x: np.ndarray, i: int, partition: BlockPartition) -> np.ndarray:
    """Return the contiguous slice of ``x`` belonging to block ``i``."""
    if x.shape[0] != partition.N:
        raise ValueError(f"vector of length {x.shape[0]} does not match N={partition.N}")
    return x[partition.range(i)]


def scatter(blocks: list[np.ndarray], partition: BlockPartition) -> np.ndarray:
    """Reassemble a full vector from its per-block views."""
    if len(blocks) != partition.n:
        raise ValueError("wrong number of blocks")
    return np.concatenate(blocks)


class BlockMetric:
    """Per-block SPD operators B_i and Lipschitz constants l_i.

    Each B_i may be a dense array, a sparse matrix or a LinearOperator.
    Symmetry is verified at construction for explicitly stored matrices.
    """

    def __init__(self, operators, lipschitz):
        self.operators = list(operators)
        self.lipschitz = np.asarray(lipschitz, dtype=float)
        if len(self.operators) != self.lipschitz.shape[0]:
            raise ValueError("one Lipschitz constant per block required")
        if np.any(self.lipschitz <= 0):
            raise ValueError("Lipschitz constants must be positive")
        for i, B in enumerate(self.operators):
            if isinstance(B, np.ndarray) or sp.issparse(B):
                dense = B.toarray() if sp.issparse(B) else B
                scale = max(np.abs(dense).max(), 1.0)
                if np.abs(dense - dense.T).max() > 1e-12 * scale:
                    raise ValueError(f"B_{i} is not symmetric")
        self._factors = [None] * len(self.operators)

    @classmethod
    def identity(cls, partition: BlockPartition, lipschitz=None):
        ops = [np.eye(s) for s in partition.sizes]
        if lipschitz is None:
            lipschitz = np.ones(partition.n)
        return cls(ops, lipschitz)

    @property
    def n(self) -> int:
        return len(self.operators)

    def apply(self, i: int, t: np.ndarray) -> np.ndarray:
        B = self.operators[i]
        return B @ t

    def solve(self, i: int, g: np.ndarray) -> np.ndarray:
        """Solve B_i y = g; direct factorization for small explicit blocks,
        CG to tight residual otherwise (B_i^{-1} is never formed)."""
        B = self.operators[i]
        dim = g.shape[0]
        explicit = isinstance(B, np.ndarray) or sp.issparse(B)
        if explicit and dim <= _DIRECT_SOLVE_CAP:
            if self._factors[i] is None:
                dense = B.toarray() if sp.issparse(B) else np.asarray(B)
                try:
                    self._factors[i] = cho_factor(dense)
                except np.linalg.LinAlgError as e:
                    raise ValueError(f"B_{i} is not positive definite") from e
            return cho_solve(self._factors[i], g)
        op = spla.aslinearoperator(B)
        y, info = spla.cg(op, g, rtol=1e-12, atol=0.0, maxiter=20 * dim)
        if info != 0:
            raise ValueError(f"CG on B_{i} did not converge (info={info})")
        return y


@dataclass(frozen=True)
class WeightVector:
    """Positive per-block weights w_i for the global weighted norm."""

    w: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.w)
        if any(v <= 0 for v in w):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "w", w)


def block_norm(t: np.ndarray, B) -> float:
    """sqrt(<B t, t>), the norm induced by the SPD operator B."""
    q = float(t @ (B @ t))
    if q < 0:
        raise ValueError("operator is not positive semidefinite on this vector")
    return np.sqrt(q)


def conjugate_block_norm(g: np.ndarray, B, metric: BlockMetric | None = None, i: int = 0) -> float:
    """sqrt(<B^{-1} g, g>), computed through a linear solve against B."""
    if metric is not None:
        y = metric.solve(i, g)
    else:
        m = BlockMetric([B], [1.0])
        y = m.solve(0, g)
    q = float(y @ g)
    return np.sqrt(max(q, 0.0))


def weighted_norm(
    x: np.ndarray,
    weights: WeightVector,
    metric: BlockMetric,
    partition: BlockPartition,
) -> float:
    """sqrt(sum_i w_i <B_i x^(i), x^(i)>)."""
    if len(weights.w) != partition.n or metric.n != partition.n:
        raise ValueError("weights/metric inconsistent with partition")
    total = 0.0
    for i in range(partition.n):
        xi = block_view(x, i, partition)
        total += weights.w[i] * float(xi @ metric.apply(i, xi))
    return np.sqrt(total)

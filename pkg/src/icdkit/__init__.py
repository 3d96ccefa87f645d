"""Randomized inexact block coordinate descent for composite convex problems.

The library is organised around a handful of small modules:

``blocks``
    Block decomposition of R^N, per-block quadratic norms and weighted
    global norms.
``objective``
    Composite objective F = f + Psi for a sparse quadratic f, with block
    gradients, the per-block model and incremental residual updates.
``inner``
    Inner solvers for the block subproblem: CG, preconditioned CG,
    incomplete/exact Cholesky, and a proximal-gradient l1 solver that
    terminates on the duality gap.
``core``
    The randomized outer loop: block sampling, inexactness budgets and
    the driver producing per-iteration records.
``bounds``
    Iteration-complexity bound calculators and feasibility checks.
``block_angular``
    Block-angular matrix generation, the C^T C preconditioners and the
    spectrum verification reports.
``harness``
    Configuration-driven experiment runner plus Matrix Market I/O,
    exposed through the ``icdkit`` command line tool.
"""

from icdkit.blocks import BlockMetric, BlockPartition, WeightVector
from icdkit.objective import (
    CompositeObjective,
    QuadraticSmooth,
    ResidualState,
    SeparableRegularizer,
)
from icdkit.core import InexactnessPolicy, IterationRecord, SamplingLaw, icd_run
from icdkit.bounds import BoundInputs, BoundResult

__all__ = [
    "BlockMetric",
    "BlockPartition",
    "WeightVector",
    "CompositeObjective",
    "QuadraticSmooth",
    "ResidualState",
    "SeparableRegularizer",
    "InexactnessPolicy",
    "IterationRecord",
    "SamplingLaw",
    "icd_run",
    "BoundInputs",
    "BoundResult",
]

__version__ = "0.1.0"

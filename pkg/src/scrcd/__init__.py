"""Subspace-constrained randomized coordinate descent solvers.

Library for large psd linear systems built around randomly pivoted partial
Cholesky: the constrained block solver, dense reference implementations of the
underlying projection framework, a least-squares variant, and CG / Nyström-PCG
/ block coordinate descent baselines, plus a benchmark CLI (``scrcd``).
"""

from .matrix_core import (
    DenseSource,
    GaussianKernelSource,
    MatrixSource,
    TriangularFactor,
    back_substitution,
    forward_substitution,
    gaussian_kernel_source,
    load_dense_csv,
    synth_spectrum_source,
)
from .nystrom import (
    NystromApproximation,
    best_of_t,
    dense_nystrom,
    empty_approximation,
    load_approximation,
    pivoted_cholesky,
    residual_block,
    rpcholesky,
    save_approximation,
)
from .solver import SolveOptions, SolverState, init, inner_solve, sample_block, solve, step
from .trace import ConvergenceTrace, TraceRecord, read_trace_csv

__all__ = [
    "ConvergenceTrace",
    "DenseSource",
    "GaussianKernelSource",
    "MatrixSource",
    "NystromApproximation",
    "SolveOptions",
    "SolverState",
    "TraceRecord",
    "TriangularFactor",
    "back_substitution",
    "best_of_t",
    "dense_nystrom",
    "empty_approximation",
    "forward_substitution",
    "gaussian_kernel_source",
    "init",
    "inner_solve",
    "load_approximation",
    "load_dense_csv",
    "pivoted_cholesky",
    "read_trace_csv",
    "residual_block",
    "rpcholesky",
    "sample_block",
    "save_approximation",
    "solve",
    "step",
    "synth_spectrum_source",
]

__version__ = "0.1.0"

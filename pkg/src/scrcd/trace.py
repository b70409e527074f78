"""Convergence traces: per-checkpoint records, stopping logic, CSV/JSON output.

All iterative solvers in this package share the same conventions: the plotted
metric is the relative Euclidean residual, one epoch equals ``block_size / n``
of an iteration's coordinate work, and traces serialize to CSV with the header
``iteration,epoch,rel_residual,elapsed_seconds``.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

CONVERGED = "converged"
EPOCH_BUDGET = "epoch_budget"
STALLED = "stalled"

TRACE_HEADER = ("iteration", "epoch", "rel_residual", "elapsed_seconds")

# A run is declared stalled when this many consecutive checkpoints fail to
# improve the best relative residual by the given relative margin.
STALL_WINDOW = 50
STALL_IMPROVEMENT = 1e-3


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    epoch: float
    rel_residual: float
    elapsed_seconds: float


@dataclass
class ConvergenceTrace:
    """Checkpoint records plus the terminal status of a solve."""

    records: list[TraceRecord] = field(default_factory=list)
    status: str = EPOCH_BUDGET
    extras: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    @property
    def epochs(self) -> float:
        return self.records[-1].epoch if self.records else 0.0

    @property
    def final_rel_residual(self) -> float:
        return self.records[-1].rel_residual if self.records else float("nan")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_HEADER)
            for rec in self.records:
                writer.writerow(
                    [rec.iteration, repr(float(rec.epoch)), repr(float(rec.rel_residual)), repr(float(rec.elapsed_seconds))]
                )

    def summary(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "epochs": self.epochs,
            "final_rel_residual": self.final_rel_residual,
        }


def read_trace_csv(path) -> ConvergenceTrace:
    """Read a trace CSV written by :meth:`ConvergenceTrace.write_csv`."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            missing = set(TRACE_HEADER) - set(header or [])
            raise ValueError(f"trace CSV missing columns: {sorted(missing)}")
        for row in reader:
            records.append(
                TraceRecord(
                    iteration=int(row[0]),
                    epoch=float(row[1]),
                    rel_residual=float(row[2]),
                    elapsed_seconds=float(row[3]),
                )
            )
    return ConvergenceTrace(records=records, status="unknown")


def write_summary_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


class TraceRecorder:
    """Accumulates checkpoints and decides when a solve should stop.

    The wall clock is injectable so that the otherwise fully deterministic
    trace pipeline can be exercised byte-for-byte in tests; the default is a
    monotonic clock whose readings are excluded from determinism guarantees.
    """

    def __init__(self, stop_tol: float, max_epochs: float, clock=time.monotonic):
        if stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        self.stop_tol = stop_tol
        self.max_epochs = max_epochs
        self._clock = clock
        self._start = clock()
        self.trace = ConvergenceTrace()
        self._best = float("inf")
        self._stall_count = 0

    def checkpoint(self, iteration: int, epoch: float, rel_residual: float) -> str | None:
        """Record one checkpoint; returns a terminal status or ``None``."""
        elapsed = self._clock() - self._start
        self.trace.records.append(TraceRecord(iteration, epoch, float(rel_residual), elapsed))
        if rel_residual <= self.stop_tol:
            return CONVERGED
        if rel_residual < self._best * (1.0 - STALL_IMPROVEMENT):
            self._best = rel_residual
            self._stall_count = 0
        else:
            self._best = min(self._best, rel_residual)
            self._stall_count += 1
            if self._stall_count >= STALL_WINDOW:
                return STALLED
        return None

    def finish(self, status: str) -> ConvergenceTrace:
        self.trace.status = status
        return self.trace

"""Exact densities of states by exhaustive enumeration, and error metrics."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .histogram import HIGH, LOW, BinSpec, DosHistogram, bin_indices
from .models import EnergyModel

DEFAULT_BUDGET = 2**26
BUDGET_ENV = "GWL_ENUM_BUDGET"


class BudgetExceeded(RuntimeError):
    def __init__(self, required: int, budget: int):
        super().__init__(
            f"enumeration needs {required} evaluations, budget is {budget} "
            f"(raise with ${BUDGET_ENV})"
        )
        self.required = required
        self.budget = budget


class SpecMismatch(ValueError):
    pass


@dataclass
class ExactDos:
    spec: BinSpec
    counts: list  # python ints, one per bin
    overflow_low: int = 0
    overflow_high: int = 0
    total: int = 0

    def entropy(self) -> np.ndarray:
        """ln(count) per bin; 0 where the count is zero."""
        return np.array([math.log(c) if c > 0 else 0.0 for c in self.counts])

    def to_histogram(self) -> DosHistogram:
        return DosHistogram(
            self.spec,
            self.entropy(),
            np.array(self.counts, dtype=np.int64),
            np.array([c > 0 for c in self.counts]),
            self.overflow_low,
            self.overflow_high,
        )

    def to_csv(self) -> str:
        return self.to_histogram().to_csv()


def default_budget() -> int:
    env = os.environ.get(BUDGET_ENV)
    return int(env) if env else DEFAULT_BUDGET


def _digits(start: int, stop: int, dims: int, v: int) -> np.ndarray:
    """Configs with lexicographic rank in [start, stop); site 0 is most significant."""
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(idx), dims), dtype=np.int64)
    for j in range(dims - 1, -1, -1):
        out[:, j] = idx % v
        idx //= v
    return out


def enumerate_dos(
    model: EnergyModel,
    spec: BinSpec,
    budget: int | None = None,
    chunk: int = 1 << 15,
) -> ExactDos:
    """Count every configuration of ``model.space`` into the bins of ``spec``."""
    space = model.space
    total = space.cardinality**space.dims
    budget = default_budget() if budget is None else budget
    if total > budget:
        raise BudgetExceeded(total, budget)
    n = spec.bin_count
    counts = [0] * n
    low = high = 0
    for start in range(0, total, chunk):
        configs = _digits(start, min(start + chunk, total), space.dims, space.cardinality)
        b = bin_indices(spec, model.energies(configs))
        low += int(np.count_nonzero(b == LOW))
        high += int(np.count_nonzero(b == HIGH))
        c = np.bincount(b[b >= 0], minlength=n)
        for k in np.flatnonzero(c):
            counts[k] += int(c[k])
    return ExactDos(spec, counts, low, high, total)


def _same_spec(a: BinSpec, b: BinSpec) -> bool:
    return a.bin_count == b.bin_count and all(
        math.isclose(x, y, rel_tol=1e-9, abs_tol=1e-9)
        for x, y in ((a.lo, b.lo), (a.hi, b.hi), (a.width, b.width))
    )


@dataclass
class ErrorReport:
    mean_abs: float
    max_abs: float
    offset: float  # added to the estimate (median alignment)
    max_offset: float  # alignment that matches the maxima instead
    shared_bins: int
    only_reference: list = field(default_factory=list)  # bin values
    only_estimate: list = field(default_factory=list)

    @property
    def coverage_defects(self) -> list:
        return sorted(self.only_reference + self.only_estimate)

    def to_dict(self) -> dict:
        return {
            "mean_abs": self.mean_abs,
            "max_abs": self.max_abs,
            "offset": self.offset,
            "max_offset": self.max_offset,
            "shared_bins": self.shared_bins,
            "only_reference": self.only_reference,
            "only_estimate": self.only_estimate,
        }


def histogram_error(exact, est: DosHistogram) -> ErrorReport:
    """Compare entropies after the additive alignment that minimises mean |error|.

    ``exact`` is an ``ExactDos`` or a reference ``DosHistogram`` (e.g. read
    back from an exported exact CSV).  Bins present on one side only are
    reported as coverage defects and excluded from the error.
    """
    ref = exact.to_histogram() if isinstance(exact, ExactDos) else exact
    if not _same_spec(ref.spec, est.spec):
        raise SpecMismatch(f"bin specs differ: {ref.spec} vs {est.spec}")
    in_ref = ref.visited & (ref.h > 0) if isinstance(exact, ExactDos) else ref.visited
    in_est = est.visited
    shared = in_ref & in_est
    centers = ref.spec.centers()
    only_ref = [float(c) for c in centers[in_ref & ~in_est]]
    only_est = [float(c) for c in centers[in_est & ~in_ref]]
    if not shared.any():
        return ErrorReport(math.nan, math.nan, math.nan, math.nan, 0, only_ref, only_est)
    diff = ref.s[shared] - est.s[shared]
    offset = float(np.median(diff))
    err = np.abs(diff - offset)
    max_offset = float(ref.s[shared].max() - est.s[shared].max())
    return ErrorReport(
        float(err.mean()), float(err.max()), offset, max_offset, int(shared.sum()), only_ref, only_est
    )

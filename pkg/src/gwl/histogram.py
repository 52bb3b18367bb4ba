"""Binned entropy estimate and visit histogram for Wang-Landau sampling.

Bin ``b`` is labelled by its nominal value ``lo + b * width`` and collects
outputs in ``[lo + (b - 1/2) width, lo + (b + 1/2) width)``, i.e. outputs are
rounded to the nearest nominal value.  With unit width and integer ``lo`` this
is plain ``round(z) - lo``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

# Out-of-range markers returned by ``bin_index``.
LOW = -1
HIGH = -2


class BinSpecError(ValueError):
    pass


@dataclass(frozen=True)
class BinSpec:
    lo: float = -300.0
    hi: float = 100.0
    width: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise BinSpecError("bin range must be finite")
        if not self.lo < self.hi:
            raise BinSpecError("bin range empty")
        if not self.width > 0:
            raise BinSpecError("bin width must be positive")
        n = (self.hi - self.lo) / self.width
        if abs(n - round(n)) > 1e-9:
            raise BinSpecError(
                f"range {self.hi - self.lo} is not a multiple of width {self.width}"
            )

    @property
    def bin_count(self) -> int:
        return int(round((self.hi - self.lo) / self.width))

    def center(self, b: int) -> float:
        return self.lo + b * self.width

    def centers(self) -> np.ndarray:
        return self.lo + np.arange(self.bin_count) * self.width

    @classmethod
    def parse(cls, text: str) -> "BinSpec":
        """Parse ``LO:HI:WIDTH``."""
        parts = text.split(":")
        if len(parts) != 3:
            raise BinSpecError(f"expected LO:HI:WIDTH, got {text!r}")
        try:
            lo, hi, width = (float(p) for p in parts)
        except ValueError:
            raise BinSpecError(f"non-numeric bin spec {text!r}") from None
        return cls(lo, hi, width)

    def to_dict(self) -> dict:
        return {"lo": float(self.lo), "hi": float(self.hi), "width": float(self.width)}


def bin_index(spec: BinSpec, z: float) -> int:
    """Index of the bin holding ``z``, or ``LOW`` / ``HIGH`` when outside."""
    if not math.isfinite(z):
        return HIGH if z > 0 else LOW
    b = math.floor((z - spec.lo) / spec.width + 0.5)
    if b < 0:
        return LOW
    if b >= spec.bin_count:
        return HIGH
    return b


def bin_indices(spec: BinSpec, z: np.ndarray) -> np.ndarray:
    """Vectorised ``bin_index``."""
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        b = np.floor((z - spec.lo) / spec.width + 0.5)
    out = np.where(b < 0, LOW, np.where(b >= spec.bin_count, HIGH, b))
    out = np.where(np.isnan(z), HIGH, out)
    return out.astype(np.int64)


@dataclass
class ModificationSchedule:
    ln_f0: float = 1.0
    iteration: int = 0

    def __post_init__(self):
        if not self.ln_f0 > 0:
            raise ValueError("ln_f0 must be positive")

    @property
    def ln_f(self) -> float:
        return self.ln_f0 / 2.0**self.iteration


@dataclass
class DosHistogram:
    spec: BinSpec
    s: np.ndarray = field(default=None)
    h: np.ndarray = field(default=None)
    visited: np.ndarray = field(default=None)
    overflow_low: int = 0
    overflow_high: int = 0

    def __post_init__(self):
        n = self.spec.bin_count
        if self.s is None:
            self.s = np.zeros(n, dtype=np.float64)
        if self.h is None:
            self.h = np.zeros(n, dtype=np.int64)
        if self.visited is None:
            self.visited = np.zeros(n, dtype=bool)
        if not (len(self.s) == len(self.h) == len(self.visited) == n):
            raise ValueError("histogram arrays must all have bin_count entries")

    def copy(self) -> "DosHistogram":
        return DosHistogram(
            self.spec,
            self.s.copy(),
            self.h.copy(),
            self.visited.copy(),
            self.overflow_low,
            self.overflow_high,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("bin_lo,s,h,visited\n")
        for b in range(self.spec.bin_count):
            buf.write(
                f"{self.spec.center(b):.17g},{self.s[b]:.17g},"
                f"{int(self.h[b])},{int(self.visited[b])}\n"
            )
        return buf.getvalue()

    def to_json(self, sched: ModificationSchedule | None = None) -> str:
        doc = {
            "bins": self.spec.to_dict(),
            "s": [float(v) for v in self.s],
            "h": [int(v) for v in self.h],
            "visited": [bool(v) for v in self.visited],
            "overflow_low": self.overflow_low,
            "overflow_high": self.overflow_high,
        }
        if sched is not None:
            doc["schedule"] = {
                "ln_f0": sched.ln_f0,
                "iteration": sched.iteration,
                "ln_f": sched.ln_f,
            }
        return json.dumps(doc)


def record_visit(hist: DosHistogram, b: int, ln_f: float) -> DosHistogram:
    """Add ``ln_f`` to the entropy of bin ``b`` and count the visit.

    Out-of-range markers only bump the matching overflow counter.
    """
    if b == LOW:
        hist.overflow_low += 1
    elif b == HIGH:
        hist.overflow_high += 1
    else:
        hist.s[b] += ln_f
        hist.h[b] += 1
        hist.visited[b] = True
    return hist


def is_flat(hist: DosHistogram) -> bool:
    """max - min < mean over the bins visited in the current iteration."""
    hv = hist.h[hist.h > 0]
    if hv.size == 0:
        return False
    return bool(hv.max() - hv.min() < hv.mean())


def advance_iteration(hist: DosHistogram, sched: ModificationSchedule):
    hist.h[:] = 0
    sched.iteration += 1
    return hist, sched


class CsvFormatError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def read_csv(text: str) -> DosHistogram:
    """Inverse of ``DosHistogram.to_csv``; the bin spec is inferred from ``bin_lo``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["bin_lo", "s", "h", "visited"]:
        raise CsvFormatError(1, "expected header bin_lo,s,h,visited")
    vals = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise CsvFormatError(lineno, f"expected 4 fields, got {len(row)}")
        try:
            vals.append((float(row[0]), float(row[1]), int(row[2]), int(row[3])))
        except ValueError as exc:
            raise CsvFormatError(lineno, str(exc)) from None
    if len(vals) < 1:
        raise CsvFormatError(2, "no bins")
    centers = np.array([v[0] for v in vals])
    width = float(centers[1] - centers[0]) if len(vals) > 1 else 1.0
    if len(vals) > 1 and not np.allclose(np.diff(centers), width, rtol=1e-9, atol=1e-12):
        raise CsvFormatError(2, "bins are not evenly spaced")
    spec = BinSpec(float(centers[0]), float(centers[0]) + len(vals) * width, width)
    return DosHistogram(
        spec,
        np.array([v[1] for v in vals], dtype=np.float64),
        np.array([v[2] for v in vals], dtype=np.int64),
        np.array([bool(v[3]) for v in vals]),
    )

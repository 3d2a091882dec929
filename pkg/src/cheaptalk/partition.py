"""Labeled interval partitions of the unit interval and their common refinement.

Endpoints are stored as raw fixed-point integers (``value * 2**bits``) so
tiling and measure bookkeeping are exact integer arithmetic.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .numerics import Real


class PartitionError(ValueError):
    pass


class LabelMint:
    """Source of unique opaque identifiers (128 random bits by default)."""

    def __init__(self, rng: random.Random, nbits: int = 128):
        self.rng = rng
        self.nbits = nbits
        self.issued: set[int] = set()

    def fresh(self) -> int:
        while True:
            v = self.rng.getrandbits(self.nbits)
            if v not in self.issued:
                self.issued.add(v)
                return v

    def batch(self, k: int) -> list[int]:
        return [self.fresh() for _ in range(k)]


@dataclass(frozen=True)
class Cell:
    label: int
    lo: int
    hi: int
    target: int

    @property
    def width(self) -> int:
        return self.hi - self.lo


class LabeledPartition:
    def __init__(self, cells: Sequence[Cell], bits: int):
        self.cells = list(cells)
        self.bits = bits
        self._los = [c.lo for c in self.cells]
        self._check()

    def _check(self):
        one = 1 << self.bits
        if not self.cells or self.cells[0].lo != 0 or self.cells[-1].hi != one:
            raise PartitionError("cells must tile (0, 1)")
        for a, b in zip(self.cells, self.cells[1:]):
            if a.hi != b.lo:
                raise PartitionError("cells must be contiguous")
        if any(c.width <= 0 for c in self.cells):
            raise PartitionError("cells must have positive width")
        if len({c.label for c in self.cells}) != len(self.cells):
            raise PartitionError("cell labels must be unique")

    def __len__(self):
        return len(self.cells)

    def boundaries(self) -> list[int]:
        return self._los + [1 << self.bits]

    def locate_index(self, d: int) -> int:
        """Index of the cell containing raw point ``d`` (half-open cells)."""
        if not 0 < d < (1 << self.bits):
            raise PartitionError("point must lie in the open unit interval")
        return bisect.bisect_right(self._los, d) - 1

    def locate(self, d: Real | int) -> tuple[int, int]:
        raw = d.raw if isinstance(d, Real) else d
        c = self.cells[self.locate_index(raw)]
        return c.label, c.target

    def measures(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for c in self.cells:
            out[c.target] = out.get(c.target, 0) + c.width
        return out


def _snap_to_one(raws: list[int], one: int) -> list[int]:
    """Absorb the rounding discrepancy of the weights into the largest one."""
    diff = one - sum(raws)
    if diff:
        k = max(range(len(raws)), key=lambda i: raws[i])
        raws = raws[:]
        raws[k] += diff
    return raws


def build_partition(alphas: Sequence[Real], fragmentation: int, rng: random.Random,
                    mint: LabelMint | None = None) -> LabeledPartition:
    """Split each weight into random fragments and scatter them over (0, 1).

    Fragment lengths within a family are proportional to seeded uniform
    draws.  All fragments are shuffled together before the endpoints are
    accumulated, and every cell gets a fresh opaque label.
    """
    if fragmentation < 1:
        raise PartitionError("fragmentation must be a positive integer")
    if not alphas or any(a.raw <= 0 for a in alphas):
        raise PartitionError("weights must be positive")
    bits = alphas[0].bits
    one = 1 << bits
    total = sum(a.raw for a in alphas)
    if abs(total - one) > (1 << 16) * len(alphas):
        raise PartitionError("weights must sum to 1")
    mint = mint or LabelMint(rng)
    raws = _snap_to_one([a.raw for a in alphas], one)

    fragments = []
    for j, a in enumerate(raws):
        k = min(fragmentation, a)
        draws = [rng.getrandbits(32) + 1 for _ in range(k)]
        s = sum(draws)
        pieces = [a * w // s for w in draws[:-1]]
        pieces.append(a - sum(pieces))
        for piece in pieces:
            if piece > 0:
                fragments.append((j, piece))
    rng.shuffle(fragments)

    cells = []
    lo = 0
    for j, width in fragments:
        cells.append(Cell(mint.fresh(), lo, lo + width, j))
        lo += width
    return LabeledPartition(cells, bits)


@dataclass(frozen=True)
class RefinedCell:
    label: int
    lo: int
    hi: int

    @property
    def width(self) -> int:
        return self.hi - self.lo


class CommonRefinement:
    """Cells cut at every boundary of every per-type-profile partition.

    ``h[t][m]`` is the (family j, cell k) of partition t that contains cell m.
    """

    def __init__(self, cells: Sequence[RefinedCell], h: Mapping, bits: int):
        self.cells = list(cells)
        self.h = dict(h)
        self.bits = bits
        self._los = [c.lo for c in self.cells]

    def __len__(self):
        return len(self.cells)

    def locate_index(self, d: int) -> int:
        if not 0 < d < (1 << self.bits):
            raise PartitionError("point must lie in the open unit interval")
        return bisect.bisect_right(self._los, d) - 1

    def target(self, m: int, t) -> int:
        return self.h[t][m][0]

    def source_cell(self, m: int, t) -> int:
        return self.h[t][m][1]


def build_common_refinement(partitions: Mapping, mint: LabelMint) -> CommonRefinement:
    if not partitions:
        raise PartitionError("need at least one partition")
    bits = {p.bits for p in partitions.values()}
    if len(bits) != 1:
        raise PartitionError("partitions must share a precision")
    (bits,) = bits
    one = 1 << bits
    cuts = sorted({b for p in partitions.values() for b in p.boundaries()} | {0, one})
    cells = [RefinedCell(mint.fresh(), lo, hi) for lo, hi in zip(cuts, cuts[1:])]
    h = {}
    for t, part in partitions.items():
        row = []
        for c in cells:
            k = bisect.bisect_right(part._los, c.lo) - 1
            row.append((part.cells[k].target, k))
        h[t] = row
    return CommonRefinement(cells, h, bits)


def measure_preserved(refinement: CommonRefinement, partitions: Mapping) -> bool:
    """Each source cell is exactly covered by the refinement cells mapped to it."""
    for t, part in partitions.items():
        got = [0] * len(part)
        for m, c in enumerate(refinement.cells):
            j, k = refinement.h[t][m]
            if part.cells[k].target != j or not (part.cells[k].lo <= c.lo and c.hi <= part.cells[k].hi):
                return False
            got[k] += c.width
        if any(g != c.width for g, c in zip(got, part.cells)):
            return False
    return True

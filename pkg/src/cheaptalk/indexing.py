"""Finite index set with dummy entries realising rational distributions by uniform draws."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

from .numerics import lcm_denominators

DEFAULT_MAX_INDEX = 1_000_000


class IndexSetError(ValueError):
    pass


def default_dummy_count(X: int) -> int:
    return max(1, math.ceil(X / 10))


@dataclass(frozen=True)
class IndexSet:
    """``assign[key][x]`` is the support position drawn at index x, or None for dummies.

    Indices run from 1 to ``total``; slot 0 of every assignment list is unused.
    """

    X: int
    dummy: frozenset[int]
    assign: Mapping[Hashable, tuple[int | None, ...]]

    @property
    def b(self) -> int:
        return len(self.dummy)

    @property
    def total(self) -> int:
        return self.X + len(self.dummy)

    def counts(self, key) -> list[int]:
        row = self.assign[key]
        size = max((q for q in row if q is not None), default=-1) + 1
        out = [0] * size
        for q in row[1:]:
            if q is not None:
                out[q] += 1
        return out


def build_index_set(distributions: Mapping[Hashable, Sequence[Fraction]], multiplier: int = 1,
                    b: int | None = None, rng: random.Random | None = None,
                    max_size: int = DEFAULT_MAX_INDEX) -> IndexSet:
    """X is ``multiplier`` times the lcm of every denominator in ``distributions``."""
    if multiplier < 1:
        raise IndexSetError("multiplier must be at least 1")
    if not distributions:
        raise IndexSetError("need at least one distribution")
    rng = rng or random.Random(0)
    entries = [Fraction(v) for dist in distributions.values() for v in dist]
    for key, dist in distributions.items():
        if sum(Fraction(v) for v in dist) != 1 or any(Fraction(v) < 0 for v in dist):
            raise IndexSetError(f"distribution {key!r} is not a rational distribution")
    X = multiplier * lcm_denominators(entries)
    if b is None:
        b = default_dummy_count(X)
    if b < 0:
        raise IndexSetError("dummy count must be non-negative")
    total = X + b
    if total > max_size:
        raise IndexSetError(f"index set of size {total} exceeds the cap {max_size}")

    dummy = frozenset(rng.sample(range(1, total + 1), b))
    live = [x for x in range(1, total + 1) if x not in dummy]
    assign = {}
    for key, dist in distributions.items():
        order = live[:]
        rng.shuffle(order)
        row: list[int | None] = [None] * (total + 1)
        pos = 0
        for q, pq in enumerate(dist):
            k = Fraction(pq) * X
            assert k.denominator == 1
            for x in order[pos:pos + int(k)]:
                row[x] = q
            pos += int(k)
        assign[key] = tuple(row)
    return IndexSet(X, dummy, assign)


def z_lookup(ix: IndexSet, x: int, key) -> int | None:
    if not 1 <= x <= ix.total:
        raise IndexSetError(f"index {x} outside 1..{ix.total}")
    return ix.assign[key][x]

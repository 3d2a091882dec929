"""One-time strategy labels, recommendation tables and type encryption maps.

A domain point is ``(m, x, t)``: refinement cell index, index-set element and
plaintext type profile (``None`` in complete-information games).  Every
domain point gets its own ciphertext label per (owner, subject) pair.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

from .game import Game
from .indexing import IndexSet
from .partition import CommonRefinement, LabelMint, LabeledPartition

BOT = None  # the null recommendation

Point = tuple[int, int, tuple | None]

DEFAULT_MAX_DOMAIN = 2_000_000


class CodebookError(ValueError):
    pass


class Layout:
    """Plaintext recommendation at each domain point: s_i(z(x, g(cell, t)))."""

    def __init__(self, cells, index_set: IndexSet, target: Callable[[int, tuple | None], Hashable],
                 support_of: Callable[[Hashable], Sequence[tuple]], type_profiles: Sequence | None,
                 action_counts: Sequence[int]):
        self.cells = cells
        self.index_set = index_set
        self._target = target
        self._support_of = support_of
        self.type_profiles = list(type_profiles) if type_profiles is not None else None
        self.action_counts = list(action_counts)

    @classmethod
    def complete(cls, game: Game, partition: LabeledPartition, index_set: IndexSet,
                 support: Sequence[tuple]) -> "Layout":
        return cls(partition.cells, index_set, lambda m, t: partition.cells[m].target,
                   lambda key: support, None, game.sizes)

    @classmethod
    def bayesian(cls, action_counts: Sequence[int], refinement: CommonRefinement, index_set: IndexSet,
                 supports: dict) -> "Layout":
        return cls(refinement.cells, index_set, lambda m, t: (t, refinement.target(m, t)),
                   lambda key: supports[key[0]], list(refinement.h), action_counts)

    def key(self, m: int, t) -> Hashable:
        return self._target(m, t)

    def profile(self, point: Point) -> tuple | None:
        m, x, t = point
        key = self._target(m, t)
        q = self.index_set.assign[key][x]
        return None if q is None else self._support_of(key)[q]

    def action(self, i: int, point: Point) -> int | None:
        prof = self.profile(point)
        return BOT if prof is None else prof[i]

    def points(self) -> Iterable[Point]:
        types = self.type_profiles if self.type_profiles is not None else [None]
        for m in range(len(self.cells)):
            for x in range(1, self.index_set.total + 1):
                for t in types:
                    yield (m, x, t)

    @property
    def domain_size(self) -> int:
        k = len(self.type_profiles) if self.type_profiles is not None else 1
        return len(self.cells) * self.index_set.total * k


@dataclass
class StrategyCodebook:
    owner: int
    subject: int
    encrypt: dict[Point, int]
    decrypt: dict[int, int | None]
    decoys: frozenset[int] = frozenset()

    def decode(self, label: int) -> int | None:
        try:
            return self.decrypt[label]
        except KeyError:
            raise CodebookError(f"label {label:032x} is not in codebook ({self.owner}->{self.subject})") from None


@dataclass
class RecommendationTable:
    """Relayer-facing table: ``entries[(cell label, x[, encrypted types])] -> ciphertext``."""

    owner: int
    subject: int
    relayer: int
    entries: dict[tuple, int] = field(repr=False)


@dataclass
class TypeCodebook:
    owner: int
    subject: int
    encrypt: tuple[int, ...]
    decrypt: dict[int, int]


def generate_strategy_codebooks(layout: Layout, owner: int, n: int, mint: LabelMint, rng: random.Random,
                                redundancy: int = 3,
                                max_domain: int = DEFAULT_MAX_DOMAIN) -> dict[int, StrategyCodebook]:
    """Codebooks of ``owner`` for every other player, with ``redundancy`` decoys per real label."""
    if layout.domain_size * (n - 1) * (1 + redundancy) > max_domain:
        raise CodebookError(f"codebook domain {layout.domain_size} x {n - 1} subjects exceeds cap {max_domain}")
    points = list(layout.points())
    profiles = [layout.profile(p) for p in points]
    books = {}
    for i in range(n):
        if i == owner:
            continue
        encrypt = {}
        decrypt = {}
        for point, prof in zip(points, profiles):
            label = mint.fresh()
            encrypt[point] = label
            decrypt[label] = BOT if prof is None else prof[i]
        decoys = []
        choices = list(range(layout.action_counts[i])) + [BOT]
        for _ in range(redundancy * len(points)):
            label = mint.fresh()
            decrypt[label] = rng.choice(choices)
            decoys.append(label)
        # decrypt tables are handed out as unordered maps; shuffle insertion order
        items = list(decrypt.items())
        rng.shuffle(items)
        books[i] = StrategyCodebook(owner, i, encrypt, dict(items), frozenset(decoys))
    return books


def routing_subjects(n: int, owner: int, relayer: int) -> list[int]:
    return [i for i in range(n) if i not in (owner, relayer)]


def build_recommendation_tables(codebooks: dict[int, StrategyCodebook], layout: Layout, owner: int,
                                relayer: int, n: int,
                                type_books: dict[int, TypeCodebook] | None = None,
                                subjects: Sequence[int] | None = None) -> dict[int, RecommendationTable]:
    """Tables v_i (or w_i with encrypted type profiles) sent by ``owner`` to ``relayer``."""
    allowed = routing_subjects(n, owner, relayer)
    subjects = allowed if subjects is None else list(subjects)
    bad = [i for i in subjects if i not in allowed]
    if bad:
        raise CodebookError(f"no table for subjects {bad}: owner {owner} and relayer {relayer} are excluded")
    tables = {}
    for i in subjects:
        book = codebooks[i]
        entries = {}
        for (m, x, t), label in book.encrypt.items():
            if t is None:
                key = (layout.cells[m].label, x)
            else:
                enc = tuple(type_books[k].encrypt[tk] for k, tk in enumerate(t))
                key = (layout.cells[m].label, x, enc)
            entries[key] = label
        tables[i] = RecommendationTable(owner, i, relayer, entries)
    return tables


def generate_type_codebooks(type_counts: Sequence[int], owner: int, mint: LabelMint) -> dict[int, TypeCodebook]:
    """Injective type encryption F_i for every player i (the owner keeps its own)."""
    books = {}
    for i, k in enumerate(type_counts):
        enc = tuple(mint.fresh() for _ in range(k))
        books[i] = TypeCodebook(owner, i, enc, {lab: t for t, lab in enumerate(enc)})
    return books

"""Convex decomposition of a (possibly irrational) distribution into rational ones.

The target is first expressed in the hull of Q strictly positive rational
vertices (coefficients ``beta``).  Every vertex is then split into a rational
mixture of rational distributions (weights ``gamma``), and the two layers are
flattened into ``alpha_j = gamma_{h,u} * beta_h``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .numerics import (DEFAULT_PRECISION, Real, SingularMatrixError, matrix_rank,
                       rationalize, solve_exact, solve_linear)

Vector = tuple[Fraction, ...]


class DecompositionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Refinement:
    gamma: Fraction
    dist: Vector

    @property
    def is_basis(self) -> bool:
        return sum(1 for v in self.dist if v != 0) == 1

    @property
    def constraint_ok(self) -> bool:
        """Weight bounded by the smallest coordinate of its distribution."""
        return self.gamma <= min(self.dist)


@dataclass
class Decomposition:
    vertices: list[Vector]
    beta: list[Real]
    refinements: list[list[Refinement]]
    alphas: list[Real] = field(default_factory=list)
    dists: list[Vector] = field(default_factory=list)
    origin: list[tuple[int, int]] = field(default_factory=list)
    beta_exact: list[Fraction] | None = None

    @property
    def bits(self) -> int:
        return self.beta[0].bits

    def recompose(self) -> list[Real]:
        bits = self.bits
        Q = len(self.vertices[0])
        out = []
        for q in range(Q):
            acc = Real(0, bits)
            for a, d in zip(self.alphas, self.dists):
                acc = acc + a * d[q]
            out.append(acc)
        return out

    def residual(self, target: Sequence[Real]) -> Fraction:
        rec = self.recompose()
        return max(abs((r - t).to_fraction()) for r, t in zip(rec, target))

    def constraint_flags(self) -> list[dict]:
        """Refinements whose weight exceeds the smallest coordinate, with the reason.

        ``forced`` marks U = 1 and ``infeasible`` marks ``1/U >= min(vertex)``:
        the bound then cannot hold for every component, since each
        coordinate of the vertex is at least the sum of the squared weights.
        """
        flags = []
        for h, refs in enumerate(self.refinements):
            for u, r in enumerate(refs):
                if r.constraint_ok:
                    continue
                if len(refs) == 1:
                    reason = "forced"
                elif r.is_basis:
                    reason = "basis"
                elif Fraction(1, len(refs)) >= min(self.vertices[h]):
                    reason = "infeasible"
                else:
                    reason = "violated"
                flags.append({"h": h, "u": u, "basis": r.is_basis, "reason": reason})
        return flags


def _as_fraction_target(p: Sequence[Real | Fraction]) -> list[Fraction] | None:
    if all(isinstance(v, Fraction) for v in p):
        return list(p)
    return None


def solve_beta(vertices: Sequence[Vector], p: Sequence[Real], bits: int = DEFAULT_PRECISION) -> list[Real]:
    """Coefficients of ``p`` in the basis of the vertex columns."""
    Q = len(vertices)
    if any(len(v) != Q for v in vertices) or len(p) != Q:
        raise DecompositionError("need Q vertices of length Q matching the target")
    matrix = [[vertices[h][q] for h in range(Q)] for q in range(Q)]
    try:
        return solve_linear(matrix, [Real.coerce(v, bits) for v in p], bits)
    except SingularMatrixError as exc:
        raise DecompositionError(f"vertex matrix is singular: {exc}") from exc


def solve_beta_exact(vertices: Sequence[Vector], p: Sequence[Fraction]) -> list[Fraction]:
    Q = len(vertices)
    matrix = [[vertices[h][q] for h in range(Q)] for q in range(Q)]
    return solve_exact(matrix, p)


def _pulled_vertex(p: Sequence[Real], h: int, eps: Fraction, D: int) -> Vector | None:
    Q = len(p)
    head = []
    for q in range(Q - 1):
        y = p[q] * (1 - eps) + (eps if q == h else 0)
        head.append(rationalize(y, D))
    last = 1 - sum(head)
    vec = tuple(head) + (last,)
    if any(v <= 0 for v in vec):
        return None
    return vec


def construct_hull_vertices(p: Sequence[Real], max_denominator: int = 4, rng: random.Random | None = None,
                            eps: Fraction = Fraction(3, 4), max_tries: int = 48) -> list[Vector]:
    """Q independent, strictly positive rational vertices whose hull contains ``p``.

    Vertex h is the rationalisation of ``p`` pulled a fraction ``eps`` of the
    way toward corner h.  On failure ``eps`` shrinks by 7/8 and the
    denominator bound doubles.
    """
    Q = len(p)
    if Q < 2:
        raise DecompositionError("hull construction needs at least two support profiles")
    if any(v.raw <= 0 for v in p):
        raise DecompositionError("target must have full support")
    rng = rng or random.Random(0)
    bits = p[0].bits
    D = max_denominator
    tried = []
    for attempt in range(max_tries):
        jitter = [eps * (1 - Fraction(rng.randrange(8), 64)) for _ in range(Q)]
        verts = [_pulled_vertex(p, h, jitter[h], D) for h in range(Q)]
        if all(v is not None for v in verts) and matrix_rank(verts) == Q:
            beta = solve_beta(verts, p, bits)
            if all(b.raw > (1 << 16) for b in beta):
                return verts
            tried.append((float(eps), D, "beta not positive"))
        else:
            tried.append((float(eps), D, "degenerate vertex"))
        eps *= Fraction(7, 8)
        D *= 2
    raise DecompositionError(f"no hull found after {max_tries} attempts; last tries {tried[-3:]}")


def refine_vertex(vertex: Vector, U: int, rng: random.Random | None = None,
                  enforce: bool = True) -> list[Refinement]:
    """Split a strictly positive rational vertex into U rational components.

    Components are ``vertex + s * delta_u`` with zero-sum integer directions;
    the last direction absorbs the weighted sum of the others so the mixture
    recomposes exactly.  When every weight can stay below the smallest
    coordinate (``1/U < min(vertex)``) the bound ``gamma_u <= min p~^u`` is
    enforced; otherwise only non-negativity is.
    """
    vertex = tuple(Fraction(v) for v in vertex)
    if U < 1:
        raise DecompositionError("refinement count must be positive")
    if any(v <= 0 for v in vertex) or sum(vertex) != 1:
        raise DecompositionError("vertex must be a strictly positive distribution")
    if U == 1:
        return [Refinement(Fraction(1), vertex)]
    rng = rng or random.Random(0)
    Q = len(vertex)
    m = min(vertex)
    bounded = enforce and Fraction(1, U) < m

    spread = 4
    while True:
        weights = [rng.randint(4, 4 + spread) for _ in range(U)]
        total = sum(weights)
        gammas = [Fraction(w, total) for w in weights]
        if not bounded or max(gammas) < m or spread == 0:
            break
        spread -= 1
    if bounded and max(gammas) >= m:
        gammas = [Fraction(1, U)] * U

    directions = []
    for _ in range(U - 1):
        d = [rng.randint(-3, 3) for _ in range(Q)]
        d[rng.randrange(Q)] -= sum(d)
        directions.append(d)
    last = [-sum(gammas[u] * directions[u][q] for u in range(U - 1)) / gammas[-1] for q in range(Q)]
    directions.append(last)

    scale = m / 4
    for _ in range(200):
        dists = [tuple(vertex[q] + scale * directions[u][q] for q in range(Q)) for u in range(U)]
        if bounded:
            ok = all(min(dists[u]) >= gammas[u] for u in range(U))
        else:
            ok = all(min(d) > 0 for d in dists)
        if ok:
            return [Refinement(g, d) for g, d in zip(gammas, dists)]
        scale /= 2
    return [Refinement(g, vertex) for g in gammas]


def flatten(beta: Sequence[Real], refinements: Sequence[Sequence[Refinement]]):
    """``alpha_j = gamma_{h,u} * beta_h`` under lexicographic (h, u) order."""
    alphas, dists, origin = [], [], []
    for h, refs in enumerate(refinements):
        for u, r in enumerate(refs):
            alphas.append(beta[h] * r.gamma)
            dists.append(r.dist)
            origin.append((h, u))
    return alphas, dists, origin


def decompose(p: Sequence[Real], refinements: int = 1, max_denominator: int = 4,
              rng: random.Random | None = None, vertices: Sequence[Sequence[Fraction]] | None = None,
              exact: Sequence[Fraction] | None = None, enforce: bool = True) -> Decomposition:
    """Full pipeline: hull vertices, beta, per-vertex refinement and flattening."""
    rng = rng or random.Random(0)
    bits = p[0].bits
    Q = len(p)
    if Q == 1:
        verts = [(Fraction(1),)]
        beta = [Real.from_fraction(1, bits)]
        beta_exact = [Fraction(1)]
    else:
        if vertices is None:
            verts = construct_hull_vertices(p, max_denominator, rng)
        else:
            verts = [tuple(Fraction(v) for v in vert) for vert in vertices]
            if len(verts) != Q or matrix_rank(verts) != Q:
                raise DecompositionError("pinned vertices must be Q linearly independent vectors")
            if any(sum(v) != 1 or min(v) <= 0 for v in verts):
                raise DecompositionError("pinned vertices must be strictly positive distributions")
        beta_exact = solve_beta_exact(verts, exact) if exact is not None else None
        if beta_exact is not None:
            beta = [Real.from_fraction(b, bits) for b in beta_exact]
        else:
            beta = solve_beta(verts, p, bits)
        if any(b.raw <= 0 for b in beta):
            raise DecompositionError("target is not strictly inside the vertex hull")
    refs = [refine_vertex(v, refinements, rng, enforce) for v in verts]
    alphas, dists, origin = flatten(beta, refs)
    return Decomposition(verts, beta, refs, alphas, dists, origin, beta_exact)

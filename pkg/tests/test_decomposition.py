import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cheaptalk.decomposition import (Decomposition, DecompositionError, Refinement, construct_hull_vertices,
                                     decompose, flatten, refine_vertex, solve_beta, solve_beta_exact)
from cheaptalk.numerics import Real, eval_expression, matrix_rank

from helpers import PINNED
from oracles import mp_err, mp_value

P = 128

THREE_VERTICES = [(Fraction(4, 5), Fraction(3, 20), Fraction(1, 20)),
                  (Fraction(1, 10), Fraction(7, 10), Fraction(1, 5)),
                  (Fraction(1, 10), Fraction(3, 10), Fraction(3, 5))]
THREE_TARGET = ("sqrt(2)/4", "sqrt(3)/4", "(4 - sqrt(2) - sqrt(3))/4")
THREE_BETA = ("5*sqrt(2)/14 - 1/7", "15*sqrt(2)/112 + 5*sqrt(3)/8 - 45/56", "109/56 - 5*sqrt(3)/8 - 55*sqrt(2)/112")

SIX_GAMMA = (Fraction(1, 10), Fraction(1, 5), Fraction(1, 30), Fraction(4, 15), Fraction(3, 20), Fraction(1, 4))
SIX_DISTS = [(Fraction(1, 5), Fraction(3, 10), Fraction(1, 2)),
             (Fraction(1, 10), Fraction(2, 5), Fraction(1, 2)),
             (Fraction(1), Fraction(0), Fraction(0)),
             (Fraction(17, 80), Fraction(27, 80), Fraction(9, 20)),
             (Fraction(1, 5), Fraction(7, 15), Fraction(1, 3)),
             (Fraction(9, 25), Fraction(13, 25), Fraction(3, 25))]
SIX_VERTEX = (Fraction(1, 4), Fraction(2, 5), Fraction(7, 20))


def target(exprs):
    return [eval_expression(e, P) for e in exprs]


def random_target(rng, Q):
    w = [rng.random() + 0.05 for _ in range(Q)]
    raws = [int(x / sum(w) * 2**P) for x in w]
    raws[-1] = 2**P - sum(raws[:-1])
    return [Real(r, P) for r in raws]


# ------------------------------------------------------------------- beta


def test_two_profile_beta():
    beta = solve_beta(PINNED, target(("sqrt(2)/2", "(2 - sqrt(2))/2")))
    for b, text in zip(beta, ("(2*sqrt(2) - 1)/2", "(3 - 2*sqrt(2))/2")):
        assert mp_err(b, mp_value(text)) < 1e-30


def test_three_vertex_beta():
    beta = solve_beta(THREE_VERTICES, target(THREE_TARGET))
    for b, text in zip(beta, THREE_BETA):
        assert mp_err(b, mp_value(text)) < 1e-30
        assert b > 0


def test_standard_basis_gives_target():
    p = target(("sqrt(2)/4", "1/4", "(3 - sqrt(2))/4"))
    eye = [tuple(Fraction(int(i == j)) for j in range(3)) for i in range(3)]
    assert solve_beta(eye, p) == p


def test_singular_vertices():
    with pytest.raises(DecompositionError):
        solve_beta([PINNED[0], PINNED[0]], target(("1/2", "1/2")))


def test_exact_beta_for_rational_target():
    beta = solve_beta_exact(PINNED, [Fraction(1, 2), Fraction(1, 2)])
    assert beta == [Fraction(1, 2), Fraction(1, 2)]


# --------------------------------------------------------------- vertices


def test_rational_target_hull_contains_it():
    p = [Fraction(1, 3), Fraction(1, 6), Fraction(1, 2)]
    verts = construct_hull_vertices([Real.from_fraction(v, P) for v in p])
    beta = solve_beta_exact(verts, p)
    assert all(b > 0 for b in beta) and sum(beta) == 1


def test_random_hull_vertices(rng):
    for k in range(100):
        Q = 2 + k % 5
        p = random_target(rng, Q)
        verts = construct_hull_vertices(p, rng=random.Random(k))
        assert len(verts) == Q and matrix_rank(verts) == Q
        assert all(sum(v) == 1 and min(v) > 0 for v in verts)
        assert all(b > 0 for b in solve_beta(verts, p))


def test_hull_rejects_zero_entry():
    with pytest.raises(DecompositionError):
        construct_hull_vertices([Real.from_fraction(1, P), Real(0, P)])


# ------------------------------------------------------------- refinement


def test_paper_six_vector_refinement_recomposes_exactly():
    assert sum(SIX_GAMMA) == 1
    recomposed = tuple(sum(g * d[q] for g, d in zip(SIX_GAMMA, SIX_DISTS)) for q in range(3))
    assert recomposed == SIX_VERTEX


def test_refine_forced():
    v = (Fraction(1, 3), Fraction(2, 3))
    assert refine_vertex(v, 1) == [Refinement(Fraction(1), v)]


@settings(max_examples=100)
@given(st.integers(2, 6), st.integers(2, 8), st.integers(0, 2**32))
def test_refinement_recomposes_exactly(Q, U, seed):
    r = random.Random(seed)
    w = [r.randint(1, 30) for _ in range(Q)]
    vertex = tuple(Fraction(x, sum(w)) for x in w)
    refs = refine_vertex(vertex, U, random.Random(seed + 1))
    assert len(refs) == U
    assert sum(r.gamma for r in refs) == 1 and all(r.gamma > 0 for r in refs)
    assert all(sum(r.dist) == 1 and min(r.dist) >= 0 for r in refs)
    assert tuple(sum(r.gamma * r.dist[q] for r in refs) for q in range(Q)) == vertex
    if Fraction(1, U) < min(vertex):
        assert all(r.constraint_ok for r in refs)


def test_refine_rejects_bad_vertex():
    with pytest.raises(DecompositionError):
        refine_vertex((Fraction(1, 2), Fraction(1, 3)), 2)
    with pytest.raises(DecompositionError):
        refine_vertex((Fraction(1), Fraction(0)), 2)
    with pytest.raises(DecompositionError):
        refine_vertex((Fraction(1, 2), Fraction(1, 2)), 0)


# --------------------------------------------------------------- flatten


def test_flatten_is_lexicographic():
    beta = [Real.from_fraction(Fraction(1, 3), P), Real.from_fraction(Fraction(2, 3), P)]
    refs = [[Refinement(Fraction(1, 4), (Fraction(1), Fraction(0))), Refinement(Fraction(3, 4), (Fraction(0), Fraction(1)))],
            [Refinement(Fraction(1), (Fraction(1, 2), Fraction(1, 2)))]]
    alphas, dists, origin = flatten(beta, refs)
    assert origin == [(0, 0), (0, 1), (1, 0)]
    for a, want in zip(alphas, [Fraction(1, 12), Fraction(1, 4), Fraction(2, 3)]):
        assert abs(a.to_fraction() - want) <= Fraction(2, 2**P)
    assert dists[2] == (Fraction(1, 2), Fraction(1, 2))


def test_single_vertex_pipeline():
    dec = decompose([Real.from_fraction(1, P)])
    assert [a.to_fraction() for a in dec.alphas] == [1] and dec.dists == [(Fraction(1),)]


def test_paper_two_profile_pipeline():
    p = target(("sqrt(2)/2", "(2 - sqrt(2))/2"))
    dec = decompose(p, vertices=PINNED)
    for a, text in zip(dec.alphas, ("(2*sqrt(2) - 1)/2", "(3 - 2*sqrt(2))/2")):
        assert mp_err(a, mp_value(text)) < 1e-30
    assert dec.residual(p) <= Fraction(2) ** (8 - P) * 2


def test_random_pipeline_recomposes(rng):
    for k in range(30):
        Q = 2 + k % 4
        p = random_target(rng, Q)
        dec = decompose(p, refinements=1 + k % 3, rng=random.Random(k))
        assert dec.residual(p) <= Fraction(2) ** (8 - P) * Q
        assert abs(sum(a.to_fraction() for a in dec.alphas) - 1) <= Fraction(2) ** (8 - P) * Q
        assert not [f for f in dec.constraint_flags() if f["reason"] == "violated"]


def test_rational_target_uses_exact_beta():
    exact = [Fraction(1, 3), Fraction(2, 3)]
    dec = decompose([Real.from_fraction(v, P) for v in exact], exact=exact, vertices=PINNED)
    assert dec.beta_exact == [Fraction(1, 6), Fraction(5, 6)]


def test_pinned_vertices_validated():
    p = target(("sqrt(2)/2", "(2 - sqrt(2))/2"))
    with pytest.raises(DecompositionError):
        decompose(p, vertices=[PINNED[0], PINNED[0]])
    with pytest.raises(DecompositionError):
        decompose(p, vertices=[(Fraction(1), Fraction(0)), (Fraction(0), Fraction(1))])
    # target outside the hull of these two vertices
    with pytest.raises(DecompositionError):
        decompose(p, vertices=[(Fraction(1, 4), Fraction(3, 4)), (Fraction(1, 2), Fraction(1, 2))])


def test_decompose_is_deterministic():
    p = target(THREE_TARGET)
    a = decompose(p, refinements=3, rng=random.Random(9))
    b = decompose(p, refinements=3, rng=random.Random(9))
    assert a.vertices == b.vertices and a.alphas == b.alphas and a.dists == b.dists


def test_constraint_flag_reasons():
    refs = [[Refinement(Fraction(1), (Fraction(1, 2), Fraction(1, 2)))],
            [Refinement(Fraction(1, 2), (Fraction(1, 4), Fraction(3, 4))),
             Refinement(Fraction(1, 2), (Fraction(3, 4), Fraction(1, 4)))]]
    beta = [Real.from_fraction(Fraction(1, 2), P)] * 2
    dec = Decomposition([(Fraction(1, 2),) * 2, (Fraction(1, 2),) * 2], beta, refs)
    reasons = [f["reason"] for f in dec.constraint_flags()]
    assert reasons == ["forced", "infeasible", "infeasible"]

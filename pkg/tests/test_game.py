import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cheaptalk.game import (BayesianGame, Game, GameError, ProfileDistribution, default_tolerance,
                            deviation_table, enumerate_profiles, expected_payoffs, profile_index,
                            verify_communication_equilibrium, verify_correlated_equilibrium)
from cheaptalk.numerics import Real

from helpers import coordination_bayes, coordination_game, unanimous_target
from oracles import (ce_verdict, communication_verdict, pure_nash, random_bayes_instance, random_ce_instance)

P = 128


def R(v):
    return Real.from_fraction(Fraction(v), P)


def bos():
    rows = ((R(2), R(1)), (R(0), R(0)), (R(0), R(0)), (R(1), R(2)))
    return Game((("o", "f"), ("o", "f")), rows)


def test_profile_order_is_last_fastest():
    assert enumerate_profiles([2, 3])[:4] == [(0, 0), (0, 1), (0, 2), (1, 0)]
    for k, prof in enumerate(enumerate_profiles([2, 3, 2])):
        assert profile_index(prof, [2, 3, 2]) == k


def test_game_validation():
    with pytest.raises(GameError):
        Game((("a",),), ((R(0),),))
    with pytest.raises(GameError):
        Game((("a", "b"), ("c",)), ((R(0), R(0)),))


def test_distribution_validation():
    with pytest.raises(GameError):
        ProfileDistribution.from_fractions([(0, 0)], [Fraction(1, 2)])
    with pytest.raises(GameError):
        ProfileDistribution.from_fractions([(0, 0), (0, 0)], [Fraction(1, 2)] * 2)
    with pytest.raises(GameError):
        ProfileDistribution.from_fractions([(0, 0), (1, 1)], [Fraction(3, 2), Fraction(-1, 2)])


def test_battle_of_sexes_public_randomization_passes():
    p = ProfileDistribution.from_fractions([(0, 0), (1, 1)], [Fraction(1, 2)] * 2)
    rep = verify_correlated_equilibrium(bos(), p)
    assert rep.passed and rep.checked == 4 and rep.worst is None


def test_point_mass_on_nash_passes(rng):
    for _ in range(30):
        game, _ = random_ce_instance(rng)
        for prof in pure_nash(game):
            p = ProfileDistribution.from_fractions([prof], [Fraction(1)])
            assert verify_correlated_equilibrium(game, p).passed


def test_violation_reports_worst():
    p = ProfileDistribution.from_fractions([(0, 1)], [Fraction(1)])
    rep = verify_correlated_equilibrium(bos(), p)
    assert not rep.passed
    assert {(v["player"], v["recommended"], v["deviation"]) for v in rep.violations} == {(0, 0, 1), (1, 1, 0)}
    assert rep.worst["gain"] == R(1)


def test_dimension_mismatch():
    p = ProfileDistribution.from_fractions([(0, 2)], [Fraction(1)])
    with pytest.raises(GameError):
        verify_correlated_equilibrium(bos(), p)


def test_ce_matches_brute_force(rng):
    tol = default_tolerance(P)
    for _ in range(150):
        game, p = random_ce_instance(rng)
        assert verify_correlated_equilibrium(game, p).passed == ce_verdict(game, p, tol.to_fraction())


def test_tolerance_monotone(rng):
    for _ in range(60):
        game, p = random_ce_instance(rng)
        gains = sorted(v.to_fraction() for v in deviation_table(game, p).values())
        for tol in [Fraction(0), Fraction(1, 10), Fraction(1, 2), Fraction(2)]:
            if verify_correlated_equilibrium(game, p, R(tol)).passed:
                assert verify_correlated_equilibrium(game, p, R(tol + Fraction(1, 7))).passed
            assert verify_correlated_equilibrium(game, p, R(tol)).passed == (not gains or gains[-1] <= tol)


@settings(max_examples=40)
@given(st.randoms(use_true_random=False))
def test_relabeling_invariance(r):
    game, p = random_ce_instance(r)
    perms = [r.sample(range(k), k) for k in game.sizes]
    relabel = lambda prof: tuple(perms[i][a] for i, a in enumerate(prof))
    inv = {relabel(prof): prof for prof in game.profiles()}
    rows = tuple(game.payoff_vector(inv[prof]) for prof in game.profiles())
    g2 = Game(game.actions, rows)
    p2 = ProfileDistribution(tuple(relabel(s) for s in p.support), p.probs)
    assert verify_correlated_equilibrium(game, p).passed == verify_correlated_equilibrium(g2, p2).passed


def test_deviation_table_sign_and_symmetry():
    game = coordination_game(5)
    p = unanimous_target(5)
    table = deviation_table(game, p)
    assert all(v < 0 for v in table.values())
    # symmetric game and symmetric target: every player sees the same deltas
    for a in range(2):
        vals = {table[(i, a, 1 - a)] for i in range(5)}
        assert len(vals) == 1


def test_expected_payoffs():
    game = bos()
    assert expected_payoffs(game, ProfileDistribution.from_fractions([(1, 1)], [Fraction(1)])) == (R(1), R(2))
    p = ProfileDistribution.from_fractions([(0, 0), (1, 1)], [Fraction(1, 2)] * 2)
    assert expected_payoffs(game, p) == (R(Fraction(3, 2)), R(Fraction(3, 2)))


def test_expected_payoffs_against_naive_sum(rng):
    for _ in range(30):
        game, p = random_ce_instance(rng)
        naive = [sum(w.to_fraction() * game.payoff(i, prof).to_fraction() for prof, w in zip(p.support, p.probs))
                 for i in range(game.n)]
        got = expected_payoffs(game, p)
        assert all(abs(g.to_fraction() - v) <= Fraction(1, 2**P) for g, v in zip(got, naive))


# --------------------------------------------------------------- Bayesian


def single_type(game: Game) -> BayesianGame:
    t = (0,) * game.n
    return BayesianGame(game.actions, tuple(("only",) for _ in range(game.n)), {t: R(1)}, {t: game.payoffs})


def test_degenerate_types_agree_with_ce(rng):
    for _ in range(80):
        game, p = random_ce_instance(rng)
        bg = single_type(game)
        a = verify_correlated_equilibrium(game, p)
        b = verify_communication_equilibrium(bg, {(0,) * game.n: p})
        assert a.passed == b.passed


def test_type_independent_policy_passes():
    bg = coordination_bayes(5)
    p = unanimous_target(5)
    policy = {t: p for t in bg.type_profiles()}
    assert verify_communication_equilibrium(bg, policy).passed


def test_misreport_is_detected():
    # player 0's high type prefers y; recommending x to it is not incentive compatible
    bits = P
    types = (("lo", "hi"), ("only",))
    prior = {(0, 0): R(Fraction(1, 2)), (1, 0): R(Fraction(1, 2))}
    lo = ((R(1), R(1)), (R(0), R(0)), (R(0), R(0)), (R(1), R(1)))
    hi = ((R(0), R(1)), (R(0), R(0)), (R(0), R(0)), (R(3), R(1)))
    bg = BayesianGame((("x", "y"), ("x", "y")), types, prior, {(0, 0): lo, (1, 0): hi}, bits=bits)
    px = ProfileDistribution.from_fractions([(0, 0)], [Fraction(1)])
    py = ProfileDistribution.from_fractions([(1, 1)], [Fraction(1)])
    assert verify_communication_equilibrium(bg, {(0, 0): px, (1, 0): py}).passed
    rep = verify_communication_equilibrium(bg, {(0, 0): py, (1, 0): px})
    assert not rep.passed
    assert any(v["player"] == 0 and v["type"] == 1 and v["report"] == 0 for v in rep.violations)


def test_missing_policy_entry():
    bg = coordination_bayes(5)
    policy = {t: unanimous_target(5) for t in bg.type_profiles()[1:]}
    with pytest.raises(GameError):
        verify_communication_equilibrium(bg, policy)


def test_communication_matches_enumeration(rng):
    tol = default_tolerance(P).to_fraction()
    outcomes = set()
    for _ in range(120):
        bg, policy = random_bayes_instance(rng)
        got = verify_communication_equilibrium(bg, policy).passed
        assert got == communication_verdict(bg, policy, tol)
        outcomes.add(got)
    assert outcomes == {True, False}


def test_five_player_bayes_matches_enumeration():
    rng = random.Random(5)
    bg = coordination_bayes(5)
    for _ in range(3):
        policy = {}
        for t in bg.type_profiles():
            support = rng.sample(list(itertools.product(range(2), repeat=5)), 2)
            policy[t] = ProfileDistribution.from_fractions(support, [Fraction(1, 3), Fraction(2, 3)])
        got = verify_communication_equilibrium(bg, policy).passed
        assert got == communication_verdict(bg, policy, default_tolerance(P).to_fraction())


def test_prior_validation():
    game = bos()
    with pytest.raises(GameError):
        BayesianGame(game.actions, (("a", "b"), ("c",)), {(0, 0): R(1), (1, 0): R(0)},
                     {(0, 0): game.payoffs, (1, 0): game.payoffs}, full_support=True)
    with pytest.raises(GameError):
        BayesianGame(game.actions, (("a",), ("c",)), {(0, 0): R(Fraction(1, 2))}, {(0, 0): game.payoffs})

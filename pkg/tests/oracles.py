"""Independent brute-force oracles used by the unit and acceptance tests.

Everything here works on exact Fractions and enumerates constraints
directly, without sharing code with the package under test.
"""

import itertools
import random
import re
from fractions import Fraction

import mpmath

from cheaptalk.game import BayesianGame, Game, ProfileDistribution
from cheaptalk.numerics import Real


def mp_value(text, dps=90):
    """Independent evaluation: every literal becomes an mpmath float before Python evaluates the text."""
    src = re.sub(r"\d+(\.\d+)?", lambda m: f"mpf('{m.group(0)}')", text).replace("sqrt", "mpmath.sqrt")
    with mpmath.workdps(dps):
        return eval(src, {"mpmath": mpmath, "mpf": mpmath.mpf})


def mp_err(r: Real, value) -> float:
    with mpmath.workdps(90):
        return abs(mpmath.mpf(r.raw) / mpmath.mpf(2) ** r.bits - value)


def frac_payoff(game: Game, i, prof) -> Fraction:
    return game.payoff(i, tuple(prof)).to_fraction()


def ce_verdict(game: Game, p: ProfileDistribution, tol: Fraction) -> bool:
    """Double loop over every (player, recommended, alternative) inequality."""
    probs = {prof: v.to_fraction() for prof, v in zip(p.support, p.probs)}
    for i in range(game.n):
        for a in range(len(game.actions[i])):
            for b in range(len(game.actions[i])):
                if a == b:
                    continue
                gain = Fraction(0)
                for prof, w in probs.items():
                    if prof[i] != a:
                        continue
                    alt = list(prof)
                    alt[i] = b
                    gain += w * (frac_payoff(game, i, alt) - frac_payoff(game, i, prof))
                if gain > tol:
                    return False
    return True


def communication_verdict(bg: BayesianGame, policy, tol: Fraction) -> bool:
    """Enumerate every (player, true type, report, deviation map) explicitly."""
    tprofiles = list(itertools.product(*(range(len(t)) for t in bg.types)))
    prior = {t: bg.prior_of(t).to_fraction() for t in tprofiles}
    for i in range(bg.n):
        k = len(bg.actions[i])
        maps = list(itertools.product(range(k), repeat=k))
        for ti in range(len(bg.types[i])):
            block = [t for t in tprofiles if t[i] == ti and prior[t] > 0]
            marginal = sum(prior[t] for t in block)
            if marginal == 0:
                continue
            honest = Fraction(0)
            for t in block:
                g = bg.game_for(t)
                for prof, w in zip(policy[t].support, policy[t].probs):
                    honest += prior[t] * w.to_fraction() * frac_payoff(g, i, prof)
            for report in range(len(bg.types[i])):
                for delta in maps:
                    value = Fraction(0)
                    for t in block:
                        rep = t[:i] + (report,) + t[i + 1:]
                        g = bg.game_for(t)
                        for prof, w in zip(policy[rep].support, policy[rep].probs):
                            alt = list(prof)
                            alt[i] = delta[prof[i]]
                            value += prior[t] * w.to_fraction() * frac_payoff(g, i, alt)
                    if (value - honest) / marginal > tol:
                        return False
    return True


def pure_nash(game: Game):
    out = []
    for prof in game.profiles():
        if all(frac_payoff(game, i, prof) >= frac_payoff(game, i, prof[:i] + (b,) + prof[i + 1:])
               for i in range(game.n) for b in range(len(game.actions[i]))):
            out.append(prof)
    return out


def random_rational_dist(rng: random.Random, k: int, den: int = 10, zeros: bool = False):
    w = [rng.randint(0 if zeros else 1, den) for _ in range(k)]
    if sum(w) == 0:
        w[0] = 1
    s = sum(w)
    return [Fraction(x, s) for x in w]


def random_ce_instance(rng: random.Random, bits: int = 128):
    """Small game and distribution; about half the draws are built to pass."""
    n = rng.randint(2, 3)
    sizes = [rng.randint(1, 3) for _ in range(n)]
    if all(s == 1 for s in sizes):
        sizes[0] = 2
    profiles = list(itertools.product(*(range(s) for s in sizes)))
    rows = tuple(tuple(Real.from_fraction(Fraction(rng.randint(-4, 4)), bits) for _ in range(n)) for _ in profiles)
    game = Game(tuple(tuple(f"a{j}" for j in range(s)) for s in sizes), rows, bits=bits)
    nash = pure_nash(game)
    if nash and rng.random() < 0.5:
        support = rng.sample(nash, rng.randint(1, len(nash)))
    else:
        support = rng.sample(profiles, rng.randint(1, len(profiles)))
    probs = random_rational_dist(rng, len(support))
    return game, ProfileDistribution.from_fractions(support, probs, bits)


def random_bayes_instance(rng: random.Random, bits: int = 128):
    n = rng.randint(2, 3)
    sizes = [rng.randint(1, 3) for _ in range(n)]
    tsizes = [rng.randint(1, 2) for _ in range(n)]
    profiles = list(itertools.product(*(range(s) for s in sizes)))
    tprofiles = list(itertools.product(*(range(s) for s in tsizes)))
    prior_f = random_rational_dist(rng, len(tprofiles), zeros=True)
    prior = {t: Real.from_fraction(v, bits) for t, v in zip(tprofiles, prior_f)}
    # payoffs: a shared base plus a small type-dependent shift, so some instances pass
    base = {prof: [rng.randint(-3, 3) for _ in range(n)] for prof in profiles}
    payoffs = {}
    for t in tprofiles:
        shift = [rng.choice([0, 0, 1]) * t[i] for i in range(n)]
        payoffs[t] = tuple(tuple(Real.from_fraction(Fraction(base[prof][i] + shift[i] * (prof[i] == 0)), bits)
                                 for i in range(n)) for prof in profiles)
    bg = BayesianGame(tuple(tuple(f"a{j}" for j in range(s)) for s in sizes),
                      tuple(tuple(f"t{j}" for j in range(s)) for s in tsizes), prior, payoffs, bits=bits)
    policy = {}
    shared = None
    if rng.random() < 0.4:
        g0 = bg.game_for(tprofiles[0])
        nash = [prof for prof in pure_nash(g0) if all(prof in pure_nash(bg.game_for(t)) for t in tprofiles)]
        if nash:
            shared = rng.sample(nash, rng.randint(1, len(nash)))
    for t in tprofiles:
        support = shared or rng.sample(profiles, rng.randint(1, min(3, len(profiles))))
        policy[t] = ProfileDistribution.from_fractions(support, random_rational_dist(rng, len(support)), bits)
    return bg, policy

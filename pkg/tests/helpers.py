"""Game builders shared by the test modules."""

import itertools
import json
from fractions import Fraction
from pathlib import Path

from cheaptalk import report as rp
from cheaptalk.game import BayesianGame, Game, ProfileDistribution
from cheaptalk.numerics import Real, eval_expression
from cheaptalk.protocol import ProtocolConfig, run_protocol, setup_complete

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"

SQRT2_TARGET = ("sqrt(2)/2", "(2 - sqrt(2))/2")
PINNED = [(Fraction(3, 4), Fraction(1, 4)), (Fraction(1, 4), Fraction(3, 4))]


def coordination_game(n=5, k=2, bits=128):
    """u_i = 1 when every player picks the same action, else 0."""
    rows = []
    for prof in itertools.product(range(k), repeat=n):
        v = Real.from_fraction(1 if len(set(prof)) == 1 else 0, bits)
        rows.append((v,) * n)
    return Game(tuple(tuple("xyzw"[:k]) for _ in range(n)), tuple(rows), bits=bits)


def unanimous_target(n=5, probs=SQRT2_TARGET, bits=128):
    support = tuple((a,) * n for a in range(len(probs)))
    return ProfileDistribution(support, tuple(eval_expression(p, bits) for p in probs))


def random_game(rng, sizes, bits=128, scale=5):
    n = len(sizes)
    rows = []
    for _ in itertools.product(*(range(k) for k in sizes)):
        rows.append(tuple(Real.from_fraction(Fraction(rng.randint(-scale, scale)), bits) for _ in range(n)))
    return Game(tuple(tuple(f"a{j}" for j in range(k)) for k in sizes), tuple(rows), bits=bits)


def random_distribution(rng, sizes, bits=128, support_size=None, den=12):
    profiles = list(itertools.product(*(range(k) for k in sizes)))
    q = support_size or rng.randint(1, len(profiles))
    support = rng.sample(profiles, q)
    weights = [rng.randint(1, den) for _ in support]
    total = sum(weights)
    return ProfileDistribution.from_fractions(support, [Fraction(w, total) for w in weights], bits)


def coordination_bayes(n=5, bits=128):
    """Two types per player; payoff 1 + t_i when unanimous.  Any unanimous policy is truthful."""
    types = tuple(("lo", "hi") for _ in range(n))
    tprofiles = list(itertools.product(range(2), repeat=n))
    prior = {t: Real.from_fraction(Fraction(2 ** (n - sum(t)), 3 ** n), bits) for t in tprofiles}
    payoffs = {}
    for t in tprofiles:
        rows = []
        for prof in itertools.product(range(2), repeat=n):
            same = len(set(prof)) == 1
            rows.append(tuple(Real.from_fraction(1 + t[i] if same else 0, bits) for i in range(n)))
        payoffs[t] = tuple(rows)
    return BayesianGame(tuple(("x", "y") for _ in range(n)), types, prior, payoffs, bits=bits, full_support=True)


def honest_artifact(seed, trials=1200, keep=3, n=5, **config):
    """Plain-JSON run artifact of the two-profile coordination scenario."""
    target = unanimous_target(n)
    inst = setup_complete(ProtocolConfig(n=n, seed=seed, **config), coordination_game(n), target, vertices=PINNED)
    rep = run_protocol(inst, trials, keep=keep)
    distribution = {"target": {"counts": [rep.profile_counts.get(p, 0) for p in target.support],
                               "target": [float(p) for p in target.probs]}}
    return json.loads(rp.dumps(rp.dump_run(inst, rep.samples, rep, distribution)))

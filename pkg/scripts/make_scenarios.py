"""Write the bundled scenario files into scenarios/.

Payoff tables for five and six players are long, so they are generated
rather than written by hand.  Run from the repository root:

    python scripts/make_scenarios.py
"""

from __future__ import annotations

import itertools
import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "scenarios"

PINNED = [["3/4", "1/4"], ["1/4", "3/4"]]


def coordination_rows(n: int, k: int = 2, weight=lambda prof, i: 1) -> list[list[str]]:
    """Everyone earns ``weight`` when all actions agree and 0 otherwise."""
    rows = []
    for prof in itertools.product(range(k), repeat=n):
        same = len(set(prof)) == 1
        rows.append([str(weight(prof, i)) if same else "0" for i in range(n)])
    return rows


def unanimous(n: int, a: str) -> list[str]:
    return [a] * n


def coordination(n: int, **config) -> dict:
    return {
        "players": [f"R{i + 1}" for i in range(n)],
        "actions": [["x", "y"]] * n,
        "payoffs": coordination_rows(n),
        "target": {"support": [unanimous(n, "x"), unanimous(n, "y")],
                   "probs": ["sqrt(2)/2", "(2 - sqrt(2))/2"],
                   "vertices": PINNED},
        "config": {"seed": 7, **config},
        "trials": 100000,
    }


def bayesian5() -> dict:
    """Two types per player; payoffs scale with the own type, so every unanimous policy is truthful."""
    n = 5
    types = [["lo", "hi"]] * n
    tprofiles = list(itertools.product(range(2), repeat=n))
    prior, payoffs, policy = [], [], []
    for t in tprofiles:
        hi = sum(t)
        # independent types, P(hi) = 1/3
        prior.append(f"{2 ** (n - hi)}/{3 ** n}")
        payoffs.append(coordination_rows(n, weight=lambda prof, i, t=t: 1 + t[i]))
        probs = [["sqrt(2)/2", "(2 - sqrt(2))/2"], ["sqrt(3)/3", "1 - sqrt(3)/3"], ["1/3", "2/3"]][hi % 3]
        policy.append({"support": [unanimous(n, "x"), unanimous(n, "y")], "probs": probs, "vertices": PINNED})
    return {
        "players": [f"R{i + 1}" for i in range(n)],
        "actions": [["x", "y"]] * n,
        "types": types,
        "prior": prior,
        "full_support": True,
        "payoffs": payoffs,
        "policy": policy,
        "config": {"seed": 11},
        "trials": 100000,
    }


def three_profile() -> dict:
    """Three-action coordination game carrying the three-vertex beta example."""
    n = 5
    return {
        "actions": [["a", "b", "c"]] * n,
        "payoffs": coordination_rows(n, 3),
        "target": {"support": [unanimous(n, "a"), unanimous(n, "b"), unanimous(n, "c")],
                   "probs": ["sqrt(2)/4", "sqrt(3)/4", "(4 - sqrt(2) - sqrt(3))/4"],
                   "vertices": [["4/5", "3/20", "1/20"], ["1/10", "7/10", "1/5"], ["1/10", "3/10", "3/5"]]},
        "config": {"seed": 3},
        "trials": 20000,
    }


def not_ce() -> dict:
    n = 5
    return {
        "actions": [["x", "y"]] * n,
        "payoffs": coordination_rows(n),
        "target": {"support": [unanimous(n, "x"), ["y"] + unanimous(n - 1, "x")], "probs": ["1/2", "1/2"]},
    }


def battle_of_sexes() -> dict:
    return {
        "players": ["row", "col"],
        "actions": [["opera", "fight"], ["opera", "fight"]],
        "payoffs": [["2", "1"], ["0", "0"], ["0", "0"], ["1", "2"]],
        "target": {"support": [["opera", "opera"], ["fight", "fight"]], "probs": ["1/2", "1/2"]},
    }


SCENARIOS = {
    "coordination5.json": coordination(5),
    "coordination5_auto.json": {**coordination(5), "target": {**coordination(5)["target"], "vertices": None}},
    "coordination6.json": {**coordination(6), "trials": 10000},
    # X = 3 * 4 = 12 and b = 4 give a dummy fraction of exactly 1/4
    "abort_quarter.json": {**coordination(5, multiplier=3, b=4), "trials": 10000},
    "bayes5.json": bayesian5(),
    "three_profile.json": three_profile(),
    "not_ce.json": not_ce(),
    "battle_of_sexes.json": battle_of_sexes(),
}


def main() -> None:
    OUT.mkdir(exist_ok=True)
    for name, data in SCENARIOS.items():
        if data.get("target", {}).get("vertices", 0) is None:
            del data["target"]["vertices"]
        (OUT / name).write_text(json.dumps(data, indent=1) + "\n")
        print(f"wrote {OUT / name}")


if __name__ == "__main__":
    main()

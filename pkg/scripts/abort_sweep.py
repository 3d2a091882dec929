"""Empirical abort rate against b / (X + b) for a range of dummy counts.

    python scripts/abort_sweep.py [--trials 5000] [--seed 7]

Uses the five-player coordination scenario with X = 12 (multiplier 3) and
prints one row per b with the 4-sigma verdict from the audit module.
"""

import argparse
from pathlib import Path

from cheaptalk.audit import abort_rate_check
from cheaptalk.protocol import run_protocol, setup_complete
from cheaptalk.scenario import load_scenario

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "coordination5.json"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--bs", type=int, nargs="+", default=[0, 1, 2, 4, 6, 12])
    args = ap.parse_args()

    sc = load_scenario(SCENARIO)
    print(f"{'b':>4} {'X+b':>5} {'expected':>9} {'observed':>9} {'attempts':>9}  verdict")
    for b in args.bs:
        cfg = sc.protocol_config(seed=args.seed, multiplier=3, b=b)
        inst = setup_complete(cfg, sc.game, sc.target, sc.vertices)
        rep = run_protocol(inst, args.trials, keep=0)
        ix = inst.index_set
        chk = abort_rate_check(rep.attempts, rep.aborted_attempts, ix.b, ix.X, min_attempts=1)
        print(f"{b:>4} {ix.total:>5} {chk.expected_rate:>9.4f} {chk.observed_rate:>9.4f} {rep.attempts:>9}  "
              f"{'pass' if chk.passed else 'FAIL'}")


if __name__ == "__main__":
    main()

"""Command-line entry point.

Exit codes: 0 pass, 1 semantic failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from . import report as rp
from .audit import AuditError, AuditReport, audit_artifact, deviation_rows
from .codebook import CodebookError
from .decomposition import DecompositionError, decompose
from .game import GameError, verify_communication_equilibrium, verify_correlated_equilibrium
from .indexing import IndexSetError
from .numerics import DEFAULT_PRECISION, Real, parse_expression
from .protocol import ProtocolError, run_protocol, setup_bayesian, setup_complete
from .scenario import Scenario, ScenarioError, load_scenario

log = logging.getLogger("cheaptalk")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(args, report: dict, human: list[str]) -> None:
    text = rp.dumps(report)
    if args.out:
        Path(args.out).write_text(text)
    if args.json:
        sys.stdout.write(text)
    else:
        print("\n".join(human))


def _load(args) -> Scenario:
    return load_scenario(args.scenario, args.precision)


def _tol(args, bits: int) -> Real | None:
    if args.tol is None:
        return None
    return parse_expression(args.tol).evaluate(bits)


# ------------------------------------------------------------------ commands


def cmd_verify(args) -> int:
    sc = _load(args)
    bits = sc.game.bits
    if sc.mode == "complete":
        if sc.target is None:
            raise ScenarioError("scenario has no target distribution")
        rep = verify_correlated_equilibrium(sc.game, sc.target, _tol(args, bits))
    else:
        if sc.policy is None:
            raise ScenarioError("scenario has no policy")
        rep = verify_communication_equilibrium(sc.game, sc.policy, _tol(args, bits))
    section = rp.verification_section(sc.game, rep)
    out = rp.envelope("verify", mode=sc.mode, precision=bits, verification=section)
    if sc.mode == "complete":
        rows, _ = deviation_rows(sc.game, sc.target, rep.tol)
        out["deviation_table"] = [{**r, "player": sc.game.players[r["player"]], "delta": rp.real(r["delta"])}
                                  for r in rows]
    human = [f"verify ({sc.mode}): {rep.summary()}"]
    if rep.worst:
        human.append(f"worst violation: {json.dumps(section['worst'], sort_keys=True)}")
    _emit(args, out, human)
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _decompose_one(args, sc: Scenario, dist, vertices, rng):
    return decompose(list(dist.probs), args.refinements or sc.config.get("refinements", 1),
                     args.max_denominator or sc.config.get("max_denominator", 4), rng,
                     vertices=vertices, exact=dist.exact)


def cmd_decompose(args) -> int:
    sc = _load(args)
    bits = sc.game.bits
    seed = args.seed if args.seed is not None else sc.config.get("seed", 0)
    rng = random.Random(f"{seed}/setup")
    tol = Real(1 << 8, bits)
    ok = True
    human = []
    if sc.mode == "complete":
        if sc.target is None:
            raise ScenarioError("scenario has no target distribution")
        items = [(None, sc.target, sc.vertices)]
    else:
        if sc.policy is None:
            raise ScenarioError("scenario has no policy")
        items = [(t, sc.policy[t], sc.policy_vertices.get(t)) for t in sorted(sc.policy)]
    sections = {}
    for t, dist, verts in items:
        dec = _decompose_one(args, sc, dist, verts, rng)
        sec = rp.decomposition_section(dec, dist)
        sec["support"] = [rp._profile_str(sc.game, p) for p in dist.support]
        res = dec.residual(list(dist.probs))
        ok &= res <= tol.to_fraction() * len(dist.probs)
        key = "target" if t is None else rp._types_str(sc.game, t)
        sections[key] = sec
        alphas = ", ".join(a.decimal(12) for a in dec.alphas)
        human.append(f"{key}: {len(dec.vertices)} vertices, {len(dec.alphas)} components, "
                     f"alpha = ({alphas}), residual {float(res):.3e}")
        flags = dec.constraint_flags()
        if flags:
            reasons = sorted({f["reason"] for f in flags})
            human.append(f"  gamma bound not met for {len(flags)} refinement(s): {', '.join(reasons)}")
            ok &= all(f["reason"] != "violated" for f in flags)
    out = rp.envelope("decompose", mode=sc.mode, precision=bits, seed=seed, decompositions=sections,
                      passed=bool(ok))
    _emit(args, out, human)
    return EXIT_PASS if ok else EXIT_FAIL


def _config(args, sc: Scenario):
    return sc.protocol_config(seed=args.seed, precision=sc.game.bits, b=args.b, multiplier=args.multiplier,
                              fragmentation=args.fragmentation, redundancy=args.redundancy,
                              max_retries=args.max_retries, refinements=args.refinements,
                              max_denominator=args.max_denominator,
                              majority_decode=True if args.majority_decode else None)


def _simulate(args, bayes: bool) -> int:
    sc = _load(args)
    if bayes != (sc.mode == "bayesian"):
        raise ScenarioError(f"scenario is {sc.mode}; use {'simulate-bayes' if sc.mode == 'bayesian' else 'simulate'}")
    cfg = _config(args, sc)
    trials = args.trials or sc.trials
    if bayes:
        if sc.policy is None:
            raise ScenarioError("scenario has no policy")
        inst = setup_bayesian(cfg, sc.game, sc.policy, sc.policy_vertices, verify=not args.no_verify)
    else:
        if sc.target is None:
            raise ScenarioError("scenario has no target distribution")
        inst = setup_complete(cfg, sc.game, sc.target, sc.vertices, verify=not args.no_verify)
    keep = min(trials, args.keep)
    rep = run_protocol(inst, trials, keep=keep, types=sc.types)

    game = sc.game
    audit = AuditReport()
    distribution = {}
    empirical = {}
    if bayes:
        for t in sorted(rep.conditional_counts):
            dist = inst.targets[t]
            counts = rep.conditional_counts[t]
            key = rp._types_str(game, t)
            empirical[key] = rp.empirical_section(game, dist.support, dist.probs, counts)
            distribution[key] = {"counts": [counts.get(p, 0) for p in dist.support],
                                 "target": [float(p) for p in dist.probs]}
    else:
        dist = inst.targets[None]
        empirical["target"] = rp.empirical_section(game, dist.support, dist.probs, rep.profile_counts)
        distribution["target"] = {"counts": [rep.profile_counts.get(p, 0) for p in dist.support],
                                  "target": [float(p) for p in dist.probs]}
        audit.deviation, audit.deviation_ok = deviation_rows(game, dist)
    artifact = rp.dump_run(inst, rep.samples, rep, distribution)
    full = audit_artifact(artifact, args.alpha, args.sigmas)
    full.deviation, full.deviation_ok = audit.deviation, audit.deviation_ok
    stray = any(sec["outside_support"] for sec in empirical.values())
    ok = full.passed and not stray and rep.failed == 0 and rep.consistency_ok == rep.delivered \
        and rep.multiplicity_ok == rep.delivered

    out = rp.envelope("simulate-bayes" if bayes else "simulate", mode=sc.mode, precision=cfg.precision,
                      seed=cfg.seed, protocol=rp.protocol_section(inst, rep), empirical=empirical,
                      audit=rp.audit_section(full),
                      samples=[rp.sample_round(inst, o) for o in rep.samples], passed=bool(ok))
    if args.debug_dump:
        Path(args.debug_dump).write_text(rp.dumps(artifact))

    human = [f"{out['command']}: {trials} rounds, {rep.delivered} delivered, {rep.failed} consistency failures, "
             f"{rep.exhausted} exhausted retries",
             f"abort rate {rep.aborted_attempts}/{rep.attempts} (b={inst.index_set.b}, X={inst.index_set.X})"]
    for key, res in sorted(full.chi_square.items()):
        human.append(f"chi-square [{key}]: stat {res.statistic:.3f}, dof {res.dof}, p {res.p_value:.4f} "
                     f"-> {'pass' if res.passed else 'FAIL'}")
    human.append(f"audit: {'pass' if full.passed else 'FAIL'}; overall {'pass' if ok else 'FAIL'}")
    _emit(args, out, human)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    return _simulate(args, bayes=False)


def cmd_simulate_bayes(args) -> int:
    return _simulate(args, bayes=True)


def cmd_audit(args) -> int:
    path = Path(args.artifact)
    try:
        artifact = json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(artifact, dict) or artifact.get("kind") != "run-artifact":
        raise UsageError(f"{path} is not a run artifact")
    res = audit_artifact(artifact, args.alpha, args.sigmas)
    out = rp.envelope("audit", artifact=path.name, audit=rp.audit_section(res))
    human = [f"audit: {'pass' if res.passed else 'FAIL'}",
             f"  label findings {len(res.label_findings)}, privacy findings {len(res.privacy_findings)}, "
             f"routing findings {len(res.routing_findings)}"]
    if res.abort:
        human.append(f"  abort rate {res.abort.observed_rate:.4f} vs expected {res.abort.expected_rate:.4f} "
                     f"-> {'pass' if res.abort.passed else 'FAIL'}")
    for key, c in sorted(res.chi_square.items()):
        human.append(f"  chi-square [{key}] p {c.p_value:.4f} -> {'pass' if c.passed else 'FAIL'}")
    _emit(args, out, human)
    return EXIT_PASS if res.passed else EXIT_FAIL


# -------------------------------------------------------------------- parser


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cheaptalk", description="Mediator-free correlated equilibrium toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the machine-readable report here")
    common.add_argument("--json", action="store_true", help="print the JSON report instead of a summary")

    scen = argparse.ArgumentParser(add_help=False, parents=[common])
    scen.add_argument("scenario", help="scenario / game file (JSON)")
    scen.add_argument("--precision", type=_positive, default=None, help=f"fraction bits (default {DEFAULT_PRECISION})")
    scen.add_argument("--seed", type=int, default=None)
    scen.add_argument("--refinements", type=_positive, default=None, help="refinement count U per vertex")
    scen.add_argument("--max-denominator", type=_positive, default=None)

    v = sub.add_parser("verify", parents=[scen], help="check the equilibrium inequalities")
    v.add_argument("--tol", default=None, help="tolerance expression (default 2^(32-P))")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("decompose", parents=[scen], help="decompose the target into rational components")
    d.set_defaults(func=cmd_decompose)

    for name, func in (("simulate", cmd_simulate), ("simulate-bayes", cmd_simulate_bayes)):
        s = sub.add_parser(name, parents=[scen], help="run the protocol and audit the outcome law")
        s.add_argument("--trials", type=_positive, default=None)
        s.add_argument("--b", type=_nonneg, default=None, help="dummy index count")
        s.add_argument("--multiplier", type=_positive, default=None)
        s.add_argument("--fragmentation", type=_positive, default=None)
        s.add_argument("--redundancy", type=_nonneg, default=None)
        s.add_argument("--max-retries", type=_positive, default=None)
        s.add_argument("--alpha", type=float, default=1e-3)
        s.add_argument("--sigmas", type=float, default=4.0)
        s.add_argument("--majority-decode", action="store_true")
        s.add_argument("--keep", type=_positive, default=3, help="rounds kept with full transcripts")
        s.add_argument("--no-verify", action="store_true", help="skip the equilibrium check before setup")
        s.add_argument("--debug-dump", metavar="PATH", help="write the run artifact (secrets included)")
        s.set_defaults(func=func)

    a = sub.add_parser("audit", parents=[common], help="audit a run artifact")
    a.add_argument("artifact")
    a.add_argument("--alpha", type=float, default=1e-3)
    a.add_argument("--sigmas", type=float, default=4.0)
    a.set_defaults(func=cmd_audit)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, AuditError, UsageError, IndexSetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GameError, ProtocolError, DecompositionError, CodebookError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

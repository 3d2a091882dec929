"""Machine-readable reports and run artifacts.

Every report is a JSON object with ``"version"`` and ``"command"`` keys.
Rationals are written as ``"num/den"`` strings and reals as
``{"dec": ..., "hex": ...}`` pairs, where ``hex`` is the exact fixed-point
value.  Output is canonical (sorted keys, fixed indentation) so identical
runs produce identical bytes.
"""

from __future__ import annotations

import json
from collections import Counter
from fractions import Fraction
from typing import Any

from .audit import AuditReport, ChiSquareResult
from .decomposition import Decomposition
from .game import BayesianGame, Game, VerificationReport
from .numerics import Real, fraction_str
from .protocol import ABORTED, ProtocolInstance, ProtocolReport, RoundOutcome

REPORT_VERSION = 1
DECIMAL_DIGITS = 30


def real(v: Real) -> dict:
    return {"dec": v.decimal(DECIMAL_DIGITS), "hex": v.hex()}


def rational(v: Fraction) -> str:
    return fraction_str(Fraction(v))


def encode(obj: Any) -> Any:
    """Recursively convert numbers to their report form."""
    if isinstance(obj, Real):
        return real(obj)
    if isinstance(obj, Fraction):
        return rational(obj)
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    return obj


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def envelope(command: str, **body) -> dict:
    return {"version": REPORT_VERSION, "command": command, **body}


def _profile_str(game: Game | BayesianGame, prof) -> str:
    return ",".join(game.actions[i][a] for i, a in enumerate(prof))


def _types_str(bgame: BayesianGame, t) -> str:
    return ",".join(bgame.types[i][k] for i, k in enumerate(t))


# ------------------------------------------------------------------- sections


def verification_section(game: Game | BayesianGame, rep: VerificationReport) -> dict:
    def row(v):
        out = {"player": game.players[v["player"]], "gain": real(v["gain"])}
        if "recommended" in v:
            out["recommended"] = game.actions[v["player"]][v["recommended"]]
            out["deviation"] = game.actions[v["player"]][v["deviation"]]
        else:
            i = v["player"]
            out["type"] = game.types[i][v["type"]]
            out["report"] = game.types[i][v["report"]]
            out["deviation_map"] = {game.actions[i][a]: game.actions[i][b] for a, b in enumerate(v["delta"])}
        return out

    return {"passed": rep.passed, "tolerance": real(rep.tol), "checked": rep.checked,
            "violations": [row(v) for v in rep.violations],
            "worst": row(rep.worst) if rep.worst else None}


def decomposition_section(dec: Decomposition, target=None) -> dict:
    out = {
        "vertices": [[rational(v) for v in vert] for vert in dec.vertices],
        "beta": [real(b) for b in dec.beta],
        "beta_exact": [rational(b) for b in dec.beta_exact] if dec.beta_exact is not None else None,
        "refinements": [[{"gamma": rational(r.gamma), "dist": [rational(v) for v in r.dist],
                          "basis": r.is_basis, "constraint_ok": r.constraint_ok} for r in refs]
                        for refs in dec.refinements],
        "alpha": [real(a) for a in dec.alphas],
        "flat": [{"j": j, "h": h, "u": u, "dist": [rational(v) for v in d]}
                 for j, ((h, u), d) in enumerate(zip(dec.origin, dec.dists))],
        "constraint_flags": dec.constraint_flags(),
    }
    if target is not None:
        res = dec.residual(list(target.probs))
        out["recomposition"] = [real(v) for v in dec.recompose()]
        out["residual"] = {"dec": f"{float(res):.6e}", "exact": rational(res)}
    return out


def chi_square_section(res: ChiSquareResult) -> dict:
    return {"statistic": float(f"{res.statistic:.12g}"), "dof": res.dof,
            "p_value": float(f"{res.p_value:.12g}"), "alpha": res.alpha, "passed": res.passed,
            "pooled_bins": res.pooled}


def empirical_section(game, support, probs, counts: Counter) -> dict:
    total = sum(counts.values())
    rows = []
    for prof, p in zip(support, probs):
        c = counts.get(prof, 0)
        rows.append({"profile": _profile_str(game, prof), "target": real(p), "count": c,
                     "frequency": float(f"{c / total:.12g}") if total else 0.0})
    stray = sorted(_profile_str(game, p) for p in counts if p not in set(support))
    return {"delivered": total, "rows": rows, "outside_support": stray}


def protocol_section(inst: ProtocolInstance, rep: ProtocolReport) -> dict:
    cfg = inst.config
    return {
        "trials": rep.trials, "delivered": rep.delivered, "failed_consistency": rep.failed,
        "retries_exhausted": rep.exhausted, "attempts": rep.attempts, "aborted_attempts": rep.aborted_attempts,
        "abort_rate": float(f"{rep.aborted_attempts / rep.attempts:.12g}"),
        "retry_histogram": {str(k): v for k, v in sorted(rep.retry_histogram.items())},
        "multiplicity_ok": rep.multiplicity_ok, "consistency_ok": rep.consistency_ok,
        "expected_copies": [cfg.expected_copies(i) for i in range(cfg.n)],
        "index_set": {"X": inst.index_set.X, "b": inst.index_set.b, "total": inst.index_set.total},
        "cells": len(inst.layout.cells),
    }


def sample_round(inst: ProtocolInstance, out: RoundOutcome) -> dict:
    game = inst.game
    return {
        "status": out.status,
        "profile": _profile_str(game, out.profile) if out.profile else None,
        "types": _types_str(game, out.type_profile) if out.type_profile is not None else None,
        "retries": out.retries,
        "copies": {game.players[i]: [None if a is None else game.actions[i][a] for a in c]
                   for i, c in sorted(out.copies.items())},
        "attempts": [{"d_star": real(Real(a.d_star, inst.bits)), "x_star": a.x_star,
                      "cell": f"{inst.layout.cells[a.cell].label:032x}", "status": a.status}
                     for a in out.attempts],
    }


def audit_section(rep: AuditReport) -> dict:
    ab = rep.abort
    return {
        "passed": rep.passed,
        "chi_square": {k: chi_square_section(v) for k, v in sorted(rep.chi_square.items())},
        "abort": None if ab is None else {
            "attempts": ab.attempts, "aborts": ab.aborts, "expected_rate": float(f"{ab.expected_rate:.12g}"),
            "observed_rate": float(f"{ab.observed_rate:.12g}"), "interval": [float(f"{ab.low:.12g}"),
                                                                               float(f"{ab.high:.12g}")],
            "passed": ab.passed},
        "label_findings": rep.label_findings,
        "privacy_findings": rep.privacy_findings,
        "routing_findings": rep.routing_findings,
        "deviation": encode(rep.deviation),
        "deviation_ok": rep.deviation_ok,
    }


# --------------------------------------------------------------- run artifact


def _message(inst: ProtocolInstance, msg) -> dict:
    meta = {}
    p = msg.payload
    if msg.kind == "recommendation":
        meta = {"owner": p[0], "subject": p[1]}
    elif msg.kind in ("decrypt_map", "type_map"):
        meta = {"owner": p[0], "subject": p[1]}
    elif msg.kind == "tables":
        meta = {"subjects": sorted(p)}
    return {"sender": msg.sender, "receiver": msg.receiver, "tag": msg.tag, "kind": msg.kind,
            "meta": meta, "tokens": inst.wire.tokens(msg)}


def _point(point) -> list:
    m, x, t = point
    return [m, x, None if t is None else list(t)]


def dump_round(inst: ProtocolInstance, out: RoundOutcome) -> dict:
    lab = inst.wire.label
    return {
        "status": out.status,
        "profile": list(out.profile) if out.profile else None,
        "types": list(out.type_profile) if out.type_profile is not None else None,
        "retries": out.retries,
        "attempts": [{"d_star": inst.wire.real(a.d_star), "x_star": a.x_star, "cell": a.cell, "status": a.status,
                      "emitted": [[l, r, i, lab(label)] for l, r, i, _key, label in a.emitted]}
                     for a in out.attempts],
        "transcript": None if out.transcript is None else [_message(inst, m) for m in out.transcript.messages],
        "secrets": {"salt": out.secrets["salt"], "d_star": out.secrets["d_star"],
                    "x_star": out.secrets["x_star"],
                    "actions": {str(k): v for k, v in out.secrets["actions"].items()},
                    "types": {str(k): v for k, v in out.secrets["types"].items()}},
    }


def dump_run(inst: ProtocolInstance, rounds: list[RoundOutcome], stats: ProtocolReport | None = None,
             distribution: dict | None = None, include_setup: bool = True) -> dict:
    """Plain-data artifact holding secrets, codebooks and transcripts for auditing."""
    cfg = inst.config
    lab = inst.wire.label
    books = []
    for r in cfg.trio:
        for i, book in sorted(inst.codebooks[r].items()):
            books.append({"owner": r, "subject": i,
                          "encrypt": [_point(p) + [lab(v)] for p, v in book.encrypt.items()],
                          "decoys": sorted(lab(v) for v in book.decoys)})
    tbooks = []
    if inst.type_books is not None:
        for r in cfg.trio:
            for i, tb in sorted(inst.type_books[r].items()):
                tbooks.append({"owner": r, "subject": i, "encrypt": [lab(v) for v in tb.encrypt]})
    if stats is not None:
        st = {"rounds": stats.trials, "attempts": stats.attempts, "aborted_attempts": stats.aborted_attempts}
    else:
        st = {"rounds": len(rounds), "attempts": sum(len(o.attempts) for o in rounds),
              "aborted_attempts": sum(1 for o in rounds for a in o.attempts if a.status == ABORTED)}
    return {
        "version": REPORT_VERSION,
        "kind": "run-artifact",
        "mode": inst.mode,
        "config": {"n": cfg.n, "trio": list(cfg.trio), "relayers": list(cfg.relayers), "seed": cfg.seed,
                   "precision": cfg.precision},
        "index_set": {"X": inst.index_set.X, "b": inst.index_set.b, "total": inst.index_set.total},
        "codebooks": books,
        "type_codebooks": tbooks,
        "setup_transcript": [_message(inst, m) for m in inst.setup_transcript.messages] if include_setup else None,
        "rounds": [dump_round(inst, o) for o in rounds],
        "stats": st,
        "distribution": distribution or {},
    }

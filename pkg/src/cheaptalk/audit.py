"""Statistical and structural audits of protocol runs.

The checks operate on the plain-data run artifact produced by
:func:`cheaptalk.report.dump_run` so they can be applied both in memory and
to files written by ``cheaptalk simulate --debug-dump``.
"""

from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from scipy import stats

from .game import Game, ProfileDistribution, deviation_table, verify_correlated_equilibrium
from .numerics import Real


class AuditError(ValueError):
    """Artifact is missing material the requested check needs."""


@dataclass
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    alpha: float
    passed: bool
    pooled: int = 0


def chi_square_gof(counts: Sequence[int], target: Sequence[float | Real], alpha: float = 1e-3,
                   min_expected: float = 5.0) -> ChiSquareResult:
    """Pearson goodness of fit; bins expected below ``min_expected`` are pooled."""
    if len(counts) != len(target):
        raise AuditError("counts and target must have the same length")
    probs = [float(p) for p in target]
    s = sum(probs)
    probs = [p / s for p in probs]
    total = sum(counts)
    if total == 0:
        raise AuditError("no observations")
    bins = sorted(zip(counts, probs), key=lambda cp: cp[1])
    obs, exp = [], []
    pool_o = pool_e = 0.0
    pooled = 0
    for c, p in bins:
        e = p * total
        if e < min_expected:
            pool_o += c
            pool_e += e
            pooled += 1
        else:
            obs.append(c)
            exp.append(e)
    if pooled:
        if exp and pool_e < min_expected:
            # fold an undersized pool into the smallest regular bin
            obs[0] += pool_o
            exp[0] += pool_e
        else:
            obs.append(pool_o)
            exp.append(pool_e)
    if len(obs) < 2:
        return ChiSquareResult(0.0, 0, 1.0, alpha, True, pooled)
    stat = sum((o - e) ** 2 / e for o, e in zip(obs, exp))
    dof = len(obs) - 1
    p_value = float(stats.chi2.sf(stat, dof))
    return ChiSquareResult(stat, dof, p_value, alpha, p_value >= alpha, pooled)


@dataclass
class AbortCheck:
    attempts: int
    aborts: int
    expected_rate: float
    observed_rate: float
    low: float
    high: float
    passed: bool


def abort_rate_check(attempts: int, aborts: int, b: int, X: int, sigmas: float = 4.0,
                     min_attempts: int = 1000) -> AbortCheck:
    """Two-sided test of the abort frequency against ``b / (X + b)`` at ``sigmas`` standard errors."""
    if attempts < min_attempts:
        raise AuditError(f"abort-rate check needs at least {min_attempts} attempts, got {attempts}")
    rate = b / (X + b)
    sd = math.sqrt(rate * (1 - rate) / attempts)
    low, high = rate - sigmas * sd, rate + sigmas * sd
    observed = aborts / attempts
    if b == 0:
        passed = aborts == 0
    else:
        passed = low <= observed <= high
    return AbortCheck(attempts, aborts, rate, observed, low, high, passed)


# ------------------------------------------------------------ label discipline


def check_label_single_use(artifact: Mapping) -> list[dict]:
    """Every ciphertext label names one domain point; emitted labels are real and never reused.

    Emission reuse is scoped to a single play (the attempts of one round).
    """
    books = artifact.get("codebooks")
    if books is None:
        raise AuditError("artifact has no codebook dump (run with --debug-dump)")
    findings = []
    owners: dict[str, list] = {}
    decoys: dict[str, tuple] = {}
    real: dict[tuple[int, int], set] = {}
    for book in books:
        r, i = book["owner"], book["subject"]
        real[(r, i)] = set()
        for *point, lab in book["encrypt"]:
            owners.setdefault(lab, []).append((r, i, tuple(point)))
            real[(r, i)].add(lab)
        for lab in book["decoys"]:
            owners.setdefault(lab, []).append((r, i, "decoy"))
            decoys[lab] = (r, i)
    for tb in artifact.get("type_codebooks", []):
        for t, lab in enumerate(tb["encrypt"]):
            owners.setdefault(lab, []).append((tb["owner"], tb["subject"], ("type", t)))
    for lab, where in owners.items():
        if len(where) > 1:
            findings.append({"check": "label-single-use", "kind": "collision", "label": lab,
                             "points": [list(map(str, w)) for w in where]})

    for k, rnd in enumerate(artifact.get("rounds", [])):
        first_seen: dict[str, int] = {}
        for a, att in enumerate(rnd["attempts"]):
            for relayer, owner, subject, lab in att["emitted"]:
                if lab in decoys:
                    findings.append({"check": "label-single-use", "kind": "decoy-emitted", "round": k,
                                     "attempt": a, "label": lab})
                elif lab not in real.get((owner, subject), ()):
                    findings.append({"check": "label-single-use", "kind": "foreign-label", "round": k,
                                     "attempt": a, "label": lab})
                prev = first_seen.setdefault(lab, a)
                if prev != a:
                    findings.append({"check": "label-single-use", "kind": "reemitted", "round": k,
                                     "attempts": [prev, a], "label": lab})
    return findings


# --------------------------------------------------------------------- privacy


def _scan(messages, secrets, relayers, where):
    salt = secrets["salt"]
    guarded = set(secrets.get("d_star", [])) | set(secrets.get("x_star", []))
    act_prefix = f"act/{salt}/"
    type_prefix = f"type/{salt}/"
    findings = []
    for idx, msg in enumerate(messages):
        k = msg["receiver"]
        for pos, tok in enumerate(msg["tokens"]):
            reason = None
            if tok in guarded and k not in relayers:
                reason = "joint draw visible to a non-relayer"
            elif tok.startswith(act_prefix) and int(tok.split("/")[2]) != k:
                reason = "plaintext action of another player"
            elif tok.startswith(type_prefix) and int(tok.split("/")[2]) != k:
                reason = "plaintext type of another player"
            if reason:
                findings.append({"check": "transcript-privacy", "where": where, "message": idx,
                                 "tag": msg["tag"], "sender": msg["sender"], "receiver": k,
                                 "kind": msg["kind"], "position": pos, "reason": reason})
    return findings


def check_transcript_privacy(round_dump: Mapping, relayers: Sequence[int],
                             setup_messages: Sequence[Mapping] | None = None) -> list[dict]:
    """Token containment over every player's received messages."""
    secrets = round_dump.get("secrets")
    if not secrets:
        raise AuditError("round has no secrets ledger")
    if round_dump.get("transcript") is None:
        raise AuditError("round has no transcript")
    findings = _scan(round_dump["transcript"], secrets, set(relayers), "round")
    if setup_messages is not None:
        findings += _scan(setup_messages, secrets, set(relayers), "setup")
    return findings


# --------------------------------------------------------------------- routing


def _route_ok(msg: Mapping, n: int, trio: Sequence[int], relayers: Sequence[int]) -> bool:
    s, r, kind, meta = msg["sender"], msg["receiver"], msg["kind"], msg.get("meta") or {}
    if s == r or not (0 <= s < n and 0 <= r < n):
        return False
    if kind in ("d_share", "x_share", "enc_type"):
        return r in relayers
    if kind == "recommendation":
        return s in relayers and meta.get("subject") == r and meta.get("owner") in trio \
            and r not in (s, meta.get("owner"))
    if kind == "redraw":
        return s in relayers
    if kind == "cell_labels":
        return s in trio and r in relayers
    if kind == "index_size":
        return s in trio and r not in trio
    if kind in ("decrypt_map", "type_map"):
        return s in trio and meta.get("owner") == s and meta.get("subject") == r
    if kind == "tables":
        subjects = sorted(meta.get("subjects", []))
        return s in trio and r in relayers and subjects == sorted(i for i in range(n) if i not in (s, r))
    return False


def check_routing(messages: Sequence[Mapping], n: int, trio: Sequence[int], relayers: Sequence[int],
                  where: str = "round") -> list[dict]:
    """Every message travels along a channel the protocol prescribes for its kind."""
    findings = []
    for idx, msg in enumerate(messages):
        if not _route_ok(msg, n, trio, relayers):
            findings.append({"check": "routing", "where": where, "message": idx, "tag": msg["tag"],
                             "sender": msg["sender"], "receiver": msg["receiver"], "kind": msg["kind"]})
    return findings


# ------------------------------------------------------------------- deviation


def deviation_rows(game: Game, p: ProfileDistribution, tol: Real | None = None) -> tuple[list[dict], bool]:
    """Deviation table as rows plus whether every gain stays within tolerance."""
    table = deviation_table(game, p)
    verdict = verify_correlated_equilibrium(game, p, tol)
    rows = [{"player": i, "recommended": game.actions[i][a], "alternative": game.actions[i][b], "delta": d}
            for (i, a, b), d in sorted(table.items())]
    return rows, verdict.passed


@dataclass
class AuditReport:
    chi_square: dict = field(default_factory=dict)
    abort: AbortCheck | None = None
    label_findings: list = field(default_factory=list)
    privacy_findings: list = field(default_factory=list)
    routing_findings: list = field(default_factory=list)
    deviation: list = field(default_factory=list)
    deviation_ok: bool = True

    @property
    def passed(self) -> bool:
        return (all(r.passed for r in self.chi_square.values())
                and (self.abort is None or self.abort.passed)
                and not self.label_findings and not self.privacy_findings and not self.routing_findings
                and self.deviation_ok)


def audit_artifact(artifact: Mapping, alpha: float = 1e-3, sigmas: float = 4.0) -> AuditReport:
    """Run every structural check plus the abort-rate test on a run artifact."""
    for key in ("config", "index_set", "rounds", "stats"):
        if key not in artifact:
            raise AuditError(f"artifact is missing {key!r}")
    cfg = artifact["config"]
    trio, relayers, n = cfg["trio"], cfg["relayers"], cfg["n"]
    rep = AuditReport()
    rep.label_findings = check_label_single_use(artifact)
    setup = artifact.get("setup_transcript")
    for k, rnd in enumerate(artifact["rounds"]):
        rep.privacy_findings += check_transcript_privacy(rnd, relayers, setup if k == 0 else None)
        rep.routing_findings += check_routing(rnd["transcript"], n, trio, relayers)
    if setup is not None:
        rep.routing_findings += check_routing(setup, n, trio, relayers, where="setup")
    st = artifact["stats"]
    ix = artifact["index_set"]
    if st["attempts"] >= 1000:
        rep.abort = abort_rate_check(st["attempts"], st["aborted_attempts"], ix["b"], ix["X"], sigmas)
    for key, block in artifact.get("distribution", {}).items():
        rep.chi_square[key] = chi_square_gof(block["counts"], [float(v) for v in block["target"]], alpha)
    return rep


# ------------------------------------------------------------ fault injection

FAULT_KINDS = ("duplicate-label", "plaintext-leak", "wrong-dummy-count", "misroute")


def inject_fault(artifact: Mapping, kind: str, rng: random.Random) -> dict:
    """Copy of ``artifact`` with one fault of the given class planted in it."""
    art = copy.deepcopy(artifact)
    if kind == "duplicate-label":
        # overwrite a label no kept round emitted, so the collision is the only symptom
        emitted = {e[-1] for rnd in art["rounds"] for att in rnd["attempts"] for e in att["emitted"]}
        book = rng.choice([b for b in art["codebooks"] if len(b["encrypt"]) > 1])
        spare = [k for k, entry in enumerate(book["encrypt"]) if entry[-1] not in emitted]
        b = rng.choice(spare)
        a = rng.choice([k for k in range(len(book["encrypt"])) if k != b])
        book["encrypt"][b][-1] = book["encrypt"][a][-1]
    elif kind == "plaintext-leak":
        rnd = rng.choice(art["rounds"])
        msgs = [m for m in rnd["transcript"] if m["kind"] == "recommendation"]
        msg = rng.choice(msgs)
        victim = rng.choice([i for i in range(art["config"]["n"]) if i != msg["receiver"]])
        msg["tokens"].append(f"act/{rnd['secrets']['salt']}/{victim}/0")
    elif kind == "wrong-dummy-count":
        ix = art["index_set"]
        ix["b"] = 0 if ix["b"] > 0 else max(1, ix["X"])
    elif kind == "misroute":
        rnd = rng.choice(art["rounds"])
        msgs = [m for m in rnd["transcript"] if m["kind"] == "recommendation"]
        msg = rng.choice(msgs)
        msg["receiver"] = rng.choice([i for i in range(art["config"]["n"])
                                      if i not in (msg["receiver"], msg["sender"])])
    else:
        raise AuditError(f"unknown fault kind {kind!r}; choose from {FAULT_KINDS}")
    return art

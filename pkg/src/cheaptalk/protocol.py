"""Mediator-free recommendation protocol among n >= 5 simulated players.

Players are numbered from 0.  Players 0-2 form the setup trio that builds
the decomposition, partition, index set, codebooks and tables; players 3 and
4 are the relayers that learn the joint draw and forward ciphertexts.  Setup
runs once per :class:`ProtocolInstance`; every call to :func:`run_round`
repeats only the joint-randomness and delivery steps until a non-dummy index
is drawn.
"""

from __future__ import annotations

import bisect
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from . import codebook as cb
from .decomposition import Decomposition, decompose
from .game import (BayesianGame, Game, ProfileDistribution, verify_communication_equilibrium,
                   verify_correlated_equilibrium)
from .indexing import IndexSet, build_index_set
from .numerics import DEFAULT_PRECISION, Real
from .partition import (CommonRefinement, LabeledPartition, LabelMint, build_common_refinement,
                        build_partition)

log = logging.getLogger(__name__)

DELIVERED = "delivered"
ABORTED = "aborted-dummy"
FAILED = "failed-consistency"


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    n: int = 5
    trio: tuple[int, int, int] = (0, 1, 2)
    relayers: tuple[int, int] = (3, 4)
    precision: int = DEFAULT_PRECISION
    fragmentation: int = 2
    multiplier: int = 1
    b: int | None = None
    redundancy: int = 3
    max_retries: int = 64
    seed: int = 0
    refinements: int = 1
    max_denominator: int = 4
    majority_decode: bool = False
    max_domain: int = cb.DEFAULT_MAX_DOMAIN

    def __post_init__(self):
        if self.n < 5:
            raise ProtocolError("the protocol needs at least five players")
        roles = tuple(self.trio) + tuple(self.relayers)
        if len(set(roles)) != 5 or any(not 0 <= r < self.n for r in roles):
            raise ProtocolError("trio and relayers must be five distinct players")
        if self.fragmentation < 1 or self.multiplier < 1 or self.refinements < 1:
            raise ProtocolError("fragmentation, multiplier and refinements must be positive")
        if self.redundancy < 0 or self.max_retries < 1:
            raise ProtocolError("redundancy must be >= 0 and max_retries >= 1")

    def others(self) -> list[int]:
        return [i for i in range(self.n) if i not in self.trio and i not in self.relayers]

    def expected_copies(self, i: int) -> int:
        """Number of ciphertext copies player i receives per attempt."""
        return sum(1 for l in self.relayers for r in self.trio if i not in (r, l))


# ------------------------------------------------------------------ messages


class Message:
    """Point-to-point message.  ``payload`` is kind-specific structured data."""

    __slots__ = ("sender", "receiver", "tag", "kind", "payload")

    def __init__(self, sender: int, receiver: int, tag: str, kind: str, payload: Any):
        self.sender = sender
        self.receiver = receiver
        self.tag = tag
        self.kind = kind
        self.payload = payload

    def __repr__(self):
        return f"Message({self.tag}:{self.kind} R{self.sender + 1}->R{self.receiver + 1})"


class Transcript:
    """Per-player ordered log of ("sent" | "recv", message)."""

    def __init__(self, n: int):
        self.logs: list[list[tuple[str, Message]]] = [[] for _ in range(n)]
        self.messages: list[Message] = []

    def send(self, msg: Message) -> None:
        self.messages.append(msg)
        self.logs[msg.sender].append(("sent", msg))
        self.logs[msg.receiver].append(("recv", msg))

    def received(self, k: int) -> list[Message]:
        return [m for d, m in self.logs[k] if d == "recv"]


class Wire:
    """Canonical string encodings of payload values, salted per instance."""

    def __init__(self, salt: str, bits: int):
        self.salt = salt
        self.hexwidth = (bits + 3) // 4

    def label(self, v: int) -> str:
        return f"{v:032x}"

    def real(self, raw: int) -> str:
        return f"r{raw:0{self.hexwidth}x}"

    def index(self, x: int) -> str:
        return f"idx/{self.salt}/{x}"

    def action(self, i: int, a: int | None) -> str:
        return f"act/{self.salt}/{i}/{'bot' if a is None else a}"

    def type_(self, i: int, t: int) -> str:
        return f"type/{self.salt}/{i}/{t}"

    def tokens(self, msg: Message) -> list[str]:
        k, p = msg.kind, msg.payload
        if k == "cell_labels":
            return [s for lab, lo, hi in p for s in (self.label(lab), self.real(lo), self.real(hi))]
        if k == "index_size":
            return [f"size/{p}"]
        if k == "decrypt_map":
            owner, subject, table = p
            return [s for lab, a in table.items() for s in (self.label(lab), self.action(subject, a))]
        if k == "type_map":
            owner, subject, enc = p
            return [s for t, lab in enumerate(enc) for s in (self.type_(subject, t), self.label(lab))]
        if k == "tables":
            out = []
            for tab in p.values():
                for key, lab in tab.entries.items():
                    out.append(self.label(key[0]))
                    out.append(f"slot/{key[1]}")
                    if len(key) > 2:
                        out.extend(self.label(v) for v in key[2])
                    out.append(self.label(lab))
            return out
        if k == "d_share":
            return [self.real(p)]
        if k == "x_share":
            return [self.index(p)]
        if k == "enc_type":
            return [self.label(v) for v in p]
        if k == "recommendation":
            owner, subject, lab = p
            return [self.label(lab)]
        if k == "redraw":
            return ["redraw"]
        if k == "leak":
            return list(p)
        raise ProtocolError(f"unknown message kind {k!r}")


# ------------------------------------------------------------ joint randomness


def joint_random_unit(shares: Sequence[Real | int], bits: int = DEFAULT_PRECISION) -> Real:
    """Fractional part of the sum of shares; 0 signals a redraw."""
    if not shares:
        raise ProtocolError("missing randomness shares")
    one = 1 << bits
    total = 0
    for s in shares:
        raw = s.raw if isinstance(s, Real) else int(s)
        if isinstance(s, Real) and s.bits != bits:
            raw = s.with_bits(bits).raw
        if not 0 < raw < one:
            raise ProtocolError("every share must lie in the open unit interval")
        total += raw
    return Real(total % one, bits)


def joint_random_index(shares: Sequence[int], size: int) -> int:
    """``1 + (sum - 1) mod size`` over shares in 1..size."""
    if not shares:
        raise ProtocolError("missing index shares")
    if any(not 1 <= x <= size for x in shares):
        raise ProtocolError(f"index shares must lie in 1..{size}")
    return 1 + (sum(shares) - 1) % size


# ------------------------------------------------------------------ instance


@dataclass
class ProtocolInstance:
    config: ProtocolConfig
    mode: str
    game: Game | BayesianGame
    layout: cb.Layout
    index_set: IndexSet
    decompositions: dict
    partitions: dict
    refinement: CommonRefinement | None
    codebooks: dict[int, dict[int, cb.StrategyCodebook]]
    tables: dict[tuple[int, int], dict[int, cb.RecommendationTable]]
    type_books: dict[int, dict[int, cb.TypeCodebook]] | None
    supports: dict
    targets: dict
    wire: Wire
    setup_transcript: Transcript
    # what each player learned during setup (receiver-side views)
    decrypt_views: dict[int, dict[int, dict[int, int | None]]] = field(default_factory=dict)
    type_views: dict[int, dict[int, tuple[int, ...]]] = field(default_factory=dict)
    relayer_cells: dict[int, list[tuple[int, int, int]]] = field(default_factory=dict)
    relayer_tables: dict[int, dict[int, dict[int, cb.RecommendationTable]]] = field(default_factory=dict)

    @property
    def bits(self) -> int:
        return self.config.precision

    @property
    def bayesian(self) -> bool:
        return self.mode == "bayesian"


def _setup_messages(inst: ProtocolInstance) -> None:
    cfg = inst.config
    tr = inst.setup_transcript
    cells = [(c.label, c.lo, c.hi) for c in inst.layout.cells]
    for r in cfg.trio:
        for l in cfg.relayers:
            tr.send(Message(r, l, "setup", "cell_labels", cells))
        for i in range(cfg.n):
            if i not in cfg.trio:
                tr.send(Message(r, i, "setup", "index_size", inst.index_set.total))
    for r in cfg.trio:
        for i, book in inst.codebooks[r].items():
            tr.send(Message(r, i, "setup", "decrypt_map", (r, i, book.decrypt)))
        if inst.type_books is not None:
            for i, tb in inst.type_books[r].items():
                if i != r:
                    tr.send(Message(r, i, "setup", "type_map", (r, i, tb.encrypt)))
        for l in cfg.relayers:
            tr.send(Message(r, l, "setup", "tables", inst.tables[(r, l)]))

    # receiver-side state, rebuilt from the messages actually delivered
    for k in range(cfg.n):
        inst.decrypt_views[k] = {}
        inst.type_views[k] = {}
    for msg in tr.messages:
        if msg.kind == "decrypt_map":
            owner, subject, table = msg.payload
            inst.decrypt_views[msg.receiver][owner] = table
        elif msg.kind == "type_map":
            owner, subject, enc = msg.payload
            inst.type_views[msg.receiver][owner] = enc
        elif msg.kind == "cell_labels":
            inst.relayer_cells[msg.receiver] = msg.payload
        elif msg.kind == "tables":
            inst.relayer_tables.setdefault(msg.receiver, {})[msg.sender] = msg.payload
    if inst.type_books is not None:
        for r in cfg.trio:
            inst.type_views[r][r] = inst.type_books[r][r].encrypt


def _decompose_target(cfg: ProtocolConfig, dist: ProfileDistribution, rng: random.Random,
                      vertices=None) -> Decomposition:
    return decompose(list(dist.probs), cfg.refinements, cfg.max_denominator, rng,
                     vertices=vertices, exact=dist.exact)


def _finish(inst_kwargs: dict, cfg: ProtocolConfig, rng: random.Random, mint: LabelMint,
            type_counts: Sequence[int] | None) -> ProtocolInstance:
    layout = inst_kwargs["layout"]
    codebooks = {r: cb.generate_strategy_codebooks(layout, r, cfg.n, mint, rng, cfg.redundancy, cfg.max_domain)
                 for r in cfg.trio}
    type_books = None
    if type_counts is not None:
        type_books = {r: cb.generate_type_codebooks(type_counts, r, mint) for r in cfg.trio}
    tables = {}
    for r in cfg.trio:
        for l in cfg.relayers:
            tables[(r, l)] = cb.build_recommendation_tables(
                codebooks[r], layout, r, l, cfg.n, type_books[r] if type_books else None)
    salt = f"{rng.getrandbits(64):016x}"
    inst = ProtocolInstance(config=cfg, codebooks=codebooks, tables=tables, type_books=type_books,
                            wire=Wire(salt, cfg.precision), setup_transcript=Transcript(cfg.n), **inst_kwargs)
    _setup_messages(inst)
    return inst


def setup_complete(cfg: ProtocolConfig, game: Game, target: ProfileDistribution,
                   vertices=None, verify: bool = True) -> ProtocolInstance:
    """Steps 1-5 for a complete-information game."""
    if game.n != cfg.n:
        raise ProtocolError(f"config has {cfg.n} players but the game has {game.n}")
    if verify:
        rep = verify_correlated_equilibrium(game, target)
        if not rep.passed:
            raise ProtocolError(f"target is not a correlated equilibrium: {rep.summary()}")
    rng = random.Random(f"{cfg.seed}/setup")
    mint = LabelMint(rng)
    dec = _decompose_target(cfg, target, rng, vertices)
    part = build_partition(dec.alphas, cfg.fragmentation, rng, mint)
    ix = build_index_set({j: d for j, d in enumerate(dec.dists)}, cfg.multiplier, cfg.b, rng)
    layout = cb.Layout.complete(game, part, ix, target.support)
    kwargs = dict(mode="complete", game=game, layout=layout, index_set=ix, decompositions={None: dec},
                  partitions={None: part}, refinement=None, supports={None: target.support},
                  targets={None: target})
    return _finish(kwargs, cfg, rng, mint, None)


def setup_bayesian(cfg: ProtocolConfig, bgame: BayesianGame, policy: Mapping[tuple, ProfileDistribution],
                   vertices: Mapping | None = None, verify: bool = True) -> ProtocolInstance:
    """Steps 1-6 of the incomplete-information variant.

    Every type profile needs a distribution because relayers can be handed
    any encrypted type profile.  Type profiles sharing an identical target
    share one decomposition; each still gets its own partition.
    """
    if bgame.n != cfg.n:
        raise ProtocolError(f"config has {cfg.n} players but the game has {bgame.n}")
    tprofiles = bgame.type_profiles()
    missing = [t for t in tprofiles if t not in policy]
    if missing:
        raise ProtocolError(f"policy must cover every type profile; missing {missing[:3]}")
    if verify:
        rep = verify_communication_equilibrium(bgame, policy)
        if not rep.passed:
            raise ProtocolError(f"policy is not a communication equilibrium: {rep.summary()}")
    vertices = vertices or {}
    rng = random.Random(f"{cfg.seed}/setup")
    mint = LabelMint(rng)
    decs, parts, cache = {}, {}, {}
    for t in tprofiles:
        dist = policy[t]
        key = (dist.support, tuple(p.raw for p in dist.probs))
        if key not in cache:
            cache[key] = _decompose_target(cfg, dist, rng, vertices.get(t))
        decs[t] = cache[key]
        parts[t] = build_partition(decs[t].alphas, cfg.fragmentation, rng, mint)
    refinement = build_common_refinement(parts, mint)
    dists = {(t, j): d for t in tprofiles for j, d in enumerate(decs[t].dists)}
    ix = build_index_set(dists, cfg.multiplier, cfg.b, rng)
    supports = {t: policy[t].support for t in tprofiles}
    layout = cb.Layout.bayesian([len(a) for a in bgame.actions], refinement, ix, supports)
    kwargs = dict(mode="bayesian", game=bgame, layout=layout, index_set=ix, decompositions=decs,
                  partitions=parts, refinement=refinement, supports=supports, targets=dict(policy))
    return _finish(kwargs, cfg, rng, mint, bgame.type_sizes)


# --------------------------------------------------------------------- rounds


@dataclass
class Attempt:
    d_star: int
    x_star: int
    cell: int
    status: str
    emitted: list[tuple[int, int, int, tuple, int]] = field(default_factory=list)


@dataclass
class RoundOutcome:
    status: str
    profile: tuple | None
    type_profile: tuple | None
    copies: dict[int, list[int | None]]
    retries: int
    attempts: list[Attempt]
    transcript: Transcript | None = None
    secrets: dict = field(default_factory=dict)

    @property
    def delivered(self) -> bool:
        return self.status == DELIVERED

    @property
    def final(self) -> Attempt:
        return self.attempts[-1]


@dataclass
class Faults:
    """Engine-level fault injection, for tests only."""

    corrupt: tuple[int, int, int] | None = None  # (relayer, owner, subject) sends a wrong label


def _sample_prior(bgame: BayesianGame, rng: random.Random) -> tuple:
    u = rng.getrandbits(bgame.bits)
    acc = 0
    tps = bgame.type_profiles()
    for t in tps:
        acc += bgame.prior_of(t).raw
        if u < acc:
            return t
    return max(tps, key=lambda t: bgame.prior_of(t).raw)


def run_round(inst: ProtocolInstance, rng: random.Random, types: tuple | None = None,
              record: bool = True, faults: Faults | None = None) -> RoundOutcome:
    """One play: repeat the joint draw and delivery until a non-dummy index is hit."""
    cfg = inst.config
    n, bits = cfg.n, cfg.precision
    one = 1 << bits
    l4, l5 = cfg.relayers
    size = inst.index_set.total
    wire = inst.wire
    tr = Transcript(n) if record else None
    send = tr.send if record else (lambda msg: None)

    if inst.bayesian:
        if types is None:
            types = _sample_prior(inst.game, rng)
        types = tuple(types)

    # relayer-local view of the partition, rebuilt from the labels they received
    cells = inst.relayer_cells[l4]
    los = [lo for _, lo, _ in cells]

    attempts: list[Attempt] = []
    seen_points: set[tuple[int, int]] = set()
    retries = 0

    while True:
        tag = f"a{len(attempts)}"
        # joint d*
        while True:
            d = [rng.getrandbits(bits) or 1 for _ in range(n)]
            received = {l: [d[l]] for l in cfg.relayers}
            for i in range(n):
                targets = [l5] if i == l4 else [l4] if i == l5 else [l4, l5]
                for l in targets:
                    if record:
                        send(Message(i, l, tag, "d_share", d[i]))
                    received[l].append(d[i])
            d_star = {l: joint_random_unit(received[l], bits).raw for l in cfg.relayers}
            if d_star[l4] != d_star[l5]:
                raise ProtocolError("relayers disagree on the joint real draw")
            if d_star[l4] != 0:
                break
        d_star = d_star[l4]
        # joint x*
        xs = [rng.randint(1, size) for _ in range(n)]
        xrecv = {l: [xs[l]] for l in cfg.relayers}
        for i in range(n):
            targets = [l5] if i == l4 else [l4] if i == l5 else [l4, l5]
            for l in targets:
                if record:
                    send(Message(i, l, tag, "x_share", xs[i]))
                xrecv[l].append(xs[i])
        x_star = joint_random_index(xrecv[l4], size)
        if x_star != joint_random_index(xrecv[l5], size):
            raise ProtocolError("relayers disagree on the joint index draw")

        m = bisect.bisect_right(los, d_star) - 1
        cell_label = cells[m][0]

        enc_types = None
        if inst.bayesian:
            # every player reports its three encrypted types to the relayers
            enc_types = {}
            for i in range(n):
                mine = tuple(inst.type_views[i][r][types[i]] for r in cfg.trio)
                enc_types[i] = mine
                targets = [l5] if i == l4 else [l4] if i == l5 else [l4, l5]
                for l in targets:
                    if record:
                        send(Message(i, l, tag, "enc_type", mine))

        if (m, x_star) in seen_points:
            # relayers already saw this point abort; redraw without re-emitting its labels
            for l in cfg.relayers:
                for i in range(n):
                    if i != l and record:
                        send(Message(l, i, tag, "redraw", None))
            attempts.append(Attempt(d_star, x_star, m, ABORTED))
            retries += 1
            if retries >= cfg.max_retries:
                break
            continue
        seen_points.add((m, x_star))

        copies: dict[int, list[int | None]] = {i: [] for i in range(n)}
        att = Attempt(d_star, x_star, m, "")
        for l in cfg.relayers:
            tabs = inst.relayer_tables[l]
            for r in cfg.trio:
                if enc_types is not None:
                    enc = tuple(enc_types[k][cfg.trio.index(r)] for k in range(n))
                    key = (cell_label, x_star, enc)
                else:
                    key = (cell_label, x_star)
                for i, table in tabs[r].items():
                    lab = table.entries[key]
                    if faults and faults.corrupt == (l, r, i):
                        lab = _wrong_label(inst, r, i, lab)
                    att.emitted.append((l, r, i, key, lab))
                    if record:
                        send(Message(l, i, tag, "recommendation", (r, i, lab)))
                    copies[i].append(inst.decrypt_views[i][r][lab])
        attempts.append(att)

        # decoding: each player compares its copies
        first = {i: c[0] for i, c in copies.items()}
        agree = all(all(v == c[0] for v in c) for c in copies.values())
        if not agree and cfg.majority_decode:
            first = {i: Counter(c).most_common(1)[0][0] for i, c in copies.items()}
            agree = True
        if not agree:
            att.status = FAILED
            status = FAILED
            break
        if all(v is None for v in first.values()):
            att.status = ABORTED
            retries += 1
            if retries >= cfg.max_retries:
                break
            continue
        if any(v is None for v in first.values()):
            att.status = FAILED
            status = FAILED
            break
        att.status = DELIVERED
        break

    final = attempts[-1]
    status = final.status
    profile = None
    final_copies: dict[int, list] = {}
    if final.emitted:
        final_copies = {i: [] for i in range(n)}
        for l, r, i, key, lab in final.emitted:
            final_copies[i].append(inst.decrypt_views[i][r][lab])
    if status == DELIVERED:
        profile = tuple(Counter(final_copies[i]).most_common(1)[0][0] for i in range(n))

    secrets = {
        "salt": wire.salt,
        "d_star": [wire.real(a.d_star) for a in attempts],
        "x_star": [wire.index(a.x_star) for a in attempts],
        "actions": {i: wire.action(i, profile[i]) for i in range(n)} if profile else {},
        "types": {i: wire.type_(i, types[i]) for i in range(n)} if types is not None else {},
    }
    return RoundOutcome(status, profile, types, final_copies, retries, attempts, tr, secrets)


def _wrong_label(inst: ProtocolInstance, owner: int, subject: int, lab: int) -> int:
    book = inst.codebooks[owner][subject]
    truth = book.decrypt[lab]
    for other, a in book.decrypt.items():
        if a != truth and a is not None and other not in book.decoys:
            return other
    return lab


def expected_profile(inst: ProtocolInstance, outcome: RoundOutcome) -> tuple | None:
    """Profile recomputed directly from the secrets: a(z(x*, g(cell, t)))."""
    att = outcome.final
    return inst.layout.profile((att.cell, att.x_star, outcome.type_profile))


# ------------------------------------------------------------------ run loop


@dataclass
class ProtocolReport:
    trials: int
    delivered: int
    failed: int
    exhausted: int
    attempts: int
    aborted_attempts: int
    profile_counts: Counter
    type_counts: Counter
    conditional_counts: dict[tuple, Counter]
    retry_histogram: Counter
    multiplicity_ok: int
    consistency_ok: int
    samples: list[RoundOutcome]


def run_protocol(inst: ProtocolInstance, trials: int, keep: int = 1, record: bool = False,
                 types: tuple | None = None) -> ProtocolReport:
    """Play ``trials`` independent rounds on one instance with derived seeds."""
    if trials < 1:
        raise ProtocolError("trials must be at least 1")
    cfg = inst.config
    profile_counts: Counter = Counter()
    type_counts: Counter = Counter()
    cond: dict[tuple, Counter] = {}
    retry_hist: Counter = Counter()
    delivered = failed = exhausted = attempts = aborted = mult_ok = cons_ok = 0
    samples = []
    expected = {i: cfg.expected_copies(i) for i in range(cfg.n)}
    for k in range(trials):
        rng = random.Random(f"{cfg.seed}/trial/{k}")
        out = run_round(inst, rng, types=types, record=record or k < keep)
        attempts += len(out.attempts)
        aborted += sum(1 for a in out.attempts if a.status == ABORTED)
        retry_hist[out.retries] += 1
        if out.status == DELIVERED:
            delivered += 1
            profile_counts[out.profile] += 1
            if out.type_profile is not None:
                type_counts[out.type_profile] += 1
                cond.setdefault(out.type_profile, Counter())[out.profile] += 1
            if all(len(out.copies[i]) == expected[i] for i in range(cfg.n)):
                mult_ok += 1
            if all(all(v == out.profile[i] for v in out.copies[i]) for i in range(cfg.n)):
                cons_ok += 1
        elif out.status == FAILED:
            failed += 1
        else:
            exhausted += 1
        if k < keep:
            samples.append(out)
    return ProtocolReport(trials, delivered, failed, exhausted, attempts, aborted, profile_counts,
                          type_counts, cond, retry_hist, mult_ok, cons_ok, samples)


def dummy_fraction(inst: ProtocolInstance) -> Fraction:
    return Fraction(inst.index_set.b, inst.index_set.total)

"""Normal-form and Bayesian games, outcome distributions and equilibrium verifiers."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .numerics import DEFAULT_PRECISION, Real

Profile = tuple[int, ...]


class GameError(ValueError):
    """Dimension mismatches and malformed game data."""


def default_tolerance(bits: int = DEFAULT_PRECISION) -> Real:
    return Real(1 << 32, bits) if bits > 32 else Real.from_fraction(Fraction(1, 2**8), bits)


def enumerate_profiles(sizes: Sequence[int]) -> list[Profile]:
    """All profiles in profile-major order (last coordinate varies fastest)."""
    return list(itertools.product(*(range(k) for k in sizes)))


def profile_index(profile: Profile, sizes: Sequence[int]) -> int:
    idx = 0
    for a, k in zip(profile, sizes):
        idx = idx * k + a
    return idx


@dataclass(frozen=True)
class Game:
    """Finite normal-form game; ``payoffs[k][i]`` is player i's payoff at the k-th profile."""

    actions: tuple[tuple[str, ...], ...]
    payoffs: tuple[tuple[Real, ...], ...]
    players: tuple[str, ...] = ()
    bits: int = DEFAULT_PRECISION

    def __post_init__(self):
        if len(self.actions) < 2:
            raise GameError("a game needs at least two players")
        if any(len(a) == 0 for a in self.actions):
            raise GameError("every player needs at least one action")
        if len(self.payoffs) != self.num_profiles:
            raise GameError(f"expected {self.num_profiles} payoff rows, got {len(self.payoffs)}")
        if any(len(row) != self.n for row in self.payoffs):
            raise GameError(f"every payoff row needs {self.n} entries")
        if not self.players:
            object.__setattr__(self, "players", tuple(f"R{i + 1}" for i in range(self.n)))

    @property
    def n(self) -> int:
        return len(self.actions)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.actions)

    @property
    def num_profiles(self) -> int:
        k = 1
        for s in self.sizes:
            k *= s
        return k

    def payoff(self, i: int, profile: Profile) -> Real:
        return self.payoffs[profile_index(profile, self.sizes)][i]

    def payoff_vector(self, profile: Profile) -> tuple[Real, ...]:
        return self.payoffs[profile_index(profile, self.sizes)]

    def profiles(self) -> list[Profile]:
        return enumerate_profiles(self.sizes)

    def profile_labels(self, profile: Profile) -> tuple[str, ...]:
        return tuple(self.actions[i][a] for i, a in enumerate(profile))

    def parse_profile(self, labels: Sequence[str]) -> Profile:
        if len(labels) != self.n:
            raise GameError(f"profile {labels!r} has wrong length")
        try:
            return tuple(self.actions[i].index(lab) for i, lab in enumerate(labels))
        except ValueError:
            raise GameError(f"unknown action in profile {labels!r}") from None


@dataclass(frozen=True)
class ProfileDistribution:
    """Distribution over an enumerated support ``a(1), ..., a(Q)``.

    ``exact`` carries the rational probabilities when every entry is rational.
    """

    support: tuple[Profile, ...]
    probs: tuple[Real, ...]
    exact: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if len(self.support) != len(self.probs) or not self.support:
            raise GameError("support and probabilities must be non-empty and aligned")
        if len(set(self.support)) != len(self.support):
            raise GameError("support profiles must be distinct")
        if any(p < 0 for p in self.probs):
            raise GameError("probabilities must be non-negative")
        bits = self.probs[0].bits
        total = sum(p.raw for p in self.probs)
        if abs(total - (1 << bits)) > (1 << 8) * len(self.probs):
            raise GameError(f"probabilities sum to {float(Real(total, bits))}, not 1")

    @property
    def bits(self) -> int:
        return self.probs[0].bits

    @property
    def Q(self) -> int:
        return len(self.support)

    def as_dict(self) -> dict[Profile, Real]:
        return dict(zip(self.support, self.probs))

    @classmethod
    def from_fractions(cls, support: Sequence[Profile], probs: Sequence[Fraction],
                       bits: int = DEFAULT_PRECISION) -> "ProfileDistribution":
        probs = tuple(Fraction(p) for p in probs)
        return cls(tuple(support), tuple(Real.from_fraction(p, bits) for p in probs), probs)

    def check_dimensions(self, sizes: Sequence[int]) -> None:
        for prof in self.support:
            if len(prof) != len(sizes) or any(not 0 <= a < k for a, k in zip(prof, sizes)):
                raise GameError(f"profile {prof} is not valid for action sizes {tuple(sizes)}")


@dataclass(frozen=True)
class BayesianGame:
    """Game with private types.  ``payoffs[t]`` is the payoff table at type profile t."""

    actions: tuple[tuple[str, ...], ...]
    types: tuple[tuple[str, ...], ...]
    prior: Mapping[Profile, Real]
    payoffs: Mapping[Profile, tuple[tuple[Real, ...], ...]]
    players: tuple[str, ...] = ()
    bits: int = DEFAULT_PRECISION
    full_support: bool = False

    def __post_init__(self):
        if len(self.types) != len(self.actions):
            raise GameError("types and actions must cover the same players")
        if any(len(t) == 0 for t in self.types):
            raise GameError("every player needs at least one type")
        tprofiles = enumerate_profiles([len(t) for t in self.types])
        missing = [t for t in tprofiles if t not in self.payoffs]
        if missing:
            raise GameError(f"missing payoff tables for type profiles {missing[:3]}")
        total = sum(self.prior.get(t, Real(0, self.bits)).raw for t in tprofiles)
        if abs(total - (1 << self.bits)) > (1 << 8) * len(tprofiles):
            raise GameError("prior does not sum to 1")
        if any(v < 0 for v in self.prior.values()):
            raise GameError("prior probabilities must be non-negative")
        if self.full_support and any(self.prior.get(t, Real(0, self.bits)).raw <= 0 for t in tprofiles):
            raise GameError("full-support prior has a zero entry")
        if not self.players:
            object.__setattr__(self, "players", tuple(f"R{i + 1}" for i in range(len(self.actions))))

    @property
    def n(self) -> int:
        return len(self.actions)

    @property
    def type_sizes(self) -> tuple[int, ...]:
        return tuple(len(t) for t in self.types)

    def type_profiles(self) -> list[Profile]:
        return enumerate_profiles(self.type_sizes)

    def prior_of(self, t: Profile) -> Real:
        return self.prior.get(t, Real(0, self.bits))

    def game_for(self, t: Profile) -> Game:
        return Game(self.actions, self.payoffs[t], self.players, self.bits)

    def parse_types(self, labels: Sequence[str]) -> Profile:
        try:
            return tuple(self.types[i].index(lab) for i, lab in enumerate(labels))
        except ValueError:
            raise GameError(f"unknown type in {labels!r}") from None


TypeConditionalPolicy = Mapping[Profile, ProfileDistribution]


# ----------------------------------------------------------------- verifiers


@dataclass
class VerificationReport:
    passed: bool
    tol: Real
    checked: int
    violations: list[dict] = field(default_factory=list)
    worst: dict | None = None

    def summary(self) -> str:
        if self.passed:
            return f"pass ({self.checked} constraints)"
        w = self.worst
        return f"fail: {len(self.violations)} violated constraints, worst gain {float(w['gain']):.6g} ({w})"


def _gain_table(game: Game, p: ProfileDistribution) -> list[list[list[Real]]]:
    """gain[i][a][b] = sum over a_-i of p(a, a_-i) * (u_i(b, a_-i) - u_i(a, a_-i))."""
    bits = p.bits
    sizes = game.sizes
    raw = [[[0] * k for _ in range(k)] for k in sizes]
    scale = 1 << bits
    for prof, prob in zip(p.support, p.probs):
        if prob.raw == 0:
            continue
        base = game.payoff_vector(prof)
        for i, k in enumerate(sizes):
            ai = prof[i]
            ui = base[i].raw
            row = raw[i][ai]
            for b in range(k):
                if b == ai:
                    continue
                alt = prof[:i] + (b,) + prof[i + 1:]
                row[b] += prob.raw * (game.payoff(i, alt).raw - ui)
    return [[[Real((v + scale // 2) // scale, bits) for v in row] for row in mat] for mat in raw]


def verify_correlated_equilibrium(game: Game, p: ProfileDistribution,
                                  tol: Real | None = None) -> VerificationReport:
    """Check every obedience constraint of ``p`` against a unilateral switch."""
    p.check_dimensions(game.sizes)
    tol = default_tolerance(p.bits) if tol is None else Real.coerce(tol, p.bits)
    gains = _gain_table(game, p)
    violations = []
    checked = 0
    for i, mat in enumerate(gains):
        for a, row in enumerate(mat):
            for b, g in enumerate(row):
                if a == b:
                    continue
                checked += 1
                if g > tol:
                    violations.append({"player": i, "recommended": a, "deviation": b, "gain": g})
    worst = max(violations, key=lambda v: v["gain"].raw) if violations else None
    return VerificationReport(not violations, tol, checked, violations, worst)


def deviation_table(game: Game, p: ProfileDistribution) -> dict[tuple[int, int, int], Real]:
    """Unnormalised expected gain of switching from a recommended action to another."""
    p.check_dimensions(game.sizes)
    gains = _gain_table(game, p)
    out = {}
    for i, mat in enumerate(gains):
        for a, row in enumerate(mat):
            for b, g in enumerate(row):
                if a != b:
                    out[(i, a, b)] = g
    return out


def expected_payoffs(game: Game, p: ProfileDistribution) -> tuple[Real, ...]:
    p.check_dimensions(game.sizes)
    bits = p.bits
    acc = [0] * game.n
    for prof, prob in zip(p.support, p.probs):
        for i, u in enumerate(game.payoff_vector(prof)):
            acc[i] += prob.raw * u.raw
    half = 1 << (bits - 1)
    return tuple(Real((v + half) >> bits, bits) for v in acc)


def verify_communication_equilibrium(bg: BayesianGame, policy: TypeConditionalPolicy,
                                     tol: Real | None = None) -> VerificationReport:
    """Truthful reporting plus obedience against every misreport and deviation map.

    For a fixed player, true type and reported type the best deviation map
    is found action by action, which is equivalent to enumerating all
    ``|A_i|^|A_i|`` maps.
    """
    bits = bg.bits
    tol = default_tolerance(bits) if tol is None else Real.coerce(tol, bits)
    tprofiles = bg.type_profiles()
    for t in tprofiles:
        if bg.prior_of(t).raw > 0 and t not in policy:
            raise GameError(f"policy has no distribution for positive-prior type profile {t}")
    for dist in policy.values():
        dist.check_dimensions([len(a) for a in bg.actions])

    games = {t: bg.game_for(t) for t in tprofiles}
    violations = []
    checked = 0
    for i in range(bg.n):
        k = len(bg.actions[i])
        for ti in range(len(bg.types[i])):
            block = [t for t in tprofiles if t[i] == ti and bg.prior_of(t).raw > 0]
            marginal = sum(bg.prior_of(t).raw for t in block)
            if marginal == 0:
                continue
            truthful = 0
            for t in block:
                g = games[t]
                w = bg.prior_of(t).raw
                for prof, prob in zip(policy[t].support, policy[t].probs):
                    truthful += w * prob.raw * g.payoff(i, prof).raw
            for tr in range(len(bg.types[i])):
                # m[a][b]: value of playing b when a is recommended after reporting tr
                m = [[0] * k for _ in range(k)]
                seen = [False] * k
                for t in block:
                    rep = t[:i] + (tr,) + t[i + 1:]
                    if rep not in policy:
                        raise GameError(f"policy missing report profile {rep} reachable by misreport")
                    g = games[t]
                    w = bg.prior_of(t).raw
                    for prof, prob in zip(policy[rep].support, policy[rep].probs):
                        if prob.raw == 0:
                            continue
                        a = prof[i]
                        seen[a] = True
                        row = m[a]
                        for b in range(k):
                            alt = prof[:i] + (b,) + prof[i + 1:]
                            row[b] += w * prob.raw * g.payoff(i, alt).raw
                best = 0
                delta = []
                for a in range(k):
                    b = max(range(k), key=lambda b: (m[a][b], b == a)) if seen[a] else a
                    delta.append(b)
                    best += m[a][b]
                checked += 1
                gain = Real(_cond(best - truthful, marginal, bits), bits)
                if gain > tol:
                    violations.append({"player": i, "type": ti, "report": tr,
                                       "delta": tuple(delta), "gain": gain})
    worst = max(violations, key=lambda v: v["gain"].raw) if violations else None
    return VerificationReport(not violations, tol, checked, violations, worst)


def _cond(diff_raw3: int, marginal_raw: int, bits: int) -> int:
    # diff carries three factors of 2**bits (prior * prob * payoff); marginal carries one
    num = diff_raw3
    den = marginal_raw << bits
    if num >= 0:
        return (2 * num + den) // (2 * den)
    return -((-2 * num + den) // (2 * den))

"""Game and scenario files.

A scenario is a JSON object.  Numbers may be given as JSON integers or as
strings holding expressions (``"3/4"``, ``"sqrt(2)/2"``, ``"0.125"``).
See ``docs/schema.md`` for the full layout.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from .game import BayesianGame, Game, GameError, ProfileDistribution, enumerate_profiles
from .numerics import DEFAULT_PRECISION, NumericsError, Real, parse_expression
from .protocol import ProtocolConfig, ProtocolError


class ScenarioError(ValueError):
    """Malformed scenario or game file."""


CONFIG_FIELDS = {f.name for f in dataclasses.fields(ProtocolConfig)}


@dataclass
class Scenario:
    mode: str
    game: Game | BayesianGame
    target: ProfileDistribution | None = None
    vertices: list | None = None
    policy: dict | None = None
    policy_vertices: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    trials: int = 1000
    types: tuple | None = None
    source: str = ""

    def protocol_config(self, **overrides) -> ProtocolConfig:
        merged = {**self.config, **{k: v for k, v in overrides.items() if v is not None}}
        merged.setdefault("n", self.game.n)
        for key in ("trio", "relayers"):
            if key in merged:
                merged[key] = tuple(merged[key])
        try:
            return ProtocolConfig(**merged)
        except (TypeError, ProtocolError) as exc:
            raise ScenarioError(f"bad protocol config: {exc}") from None


def _number(value: Any, bits: int) -> tuple[Real, Fraction | None]:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise ScenarioError(f"expected an integer or an expression string, got {value!r}")
    try:
        expr = parse_expression(value)
        return expr.evaluate(bits), expr.exact()
    except NumericsError as exc:
        raise ScenarioError(f"cannot parse {value!r}: {exc}") from None


def _fraction(value: Any) -> Fraction:
    _, exact = _number(value, 64)
    if exact is None:
        raise ScenarioError(f"{value!r} must be rational")
    return exact


def _require(obj: Mapping, key: str, where: str):
    if key not in obj:
        raise ScenarioError(f"{where}: missing field {key!r}")
    return obj[key]


def _labels(obj: Any, where: str) -> tuple[tuple[str, ...], ...]:
    if not isinstance(obj, list) or not all(isinstance(a, list) and a for a in obj):
        raise ScenarioError(f"{where} must be a list of non-empty label lists")
    return tuple(tuple(str(x) for x in a) for a in obj)


def _payoff_rows(rows: Any, n: int, bits: int, where: str):
    if not isinstance(rows, list):
        raise ScenarioError(f"{where} must be a list of payoff rows")
    out = []
    for k, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise ScenarioError(f"{where}[{k}] must list {n} payoffs")
        out.append(tuple(_number(v, bits)[0] for v in row))
    return tuple(out)


def _distribution(block: Any, parse_profile, bits: int, where: str) -> tuple[ProfileDistribution, list | None]:
    if not isinstance(block, Mapping):
        raise ScenarioError(f"{where} must be an object with support and probs")
    support = _require(block, "support", where)
    probs = _require(block, "probs", where)
    if not isinstance(support, list) or not isinstance(probs, list) or len(support) != len(probs):
        raise ScenarioError(f"{where}: support and probs must be lists of equal length")
    try:
        prof = tuple(parse_profile(s) for s in support)
    except GameError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    vals = [_number(p, bits) for p in probs]
    exact = tuple(e for _, e in vals)
    try:
        dist = ProfileDistribution(prof, tuple(r for r, _ in vals), exact if None not in exact else None)
    except GameError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    verts = block.get("vertices")
    if verts is not None:
        verts = [[_fraction(v) for v in vert] for vert in verts]
    return dist, verts


def _per_type(value: Any, tprofiles: list, type_labels, where: str) -> dict:
    """Accept either a list in type-profile-major order or an object keyed by comma-joined labels."""
    if isinstance(value, list):
        if len(value) != len(tprofiles):
            raise ScenarioError(f"{where} must have {len(tprofiles)} entries, got {len(value)}")
        return dict(zip(tprofiles, value))
    if isinstance(value, Mapping):
        out = {}
        for key, v in value.items():
            labels = key.split(",")
            try:
                out[tuple(type_labels[i].index(lab) for i, lab in enumerate(labels))] = v
            except (ValueError, IndexError):
                raise ScenarioError(f"{where}: unknown type profile {key!r}") from None
        return out
    raise ScenarioError(f"{where} must be a list or an object")


def parse_scenario(data: Any, bits: int = DEFAULT_PRECISION, source: str = "") -> Scenario:
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario must be a JSON object")
    cfg = dict(data.get("config", {}))
    unknown = set(cfg) - CONFIG_FIELDS
    if unknown:
        raise ScenarioError(f"unknown config fields {sorted(unknown)}")
    actions = _labels(_require(data, "actions", "scenario"), "actions")
    n = len(actions)
    players = tuple(str(p) for p in data.get("players", ()))
    if players and len(players) != n:
        raise ScenarioError("players and actions disagree on the player count")
    trials = data.get("trials", 1000)
    if not isinstance(trials, int) or trials < 1:
        raise ScenarioError("trials must be a positive integer")

    try:
        if "types" not in data:
            game = Game(actions, _payoff_rows(_require(data, "payoffs", "scenario"), n, bits, "payoffs"),
                        players, bits)
            target = verts = None
            if "target" in data:
                target, verts = _distribution(data["target"], game.parse_profile, bits, "target")
            return Scenario("complete", game, target, verts, config=cfg, trials=trials, source=source)

        types = _labels(data["types"], "types")
        if len(types) != n:
            raise ScenarioError("types and actions disagree on the player count")
        tprofiles = enumerate_profiles([len(t) for t in types])
        prior_raw = _per_type(_require(data, "prior", "scenario"), tprofiles, types, "prior")
        prior = {t: _number(v, bits)[0] for t, v in prior_raw.items()}
        pay = _per_type(_require(data, "payoffs", "scenario"), tprofiles, types, "payoffs")
        payoffs = {t: _payoff_rows(rows, n, bits, f"payoffs[{t}]") for t, rows in pay.items()}
        bgame = BayesianGame(actions, types, prior, payoffs, players, bits,
                             bool(data.get("full_support", False)))
        probe = Game(actions, payoffs[tprofiles[0]], players, bits)
        policy = pverts = None
        if "policy" in data:
            policy, pverts = {}, {}
            for t, block in _per_type(data["policy"], tprofiles, types, "policy").items():
                policy[t], v = _distribution(block, probe.parse_profile, bits, f"policy[{t}]")
                if v is not None:
                    pverts[t] = v
        fixed = data.get("fixed_types")
        if fixed is not None:
            fixed = bgame.parse_types(fixed)
        return Scenario("bayesian", bgame, None, None, policy, pverts or {}, cfg, trials, fixed, source)
    except GameError as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(path: str | Path, bits: int | None = None) -> Scenario:
    """Read a scenario; ``bits`` defaults to the file's configured precision."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if bits is None:
        cfg = data.get("config", {}) if isinstance(data, Mapping) else {}
        bits = cfg.get("precision", DEFAULT_PRECISION) if isinstance(cfg, Mapping) else DEFAULT_PRECISION
    if not isinstance(bits, int) or bits < 40:
        raise ScenarioError("precision must be an integer of at least 40 bits")
    return parse_scenario(data, bits, str(path))

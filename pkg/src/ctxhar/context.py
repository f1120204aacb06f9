"""Symbolic context facts and per-activity consistency rules.

Raw :class:`~ctxhar.ingest.ContextSnapshot` values are mapped to symbols
(speed bands, height trend, place traits, ...) and checked against a rule
base holding, per activity, a conjunction of necessary conditions. An atom
over an unknown attribute is always satisfied.

Rule file syntax, one statement per line (``#`` starts a comment)::

    place office_building: +has_stairs, +has_elevator, +has_bathroom
    activity elevator_up: trait(+has_elevator) & height_trend=positive
    activity walking: height_trend=flat & speed_band in {low, medium}
    activity sitting: speed_band!=high
    minority: elevator_up, stairs_up
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .config import BUILTIN_RULES, Thresholds
from .ingest import ContextSnapshot

log = logging.getLogger(__name__)

TRAITS = ("is_outdoor", "has_stairs", "has_elevator", "has_road", "is_pedestrian_area", "has_bathroom")

VOCABULARY: dict[str, tuple[str, ...]] = {
    "speed_band": ("zero", "low", "medium", "high"),
    "height_trend": ("negative", "flat", "positive"),
    "weather": ("clear", "cloudy", "rainy", "snowy", "foggy"),
    "transit_proximity": ("near", "far"),
    "traffic_level": ("none", "light", "moderate", "heavy"),
    "light_band": ("dark", "dim", "bright"),
    "noise_band": ("quiet", "moderate", "loud"),
    "time_of_day": ("night", "morning", "afternoon", "evening"),
    "day_of_week": ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"),
}
SYMBOLIC_ATTRIBUTES = ("semantic_place",) + tuple(VOCABULARY)


class RuleLoadError(ValueError):
    """A rule file statement is malformed or references unknown names."""


@dataclass(frozen=True)
class DiscretizedContext:
    """One symbol per attribute; ``None`` is unknown.

    ``place_traits`` is ``None`` whenever the place itself is unknown.
    """

    semantic_place: str | None = None
    place_traits: frozenset[str] | None = None
    speed_band: str | None = None
    height_trend: str | None = None
    weather: str | None = None
    transit_proximity: str | None = None
    traffic_level: str | None = None
    light_band: str | None = None
    noise_band: str | None = None
    time_of_day: str | None = None
    day_of_week: str | None = None

    def forget(self, attribute: str) -> "DiscretizedContext":
        """Copy with ``attribute`` made unknown (forgetting the place drops its traits too)."""
        if attribute == "semantic_place":
            return replace(self, semantic_place=None, place_traits=None)
        return replace(self, **{attribute: None})


def _band(value: float, cuts: Sequence[float], labels: Sequence[str]) -> str:
    for cut, label in zip(cuts, labels):
        if value < cut:
            return label
    return labels[-1]


def discretize(
    snapshot: ContextSnapshot,
    places: Mapping[str, frozenset[str]],
    thresholds: Thresholds | None = None,
) -> DiscretizedContext:
    """Map a raw snapshot to symbols.

    Speed: zero < 0.3 m/s <= low < 1.5 <= medium < 6 <= high (defaults).
    Height trend: positive above +epsilon, negative below -epsilon, else flat.
    A place missing from ``places`` becomes unknown (a warning is logged).
    """
    th = thresholds or Thresholds()
    place = snapshot.semantic_place
    traits = None
    if place is not None:
        if place in places:
            traits = frozenset(places[place])
        else:
            log.warning("place %r not in the place vocabulary; treated as unknown", place)
            place = None

    def symbol(attr: str, value):
        if value is None:
            return None
        if value not in VOCABULARY[attr]:
            log.warning("%s value %r not in vocabulary; treated as unknown", attr, value)
            return None
        return value

    speed = snapshot.speed_mps
    height = snapshot.height_variation_m
    light = snapshot.light_level
    noise = snapshot.noise_level
    transit = snapshot.transit_proximity
    return DiscretizedContext(
        semantic_place=place,
        place_traits=traits,
        speed_band=None if speed is None else _band(
            speed, (th.speed_zero, th.speed_low, th.speed_medium), VOCABULARY["speed_band"]),
        height_trend=None if height is None else (
            "positive" if height > th.height_epsilon else "negative" if height < -th.height_epsilon else "flat"),
        weather=symbol("weather", snapshot.weather),
        transit_proximity=None if transit is None else ("near" if transit else "far"),
        traffic_level=symbol("traffic_level", snapshot.traffic_level),
        light_band=None if light is None else _band(
            light, (th.light_dim, th.light_bright), VOCABULARY["light_band"]),
        noise_band=None if noise is None else _band(
            noise, (th.noise_quiet, th.noise_loud), VOCABULARY["noise_band"]),
        time_of_day=snapshot.time_of_day,
        day_of_week=snapshot.day_of_week,
    )


@dataclass(frozen=True)
class Atom:
    """``attribute = / != / in`` a value set, or a place trait requirement."""

    op: str  # "=", "!=", "in", "trait"
    attribute: str
    values: frozenset[str]
    positive: bool = True

    def satisfied(self, ctx: DiscretizedContext) -> bool:
        if self.op == "trait":
            if ctx.place_traits is None:
                return True
            (trait,) = self.values
            return (trait in ctx.place_traits) == self.positive
        value = getattr(ctx, self.attribute)
        if value is None:
            return True
        if self.op == "!=":
            return value not in self.values
        return value in self.values

    def __str__(self) -> str:
        if self.op == "trait":
            return f"trait({'+' if self.positive else '-'}{next(iter(self.values))})"
        if self.op == "in":
            return f"{self.attribute} in {{{', '.join(sorted(self.values))}}}"
        return f"{self.attribute}{self.op}{next(iter(self.values))}"


@dataclass(frozen=True)
class Rule:
    activity: str
    atoms: tuple[Atom, ...] = ()

    def satisfied(self, ctx: DiscretizedContext) -> bool:
        return all(atom.satisfied(ctx) for atom in self.atoms)

    def __str__(self) -> str:
        return f"activity {self.activity}: " + " & ".join(str(a) for a in self.atoms)


@dataclass(frozen=True)
class RuleSet:
    rules: Mapping[str, Rule]
    minority: frozenset[str] = frozenset()
    places: Mapping[str, frozenset[str]] = None  # type: ignore[assignment]
    activities: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.places is None:
            object.__setattr__(self, "places", {})

    def restrict(self, activities: Sequence[str]) -> "RuleSet":
        """Rule base over a subset of activities."""
        keep = set(activities)
        return RuleSet(
            {a: r for a, r in self.rules.items() if a in keep},
            frozenset(self.minority & keep),
            self.places,
            tuple(activities),
        )

    def with_minority(self, minority: Iterable[str]) -> "RuleSet":
        return replace(self, minority=frozenset(minority))


def is_consistent(activity: str, ctx: DiscretizedContext, kb: RuleSet) -> bool:
    if kb.activities is not None and activity not in kb.activities:
        raise ValueError(f"activity {activity!r} is not in the rule base's activity set")
    rule = kb.rules.get(activity)
    return True if rule is None else rule.satisfied(ctx)


def consistent_activities(activities: Sequence[str], ctx: DiscretizedContext, kb: RuleSet) -> list[bool]:
    return [is_consistent(a, ctx, kb) for a in activities]


# --------------------------------------------------------------------------
# rule file parsing

_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_PLACE_RE = re.compile(rf"^place\s+({_NAME})\s*:\s*(.*)$")
_ACTIVITY_RE = re.compile(rf"^activity\s+({_NAME})\s*:\s*(.*)$")
_MINORITY_RE = re.compile(r"^minority\s*:\s*(.*)$")
_TRAIT_RE = re.compile(rf"^trait\(\s*([+-])\s*({_NAME})\s*\)$")
_IN_RE = re.compile(rf"^({_NAME})\s+in\s+\{{(.*)\}}$")
_CMP_RE = re.compile(rf"^({_NAME})\s*(!=|=)\s*({_NAME})$")


def _names(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def parse_rules(
    text: str,
    activities: Sequence[str] | None = None,
    places: Mapping[str, Iterable[str]] | None = None,
    source: str = "<rules>",
) -> RuleSet:
    """Parse rule-file text. See the module docstring for the syntax."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stmt = raw.split("#", 1)[0].strip()
        if stmt:
            lines.append((lineno, stmt))

    def fail(lineno: int, message: str):
        raise RuleLoadError(f"{source}:{lineno}: {message}")

    vocab_places: dict[str, frozenset[str]] = {k: frozenset(v) for k, v in (places or {}).items()}
    for lineno, stmt in lines:
        m = _PLACE_RE.match(stmt)
        if not m:
            continue
        traits = set()
        for item in _names(m.group(2)):
            if not item.startswith("+") or item[1:].strip() not in TRAITS:
                fail(lineno, f"bad place trait {item!r} (expected +name with name in {TRAITS})")
            traits.add(item[1:].strip())
        vocab_places[m.group(1)] = frozenset(traits)

    allowed = set(activities) if activities is not None else None
    rules: dict[str, Rule] = {}
    minority: set[str] = set()
    for lineno, stmt in lines:
        if _PLACE_RE.match(stmt):
            continue
        m = _MINORITY_RE.match(stmt)
        if m:
            for name in _names(m.group(1)):
                if allowed is not None and name not in allowed:
                    fail(lineno, f"minority activity {name!r} is not in the activity set")
                minority.add(name)
            continue
        m = _ACTIVITY_RE.match(stmt)
        if not m:
            fail(lineno, f"unrecognized statement {stmt!r}")
        activity, body = m.group(1), m.group(2).strip()
        if allowed is not None and activity not in allowed:
            fail(lineno, f"activity {activity!r} is not in the activity set")
        if activity in rules:
            fail(lineno, f"second rule for activity {activity!r}")
        atoms = []
        for part in [p.strip() for p in body.split("&")] if body else []:
            atoms.append(_parse_atom(part, vocab_places, lambda msg: fail(lineno, msg)))
        rules[activity] = Rule(activity, tuple(atoms))
    return RuleSet(rules, frozenset(minority), vocab_places, tuple(activities) if activities is not None else None)


def _check_value(attribute: str, value: str, places: Mapping[str, frozenset[str]], fail) -> None:
    if attribute == "semantic_place":
        if value not in places:
            fail(f"unknown place {value!r}")
    elif attribute in VOCABULARY:
        if value not in VOCABULARY[attribute]:
            fail(f"value {value!r} not allowed for {attribute} (allowed: {VOCABULARY[attribute]})")
    else:
        fail(f"unknown attribute {attribute!r}")


def _parse_atom(text: str, places: Mapping[str, frozenset[str]], fail) -> Atom:
    if not text:
        fail("empty atom")
    m = _TRAIT_RE.match(text)
    if m:
        if m.group(2) not in TRAITS:
            fail(f"unknown trait {m.group(2)!r}")
        return Atom("trait", "place_traits", frozenset([m.group(2)]), m.group(1) == "+")
    m = _IN_RE.match(text)
    if m:
        values = _names(m.group(2))
        if not values:
            fail("empty value set")
        attribute = m.group(1)
        if attribute not in SYMBOLIC_ATTRIBUTES:
            fail(f"unknown attribute {attribute!r}")
        for v in values:
            _check_value(attribute, v, places, fail)
        return Atom("in", attribute, frozenset(values))
    m = _CMP_RE.match(text)
    if m:
        attribute, op, value = m.groups()
        if attribute not in SYMBOLIC_ATTRIBUTES:
            fail(f"unknown attribute {attribute!r}")
        _check_value(attribute, value, places, fail)
        return Atom(op, attribute, frozenset([value]))
    fail(f"cannot parse atom {text!r}")
    raise AssertionError  # unreachable


def default_rules_text() -> str:
    return resources.files("ctxhar.data").joinpath("default.rules").read_text(encoding="utf-8")


def load_rules(
    path: str | Path = BUILTIN_RULES,
    activities: Sequence[str] | None = None,
    places: Mapping[str, Iterable[str]] | None = None,
) -> RuleSet:
    """Load a rule file (``builtin:default.rules`` names the shipped one)."""
    if str(path) == BUILTIN_RULES:
        return parse_rules(default_rules_text(), activities, places, source=BUILTIN_RULES)
    return parse_rules(Path(path).read_text(encoding="utf-8"), activities, places, source=str(path))


def context_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(DiscretizedContext))

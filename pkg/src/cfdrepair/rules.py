"""Conditional functional dependency rules: parsing, normal form, matching.

Rule files are line oriented::

    # comment
    p1: ZIP -> CT, STT : 46360 || MICHIGAN CITY, IN
    p5: STR, CT -> ZIP : -, FORT WAYNE || -

Each line reads  ``id: lhs-attrs -> rhs-attrs : lhs-pattern || rhs-pattern``.
A ``-`` pattern entry is the wildcard; ``\\-`` stands for a literal hyphen.
Multi-attribute right-hand sides are normalised into one rule per rhs
attribute, with ids ``<source>.<k>`` numbered by rhs position, so the rest
of the engine only ever sees single-rhs rules.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import Schema, Tuple

WILDCARD = None  # internal representation of '-' in a pattern

__all__ = [
    "RuleParseError",
    "CfdRule",
    "RuleSet",
    "parse_rules",
    "parse_rules_file",
    "matches_pattern",
]


class RuleParseError(ValueError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class CfdRule:
    """A normalised CFD ``(lhs -> rhs, pattern)`` with a single rhs attribute.

    ``lhs_pattern`` entries and ``rhs_pattern`` are constants or ``None``
    for the wildcard.  A rule is *constant* when its rhs pattern is a
    constant, *variable* when the rhs pattern is the wildcard.
    """

    id: str
    source_id: str
    lhs: tuple[str, ...]
    rhs: str
    lhs_pattern: tuple[str | None, ...]
    rhs_pattern: str | None

    def __post_init__(self) -> None:
        if not self.lhs:
            raise RuleParseError(f"rule {self.id}: empty lhs")
        if len(self.lhs) != len(set(self.lhs)):
            raise RuleParseError(f"rule {self.id}: repeated lhs attribute")
        if self.rhs in self.lhs:
            raise RuleParseError(f"rule {self.id}: rhs attribute {self.rhs!r} also on lhs")
        if len(self.lhs_pattern) != len(self.lhs):
            raise RuleParseError(f"rule {self.id}: lhs pattern length mismatch")

    @property
    def is_constant(self) -> bool:
        return self.rhs_pattern is not None

    @property
    def attributes(self) -> tuple[str, ...]:
        return self.lhs + (self.rhs,)

    def mentions(self, attr: str) -> bool:
        return attr == self.rhs or attr in self.lhs

    def in_context(self, t: Tuple) -> bool:
        return matches_pattern(t, self.lhs, self.lhs_pattern)

    def lhs_key(self, t: Tuple) -> tuple[str, ...]:
        return tuple(t.cells[a] for a in self.lhs)


def matches_pattern(
    t: Tuple, attrs: tuple[str, ...], pattern: tuple[str | None, ...]
) -> bool:
    """True when each attribute equals its pattern constant or the pattern
    entry is the wildcard."""
    return all(p is None or t.cells[a] == p for a, p in zip(attrs, pattern))


class RuleSet:
    """All normalised rules of a session, grouped by source rule."""

    def __init__(self, rules: list[CfdRule]):
        if not rules:
            raise RuleParseError("rule set is empty")
        self.rules = rules
        self.by_id: dict[str, CfdRule] = {}
        self.by_source: dict[str, list[CfdRule]] = {}
        for r in rules:
            if r.id in self.by_id:
                raise RuleParseError(f"duplicate rule id: {r.id}")
            self.by_id[r.id] = r
            self.by_source.setdefault(r.source_id, []).append(r)
        for source_id, children in self.by_source.items():
            first = children[0]
            for child in children[1:]:
                if child.lhs != first.lhs or child.lhs_pattern != first.lhs_pattern:
                    raise RuleParseError(
                        f"rule {source_id}: children disagree on lhs/pattern"
                    )
        self._mentioning: dict[str, tuple[CfdRule, ...]] = {}
        self._sources_mentioning: dict[str, tuple[str, ...]] = {}
        for r in rules:
            for attr in dict.fromkeys(r.lhs + (r.rhs,)):
                self._mentioning[attr] = self._mentioning.get(attr, ()) + (r,)
                sources = self._sources_mentioning.get(attr, ())
                if r.source_id not in sources:
                    self._sources_mentioning[attr] = sources + (r.source_id,)

    def __iter__(self):
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def rule(self, rule_id: str) -> CfdRule:
        try:
            return self.by_id[rule_id]
        except KeyError:
            raise RuleParseError(f"unknown rule id: {rule_id!r}") from None

    def mentioning(self, attr: str) -> tuple[CfdRule, ...]:
        return self._mentioning.get(attr, ())

    def sources_mentioning(self, attr: str) -> tuple[str, ...]:
        return self._sources_mentioning.get(attr, ())

    def lhs_constants_at(self, attr: str) -> list[str]:
        """Every constant any rule's lhs pattern places on ``attr`` (with
        repeats, one per rule occurrence)."""
        out: list[str] = []
        for r in self.rules:
            for a, p in zip(r.lhs, r.lhs_pattern):
                if a == attr and p is not None:
                    out.append(p)
        return out


def _parse_pattern_value(token: str, line_no: int) -> str | None:
    token = token.strip()
    if token == "-":
        return WILDCARD
    if token == "\\-":
        return "-"
    if not token:
        raise RuleParseError("empty pattern value", line_no)
    return token


def _split_csv(part: str) -> list[str]:
    return [p.strip() for p in part.split(",")]


def parse_rules(text: str, schema: Schema) -> RuleSet:
    """Parse rule-file text against a schema into normalised rules."""
    rules: list[CfdRule] = []
    seen_sources: set[str] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if not sep:
            raise RuleParseError("missing ':' after rule id", line_no)
        source_id = head.strip()
        if not source_id:
            raise RuleParseError("empty rule id", line_no)
        if source_id in seen_sources:
            raise RuleParseError(f"duplicate rule id {source_id!r}", line_no)
        seen_sources.add(source_id)

        attrs_part, sep, pattern_part = rest.partition(":")
        if not sep:
            raise RuleParseError("missing ':' between attributes and pattern", line_no)
        lhs_part, sep, rhs_part = attrs_part.partition("->")
        if not sep:
            raise RuleParseError("missing '->' in attribute list", line_no)
        lhs = tuple(_split_csv(lhs_part))
        rhs_attrs = tuple(_split_csv(rhs_part))
        if any(not a for a in lhs) or any(not a for a in rhs_attrs):
            raise RuleParseError("empty attribute name", line_no)
        for a in lhs + rhs_attrs:
            if a not in schema:
                raise RuleParseError(f"unknown attribute {a!r}", line_no)

        lhs_pat_part, sep, rhs_pat_part = pattern_part.partition("||")
        if not sep:
            raise RuleParseError("missing '||' between lhs and rhs patterns", line_no)
        lhs_pattern = tuple(
            _parse_pattern_value(v, line_no) for v in lhs_pat_part.split(",")
        )
        rhs_patterns = tuple(
            _parse_pattern_value(v, line_no) for v in rhs_pat_part.split(",")
        )
        if len(lhs_pattern) != len(lhs):
            raise RuleParseError(
                f"{len(lhs)} lhs attributes but {len(lhs_pattern)} pattern values",
                line_no,
            )
        if len(rhs_patterns) != len(rhs_attrs):
            raise RuleParseError(
                f"{len(rhs_attrs)} rhs attributes but {len(rhs_patterns)} pattern values",
                line_no,
            )

        for k, (rhs, rhs_pattern) in enumerate(zip(rhs_attrs, rhs_patterns), start=1):
            try:
                rules.append(
                    CfdRule(
                        id=f"{source_id}.{k}",
                        source_id=source_id,
                        lhs=lhs,
                        rhs=rhs,
                        lhs_pattern=lhs_pattern,
                        rhs_pattern=rhs_pattern,
                    )
                )
            except RuleParseError as exc:
                raise RuleParseError(str(exc), line_no) from None
    return RuleSet(rules)


def parse_rules_file(path: str, schema: Schema) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh.read(), schema)

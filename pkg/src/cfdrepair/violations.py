"""Violation detection and incremental bookkeeping for CFD rules.

A tuple violates a constant rule when it matches the rule's lhs pattern
but its rhs cell differs from the rhs constant.  It violates a variable
rule when some other in-context tuple agrees with it on the whole lhs
but disagrees on the rhs; each such partner counts once, so a
disagreeing pair contributes two to the total.

The index groups in-context tuples per source rule by their lhs values
and keeps per-group value histograms, which makes single-cell updates
cheap: only the groups the changed tuple leaves and enters need to be
revisited.  ``apply_cell_change`` reports every per-tuple count that
moved as a :class:`ChangeDelta` so callers can maintain dirty lists
without rescanning the dataset.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import Dataset, Tuple
from .rules import CfdRule, RuleSet, matches_pattern

__all__ = [
    "DeltaEntry",
    "ChangeDelta",
    "ViolationIndex",
    "detect_all",
    "total_violations",
    "tuple_violation_count",
    "satisfying_count",
    "joint_satisfying_count",
]


@dataclass(frozen=True)
class DeltaEntry:
    """One tuple whose violation count under one rule changed."""

    rule_id: str
    tuple_id: str
    before: int
    after: int


@dataclass
class ChangeDelta:
    tuple_id: str
    attribute: str
    old_value: str
    new_value: str
    entries: list[DeltaEntry]

    @property
    def empty(self) -> bool:
        return not self.entries

    def rules_touched(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.rule_id)
        return list(seen)

    def gained(self, rule_id: str) -> list[str]:
        return [e.tuple_id for e in self.entries if e.rule_id == rule_id and e.before == 0 and e.after > 0]

    def lost(self, rule_id: str) -> list[str]:
        return [e.tuple_id for e in self.entries if e.rule_id == rule_id and e.before > 0 and e.after == 0]

    def touched(self, rule_id: str) -> list[str]:
        return [e.tuple_id for e in self.entries if e.rule_id == rule_id]


class _Group:
    """In-context tuples of one source rule sharing the full lhs value.
    ``const_ok`` counts members that satisfy every constant child; when
    the source has none it simply equals the member count."""

    __slots__ = ("members", "weight", "hist", "whist", "const_ok")

    def __init__(self, var_child_ids: list[str]):
        self.members: dict[str, None] = {}
        self.weight = 0.0
        self.hist: dict[str, dict[str, int]] = {c: {} for c in var_child_ids}
        self.whist: dict[str, dict[str, float]] = {c: {} for c in var_child_ids}
        self.const_ok = 0

    def add(self, t: Tuple, src: "_SourceIndex") -> None:
        self.members[t.id] = None
        self.weight += t.weight
        if all(not src._const_status(t, c) for c in src.const_children):
            self.const_ok += 1
        for child in src.var_children:
            v = t.cells[child.rhs]
            h = self.hist[child.id]
            h[v] = h.get(v, 0) + 1
            wh = self.whist[child.id]
            wh[v] = wh.get(v, 0.0) + t.weight

    def remove(self, t: Tuple, src: "_SourceIndex") -> None:
        del self.members[t.id]
        self.weight -= t.weight
        if all(not src._const_status(t, c) for c in src.const_children):
            self.const_ok -= 1
        for child in src.var_children:
            v = t.cells[child.rhs]
            h = self.hist[child.id]
            h[v] -= 1
            if h[v] == 0:
                del h[v]
                del self.whist[child.id][v]
            else:
                self.whist[child.id][v] -= t.weight

    def var_contribution(self, child_id: str) -> float:
        """Weighted violation total of this group under one variable child:
        each member contributes weight times its number of disagreeing
        partners."""
        n = len(self.members)
        h = self.hist[child_id]
        if len(h) <= 1:
            return 0.0
        wh = self.whist[child_id]
        return self.weight * n - sum(wh[v] * h[v] for v in h)

    def unanimous(self, child_id: str) -> bool:
        return len(self.hist[child_id]) <= 1


class _GroupOverlay:
    """Aggregate view of one group with hypothetical member shifts
    applied on top, leaving the live histograms untouched.  Tracks only
    what the violation and joint-satisfaction totals need: member count,
    weight, constant-child pass count, and per variable child the
    weighted agreement sum and the number of distinct values."""

    __slots__ = ("src", "n", "w", "ok", "sigma", "distinct", "h", "wh", "dh", "dwh")

    def __init__(self, src: "_SourceIndex", group: _Group | None):
        self.src = src
        var_ids = src._var_ids
        if group is None:
            self.n = 0
            self.w = 0.0
            self.ok = 0
            self.h: dict[str, dict[str, int]] = {c: {} for c in var_ids}
            self.wh: dict[str, dict[str, float]] = {c: {} for c in var_ids}
        else:
            self.n = len(group.members)
            self.w = group.weight
            self.ok = group.const_ok
            self.h = group.hist
            self.wh = group.whist
        self.sigma = {
            c: sum(self.wh[c][v] * self.h[c][v] for v in self.h[c]) for c in var_ids
        }
        self.distinct = {c: len(self.h[c]) for c in var_ids}
        self.dh: dict[str, dict[str, int]] = {c: {} for c in var_ids}
        self.dwh: dict[str, dict[str, float]] = {c: {} for c in var_ids}

    def shift(self, t: Tuple, sign: int) -> None:
        """Hypothetically add (+1) or remove (-1) one member."""
        self.n += sign
        self.w += sign * t.weight
        if all(not self.src._const_status(t, c) for c in self.src.const_children):
            self.ok += sign
        for child in self.src.var_children:
            c = child.id
            v = t.cells[child.rhs]
            h0 = self.h[c].get(v, 0) + self.dh[c].get(v, 0)
            wh0 = self.wh[c].get(v, 0.0) + self.dwh[c].get(v, 0.0)
            self.sigma[c] -= wh0 * h0
            h1 = h0 + sign
            wh1 = wh0 + sign * t.weight
            if h1 > 0:
                self.sigma[c] += wh1 * h1
            if h0 == 0 and h1 > 0:
                self.distinct[c] += 1
            elif h0 > 0 and h1 == 0:
                self.distinct[c] -= 1
            self.dh[c][v] = self.dh[c].get(v, 0) + sign
            self.dwh[c][v] = self.dwh[c].get(v, 0.0) + sign * t.weight

    def var_vio(self) -> float:
        """Weighted disagreement total over all variable children, same
        unanimity guard as :meth:`_Group.var_contribution`."""
        total = 0.0
        for c in self.src._var_ids:
            if self.distinct[c] > 1:
                total += self.w * self.n - self.sigma[c]
        return total

    def joint(self) -> int:
        if any(self.distinct[c] > 1 for c in self.src._var_ids):
            return 0
        return self.ok


class _SourceIndex:
    """Index of one source rule (all normalised children share its lhs)."""

    def __init__(self, source_id: str, children: list[CfdRule], dataset: Dataset):
        self.source_id = source_id
        self.children = children
        self.dataset = dataset
        self.lhs = children[0].lhs
        self.lhs_pattern = children[0].lhs_pattern
        self.var_children = [c for c in children if not c.is_constant]
        self.const_children = [c for c in children if c.is_constant]
        self._var_ids = [c.id for c in self.var_children]
        self.mentioned = set(self.lhs) | {c.rhs for c in children}
        self.groups: dict[tuple[str, ...], _Group] = {}
        self.key_of: dict[str, tuple[str, ...]] = {}
        self.context_count = 0
        # running totals, adjusted on every membership change
        self.vio_w: dict[str, float] = {c.id: 0.0 for c in children}
        self.sat_n: dict[str, int] = {c.id: 0 for c in children}
        self.joint_sat = 0
        self.version = 0

    def build(self) -> None:
        """Place every in-context tuple, then total each group once."""
        for t in self.dataset.tuples:
            if not matches_pattern(t, self.lhs, self.lhs_pattern):
                continue
            key = tuple(t.cells[a] for a in self.lhs)
            group = self.groups.get(key)
            if group is None:
                group = _Group(self._var_ids)
                self.groups[key] = group
            group.add(t, self)
            self.key_of[t.id] = key
            self.context_count += 1
            for child in self.const_children:
                if self._const_status(t, child):
                    self.vio_w[child.id] += t.weight
                else:
                    self.sat_n[child.id] += 1
        for group in self.groups.values():
            self._add_group_totals(group, sign=1)

    # -- group-level totals --------------------------------------------------

    def _add_group_totals(self, group: _Group | None, sign: int) -> None:
        """Fold one group's variable-child and joint contributions into the
        running totals (sign +1) or out of them (sign -1).  Constant-child
        totals are per tuple and maintained separately."""
        if group is None or not group.members:
            return
        n = len(group.members)
        all_unanimous = True
        for c in self._var_ids:
            self.vio_w[c] += sign * group.var_contribution(c)
            if group.unanimous(c):
                self.sat_n[c] += sign * n
            else:
                all_unanimous = False
        if all_unanimous:
            self.joint_sat += sign * group.const_ok
        # when some variable child disagrees, no member satisfies jointly

    def _const_status(self, t: Tuple, child: CfdRule) -> bool:
        """True when the in-context tuple violates the constant child."""
        return t.cells[child.rhs] != child.rhs_pattern

    # -- membership ------------------------------------------------------------

    def add_tuple(self, t: Tuple) -> None:
        if not matches_pattern(t, self.lhs, self.lhs_pattern):
            return
        self.version += 1
        key = tuple(t.cells[a] for a in self.lhs)
        group = self.groups.get(key)
        self._add_group_totals(group, sign=-1)
        if group is None:
            group = _Group(self._var_ids)
            self.groups[key] = group
        group.add(t, self)
        self.key_of[t.id] = key
        self.context_count += 1
        for child in self.const_children:
            if self._const_status(t, child):
                self.vio_w[child.id] += t.weight
            else:
                self.sat_n[child.id] += 1
        self._add_group_totals(group, sign=1)

    def remove_tuple(self, t: Tuple) -> None:
        key = self.key_of.get(t.id)
        if key is None:
            return
        self.version += 1
        group = self.groups[key]
        self._add_group_totals(group, sign=-1)
        group.remove(t, self)
        del self.key_of[t.id]
        self.context_count -= 1
        for child in self.const_children:
            if self._const_status(t, child):
                self.vio_w[child.id] -= t.weight
            else:
                self.sat_n[child.id] -= 1
        if not group.members:
            del self.groups[key]
        else:
            self._add_group_totals(group, sign=1)

    # -- queries -----------------------------------------------------------------

    def vio_count(self, t: Tuple, child: CfdRule) -> int:
        key = self.key_of.get(t.id)
        if key is None:
            return 0
        if child.is_constant:
            return 1 if self._const_status(t, child) else 0
        group = self.groups[key]
        return len(group.members) - group.hist[child.id].get(t.cells[child.rhs], 0)

    def partners(self, t: Tuple, child: CfdRule, order: dict[str, int]) -> list[str]:
        key = self.key_of.get(t.id)
        if key is None or child.is_constant:
            return []
        group = self.groups[key]
        own = t.cells[child.rhs]
        out = [
            tid
            for tid in group.members
            if tid != t.id and self.dataset.tuple(tid).cells[child.rhs] != own
        ]
        out.sort(key=order.__getitem__)
        return out

    def source_vio_total(self) -> float:
        return sum(self.vio_w[c.id] for c in self.children)


class ViolationIndex:
    """Live violation state of one dataset under one rule set."""

    def __init__(self, dataset: Dataset, rules: RuleSet):
        self.dataset = dataset
        self.rules = rules
        self.row_order = {t.id: i for i, t in enumerate(dataset.tuples)}
        self.sources: dict[str, _SourceIndex] = {}
        for source_id, children in rules.by_source.items():
            src = _SourceIndex(source_id, children, dataset)
            src.build()
            self.sources[source_id] = src

    # -- per-tuple queries ----------------------------------------------------

    def _source_of(self, rule: CfdRule) -> _SourceIndex:
        return self.sources[rule.source_id]

    def tuple_violation_count(self, tid: str, rule: CfdRule) -> int:
        return self._source_of(rule).vio_count(self.dataset.tuple(tid), rule)

    def is_violating(self, tid: str, rule: CfdRule) -> bool:
        return self.tuple_violation_count(tid, rule) > 0

    def violated_rules(self, tid: str) -> list[str]:
        t = self.dataset.tuple(tid)
        out = []
        for rule in self.rules:
            if self._source_of(rule).vio_count(t, rule) > 0:
                out.append(rule.id)
        return out

    def partners(self, tid: str, rule: CfdRule) -> list[str]:
        """Ids of in-context tuples sharing the lhs with ``tid`` but
        disagreeing on the rhs, in dataset row order."""
        return self._source_of(rule).partners(
            self.dataset.tuple(tid), rule, self.row_order
        )

    def group_members(self, tid: str, source_id: str) -> list[str]:
        src = self.sources[source_id]
        key = src.key_of.get(tid)
        if key is None:
            return []
        return sorted(src.groups[key].members, key=self.row_order.__getitem__)

    # -- totals ------------------------------------------------------------------

    def rule_violation_total(self, rule: CfdRule) -> float:
        return self._source_of(rule).vio_w[rule.id]

    def source_violation_total(self, source_id: str) -> float:
        return self.sources[source_id].source_vio_total()

    def total_violations(self) -> float:
        return sum(s.source_vio_total() for s in self.sources.values())

    def satisfying_count(self, rule: CfdRule) -> int:
        return self._source_of(rule).sat_n[rule.id]

    def joint_satisfying_count(self, source_id: str) -> int:
        return self.sources[source_id].joint_sat

    def context_count(self, source_id: str) -> int:
        return self.sources[source_id].context_count

    def in_context(self, source_id: str, tuple_id: str) -> bool:
        return tuple_id in self.sources[source_id].key_of

    def source_version(self, source_id: str) -> int:
        return self.sources[source_id].version

    # -- mutation ------------------------------------------------------------------

    def apply_cell_change(self, tid: str, attr: str, value: str) -> ChangeDelta:
        """Write one cell and report every per-tuple violation count that
        changed.  A write of the current value is a no-op with an empty
        delta; so is a write on an attribute no rule mentions."""
        t = self.dataset.tuple(tid)
        old = t.cells[attr]
        if old == value:
            return ChangeDelta(tid, attr, old, value, [])
        touched = [s for s in self.sources.values() if attr in s.mentioned]

        affected: dict[str, dict[str, None]] = {}
        before: dict[tuple[str, str], int] = {}
        for src in touched:
            ids: dict[str, None] = {tid: None}
            key = src.key_of.get(tid)
            if key is not None:
                for member in src.groups[key].members:
                    ids[member] = None
            post_cells = dict(t.cells)
            post_cells[attr] = value
            post_t = Tuple(tid, post_cells, t.weight)
            if matches_pattern(post_t, src.lhs, src.lhs_pattern):
                post_key = tuple(post_cells[a] for a in src.lhs)
                post_group = src.groups.get(post_key)
                if post_group is not None:
                    for member in post_group.members:
                        ids[member] = None
            affected[src.source_id] = ids
            for child in src.children:
                for uid in ids:
                    before[(child.id, uid)] = src.vio_count(self.dataset.tuple(uid), child)

        for src in touched:
            src.remove_tuple(t)
        t.cells[attr] = value
        for src in touched:
            src.add_tuple(t)

        entries: list[DeltaEntry] = []
        for src in touched:
            for child in src.children:
                for uid in affected[src.source_id]:
                    b = before[(child.id, uid)]
                    a = src.vio_count(self.dataset.tuple(uid), child)
                    if a != b:
                        entries.append(DeltaEntry(child.id, uid, b, a))
        entries.sort(key=lambda e: (e.rule_id, self.row_order[e.tuple_id]))
        return ChangeDelta(tid, attr, old, value, entries)

    # -- hypothetical counts ------------------------------------------------------

    def hypothetical_source_counts(
        self, source_id: str, tid: str, attr: str, value: str
    ) -> tuple[float, int]:
        """(weighted violation total, joint satisfying count) for one source
        rule as they would be after setting ``tid.attr = value``, computed
        on aggregate overlays without touching the live state.  Cost is
        O(children + distinct group values), independent of group size."""
        src = self.sources[source_id]
        vio_now = src.source_vio_total()
        sat_now = src.joint_sat
        if attr not in src.mentioned:
            return vio_now, sat_now
        t = self.dataset.tuple(tid)
        if t.cells[attr] == value:
            return vio_now, sat_now

        post_cells = dict(t.cells)
        post_cells[attr] = value
        post_t = Tuple(tid, post_cells, t.weight)

        old_key = src.key_of.get(tid)
        new_key = (
            tuple(post_cells[a] for a in src.lhs)
            if matches_pattern(post_t, src.lhs, src.lhs_pattern)
            else None
        )

        vio = vio_now
        sat = sat_now

        # constant children contribute per in-context tuple
        for child in src.const_children:
            if old_key is not None and src._const_status(t, child):
                vio -= t.weight
            if new_key is not None and src._const_status(post_t, child):
                vio += t.weight

        overlays: dict[tuple[str, ...], _GroupOverlay] = {}
        for key in (old_key, new_key):
            if key is not None and key not in overlays:
                overlays[key] = _GroupOverlay(src, src.groups.get(key))
        for o in overlays.values():
            vio -= o.var_vio()
            sat -= o.joint()
        if old_key is not None:
            overlays[old_key].shift(t, -1)
        if new_key is not None:
            overlays[new_key].shift(post_t, +1)
        for o in overlays.values():
            vio += o.var_vio()
            sat += o.joint()
        return vio, sat


# -- module-level operations ----------------------------------------------


def detect_all(dataset: Dataset, rules: RuleSet) -> tuple[dict[str, list[str]], ViolationIndex]:
    """Scan the dataset and return (dirty map, index).  The dirty map has
    one entry per violating tuple listing the rules it violates, in rule
    order; clean tuples do not appear."""
    index = ViolationIndex(dataset, rules)
    dirty: dict[str, list[str]] = {}
    for t in dataset.tuples:
        violated = index.violated_rules(t.id)
        if violated:
            dirty[t.id] = violated
    return dirty, index


def total_violations(dataset: Dataset, rules: RuleSet) -> float:
    return ViolationIndex(dataset, rules).total_violations()


def tuple_violation_count(dataset: Dataset, rules: RuleSet, tid: str, rule_id: str) -> int:
    index = ViolationIndex(dataset, rules)
    return index.tuple_violation_count(tid, rules.rule(rule_id))


def satisfying_count(dataset: Dataset, rule: CfdRule) -> int:
    """Tuples that match the rule's lhs pattern and do not violate it.
    Out-of-context tuples never count, even though they satisfy the rule
    vacuously."""
    in_ctx = [t for t in dataset.tuples if rule.in_context(t)]
    if rule.is_constant:
        return sum(1 for t in in_ctx if t.cells[rule.rhs] == rule.rhs_pattern)
    by_key: dict[tuple[str, ...], dict[str, int]] = {}
    for t in in_ctx:
        hist = by_key.setdefault(rule.lhs_key(t), {})
        hist[t.cells[rule.rhs]] = hist.get(t.cells[rule.rhs], 0) + 1
    return sum(sum(h.values()) for h in by_key.values() if len(h) == 1)


def joint_satisfying_count(dataset: Dataset, children: list[CfdRule]) -> int:
    """Tuples in the shared context satisfying every child of one source
    rule at once; this is the satisfying count the gain denominators use."""
    first = children[0]
    const = [c for c in children if c.is_constant]
    variable = [c for c in children if not c.is_constant]
    groups: dict[tuple[str, ...], list[Tuple]] = {}
    for t in dataset.tuples:
        if first.in_context(t):
            groups.setdefault(first.lhs_key(t), []).append(t)
    count = 0
    for members in groups.values():
        candidates = members
        for child in variable:
            if len({m.cells[child.rhs] for m in members}) > 1:
                candidates = []
                break
        for m in candidates:
            if all(m.cells[c.rhs] == c.rhs_pattern for c in const):
                count += 1
    return count

"""Candidate update generation for dirty cells.

For a dirty tuple t and an attribute B, suggestions come from three
scenarios over the rules t currently violates:

1. B is the right side of a violated constant rule: suggest the rule's
   constant.
2. B is the right side of a violated variable rule: suggest a value
   taken from t's disagreeing partners.
3. B sits on the left side of some violated rule: search a pool built
   from (a) constants that any rule's lhs pattern places on B and
   (b) the B values of tuples matching the triggering rule's remaining
   pattern constants.  Pool values must pass an admissibility check:
   writing them may not leave the original violation in place.

The best suggestion wins by similarity to the current value; ties fall
to the lower scenario number, then the more frequent pool value, then
the lexicographically smallest.  Zero-similarity suggestions are kept:
a repair may share no characters with the value it replaces.
"""
from __future__ import annotations

from .model import Tuple
from .rules import CfdRule
from .state import DISCARDED, CandidateUpdate, RepairState

__all__ = ["update_attribute_tuple", "generate_all"]


def _admissible(state: RepairState, t: Tuple, attr: str, value: str, mentioning: list[CfdRule]) -> bool:
    """A pool value is admissible when, written into t[attr], every
    currently violated rule mentioning attr loses its original violation.

    Constant rules are re-checked outright.  For a variable rule whose
    rhs is the changed attribute the group is unchanged, so the new
    value must agree with every other group member.  A change on a
    variable rule's lhs always moves t out of its current group, which
    removes the original disagreement; violations arising in the new
    group are new violations and not this check's concern.
    """
    for rule in mentioning:
        if rule.is_constant:
            cells = dict(t.cells)
            cells[attr] = value
            overlay = Tuple(t.id, cells, t.weight)
            if rule.in_context(overlay) and cells[rule.rhs] != rule.rhs_pattern:
                return False
        elif rule.rhs == attr:
            for member in state.index.group_members(t.id, rule.source_id):
                if member != t.id and state.dataset.value(member, attr) != value:
                    return False
    return True


def _pool_for_lhs(state: RepairState, t: Tuple, attr: str, lhs_rules: list[CfdRule]) -> dict[str, int]:
    """Scenario-3 candidate pool with occurrence counts: rule constants
    at the attribute first, then the attribute's values in tuples
    matching each triggering rule's remaining pattern constants."""
    pool: dict[str, int] = {}
    for v in state.rules.lhs_constants_at(attr):
        pool[v] = pool.get(v, 0) + 1
    for rule in lhs_rules:
        constraints: list[tuple[str, str]] = []
        for a, p in zip(rule.lhs, rule.lhs_pattern):
            if a != attr and p is not None:
                constraints.append((a, p))
        if rule.rhs != attr and rule.rhs_pattern is not None:
            constraints.append((rule.rhs, rule.rhs_pattern))
        for other in state.dataset.tuples:
            if all(other.cells[a] == p for a, p in constraints):
                v = other.cells[attr]
                pool[v] = pool.get(v, 0) + 1
    return pool


def update_attribute_tuple(state: RepairState, tid: str, attr: str) -> CandidateUpdate | None:
    """Find the best admissible suggestion for one cell and install it as
    the cell's pending candidate, replacing any previous one.  Returns
    nothing when the cell is not changeable or no suggestion survives;
    a previous pending candidate is discarded in that case too."""
    old = state.pending.get((tid, attr))
    if not state.is_changeable(tid, attr):
        if old is not None:
            state.remove_candidate(old, DISCARDED)
        return None
    t = state.dataset.tuple(tid)
    violated = [state.rules.rule(rid) for rid in state.dirty.get(tid, ())]
    mentioning = [r for r in violated if r.mentions(attr)]
    if not mentioning:
        if old is not None:
            state.remove_candidate(old, DISCARDED)
        return None

    current = t.cells[attr]
    prevented = state.prevented(tid, attr)
    entries: dict[tuple[str, int], int] = {}

    def offer(value: str, scenario: int, freq: int = 1) -> None:
        if value == current or value in prevented:
            return
        key = (value, scenario)
        entries[key] = entries.get(key, 0) + freq

    for rule in mentioning:
        if rule.rhs == attr and rule.is_constant:
            offer(rule.rhs_pattern, 1)
        elif rule.rhs == attr:
            partner_values: dict[str, int] = {}
            for pid in state.index.partners(tid, rule):
                v = state.dataset.value(pid, attr)
                partner_values[v] = partner_values.get(v, 0) + 1
            for v, n in partner_values.items():
                offer(v, 2, n)

    lhs_rules = [r for r in mentioning if attr in r.lhs]
    if lhs_rules:
        for v, n in _pool_for_lhs(state, t, attr, lhs_rules).items():
            if v == current or v in prevented:
                continue
            if _admissible(state, t, attr, v, mentioning):
                offer(v, 3, n)

    if not entries:
        if old is not None:
            state.remove_candidate(old, DISCARDED)
        return None

    scored = [
        (state.sim(current, v), scenario, freq, v)
        for (v, scenario), freq in entries.items()
    ]
    scored.sort(key=lambda e: (-e[0], e[1], -e[2], e[3]))
    score, scenario, _, value = scored[0]

    deps: set[tuple[str, str]] = set()
    for rule in mentioning:
        for c in rule.attributes:
            deps.add((tid, c))
        if not rule.is_constant:
            for pid in state.index.partners(tid, rule):
                for c in rule.attributes:
                    deps.add((pid, c))

    candidate = CandidateUpdate(
        id=state.next_update_id(),
        tuple_id=tid,
        attribute=attr,
        value=value,
        score=score,
        scenario=scenario,
        rule_ids=tuple(r.id for r in mentioning),
        created_at=state.generation,
        deps=frozenset(deps),
    )
    state.add_candidate(candidate)
    return candidate


def generate_all(state: RepairState) -> None:
    """Run the per-cell search for every dirty tuple and every attribute,
    in dataset row order then schema order."""
    dirty_ids = [t.id for t in state.dataset.tuples if t.id in state.dirty]
    for tid in dirty_ids:
        for attr in state.dataset.schema.attributes:
            update_attribute_tuple(state, tid, attr)

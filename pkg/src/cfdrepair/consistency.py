"""Feedback application and update-pool consistency.

Applying a decision to one cell can resolve violations, create new ones
and invalidate suggestions that were computed against the previous
database instance.  This module owns that whole transition.  Two
invariants hold after every event:

(i)  every tuple violating some rule is on the dirty list, and only
     those tuples are;
(ii) no pending candidate depends on a cell value written after the
     candidate was generated.

Confirming a cell can cascade: when a constant rule becomes violated on
a tuple whose left-side cells were all fixed before this event, the
rule's constant is the only possible repair and is written outright.
Such writes run through the same pipeline and may cascade further.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import generator
from .state import (
    CONFIRMED,
    DISCARDED,
    FORCED,
    PENDING,
    REJECTED,
    REPLACED,
    RETAINED,
    CandidateUpdate,
    Cell,
    RepairState,
)
from .violations import ViolationIndex

__all__ = [
    "Feedback",
    "AppliedWrite",
    "FeedbackResult",
    "StaleFeedbackError",
    "apply_feedback",
    "ingest_external_change",
    "check_invariants",
]

FEEDBACK_KINDS = ("confirm", "reject", "retain", "replace")


class StaleFeedbackError(Exception):
    """The referenced update is unknown or no longer pending; the state
    was not modified.  Signals a lost race between the UI and the
    engine."""


@dataclass(frozen=True)
class Feedback:
    kind: str
    new_value: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in FEEDBACK_KINDS:
            raise ValueError(f"unknown feedback kind: {self.kind!r}")
        if self.kind == "replace" and self.new_value is None:
            raise ValueError("replace feedback needs a value")


@dataclass(frozen=True)
class AppliedWrite:
    """One cell actually written, with the value it replaced."""

    tuple_id: str
    attribute: str
    old_value: str
    new_value: str
    forced: bool


@dataclass
class FeedbackResult:
    """Everything one feedback event changed, for logs and the UI."""

    update_id: str
    kind: str
    writes: list[AppliedWrite] = field(default_factory=list)
    discarded: list[str] = field(default_factory=list)
    created: list[str] = field(default_factory=list)
    revisited: list[Cell] = field(default_factory=list)


def apply_feedback(state: RepairState, update_id: str, feedback: Feedback) -> FeedbackResult:
    """Apply one decision about a pending candidate and restore both
    consistency invariants before returning."""
    candidate = state.by_id.get(update_id)
    if (
        candidate is None
        or candidate.status != PENDING
        or state.pending.get(candidate.cell) is not candidate
    ):
        raise StaleFeedbackError(f"update {update_id!r} is not pending")

    tid, attr = candidate.cell
    result = FeedbackResult(update_id=update_id, kind=feedback.kind)

    if feedback.kind == "retain":
        state.mark_unchangeable(tid, attr)
        state.remove_candidate(candidate, RETAINED)
        return result

    if feedback.kind == "reject":
        state.prevent(tid, attr, candidate.value)
        state.remove_candidate(candidate, REJECTED)
        fresh = generator.update_attribute_tuple(state, tid, attr)
        if fresh is not None:
            result.created.append(fresh.id)
        return result

    if feedback.kind == "confirm":
        value = candidate.value
        state.remove_candidate(candidate, CONFIRMED)
    else:
        value = feedback.new_value
        state.remove_candidate(candidate, REPLACED)
    state.mark_unchangeable(tid, attr)
    _propagate(
        state,
        first=(tid, attr, value),
        pre_flags=frozenset(state.unchangeable_cells() - {(tid, attr)}),
        result=result,
    )
    return result


def ingest_external_change(state: RepairState, tid: str, attr: str, value: str) -> FeedbackResult:
    """Run an out-of-band cell write through the consistency pipeline.
    Unlike feedback, it does not fix the cell, and forced propagation is
    judged against the flags as they stand now."""
    result = FeedbackResult(update_id="", kind="external")
    existing = state.pending.get((tid, attr))
    if existing is not None:
        state.remove_candidate(existing, DISCARDED)
        result.discarded.append(existing.id)
    _propagate(state, first=(tid, attr, value), pre_flags=state.unchangeable_cells(), result=result)
    return result


def _propagate(
    state: RepairState,
    first: tuple[str, str, str],
    pre_flags: frozenset[Cell],
    result: FeedbackResult,
) -> None:
    """Write one cell, follow every forced consequence, then drop and
    regenerate candidates so both invariants hold."""
    queue: list[tuple[str, str, str, bool]] = [(*first, False)]
    written: dict[Cell, None] = {}
    revisit: dict[Cell, None] = {}

    while queue:
        tid, attr, value, forced = queue.pop(0)
        if forced:
            state.mark_unchangeable(tid, attr)
        delta = state.index.apply_cell_change(tid, attr, value)
        state.record_write(tid, attr)
        written[(tid, attr)] = None
        if delta.old_value != delta.new_value:
            result.writes.append(
                AppliedWrite(tid, attr, delta.old_value, delta.new_value, forced)
            )

        for entry in delta.entries:
            if entry.after > 0:
                state.dirty_add(entry.tuple_id, entry.rule_id)
            else:
                state.dirty_remove(entry.tuple_id, entry.rule_id)

        for rule in state.rules.mentioning(attr):
            for uid in delta.touched(rule.id):
                for c in rule.attributes:
                    revisit[(uid, c)] = None
            if state.index.tuple_violation_count(tid, rule) == 0:
                continue
            if rule.is_constant:
                if all((tid, c) in pre_flags for c in rule.lhs):
                    target = (tid, rule.rhs)
                    if target not in written and state.is_changeable(*target):
                        queue.append((tid, rule.rhs, rule.rhs_pattern, True))
                else:
                    for c in rule.attributes:
                        if c != attr:
                            revisit[(tid, c)] = None
            else:
                for pid in state.index.partners(tid, rule):
                    for c in rule.attributes:
                        revisit[(pid, c)] = None

    # drop candidates invalidated by this event: cells slated for another
    # look, cells fixed by a write, and candidates derived from any
    # written cell
    to_drop: dict[str, CandidateUpdate] = {}
    for cell in written:
        for c in state.dependents_of(cell):
            to_drop[c.id] = c
    for cell in revisit:
        c = state.pending.get(cell)
        if c is not None:
            to_drop[c.id] = c
    for cell in written:
        c = state.pending.get(cell)
        if c is not None:
            to_drop[c.id] = c

    regen: dict[Cell, None] = dict(revisit)
    for c in sorted(to_drop.values(), key=lambda u: int(u.id[1:])):
        regen[c.cell] = None
        state.remove_candidate(c, DISCARDED)
        result.discarded.append(c.id)

    attr_order = {a: i for i, a in enumerate(state.dataset.schema.attributes)}
    ordered = sorted(
        (cell for cell in regen if cell not in written),
        key=lambda cell: (state.index.row_order[cell[0]], attr_order[cell[1]]),
    )
    for tid, attr in ordered:
        fresh = generator.update_attribute_tuple(state, tid, attr)
        if fresh is not None:
            result.created.append(fresh.id)
    result.revisited.extend(ordered)


def check_invariants(state: RepairState) -> list[str]:
    """Recompute everything from scratch and report every way the live
    state disagrees.  Empty report means healthy."""
    problems: list[str] = []
    fresh = ViolationIndex(state.dataset.copy(), state.rules)

    for t in state.dataset.tuples:
        expected = fresh.violated_rules(t.id)
        actual = state.dirty.get(t.id, [])
        if expected != actual:
            problems.append(
                f"dirty list for {t.id}: expected {expected}, recorded {actual}"
            )

    for rule in state.rules:
        live = state.index.rule_violation_total(rule)
        want = fresh.rule_violation_total(rule)
        if abs(live - want) > 1e-9 * max(1.0, abs(want)):
            problems.append(f"violation total for {rule.id}: {live} != {want}")
        if state.index.satisfying_count(rule) != fresh.satisfying_count(rule):
            problems.append(f"satisfying count for {rule.id} drifted")
    for source_id in state.rules.by_source:
        if state.index.joint_satisfying_count(source_id) != fresh.joint_satisfying_count(source_id):
            problems.append(f"joint satisfying count for {source_id} drifted")
        if state.index.context_count(source_id) != fresh.context_count(source_id):
            problems.append(f"context count for {source_id} drifted")

    for cell, candidate in state.pending.items():
        tid, attr = cell
        if candidate.status != PENDING:
            problems.append(f"{candidate.id} in pool with status {candidate.status}")
        if state.is_stale(candidate):
            problems.append(f"{candidate.id} depends on modified cells")
        if not state.is_changeable(tid, attr):
            problems.append(f"{candidate.id} targets unchangeable cell {cell}")
        current = state.dataset.value(tid, attr)
        if candidate.value == current:
            problems.append(f"{candidate.id} suggests the current value")
        if candidate.value in state.prevented(tid, attr):
            problems.append(f"{candidate.id} suggests a prevented value")
        if abs(candidate.score - state.sim(current, candidate.value)) > 1e-9:
            problems.append(f"{candidate.id} score does not match its value")
        if not state.is_dirty(tid):
            problems.append(f"{candidate.id} targets a clean tuple")

    return problems

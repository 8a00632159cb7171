"""Group pending updates and rank the groups by expected quality gain.

Candidates that write the same value into the same attribute form one
group.  The expected gain of a group weighs, per source rule, how many
violations each member would remove if it turned out to be correct,
normalized by how many in-context tuples would then satisfy the rule,
and scaled by the member's confirm probability and the rule's share of
the dataset.

Gain arithmetic runs on scratch overlays of the violation index, so
ranking never mutates session state.  Per-candidate stats are cached
and reused as long as none of the involved source rules changed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .model import DataError, Dataset
from .rules import RuleSet, matches_pattern
from .state import CandidateUpdate, RepairState

GroupKey = tuple[str, str]


@dataclass
class UpdateGroup:
    """All pending candidates suggesting the same (attribute, value)."""

    key: GroupKey
    members: list[CandidateUpdate]
    gain: float = 0.0

    @property
    def attribute(self) -> str:
        return self.key[0]

    @property
    def value(self) -> str:
        return self.key[1]

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SourceDelta:
    """Violation and satisfaction counts for one source rule, before and
    after hypothetically applying one candidate."""

    vio_before: float
    vio_after: float
    satisfying_before: int
    satisfying_after: int


@dataclass(frozen=True)
class GainStats:
    """Per-candidate gain ingredients, keyed by source rule id.  Source
    rules that do not mention the candidate's attribute are omitted;
    their before and after counts are equal and contribute nothing."""

    update_id: str
    p_tilde: float
    per_source: dict[str, SourceDelta] = field(default_factory=dict)


def group_updates(pending: Iterable[CandidateUpdate]) -> list[UpdateGroup]:
    """Partition candidates into groups keyed by (attribute, value)."""
    groups: dict[GroupKey, UpdateGroup] = {}
    for c in pending:
        key = (c.attribute, c.value)
        g = groups.get(key)
        if g is None:
            groups[key] = UpdateGroup(key, [c])
        else:
            g.members.append(c)
    return list(groups.values())


def compute_rule_weights(dataset: Dataset, rules: RuleSet) -> dict[str, float]:
    """Per source rule, the fraction of tuples matching its lhs pattern."""
    n = len(dataset.tuples)
    if n == 0:
        raise DataError("cannot weight rules against an empty dataset")
    weights: dict[str, float] = {}
    for source_id, children in rules.by_source.items():
        head = children[0]
        count = sum(
            1 for t in dataset.tuples if matches_pattern(t, head.lhs, head.lhs_pattern)
        )
        weights[source_id] = count / n
    return weights


def _matches_with(t, attrs, pattern, attr: str, value: str) -> bool:
    """Pattern match with one cell hypothetically overwritten."""
    for a, p in zip(attrs, pattern):
        v = value if a == attr else t.cells[a]
        if p is not None and p != v:
            return False
    return True


def gain_stats(candidate: CandidateUpdate, state: RepairState, p_tilde: float) -> GainStats:
    """Before and after counts for every source rule the candidate's
    attribute appears in; the after side is simulated on an overlay.
    Sources whose counts provably cannot move, because the tuple sits
    outside their context both before and after the write, are left
    out: their delta is zero and they contribute nothing to the gain."""
    per_source: dict[str, SourceDelta] = {}
    t = state.dataset.tuple(candidate.tuple_id)
    for source_id in state.rules.sources_mentioning(candidate.attribute):
        head = state.rules.by_source[source_id][0]
        in_before = state.index.in_context(source_id, candidate.tuple_id)
        if candidate.attribute in head.lhs:
            in_after = _matches_with(
                t, head.lhs, head.lhs_pattern, candidate.attribute, candidate.value
            )
        else:
            in_after = in_before
        if not in_before and not in_after:
            continue
        vio_before = state.index.source_violation_total(source_id)
        sat_before = state.index.joint_satisfying_count(source_id)
        vio_after, sat_after = state.index.hypothetical_source_counts(
            source_id, candidate.tuple_id, candidate.attribute, candidate.value
        )
        per_source[source_id] = SourceDelta(vio_before, vio_after, sat_before, sat_after)
    return GainStats(candidate.id, p_tilde, per_source)


def estimate_group_gain(
    group: UpdateGroup, stats: dict[str, GainStats], weights: dict[str, float]
) -> float:
    """Expected gain of verifying the whole group, treating members as
    independent: sum over source rules of w_i times each member's
    confirm-weighted violation reduction, normalized by the number of
    tuples that would satisfy the rule after the member's write."""
    gain = 0.0
    for member in group.members:
        st = stats[member.id]
        for source_id, delta in st.per_source.items():
            w = weights.get(source_id, 0.0)
            if w == 0.0:
                continue
            denom = max(1, delta.satisfying_after)
            gain += w * st.p_tilde * (delta.vio_before - delta.vio_after) / denom
    return gain


def estimate_group_gain_two_term(
    group: UpdateGroup, stats: dict[str, GainStats], weights: dict[str, float]
) -> float:
    """Same quantity in its uncollapsed form: the expected loss of the
    database given the group minus the probability-weighted losses of
    the accept and reject outcomes.  Rejecting changes nothing, so the
    reject branch reuses the before counts; the closed form above is
    the algebraic collapse of this expression."""
    expected_given_group = 0.0
    outcome_losses = 0.0
    for member in group.members:
        st = stats[member.id]
        p = st.p_tilde
        accept_loss = 0.0
        reject_loss = 0.0
        for source_id, delta in st.per_source.items():
            w = weights.get(source_id, 0.0)
            d_accept = max(1, delta.satisfying_after)
            d_reject = max(1, delta.satisfying_before)
            expected_given_group += w * (
                p * delta.vio_before / d_accept + (1 - p) * delta.vio_before / d_reject
            )
            accept_loss += w * delta.vio_after / d_accept
            reject_loss += w * delta.vio_before / d_reject
        outcome_losses += p * accept_loss + (1 - p) * reject_loss
    return expected_given_group - outcome_losses


def rank_groups(groups: list[UpdateGroup]) -> list[UpdateGroup]:
    """Descending gain; ties prefer larger groups, then the smaller key."""
    return sorted(groups, key=lambda g: (-g.gain, -g.size, g.key))


def group_budget(group: UpdateGroup, effort: int, g_max: float) -> int:
    """How many members the user should verify by hand before the rest
    may be delegated.  High-gain groups get small budgets (the learner
    sees their feedback first and they pay off regardless); the count
    scales with remaining effort and is clamped to the group size.  A
    non-positive maximum gain means nothing is worth delegating."""
    if g_max <= 0:
        return group.size
    d = math.floor(effort * (1.0 - group.gain / g_max) + 0.5)
    return max(0, min(group.size, d))


class GroupRanker:
    """Rank the live candidate pool against the current session state.

    ``p_tilde_of`` supplies each candidate's confirm probability; the
    default falls back to the candidate's similarity score.  Gain stats
    are cached per candidate and recomputed only when one of the source
    rules they depend on has applied a change since.
    """

    def __init__(self, state: RepairState, p_tilde_of: Callable[[CandidateUpdate], float] | None = None):
        self.state = state
        self.p_tilde_of = p_tilde_of or (lambda c: c.score)
        self._cache: dict[str, tuple[dict[str, SourceDelta], dict[str, int]]] = {}

    def _stats_for(self, candidate: CandidateUpdate) -> GainStats:
        # The per-source deltas depend only on the data and the rules, so
        # they stay valid across retrains; the confirm probability is read
        # fresh on every call instead of being baked into the cache.
        index = self.state.index
        cached = self._cache.get(candidate.id)
        if cached is not None:
            per_source, versions = cached
            if all(index.source_version(s) == v for s, v in versions.items()):
                return GainStats(candidate.id, self.p_tilde_of(candidate), per_source)
        stats = gain_stats(candidate, self.state, self.p_tilde_of(candidate))
        versions = {s: index.source_version(s) for s in stats.per_source}
        self._cache[candidate.id] = (stats.per_source, versions)
        return stats

    def invalidate(self) -> None:
        """Drop all cached stats (sources or weights changed wholesale)."""
        self._cache.clear()

    def weights(self) -> dict[str, float]:
        n = len(self.state.dataset.tuples)
        return {
            source_id: self.state.index.context_count(source_id) / n
            for source_id in self.state.rules.by_source
        }

    def ranked(self) -> list[UpdateGroup]:
        pending = self.state.pending_in_order()
        groups = group_updates(pending)
        weights = self.weights()
        for g in groups:
            stats = {m.id: self._stats_for(m) for m in g.members}
            g.gain = estimate_group_gain(g, stats, weights)
        live = {c.id for c in pending}
        for dead in [uid for uid in self._cache if uid not in live]:
            del self._cache[dead]
        return rank_groups(groups)

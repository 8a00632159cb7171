"""End-to-end repair sessions: strategies, the simulated user, reports.

One Session object owns the mutable repair state, the feedback models,
the ranking cache, the quality tracker and the event log.  The strategy
runners drive it with a simulated user; the HTTP service drives the
same object with a human.

Strategies:

- ``gdr``: rank groups by expected gain, label the most uncertain
  members first, delegate a group's remainder to the models once they
  are trained and their predictions on the last labeled batch were all
  correct and the group's verification budget is spent.
- ``gdr-no-learning``: same ranking, every member labeled by the user.
- ``gdr-s-learning``: like gdr but the labeled members are picked at
  random instead of by uncertainty.
- ``active-learning``: no grouping; labels globally by uncertainty and
  reports, at each feedback level, the quality reached by applying the
  model trained at that level to everything still pending.
- ``greedy``: largest group first, every member labeled.
- ``random``: groups in seeded random order, every member labeled.
- ``auto``: apply every pending candidate scoring at or above the
  threshold, no feedback at all.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .consistency import Feedback, FeedbackResult, StaleFeedbackError, apply_feedback
from .evaluation import (
    PrecisionRecall,
    QualityTracker,
    SessionReport,
    precision_recall,
)
from .learner import LABEL_FOR_KIND, Learner, order_by_uncertainty
from .model import DataError, Dataset, Tuple
from .ranking import GroupKey, GroupRanker, UpdateGroup, group_budget, group_updates
from .rules import RuleSet
from .state import CandidateUpdate, RepairState

STRATEGIES = (
    "gdr",
    "gdr-no-learning",
    "gdr-s-learning",
    "active-learning",
    "greedy",
    "random",
    "auto",
)
LEARNING_STRATEGIES = frozenset({"gdr", "gdr-s-learning", "active-learning"})
SIMULATED_STRATEGIES = frozenset(s for s in STRATEGIES if s != "auto")


class SchemaMismatch(DataError):
    """Working data and ground truth disagree on schema or tuple ids."""


@dataclass(frozen=True)
class SessionConfig:
    strategy: str = "gdr"
    budget: int | None = None
    batch_size: int = 5
    seed: int = 0
    threshold: float = 0.8
    k_reveal: int = 3
    committee: int = 10
    min_examples: int = 10

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy: {self.strategy!r}")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


class SimulatedUser:
    """Answers from the ground truth: confirm a correct suggestion,
    retain a cell that is already right, otherwise reject.  Once the
    same cell would collect ``k_reveal`` rejections the user loses
    patience and replaces the value with the true one instead."""

    def __init__(self, truth: Dataset, k_reveal: int = 3):
        self.truth = truth
        self.k_reveal = k_reveal
        self.rejections: dict[tuple[str, str], int] = {}

    def feedback(self, state: RepairState, candidate: CandidateUpdate) -> Feedback:
        truth_value = self.truth.value(candidate.tuple_id, candidate.attribute)
        if candidate.value == truth_value:
            return Feedback("confirm")
        if state.dataset.value(candidate.tuple_id, candidate.attribute) == truth_value:
            return Feedback("retain")
        count = self.rejections.get(candidate.cell, 0) + 1
        if count >= self.k_reveal:
            return Feedback("replace", truth_value)
        self.rejections[candidate.cell] = count
        return Feedback("reject")


class Session:
    """Shared core for simulated runs and the HTTP service."""

    def __init__(
        self,
        dataset: Dataset,
        rules: RuleSet,
        truth: Dataset | None = None,
        config: SessionConfig | None = None,
        learning: bool | None = None,
    ):
        self.config = config or SessionConfig()
        if truth is not None:
            _check_same_shape(dataset, truth)
        self.truth = truth
        self.initial_dataset = dataset.copy()
        self.state = RepairState.initialize(dataset, rules)
        if learning is None:
            learning = self.config.strategy in LEARNING_STRATEGIES
        self.learner: Learner | None = None
        if learning:
            self.learner = Learner(
                dataset.schema,
                seed=self.config.seed,
                k=self.config.committee,
                min_examples=self.config.min_examples,
            )
        p_tilde = None
        if self.learner is not None:
            learner = self.learner
            p_tilde = lambda c: learner.confirm_probability(self.state, c)
        self.ranker = GroupRanker(self.state, p_tilde)
        self.tracker = QualityTracker(self.state, truth)
        self.initial_dirty = len(self.state.dirty)
        self.initial_violations = self.state.index.total_violations()
        self.initial_pending = len(self.state.pending)
        self.rng = random.Random(f"session|{self.config.seed}")
        self.user_labels = 0
        self.change_log: list = []
        self.events: list[dict] = []
        self.curve: list[list] = [[0, self.tracker.improvement(self.state)]]
        self._label_outcomes: dict[str, list[bool | None]] = {}

    # -- identity of updates over the wire --------------------------------

    def wire_id(self, candidate: CandidateUpdate) -> str:
        """Stable external id: tuple, attribute and the state generation
        the candidate was computed at, so a superseded suggestion can
        never be confused with its replacement."""
        return f"{candidate.tuple_id}:{candidate.attribute}:{candidate.created_at}"

    def resolve_wire_id(self, wire_id: str) -> CandidateUpdate:
        parts = wire_id.rsplit(":", 2)
        if len(parts) != 3:
            raise StaleFeedbackError(f"malformed update id: {wire_id!r}")
        tid, attr, generation = parts
        candidate = self.state.pending.get((tid, attr))
        if candidate is None or str(candidate.created_at) != generation:
            raise StaleFeedbackError(f"update {wire_id!r} is not pending")
        return candidate

    # -- feedback plumbing --------------------------------------------------

    def budget_left(self) -> bool:
        return self.config.budget is None or self.user_labels < self.config.budget

    def apply(self, candidate: CandidateUpdate, feedback: Feedback, source: str) -> FeedbackResult:
        before = self.state.dataset.tuple(candidate.tuple_id)
        snapshot = Tuple(before.id, dict(before.cells), before.weight)
        old_value = snapshot.cells[candidate.attribute]
        result = apply_feedback(self.state, candidate.id, feedback)
        self.change_log.extend(result.writes)
        if source == "user":
            self.user_labels += 1
            if self.learner is not None:
                self.learner.observe(snapshot, candidate, feedback.kind)
                if self.user_labels % self.config.batch_size == 0:
                    self.learner.retrain()
        improvement_now = self.tracker.improvement(self.state)
        self.events.append(
            {
                "index": len(self.events),
                "update_id": candidate.id,
                "wire_id": self.wire_id(candidate),
                "tuple_id": candidate.tuple_id,
                "attribute": candidate.attribute,
                "old_value": old_value,
                "suggested_value": candidate.value,
                "kind": feedback.kind,
                "new_value": feedback.new_value,
                "source": source,
                "feedback_count": self.user_labels,
                "improvement": improvement_now,
                "loss": self.tracker.loss(self.state),
                "writes": [
                    [w.tuple_id, w.attribute, w.old_value, w.new_value, w.forced]
                    for w in result.writes
                ],
                "discarded": result.discarded,
                "created": result.created,
            }
        )
        self.curve.append([self.user_labels, improvement_now])
        return result

    def label_with_user(self, user: SimulatedUser, candidate: CandidateUpdate) -> Feedback:
        prediction = None
        if self.learner is not None:
            prediction = self.learner.predict(self.state, candidate)
        feedback = user.feedback(self.state, candidate)
        self.apply(candidate, feedback, "user")
        outcomes = self._label_outcomes.setdefault(candidate.attribute, [])
        if prediction is None:
            outcomes.append(None)
        else:
            outcomes.append(prediction.label == LABEL_FOR_KIND[feedback.kind])
        return feedback

    def last_batch_all_correct(self, attribute: str) -> bool:
        """Whether the model agreed with the user on the last batch of
        labels given for this attribute; the streak that earns the model
        the right to decide the rest of a group on its own."""
        n = self.config.batch_size
        tail = self._label_outcomes.get(attribute, [])[-n:]
        return len(tail) == n and all(outcome is True for outcome in tail)

    # -- groups ------------------------------------------------------------

    def live_members(self, key: GroupKey) -> list[CandidateUpdate]:
        return [
            c
            for c in self.state.pending_in_order()
            if (c.attribute, c.value) == key
        ]

    def strategy_groups(self) -> list[UpdateGroup]:
        strategy = self.config.strategy
        if strategy == "greedy":
            groups = group_updates(self.state.pending_in_order())
            return sorted(groups, key=lambda g: (-g.size, g.key))
        if strategy == "random":
            groups = group_updates(self.state.pending_in_order())
            self.rng.shuffle(groups)
            return groups
        return self.ranker.ranked()

    def delegate_members(self, members: list[CandidateUpdate]) -> int:
        """Let the trained models decide each still-pending member they
        are confident about, most uncertain first.  Members whose
        committee vote falls short of the confidence threshold stay
        pending for the user.  Returns the number of decisions made."""
        assert self.learner is not None
        decided = 0
        for candidate in order_by_uncertainty(self.state, members, self.learner):
            if self.state.pending.get(candidate.cell) is not candidate:
                continue
            prediction = self.learner.predict(self.state, candidate)
            if prediction is None or max(prediction.fractions) < self.config.threshold:
                continue
            self.apply(candidate, Feedback(prediction.label), "model")
            decided += 1
        return decided

    def apply_final_models(self) -> int:
        """Decide everything still pending with whatever models are
        trained; used once the user feedback budget is exhausted."""
        if self.learner is None:
            return 0
        self.learner.retrain()
        snapshot = list(self.state.pending_in_order())
        return self.delegate_members(snapshot)

    def metrics(self) -> dict:
        return {
            "initial_loss": self.tracker.initial_loss,
            "loss": self.tracker.loss(self.state),
            "improvement": self.tracker.improvement(self.state),
            "violations": self.state.index.total_violations(),
            "dirty_tuples": len(self.state.dirty),
            "pending": len(self.state.pending),
            "user_labels": self.user_labels,
            "events": len(self.events),
        }


def _check_same_shape(dataset: Dataset, truth: Dataset) -> None:
    if truth.schema.attributes != dataset.schema.attributes:
        raise SchemaMismatch(
            "ground truth columns "
            f"{list(truth.schema.attributes)} do not match data columns "
            f"{list(dataset.schema.attributes)}"
        )
    data_ids = {t.id for t in dataset.tuples}
    truth_ids = {t.id for t in truth.tuples}
    if data_ids != truth_ids:
        missing = sorted(data_ids - truth_ids)[:3]
        extra = sorted(truth_ids - data_ids)[:3]
        raise SchemaMismatch(
            f"ground truth tuple ids differ from data (missing {missing}, extra {extra})"
        )


# -- strategy runners ---------------------------------------------------------


def run_session(
    config: SessionConfig,
    dataset: Dataset,
    rules: RuleSet,
    truth: Dataset | None = None,
    _checkpoint_curve: bool = True,
) -> SessionReport:
    """Run one complete repair session and report it.  The input dataset
    is copied, never modified."""
    if config.strategy in SIMULATED_STRATEGIES and truth is None:
        raise SchemaMismatch(
            f"strategy {config.strategy!r} simulates a user and needs ground truth"
        )
    session = Session(dataset.copy(), rules, truth, config)
    user = SimulatedUser(truth, config.k_reveal) if truth is not None else None

    if config.strategy == "auto":
        run_auto(session)
    elif config.strategy == "active-learning":
        _run_active_learning(session, user)
    else:
        _run_grouped(session, user)

    report = _build_report(session)
    if config.strategy == "active-learning" and _checkpoint_curve:
        report = _with_active_learning_curve(report, session, config, dataset, rules, truth)
    return report


def _run_grouped(session: Session, user: SimulatedUser) -> None:
    config = session.config
    delegating = config.strategy in ("gdr", "gdr-s-learning")
    effort = session.initial_dirty
    while session.state.pending and session.budget_left():
        groups = session.strategy_groups()
        if not groups:
            break
        group = groups[0]
        if delegating:
            budget = group_budget(group, effort, groups[0].gain)
            _interactive_round(session, user, group, budget)
        else:
            _verify_group(session, user, group)
    if delegating:
        session.apply_final_models()


def _interactive_round(
    session: Session, user: SimulatedUser, group: UpdateGroup, budget: int
) -> None:
    """Label members of one group until the models earn the remainder."""
    learner = session.learner
    labeled = 0
    while session.budget_left():
        members = session.live_members(group.key)
        if not members:
            return
        if (
            learner is not None
            and learner.is_trained(group.attribute)
            and labeled >= budget
            and session.last_batch_all_correct(group.attribute)
            and session.delegate_members(members) > 0
        ):
            # Members the models left undecided fall back to the user.
            continue
        if session.config.strategy == "gdr-s-learning":
            target = session.rng.choice(members)
        else:
            target = order_by_uncertainty(session.state, members, learner)[0]
        session.label_with_user(user, target)
        labeled += 1


def _verify_group(session: Session, user: SimulatedUser, group: UpdateGroup) -> None:
    while session.budget_left():
        members = session.live_members(group.key)
        if not members:
            return
        target = order_by_uncertainty(session.state, members, None)[0]
        session.label_with_user(user, target)


def _run_active_learning(session: Session, user: SimulatedUser) -> None:
    while session.state.pending and session.budget_left():
        members = session.state.pending_in_order()
        target = order_by_uncertainty(session.state, members, session.learner)[0]
        session.label_with_user(user, target)
    session.apply_final_models()


def run_auto(session: Session) -> int:
    applied = 0
    snapshot = [c.id for c in session.state.pending_in_order()]
    for update_id in snapshot:
        candidate = session.state.by_id.get(update_id)
        if candidate is None or session.state.pending.get(candidate.cell) is not candidate:
            continue
        if candidate.score >= session.config.threshold:
            session.apply(candidate, Feedback("confirm"), "system")
            applied += 1
    return applied


def _with_active_learning_curve(
    report: SessionReport,
    session: Session,
    config: SessionConfig,
    dataset: Dataset,
    rules: RuleSet,
    truth: Dataset | None,
) -> SessionReport:
    """Rebuild the curve so each point reflects a model trained with
    that much feedback deciding everything still pending: point f is
    the final improvement of an isolated run with budget f."""
    used = session.user_labels
    checkpoints = list(range(0, used, config.batch_size))
    curve: list[list] = []
    for f in checkpoints:
        sub = run_session(
            replace(config, budget=f), dataset, rules, truth, _checkpoint_curve=False
        )
        curve.append([f, sub.final["improvement"]])
    curve.append([used, session.tracker.improvement(session.state)])
    report.curve = curve
    report.curve_normalized = _normalized_curves(curve, used, session.initial_dirty)
    return report


def _normalized_curves(curve: list[list], max_feedback: int, initial_dirty: int) -> dict:
    return {
        "by_max_feedback": [
            [f / max_feedback if max_feedback else 0.0, imp] for f, imp in curve
        ],
        "by_initial_dirty": [
            [f / initial_dirty if initial_dirty else 0.0, imp] for f, imp in curve
        ],
    }


def _build_report(session: Session) -> SessionReport:
    config = session.config
    state = session.state
    if session.truth is not None:
        pr = precision_recall(session.change_log, session.initial_dataset, session.truth)
    else:
        changed = {
            (w.tuple_id, w.attribute)
            for w in session.change_log
            if session.initial_dataset.value(w.tuple_id, w.attribute) != w.new_value
        }
        pr = PrecisionRecall(1.0, 0.0, False, len(changed), 0, 0)
    return SessionReport(
        config={
            "strategy": config.strategy,
            "budget": config.budget,
            "batch_size": config.batch_size,
            "seed": config.seed,
            "threshold": config.threshold,
            "k_reveal": config.k_reveal,
        },
        initial={
            "loss": session.tracker.initial_loss,
            "violations": session.initial_violations,
            "dirty_tuples": session.initial_dirty,
            "pending": session.initial_pending,
        },
        final={
            "loss": session.tracker.loss(state),
            "violations": state.index.total_violations(),
            "improvement": session.tracker.improvement(state),
            "user_labels": session.user_labels,
            "changed_cells": pr.changed,
            "dirty_tuples": len(state.dirty),
            "pending": len(state.pending),
        },
        curve=session.curve,
        curve_normalized=_normalized_curves(
            session.curve, session.user_labels, session.initial_dirty
        ),
        precision=pr.precision,
        recall=pr.recall,
        precision_defined=pr.precision_defined,
        events=session.events,
    )

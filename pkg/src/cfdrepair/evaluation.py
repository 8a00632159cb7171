"""Ground-truth metrics, synthetic error injection and report emission.

The loss of a database counts weighted rule violations normalized by
how many in-context tuples the ground truth would leave satisfying each
rule; improvement is the fraction of the initial loss repaired so far.
Precision and recall judge applied changes cell by cell against the
ground truth.

Everything here is deliberately separate from the ranking estimates:
ranking never sees the ground truth, and these metrics never use the
ranking approximations.
"""
from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Iterable

from .model import Dataset
from .rules import RuleSet
from .state import RepairState
from .violations import ViolationIndex, joint_satisfying_count

log = logging.getLogger(__name__)

EDIT_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"


def quality_loss(
    d: Dataset, rules: RuleSet, weights: dict[str, float], d_opt: Dataset | None
) -> float:
    """Weighted violation mass of ``d``, each source rule normalized by
    the number of tuples satisfying it in the repaired reference.  With
    no reference the divisor is 1 and the value is a raw weighted count."""
    index = ViolationIndex(d, rules)
    total = 0.0
    for source_id, children in rules.by_source.items():
        denom = 1
        if d_opt is not None:
            denom = max(1, joint_satisfying_count(d_opt, children))
        total += weights.get(source_id, 0.0) * index.source_violation_total(source_id) / denom
    return total


def improvement(initial_loss: float, current_loss: float) -> float:
    """Fraction of the initial loss repaired, clamped to [0, 1].  A
    dataset that started clean has nothing to improve and reports 1."""
    if initial_loss <= 0.0:
        return 1.0
    return min(1.0, max(0.0, (initial_loss - current_loss) / initial_loss))


class QualityTracker:
    """Incremental loss and improvement over a live session state.

    Satisfying counts of the reference dataset are fixed, so they are
    computed once; the violation side reads the live index.
    """

    def __init__(self, state: RepairState, truth: Dataset | None):
        self.n = len(state.dataset.tuples)
        self.sat_opt: dict[str, int] = {}
        for source_id, children in state.rules.by_source.items():
            denom = 1
            if truth is not None:
                denom = max(1, joint_satisfying_count(truth, children))
            self.sat_opt[source_id] = denom
        self.initial_loss = self.loss(state)

    def loss(self, state: RepairState) -> float:
        total = 0.0
        for source_id in state.rules.by_source:
            w = state.index.context_count(source_id) / self.n
            total += w * state.index.source_violation_total(source_id) / self.sat_opt[source_id]
        return total

    def improvement(self, state: RepairState) -> float:
        return improvement(self.initial_loss, self.loss(state))


@dataclass(frozen=True)
class PrecisionRecall:
    precision: float
    recall: float
    precision_defined: bool
    changed: int
    correct: int
    initially_wrong: int


def precision_recall(
    change_log: Iterable, d_initial: Dataset, d_opt: Dataset
) -> PrecisionRecall:
    """Judge the applied changes: a changed cell is correct when its
    final value equals the ground truth.  Recall divides by the number
    of cells that were wrong before the session.  With no changes,
    precision is reported as 1 with ``precision_defined`` false."""
    final: dict[tuple[str, str], str] = {}
    for w in change_log:
        final[(w.tuple_id, w.attribute)] = w.new_value
    changed = {
        cell: v for cell, v in final.items() if d_initial.value(*cell) != v
    }
    correct = sum(1 for cell, v in changed.items() if d_opt.value(*cell) == v)
    initially_wrong = 0
    for t in d_initial.tuples:
        opt = d_opt.tuple(t.id)
        for attr in d_initial.schema.attributes:
            if t.cells[attr] != opt.cells[attr]:
                initially_wrong += 1
    if not changed:
        return PrecisionRecall(1.0, 0.0, False, 0, 0, initially_wrong)
    recall = correct / initially_wrong if initially_wrong else 1.0
    return PrecisionRecall(
        correct / len(changed), recall, True, len(changed), correct, initially_wrong
    )


# -- error injection -------------------------------------------------------


@dataclass(frozen=True)
class ErrorSpec:
    """Law for synthetic corruption: an exact fraction of tuples gets
    one to ceil(m/3) of its attributes perturbed, each by a short
    character edit or by swapping in another value from the column."""

    tuple_rate: float = 0.30
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.tuple_rate <= 1.0:
            raise ValueError(f"tuple_rate out of range: {self.tuple_rate}")


def _character_edit(rng: random.Random, original: str) -> str:
    for _ in range(16):
        out = original
        for _ in range(rng.randint(1, 2)):
            if out and rng.random() < 2 / 3:
                pos = rng.randrange(len(out))
                if rng.random() < 0.5:
                    replacement = rng.choice(EDIT_ALPHABET.replace(out[pos], "") or EDIT_ALPHABET)
                    out = out[:pos] + replacement + out[pos + 1 :]
                else:
                    out = out[:pos] + out[pos + 1 :]
            else:
                pos = rng.randrange(len(out) + 1)
                out = out[:pos] + rng.choice(EDIT_ALPHABET) + out[pos:]
        if out != original:
            return out
    return original + rng.choice(EDIT_ALPHABET)


def inject_errors(
    clean: Dataset, spec: ErrorSpec, rules: RuleSet | None = None
) -> tuple[Dataset, Dataset]:
    """Return (dirty copy, untouched truth).  Perturbed values always
    differ from the original; a column with a single distinct value
    cannot be swapped and falls back to a character edit."""
    if rules is not None:
        probe = ViolationIndex(clean.copy(), rules)
        if probe.total_violations() > 0:
            log.warning("injecting errors into a dataset that already violates rules")
    rng = random.Random(spec.seed)
    attributes = clean.schema.attributes
    m = len(attributes)
    max_attrs = max(1, math.ceil(m / 3))
    domains = {
        attr: sorted(set(clean.column_values(attr))) for attr in attributes
    }
    dirty = clean.copy()
    ids = [t.id for t in clean.tuples]
    count = math.floor(spec.tuple_rate * len(ids) + 0.5)
    for tid in rng.sample(ids, count):
        for attr in rng.sample(list(attributes), rng.randint(1, max_attrs)):
            original = dirty.value(tid, attr)
            pool = [v for v in domains[attr] if v != original]
            if rng.random() < 0.5 or not pool:
                value = _character_edit(rng, original)
            else:
                value = rng.choice(pool)
            dirty.set_value(tid, attr, value)
    return dirty, clean


# -- reports ----------------------------------------------------------------


@dataclass
class SessionReport:
    """Everything one run produced, serializable as versioned JSON and
    as plot-ready CSV rows."""

    config: dict
    initial: dict
    final: dict
    curve: list[list[float]]
    curve_normalized: dict
    precision: float
    recall: float
    precision_defined: bool
    events: list[dict] = field(default_factory=list)

    def to_document(self) -> dict:
        return {
            "version": 1,
            "config": self.config,
            "initial": self.initial,
            "final": self.final,
            "curve": self.curve,
            "curve_normalized": self.curve_normalized,
            "precision": self.precision,
            "recall": self.recall,
            "precision_defined": self.precision_defined,
            "events": self.events,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, indent=2) + "\n"

    def csv_rows(self) -> list[str]:
        strategy = self.config.get("strategy", "")
        seed = self.config.get("seed", "")
        return [
            f"{feedback},{imp!r},{strategy},{seed}" for feedback, imp in self.curve
        ]


def reports_to_csv(reports: Iterable[SessionReport]) -> str:
    lines = ["feedback,improvement,strategy,seed"]
    for report in reports:
        lines.extend(report.csv_rows())
    return "\n".join(lines) + "\n"

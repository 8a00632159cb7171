"""Per-attribute feedback models: small random forests built from scratch.

Every labeled candidate becomes a training example whose features are
the tuple's cell values, the suggested value, and the string similarity
between the current and suggested value.  One committee of decision
trees is kept per attribute; its vote fractions supply the confirm
probability used in ranking and the entropy score used to put the most
informative candidates in front of the user first.

Determinism matters more than speed here: tree growth draws every
random choice from a seeded generator keyed by stable strings, so a
retrain with identical inputs yields an identical forest.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import Schema, Tuple
from .similarity import SimilarityFn, similarity
from .state import CandidateUpdate, RepairState

LABELS = ("confirm", "reject", "retain")
_LABEL_INDEX = {label: i for i, label in enumerate(LABELS)}

# feedback kinds map onto the three classes; replacing the suggestion
# with a different value tells the model the suggestion was wrong
LABEL_FOR_KIND = {
    "confirm": "confirm",
    "reject": "reject",
    "retain": "retain",
    "replace": "reject",
}

Features = tuple


def entropy(fractions: Sequence[float]) -> float:
    """Base-3 entropy of a class distribution, in [0, 1]."""
    h = 0.0
    for f in fractions:
        if f > 0.0:
            h -= f * math.log(f, 3)
    return min(1.0, max(0.0, h))


def _majority(counts: Sequence[int]) -> str:
    best = 0
    for i in range(1, len(LABELS)):
        if counts[i] > counts[best]:
            best = i
    return LABELS[best]


@dataclass(frozen=True)
class TrainingExample:
    features: Features
    label: str


@dataclass(frozen=True)
class Prediction:
    label: str
    fractions: tuple[float, float, float]
    confirm_prob: float
    uncertainty: float


def encode_features(t: Tuple, schema: Schema, attribute: str, value: str, sim: SimilarityFn) -> Features:
    """Fixed layout: every cell in schema order, the suggested value,
    then the similarity between the current and suggested value."""
    cells = tuple(t.cells[a] for a in schema.attributes)
    return cells + (value, sim(t.cells[attribute], value))


# -- decision trees -------------------------------------------------------
#
# nodes are plain lists so the forest serializes as-is:
#   ["leaf", label]
#   ["eq", feature, value, if_true, if_false]    categorical test
#   ["le", feature, threshold, if_true, if_false]  numeric test


def _class_counts(examples: list[TrainingExample], indices: list[int]) -> list[int]:
    counts = [0, 0, 0]
    for i in indices:
        counts[_LABEL_INDEX[examples[i].label]] += 1
    return counts


def _entropy_of_counts(counts: Sequence[int], total: int) -> float:
    h = 0.0
    for c in counts:
        if c:
            f = c / total
            h -= f * math.log(f, 3)
    return h


def _grow(
    rng: random.Random,
    examples: list[TrainingExample],
    indices: list[int],
    n_features: int,
    numeric_feature: int,
    subsample: int,
) -> list:
    counts = _class_counts(examples, indices)
    total = len(indices)
    nonzero = [c for c in counts if c]
    if len(nonzero) <= 1:
        return ["leaf", _majority(counts)]

    node_h = _entropy_of_counts(counts, total)
    features = rng.sample(range(n_features), min(subsample, n_features))
    best_gain = 1e-12
    best_test = None

    for f in features:
        if f == numeric_feature:
            values = sorted({examples[i].features[f] for i in indices})
            tests = [
                (v_lo + v_hi) / 2.0 for v_lo, v_hi in zip(values, values[1:])
            ]
            kind = "le"
        else:
            tests = list(dict.fromkeys(examples[i].features[f] for i in indices))
            kind = "eq"
        for pivot in tests:
            left_counts = [0, 0, 0]
            n_left = 0
            for i in indices:
                x = examples[i].features[f]
                hit = (x <= pivot) if kind == "le" else (x == pivot)
                if hit:
                    left_counts[_LABEL_INDEX[examples[i].label]] += 1
                    n_left += 1
            if n_left == 0 or n_left == total:
                continue
            right_counts = [c - l for c, l in zip(counts, left_counts)]
            n_right = total - n_left
            child_h = (
                n_left / total * _entropy_of_counts(left_counts, n_left)
                + n_right / total * _entropy_of_counts(right_counts, n_right)
            )
            gain = node_h - child_h
            if gain > best_gain:
                best_gain = gain
                best_test = (kind, f, pivot)

    if best_test is None:
        return ["leaf", _majority(counts)]

    kind, f, pivot = best_test
    left_idx: list[int] = []
    right_idx: list[int] = []
    for i in indices:
        x = examples[i].features[f]
        hit = (x <= pivot) if kind == "le" else (x == pivot)
        (left_idx if hit else right_idx).append(i)
    left = _grow(rng, examples, left_idx, n_features, numeric_feature, subsample)
    right = _grow(rng, examples, right_idx, n_features, numeric_feature, subsample)
    return [kind, f, pivot, left, right]


def _tree_label(node: list, features: Features) -> str:
    while node[0] != "leaf":
        kind, f, pivot, left, right = node
        x = features[f]
        hit = (x <= pivot) if kind == "le" else (x == pivot)
        node = left if hit else right
    return node[1]


class AttributeModel:
    """Committee of ``k`` trees for one attribute's candidates."""

    def __init__(self, attribute: str, n_features: int, k: int, seed: str):
        self.attribute = attribute
        self.n_features = n_features
        self.k = k
        self.seed = seed
        self.examples: list[TrainingExample] = []
        self.trees: list[list] | None = None
        self.stale = False

    def add_example(self, example: TrainingExample) -> None:
        # The committee keeps answering from its last build until the
        # next scheduled retrain picks the new example up.
        self.examples.append(example)
        self.stale = True

    def distinct_labels(self) -> int:
        return len({e.label for e in self.examples})

    def train(self) -> None:
        n = len(self.examples)
        subsample = math.ceil(math.log2(self.n_features) + 1)
        self.stale = False
        self.trees = []
        for i in range(self.k):
            rng = random.Random(f"{self.seed}|{self.attribute}|{n}|tree{i}")
            bootstrap = [self.examples[rng.randrange(n)] for _ in range(n)]
            tree = _grow(
                rng,
                bootstrap,
                list(range(n)),
                self.n_features,
                numeric_feature=self.n_features - 1,
                subsample=subsample,
            )
            self.trees.append(tree)

    def predict(self, features: Features) -> Prediction:
        if self.trees is None:
            raise ValueError(f"model for {self.attribute!r} is not trained")
        counts = [0, 0, 0]
        for tree in self.trees:
            counts[_LABEL_INDEX[_tree_label(tree, features)]] += 1
        fractions = tuple(c / self.k for c in counts)
        return Prediction(
            label=_majority(counts),
            fractions=fractions,
            confirm_prob=fractions[0],
            uncertainty=entropy(fractions),
        )


class Learner:
    """All per-attribute models of one session, plus the fallbacks that
    apply while a model has too little feedback to be trustworthy."""

    def __init__(
        self,
        schema: Schema,
        seed: int | str = 0,
        k: int = 10,
        min_examples: int = 10,
        sim: SimilarityFn = similarity,
    ):
        self.schema = schema
        self.seed = str(seed)
        self.k = k
        self.min_examples = min_examples
        self.sim = sim
        self.n_features = len(schema.attributes) + 2
        self.models: dict[str, AttributeModel] = {}

    def _model(self, attribute: str) -> AttributeModel:
        m = self.models.get(attribute)
        if m is None:
            m = AttributeModel(attribute, self.n_features, self.k, self.seed)
            self.models[attribute] = m
        return m

    def encode(self, t: Tuple, attribute: str, value: str) -> Features:
        return encode_features(t, self.schema, attribute, value, self.sim)

    def observe(self, t: Tuple, candidate: CandidateUpdate, kind: str) -> None:
        """Record one piece of feedback; the tuple snapshot must be the
        one the user judged, i.e. taken before the write was applied."""
        label = LABEL_FOR_KIND[kind]
        features = self.encode(t, candidate.attribute, candidate.value)
        self._model(candidate.attribute).add_example(TrainingExample(features, label))

    def retrain(self) -> None:
        """(Re)build every committee whose training set changed and now
        has enough examples.  One-sided training sets are fine: a
        committee that has only ever seen retains votes retain with
        full confidence, which is exactly what lets it take over the
        groups the user keeps waving through."""
        for m in self.models.values():
            if (m.trees is None or m.stale) and self._meets_threshold(m):
                m.train()

    def _meets_threshold(self, m: AttributeModel) -> bool:
        return len(m.examples) >= self.min_examples

    def is_trained(self, attribute: str) -> bool:
        m = self.models.get(attribute)
        return m is not None and m.trees is not None

    def predict(self, state: RepairState, candidate: CandidateUpdate) -> Prediction | None:
        if not self.is_trained(candidate.attribute):
            return None
        t = state.dataset.tuple(candidate.tuple_id)
        features = self.encode(t, candidate.attribute, candidate.value)
        return self.models[candidate.attribute].predict(features)

    def confirm_probability(self, state: RepairState, candidate: CandidateUpdate) -> float:
        p = self.predict(state, candidate)
        return candidate.score if p is None else p.confirm_prob

    # -- persistence -------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "seed": self.seed,
            "k": self.k,
            "min_examples": self.min_examples,
            "attributes": {
                attr: {
                    "examples": [[list(e.features), e.label] for e in m.examples],
                    "trees": m.trees,
                }
                for attr, m in sorted(self.models.items())
            },
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, schema: Schema, sim: SimilarityFn = similarity) -> "Learner":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported model version: {doc.get('version')!r}")
        learner = cls(
            schema,
            seed=doc["seed"],
            k=doc["k"],
            min_examples=doc["min_examples"],
            sim=sim,
        )
        for attr, payload in doc["attributes"].items():
            m = learner._model(attr)
            for features, label in payload["examples"]:
                m.examples.append(TrainingExample(tuple(features), label))
            m.trees = payload["trees"]
        return learner


def order_by_uncertainty(
    state: RepairState,
    members: Iterable[CandidateUpdate],
    learner: Learner | None = None,
) -> list[CandidateUpdate]:
    """Most uncertain first.  Without a trained model the similarity
    score stands in: low-scoring candidates are the least settled."""

    def sort_key(c: CandidateUpdate):
        if learner is not None:
            p = learner.predict(state, c)
            if p is not None:
                return (-p.uncertainty, c.tuple_id, c.attribute)
        return (-(1.0 - c.score), c.tuple_id, c.attribute)

    return sorted(members, key=sort_key)

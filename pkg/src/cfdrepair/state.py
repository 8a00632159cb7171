"""Mutable state of one interactive repair session.

Holds the dataset, the live violation index, the dirty list, per-cell
flags (changeable, prevented values) and the pool of pending candidate
updates.  Candidates remember which cells they were derived from; a
write to any of those cells after the candidate's creation makes it
stale, and ``dep_index`` gives the reverse mapping so staleness can be
resolved without scanning the whole pool.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import Dataset
from .rules import RuleSet
from .similarity import SimilarityFn, similarity
from .violations import ViolationIndex

Cell = tuple[str, str]

PENDING = "pending"
CONFIRMED = "confirmed"
REJECTED = "rejected"
RETAINED = "retained"
REPLACED = "replaced"
DISCARDED = "discarded"
APPLIED_BY_MODEL = "applied_by_model"
FORCED = "forced"


@dataclass
class CellState:
    """Per-cell repair flags: ``changeable`` is cleared once the value is
    known correct, ``prevented`` collects values known wrong."""

    changeable: bool = True
    prevented: set[str] = field(default_factory=set)


@dataclass
class CandidateUpdate:
    """One suggested repair: set ``tuple_id.attribute`` to ``value``.

    ``rule_ids`` are the violated rules that triggered the suggestion,
    ``deps`` the cells it was computed from (its own tuple's cells plus
    its violation partners' cells over the triggering rules), and
    ``created_at`` the state generation at creation time.  A candidate
    is stale once any dep cell was written after ``created_at``.
    """

    id: str
    tuple_id: str
    attribute: str
    value: str
    score: float
    scenario: int
    rule_ids: tuple[str, ...]
    created_at: int
    deps: frozenset[Cell]
    status: str = PENDING

    @property
    def cell(self) -> Cell:
        return (self.tuple_id, self.attribute)


class RepairState:
    """Session hub shared by the generator, the consistency manager, the
    ranker and the service layer."""

    def __init__(self, dataset: Dataset, rules: RuleSet, sim: SimilarityFn = similarity):
        self.dataset = dataset
        self.rules = rules
        self.sim = sim
        self.index = ViolationIndex(dataset, rules)
        self.dirty: dict[str, list[str]] = {}
        for t in dataset.tuples:
            violated = self.index.violated_rules(t.id)
            if violated:
                self.dirty[t.id] = violated
        self.cells: dict[Cell, CellState] = {}
        self.pending: dict[Cell, CandidateUpdate] = {}
        self.by_id: dict[str, CandidateUpdate] = {}
        self.dep_index: dict[Cell, set[str]] = {}
        self.generation = 0
        self.modified_at: dict[Cell, int] = {}
        self._update_seq = 0
        self._rule_order = {rule.id: i for i, rule in enumerate(rules)}

    @classmethod
    def initialize(cls, dataset: Dataset, rules: RuleSet, sim: SimilarityFn = similarity) -> "RepairState":
        """Detect violations and populate the initial candidate pool."""
        state = cls(dataset, rules, sim)
        from .generator import generate_all

        generate_all(state)
        return state

    # -- cell flags -----------------------------------------------------------

    def cell_state(self, tid: str, attr: str) -> CellState:
        st = self.cells.get((tid, attr))
        if st is None:
            st = CellState()
            self.cells[(tid, attr)] = st
        return st

    def is_changeable(self, tid: str, attr: str) -> bool:
        st = self.cells.get((tid, attr))
        return True if st is None else st.changeable

    def prevented(self, tid: str, attr: str) -> set[str]:
        st = self.cells.get((tid, attr))
        return set() if st is None else st.prevented

    def prevent(self, tid: str, attr: str, value: str) -> None:
        self.cell_state(tid, attr).prevented.add(value)

    def mark_unchangeable(self, tid: str, attr: str) -> None:
        self.cell_state(tid, attr).changeable = False

    def unchangeable_cells(self) -> frozenset[Cell]:
        return frozenset(c for c, st in self.cells.items() if not st.changeable)

    # -- write tracking ---------------------------------------------------------

    def record_write(self, tid: str, attr: str) -> None:
        self.generation += 1
        self.modified_at[(tid, attr)] = self.generation

    def is_stale(self, c: CandidateUpdate) -> bool:
        return any(self.modified_at.get(dep, 0) > c.created_at for dep in c.deps)

    def dependents_of(self, cell: Cell) -> list[CandidateUpdate]:
        """Pending candidates whose derivation used the given cell."""
        ids = self.dep_index.get(cell)
        if not ids:
            return []
        out = [self.by_id[uid] for uid in ids]
        out.sort(key=lambda c: int(c.id[1:]))
        return out

    # -- candidate pool -----------------------------------------------------------

    def next_update_id(self) -> str:
        self._update_seq += 1
        return f"u{self._update_seq}"

    def add_candidate(self, c: CandidateUpdate) -> None:
        old = self.pending.get(c.cell)
        if old is not None:
            self.remove_candidate(old, DISCARDED)
        self.pending[c.cell] = c
        self.by_id[c.id] = c
        for dep in c.deps:
            self.dep_index.setdefault(dep, set()).add(c.id)

    def remove_candidate(self, c: CandidateUpdate, status: str) -> None:
        if self.pending.get(c.cell) is c:
            del self.pending[c.cell]
        c.status = status
        for dep in c.deps:
            ids = self.dep_index.get(dep)
            if ids is not None:
                ids.discard(c.id)
                if not ids:
                    del self.dep_index[dep]

    def pending_in_order(self) -> list[CandidateUpdate]:
        out = list(self.pending.values())
        out.sort(key=lambda c: int(c.id[1:]))
        return out

    # -- dirty bookkeeping ------------------------------------------------------------

    def dirty_add(self, tid: str, rule_id: str) -> None:
        lst = self.dirty.get(tid)
        if lst is None:
            self.dirty[tid] = [rule_id]
        elif rule_id not in lst:
            lst.append(rule_id)
            lst.sort(key=self._rule_order.__getitem__)

    def dirty_remove(self, tid: str, rule_id: str) -> None:
        lst = self.dirty.get(tid)
        if lst is None:
            return
        if rule_id in lst:
            lst.remove(rule_id)
        if not lst:
            del self.dirty[tid]

    def violated_rules_of(self, tid: str) -> list[str]:
        return list(self.dirty.get(tid, []))

    def is_dirty(self, tid: str) -> bool:
        return tid in self.dirty

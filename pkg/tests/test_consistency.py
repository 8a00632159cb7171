import random

import pytest

from cfdrepair.consistency import (
    Feedback,
    StaleFeedbackError,
    apply_feedback,
    check_invariants,
    ingest_external_change,
)
from cfdrepair.state import RepairState

from randgen import random_instance


def test_feedback_validation():
    with pytest.raises(ValueError):
        Feedback("shrug")
    with pytest.raises(ValueError):
        Feedback("replace")
    Feedback("replace", "value")


def test_confirm_writes_and_fixes_cell(state):
    c = state.pending[("t2", "CT")]
    result = apply_feedback(state, c.id, Feedback("confirm"))
    assert [(w.tuple_id, w.attribute, w.new_value) for w in result.writes] == [
        ("t2", "CT", "MICHIGAN CITY")
    ]
    assert state.dataset.value("t2", "CT") == "MICHIGAN CITY"
    assert not state.is_changeable("t2", "CT")
    assert state.index.total_violations() == 9.0
    assert check_invariants(state) == []


def test_retain_fixes_cell_without_writing(state):
    c = state.pending[("t1", "ZIP")]
    result = apply_feedback(state, c.id, Feedback("retain"))
    assert result.writes == []
    assert state.dataset.value("t1", "ZIP") == "46360"
    assert not state.is_changeable("t1", "ZIP")
    # the tuple is still dirty through its other cell's rule
    assert state.is_dirty("t1")
    assert check_invariants(state) == []


def test_reject_prevents_value_and_regenerates(state):
    c = state.pending[("t8", "ZIP")]
    result = apply_feedback(state, c.id, Feedback("reject"))
    assert result.writes == []
    assert "46360" in state.prevented("t8", "ZIP")
    assert len(result.created) == 1
    fresh = state.pending[("t8", "ZIP")]
    assert fresh.value != "46360"
    assert check_invariants(state) == []


def test_replace_writes_user_value(state):
    c = state.pending[("t8", "CT")]
    apply_feedback(state, c.id, Feedback("replace", "NEW HAVEN"))
    assert state.dataset.value("t8", "CT") == "NEW HAVEN"
    assert not state.is_changeable("t8", "CT")
    assert not state.is_dirty("t8")
    assert check_invariants(state) == []


def test_stale_feedback_rejected(state):
    c = state.pending[("t2", "CT")]
    apply_feedback(state, c.id, Feedback("confirm"))
    with pytest.raises(StaleFeedbackError):
        apply_feedback(state, c.id, Feedback("confirm"))
    with pytest.raises(StaleFeedbackError):
        apply_feedback(state, "u999", Feedback("confirm"))


def test_confirm_cascades_into_new_suggestion(state):
    """Accepting a zip change moves the tuple into another rule's
    context, so its city suggestion must be discarded and replaced by
    that rule's constant."""
    old_ct = state.pending[("t6", "CT")]
    assert old_ct.value == "FT WAYNE"
    zip_candidate = state.pending[("t6", "ZIP")]
    result = apply_feedback(state, zip_candidate.id, Feedback("confirm"))
    assert old_ct.id in result.discarded
    new_ct = state.pending[("t6", "CT")]
    assert new_ct.value == "WESTVILLE"
    assert new_ct.scenario == 1
    assert new_ct.id in result.created
    assert check_invariants(state) == []


def test_partner_candidates_refresh_after_write(state):
    """Confirming t5's zip resolves the street-rule disagreement, so the
    partners' stale zip suggestions disappear with it."""
    c = state.pending[("t5", "ZIP")]
    assert state.pending[("t6", "ZIP")].value == "46391"
    result = apply_feedback(state, c.id, Feedback("confirm"))
    assert state.dataset.value("t5", "ZIP") == "46825"
    assert ("t6", "ZIP") not in state.pending
    assert ("t7", "ZIP") not in state.pending
    assert ("t6", "CT") not in state.pending
    assert check_invariants(state) == []


def test_external_change_runs_same_pipeline(state):
    result = ingest_external_change(state, "t2", "CT", "MICHIGAN CITY")
    assert state.dataset.value("t2", "CT") == "MICHIGAN CITY"
    # external writes do not fix the cell
    assert state.is_changeable("t2", "CT")
    assert result.kind == "external"
    assert check_invariants(state) == []


def test_accepted_write_surfaces_downstream_violation_as_suggestion():
    """A confirm that pulls the tuple into another rule's context leaves
    the user in the loop: the new violation shows up as a fresh
    suggestion, not as a silent write, because the rule's left side was
    only fixed by this very event."""
    from cfdrepair.model import Dataset
    from cfdrepair.rules import parse_rules

    ds = Dataset.from_csv_text("__id,ZIP,CT,STT\nt1,46774,BAD,XX\n")
    rules = parse_rules(
        "z: ZIP -> CT : 46774 || NEW HAVEN\ns: CT -> STT : NEW HAVEN || IN\n",
        ds.schema,
    )
    state = RepairState.initialize(ds, rules)
    assert ("t1", "STT") not in state.pending
    c = state.pending[("t1", "CT")]
    result = apply_feedback(state, c.id, Feedback("confirm"))
    assert state.dataset.value("t1", "STT") == "XX"
    stt = state.pending[("t1", "STT")]
    assert stt.value == "IN"
    assert stt.id in result.created
    apply_feedback(state, stt.id, Feedback("confirm"))
    assert state.index.total_violations() == 0.0
    assert check_invariants(state) == []


def test_external_write_into_certain_context_forces_repair():
    """When every left-side cell of a constant rule was fixed before the
    event, a write that violates the rule triggers the only possible
    repair outright."""
    from cfdrepair.model import Dataset
    from cfdrepair.rules import parse_rules

    ds = Dataset.from_csv_text("__id,ZIP,CT,STT\nt1,99999,BAD,XX\n")
    rules = parse_rules(
        "z: ZIP -> CT : 46774 || NEW HAVEN\ns: CT -> STT : NEW HAVEN || IN\n",
        ds.schema,
    )
    state = RepairState.initialize(ds, rules)
    assert state.pending == {}
    state.mark_unchangeable("t1", "ZIP")
    result = ingest_external_change(state, "t1", "ZIP", "46774")
    forced = [w for w in result.writes if w.forced]
    assert [(w.tuple_id, w.attribute, w.new_value) for w in forced] == [
        ("t1", "CT", "NEW HAVEN")
    ]
    assert state.dataset.value("t1", "CT") == "NEW HAVEN"
    assert not state.is_changeable("t1", "CT")
    # the forced write in turn surfaced the next violation as a
    # suggestion (its own rule context was fixed mid-event, not before)
    assert state.pending[("t1", "STT")].value == "IN"
    assert check_invariants(state) == []


def test_randomized_feedback_stream_keeps_invariants():
    """A few hundred randomized decisions across random instances; the
    live state must match a from-scratch recount after every event and
    each run must drain its pool."""
    events = 0
    for seed in (3, 11):
        dataset, rules = random_instance(seed, max_tuples=60)
        state = RepairState.initialize(dataset, rules)
        rng = random.Random(f"drive|{seed}")
        domains = {
            a: sorted(set(dataset.column_values(a)))
            for a in dataset.schema.attributes
        }
        guard = 0
        while state.pending:
            guard += 1
            assert guard < 10_000, "feedback loop failed to terminate"
            cell = rng.choice(sorted(state.pending))
            candidate = state.pending[cell]
            kind = rng.choice(("confirm", "reject", "retain", "replace"))
            if kind == "replace":
                value = rng.choice(domains[candidate.attribute] + ["novel"])
                if value == state.dataset.value(*cell):
                    kind = "retain"
                    feedback = Feedback("retain")
                else:
                    feedback = Feedback("replace", value)
            else:
                feedback = Feedback(kind)
            apply_feedback(state, candidate.id, feedback)
            events += 1
            problems = check_invariants(state)
            assert problems == [], problems
    assert events >= 200

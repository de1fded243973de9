"""Core data model: states, the store, config validation, run records."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from tout.model import (
    RECORD_EVENT_KINDS,
    InvalidArgumentError,
    MissingStateError,
    RunRecord,
    ScoredState,
    SearchConfig,
    SearchExhaustedError,
    State,
    StateStore,
    Transcript,
    extend_state,
    path_to_root,
)


class TestStateStore:
    def test_root_has_no_thoughts(self):
        store = StateStore()
        root = store.root("4 5 6 10")
        assert root.thoughts == ()
        assert root.depth == 0
        assert root.parent_id is None
        assert store.get(root.id) is root

    def test_extend_appends_one_thought(self):
        store = StateStore()
        root = store.root("x")
        child = extend_state(store, root, "step one")
        assert child.thoughts == ("step one",)
        assert child.depth == 1
        assert child.parent_id == root.id
        assert child.input == "x"

    def test_ids_are_distinct_and_resolvable(self):
        store = StateStore()
        root = store.root("x")
        children = [extend_state(store, root, f"t{i}") for i in range(5)]
        ids = {root.id} | {c.id for c in children}
        assert len(ids) == 6
        for c in children:
            assert store.get(c.id) == c

    def test_missing_id_raises(self):
        store = StateStore()
        store.root("x")
        with pytest.raises(MissingStateError):
            store.get(999)

    def test_len_and_iter(self):
        store = StateStore()
        root = store.root("x")
        extend_state(store, root, "a")
        assert len(store) == 2
        assert {s.id for s in store} == {0, 1}

    def test_depth_must_match_thoughts(self):
        with pytest.raises(InvalidArgumentError):
            State(input="x", thoughts=("a",), depth=2, id=0)


@given(st.lists(st.text(min_size=1, max_size=10), min_size=0, max_size=6))
def test_path_to_root_recovers_the_chain(thoughts):
    store = StateStore()
    node = store.root("problem")
    for t in thoughts:
        node = extend_state(store, node, t)
    path = path_to_root(node, store)
    assert [s.depth for s in path] == list(range(len(thoughts) + 1))
    assert path[-1] is node
    assert list(path[-1].thoughts) == thoughts


class TestSearchConfig:
    def test_defaults_validate(self):
        SearchConfig().validate()

    @pytest.mark.parametrize(
        "field,value",
        [
            ("k", 0),
            ("b", 0),
            ("T", 0),
            ("m", 0),
            ("t_min", -0.1),
            ("epsilon", 0.0),
            ("u_th", 0.0),
            ("max_outputs", 0),
            ("eval_workers", 0),
        ],
    )
    def test_bad_values_rejected(self, field, value):
        config = SearchConfig(**{field: value})
        with pytest.raises(InvalidArgumentError):
            config.validate()

    def test_t_max_below_t_min_rejected(self):
        with pytest.raises(InvalidArgumentError):
            SearchConfig(t_min=0.9, t_max=0.2).validate()

    def test_snapshot_is_json_and_stable(self):
        config = SearchConfig(k=3, b=2, m=7, seed=42)
        snap = config.snapshot()
        assert json.dumps(snap, sort_keys=True) == json.dumps(
            SearchConfig(k=3, b=2, m=7, seed=42).snapshot(), sort_keys=True
        )
        assert snap["k"] == 3 and snap["m"] == 7


class TestScoredState:
    def test_fields(self):
        store = StateStore()
        s = ScoredState(
            state=store.root("x"),
            value=2.0,
            uncertainty=0.5,
            score=4.0,
            samples=(1.0, 3.0),
            temperatures=(0.2, 1.0),
        )
        assert s.value == 2.0 and s.samples == (1.0, 3.0)

    def test_negative_uncertainty_rejected(self):
        store = StateStore()
        with pytest.raises(InvalidArgumentError):
            ScoredState(
                state=store.root("x"),
                value=1.0,
                uncertainty=-0.1,
                score=1.0,
                samples=(1.0,),
                temperatures=(0.2,),
            )

    def test_samples_and_temperatures_must_align(self):
        store = StateStore()
        with pytest.raises(InvalidArgumentError):
            ScoredState(
                state=store.root("x"),
                value=1.0,
                uncertainty=0.0,
                score=1.0,
                samples=(1.0, 2.0),
                temperatures=(0.2,),
            )


class TestTranscript:
    def test_emit_and_filter(self):
        t = Transcript()
        t.emit("expand", state_id=0)
        t.emit("generate", seconds=0.5)
        t.emit("evaluate", state_id=0, value=1.0)
        assert len(t) == 3
        kinds = [e["event"] for e in t.record_events()]
        assert "generate" not in kinds
        assert kinds == ["expand", "evaluate"]

    def test_generate_excluded_from_record_kinds(self):
        assert "generate" not in RECORD_EVENT_KINDS
        for kind in ("expand", "sample", "evaluate", "select", "prune", "final"):
            assert kind in RECORD_EVENT_KINDS

    def test_empty_transcript_is_falsy_but_not_none(self):
        # callers must test `is None`, not truthiness
        t = Transcript()
        assert not t
        assert t is not None


class TestRunRecord:
    def test_json_round_trip(self):
        record = RunRecord(
            config={"method": "tout_bfs", "digest": "abc123", "search": {"m": 5}},
            task="game24",
            problem_id="game24/1",
            events=[{"event": "final", "output": "x"}],
            final_output="x",
            verdicts={"success": 1.0},
        )
        again = RunRecord.from_json(record.to_json())
        assert again == record

    def test_json_is_one_sorted_line(self):
        record = RunRecord(
            config={},
            task="t",
            problem_id="p",
            events=[],
            final_output="",
            verdicts={},
        )
        line = record.to_json()
        assert "\n" not in line
        keys = list(json.loads(line))
        assert keys == sorted(keys)


def test_search_exhausted_error_carries_state():
    store = StateStore()
    root = store.root("x")
    err = SearchExhaustedError("nothing left", best_state=root)
    assert err.best_state is root
    assert "nothing left" in str(err)

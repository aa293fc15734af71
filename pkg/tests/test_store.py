import json

import pytest
from hypothesis import given, settings, strategies as st

from tandem.errors import ConflictError, NotFoundError
from tandem.store import SessionStore


class TestLifecycle:
    def test_create_then_load_empty(self, store):
        sid = store.create_session()
        record = store.load_session(sid)
        assert record.id == sid
        assert record.messages == []
        assert record.turns == []

    def test_unknown_session(self, store):
        with pytest.raises(NotFoundError):
            store.load_session("nope")

    def test_list_sessions(self, store):
        ids = {store.create_session() for _ in range(3)}
        assert set(store.list_sessions()) == ids


class TestEventLog:
    def test_append_three_events_round_trip(self, store, session_id):
        for i in range(3):
            store.append_event(session_id, {"kind": "message", "role": "user",
                                            "text": f"msg-{i}"})
        record = store.load_session(session_id)
        assert [m["text"] for m in record.messages] == ["msg-0", "msg-1", "msg-2"]

    def test_events_carry_schema_version(self, store, session_id):
        store.append_event(session_id, {"kind": "message", "role": "user", "text": "x"})
        log = store._log_path(session_id).read_text().strip().splitlines()
        assert all(json.loads(line)["v"] == 1 for line in log)

    def test_torn_final_line_ignored(self, store, session_id):
        store.append_message(session_id, "user", "kept")
        with open(store._log_path(session_id), "a") as fh:
            fh.write('{"v":1,"kind":"mess')  # simulated crash mid-append
        record = store.load_session(session_id)
        assert [m["text"] for m in record.messages] == ["kept"]


class TestArtifacts:
    def test_save_and_load(self, store, session_id):
        store.save_artifact(session_id, "plot1.png", b"\x89PNG fake")
        assert store.load_artifact(session_id, "plot1.png") == b"\x89PNG fake"
        record = store.load_session(session_id)
        assert record.artifacts[0]["name"] == "plot1.png"
        assert record.artifacts[0]["kind"] == "figure"

    def test_duplicate_name_conflicts(self, store, session_id):
        store.save_artifact(session_id, "a.csv", b"1")
        with pytest.raises(ConflictError):
            store.save_artifact(session_id, "a.csv", b"2")

    def test_unknown_artifact(self, store, session_id):
        with pytest.raises(NotFoundError):
            store.load_artifact(session_id, "missing.bin")

    def test_name_escaping_rejected(self, store, session_id):
        with pytest.raises(NotFoundError):
            store.load_artifact(session_id, "../../etc/passwd")


_event = st.fixed_dictionaries({
    "kind": st.just("message"),
    "role": st.sampled_from(["user", "assistant"]),
    "text": st.text(max_size=200),
})


@given(events=st.lists(_event, max_size=20))
@settings(max_examples=30, deadline=None)
def test_round_trip_identity(events, tmp_path_factory):
    store = SessionStore(tmp_path_factory.mktemp("rt"))
    sid = store.create_session()
    for ev in events:
        store.append_event(sid, ev)
    record = store.load_session(sid)
    assert [(m["role"], m["text"]) for m in record.messages] == [
        (e["role"], e["text"]) for e in events]

"""Fixture replay, live-backend retry behavior, and structured extraction."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from fgdm.errors import FixtureMiss, NoPayloadFound, ProviderUnavailable, SchemaViolation
from fgdm.gateway import (
    CompletionRequest,
    FixtureStore,
    Gateway,
    LiveBackend,
    ScriptedBackend,
    TranscriptWriter,
    extract_structured,
    first_fenced_block,
    request_digest,
)

REQ = CompletionRequest(system_text="sys", user_text="user", tag="t")


def test_digest_sensitive_to_every_field():
    base = request_digest(REQ)
    assert request_digest(CompletionRequest("sys2", "user", "t")) != base
    assert request_digest(CompletionRequest("sys", "user2", "t")) != base
    assert request_digest(CompletionRequest("sys", "user", "t2")) != base
    assert request_digest(CompletionRequest("sys", "user", "t")) == base


def test_digest_no_field_concatenation_collision():
    # separator prevents ("ab", "c") colliding with ("a", "bc")
    assert request_digest(CompletionRequest("ab", "c", "t")) != request_digest(
        CompletionRequest("a", "bc", "t")
    )


def test_empty_user_text_rejected():
    with pytest.raises(AssertionError):
        CompletionRequest(system_text="s", user_text="", tag="t")


def test_scripted_replay_and_miss():
    store = FixtureStore({request_digest(REQ): "recorded"})
    backend = ScriptedBackend(store)
    assert backend.complete(REQ).text == "recorded"
    other = CompletionRequest("sys", "user", "other-tag")
    with pytest.raises(FixtureMiss) as info:
        backend.complete(other)
    assert info.value.tag == "other-tag"


def test_fixture_store_save_load(tmp_path):
    store = FixtureStore()
    store.put("d1", "r1")
    store.put("d2", "r2")
    path = tmp_path / "fx.json"
    store.save(path)
    loaded = FixtureStore.from_file(path)
    assert len(loaded) == 2
    assert loaded.get("d1") == "r1"


def test_transcript_reloads_as_fixture_store(tmp_path):
    path = tmp_path / "transcript.jsonl"
    gw = Gateway(
        backend=ScriptedBackend(FixtureStore({request_digest(REQ): "answer"})),
        transcript=TranscriptWriter(path),
    )
    gw.complete(REQ)
    entry = json.loads(path.read_text().splitlines()[0])
    assert entry["tag"] == "t"
    assert entry["response"] == "answer"
    assert entry["digest"] == request_digest(REQ)
    replay = FixtureStore.from_file(path)
    assert ScriptedBackend(replay).complete(REQ).text == "answer"


# --- live backend against a local stub server ---


class _StubHandler(BaseHTTPRequestHandler):
    script = []  # list of status codes; last one repeats
    calls = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).calls.append(body)
        idx = min(len(type(self).calls) - 1, len(type(self).script) - 1)
        status = type(self).script[idx]
        if status == 200:
            payload = json.dumps(
                {"choices": [{"message": {"content": "live says hi"}}]}
            ).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(payload)
        else:
            self.send_response(status)
            self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()
    _StubHandler.calls = []


def test_live_backend_retries_transient_then_succeeds(stub_server):
    _StubHandler.script = [429, 503, 200]
    backend = LiveBackend(
        url=stub_server, model="m", api_key="k", backoff_base_s=0.01
    )
    resp = backend.complete(REQ)
    assert resp.text == "live says hi"
    assert resp.backend == "live"
    assert len(_StubHandler.calls) == 3
    sent = _StubHandler.calls[0]
    assert sent["messages"][0] == {"role": "system", "content": "sys"}
    assert sent["temperature"] == 0.0


def test_live_backend_exhausts_retries(stub_server):
    _StubHandler.script = [500]
    backend = LiveBackend(
        url=stub_server, model="m", api_key="k", max_retries=2, backoff_base_s=0.01
    )
    with pytest.raises(ProviderUnavailable, match="retries exhausted"):
        backend.complete(REQ)
    assert len(_StubHandler.calls) == 3  # initial try + 2 retries


def test_live_backend_non_retryable_status_fails_fast(stub_server):
    _StubHandler.script = [401]
    backend = LiveBackend(url=stub_server, model="m", api_key="k", backoff_base_s=0.01)
    with pytest.raises(ProviderUnavailable, match="401"):
        backend.complete(REQ)
    assert len(_StubHandler.calls) == 1


# --- structured extraction ---

DIAG = '{"faulty_nodes": [{"id": "n1", "reason": "r", "category": "other"}]}'


def test_extract_bare_json():
    assert extract_structured(DIAG, "diagnosis")["faulty_nodes"][0]["id"] == "n1"


def test_extract_json_with_prose_around():
    text = f"Here is my analysis.\n\n{DIAG}\n\nLet me know."
    assert extract_structured(text, "diagnosis")["faulty_nodes"][0]["id"] == "n1"


def test_extract_prefers_fenced_block():
    text = f'{{"faulty_nodes": "decoy"}}\n```json\n{DIAG}\n```'
    assert extract_structured(text, "diagnosis")["faulty_nodes"][0]["id"] == "n1"


def test_extract_first_valid_wins_when_first_is_invalid():
    invalid = '{"faulty_nodes": [{"reason": "missing id"}]}'
    text = f"```json\n{invalid}\n```\n```json\n{DIAG}\n```"
    assert extract_structured(text, "diagnosis")["faulty_nodes"][0]["id"] == "n1"


def test_extract_braces_inside_strings_ignored():
    doc = '{"faulty_nodes": [{"id": "n1", "reason": "use {x} here", "category": "other"}]}'
    assert extract_structured(f"note }} stray\n{doc}", "diagnosis")["faulty_nodes"]


def test_extract_no_payload():
    with pytest.raises(NoPayloadFound):
        extract_structured("no json here, just words", "diagnosis")


def test_extract_schema_violation_lists_problems():
    with pytest.raises(SchemaViolation) as info:
        extract_structured('{"faulty_nodes": "not a list"}', "diagnosis")
    assert info.value.schema_id == "diagnosis"
    assert info.value.problems


def test_extract_unknown_schema_id():
    with pytest.raises(ValueError):
        extract_structured("{}", "not_a_schema")


def test_first_fenced_block():
    assert first_fenced_block("```python\nx = 1\n```") == "x = 1\n"
    assert first_fenced_block("```\na\n```\n```\nb\n```") == "a\n"
    assert first_fenced_block("no fence") is None


def test_graph_spec_schema_shape():
    good = {
        "nodes": [{"id": "n0", "kind": "routine", "label": "f", "span": [1, 2]}],
        "edges": [{"src": "n0", "dst": "n0", "relation": "call"}],
    }
    assert extract_structured(json.dumps(good), "graph_spec") == good
    bad = {"nodes": [{"id": "n0"}], "edges": []}
    with pytest.raises(SchemaViolation):
        extract_structured(json.dumps(bad), "graph_spec")


def test_repair_schema_requires_plan_fields():
    with pytest.raises(SchemaViolation):
        extract_structured('{"edge_ops": []}', "repair")

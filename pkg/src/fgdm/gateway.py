"""Uniform completion interface over a live HTTP provider or a fixture replay.

The scripted backend is bit-deterministic: it answers only from recorded
fixtures keyed by a digest of the full prompt, and a miss is a hard error,
never a silent fallback to the network. The live backend talks to an
OpenAI-style chat-completions endpoint with retry/backoff on transient
failures. Every request/response pair is appended to a run transcript, and a
transcript can be reloaded as a fixture store to replay a run exactly.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import requests

from fgdm.errors import FixtureMiss, NoPayloadFound, ProviderUnavailable, SchemaViolation

SCHEMA_IDS = ("graph_spec", "diagnosis", "repair", "reconstruction")

_RETRY_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class CompletionRequest:
    system_text: str
    user_text: str
    tag: str
    temperature: float = 0.0
    max_output_tokens: int = 4096

    def __post_init__(self):
        assert self.user_text, "user_text must be non-empty"
        assert 0.0 <= self.temperature <= 1.0


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    latency_ms: int
    backend: str  # live | scripted


def request_digest(req: CompletionRequest) -> str:
    """Stable fixture key. Includes the prompt text, so any template change
    invalidates stale fixtures loudly."""
    h = hashlib.sha256()
    for part in (req.system_text, req.user_text, req.tag):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


class FixtureStore:
    """Exact-match map from request digest to recorded response text."""

    def __init__(self, fixtures: dict[str, str] | None = None):
        self._fixtures = dict(fixtures or {})

    def __len__(self) -> int:
        return len(self._fixtures)

    def get(self, digest: str) -> str | None:
        return self._fixtures.get(digest)

    def put(self, digest: str, response: str) -> None:
        self._fixtures[digest] = response

    def save(self, path) -> None:
        doc = {
            "version": 1,
            "fixtures": {d: self._fixtures[d] for d in sorted(self._fixtures)},
        }
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_file(cls, path) -> "FixtureStore":
        """Load fixtures from a fixture file or a transcript (.jsonl)."""
        if str(path).endswith(".jsonl"):
            return cls.from_transcript(path)
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls(doc["fixtures"])

    @classmethod
    def from_transcript(cls, path) -> "FixtureStore":
        fixtures: dict[str, str] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                fixtures[entry["digest"]] = entry["response"]
        return cls(fixtures)


class ScriptedBackend:
    name = "scripted"

    def __init__(self, store: FixtureStore):
        self.store = store

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        text = self.store.get(request_digest(req))
        if text is None:
            raise FixtureMiss(request_digest(req), req.tag)
        return CompletionResponse(text=text, latency_ms=0, backend="scripted")


class LiveBackend:
    """OpenAI-style chat-completions client with bounded retry."""

    name = "live"

    def __init__(
        self,
        url: str,
        model: str,
        api_key: str,
        max_retries: int = 3,
        timeout_s: float = 120.0,
        backoff_base_s: float = 0.5,
    ):
        self.url = url
        self.model = model
        self.api_key = api_key
        self.max_retries = max_retries
        self.timeout_s = timeout_s
        self.backoff_base_s = backoff_base_s

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system_text},
                {"role": "user", "content": req.user_text},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error = "no attempt made"
        start = time.monotonic()
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_base_s * (2 ** (attempt - 1)))
            try:
                resp = requests.post(
                    self.url, json=body, headers=headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                continue
            if resp.status_code in _RETRY_STATUS:
                last_error = f"status {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise ProviderUnavailable(
                    f"provider returned status {resp.status_code}: {resp.text[:500]}"
                )
            payload = resp.json()
            text = payload["choices"][0]["message"]["content"]
            latency_ms = int((time.monotonic() - start) * 1000)
            return CompletionResponse(text=text, latency_ms=latency_ms, backend="live")
        raise ProviderUnavailable(
            f"retries exhausted ({self.max_retries}) for tag {req.tag!r}: {last_error}"
        )


class TranscriptWriter:
    """Appends one JSON object per request/response pair; thread-safe."""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()

    def record(self, req: CompletionRequest, resp: CompletionResponse, digest: str) -> None:
        entry = {
            "tag": req.tag,
            "digest": digest,
            "request": {
                "system_text": req.system_text,
                "user_text": req.user_text,
                "temperature": req.temperature,
                "max_output_tokens": req.max_output_tokens,
            },
            "response": resp.text,
            "latency_ms": resp.latency_ms,
        }
        line = json.dumps(entry, ensure_ascii=False)
        with self._lock:
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(line + "\n")


@dataclass
class Gateway:
    """Backend plus transcript logging and an in-flight concurrency cap."""

    backend: object
    transcript: TranscriptWriter | None = None
    in_flight_limit: int = 4
    _sem: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self):
        self._sem = threading.Semaphore(self.in_flight_limit)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        with self._sem:
            resp = self.backend.complete(req)
        if self.transcript is not None:
            self.transcript.record(req, resp, request_digest(req))
        return resp


# --- structured output extraction ---

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_+-]*\n(.*?)```", re.DOTALL)

_validators: dict[str, jsonschema.protocols.Validator] = {}


def _validator(schema_id: str) -> jsonschema.protocols.Validator:
    if schema_id not in _validators:
        if schema_id not in SCHEMA_IDS:
            raise ValueError(f"unknown schema id {schema_id!r}")
        text = resources.files("fgdm.schemas").joinpath(f"{schema_id}.json").read_text("utf-8")
        _validators[schema_id] = jsonschema.Draft202012Validator(json.loads(text))
    return _validators[schema_id]


def _json_candidates(text: str) -> list[dict]:
    """Every parseable top-level JSON object, fenced blocks first."""
    candidates: list[dict] = []
    sources = [m.group(1) for m in _FENCE_RE.finditer(text)]
    sources.append(text)
    seen_spans: list[str] = []
    for chunk in sources:
        depth = 0
        start = None
        in_string = False
        escaped = False
        for i, c in enumerate(chunk):
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
                continue
            if c == '"':
                in_string = True
            elif c == "{":
                if depth == 0:
                    start = i
                depth += 1
            elif c == "}":
                if depth > 0:
                    depth -= 1
                    if depth == 0 and start is not None:
                        blob = chunk[start : i + 1]
                        if blob not in seen_spans:
                            seen_spans.append(blob)
                            try:
                                obj = json.loads(blob)
                            except json.JSONDecodeError:
                                obj = None
                            if isinstance(obj, dict):
                                candidates.append(obj)
                        start = None
    return candidates


def extract_structured(text: str, schema_id: str) -> dict:
    """First schema-valid JSON object in the response wins.

    Raises NoPayloadFound when no JSON object parses at all, SchemaViolation
    when objects parse but none satisfies the schema.
    """
    validator = _validator(schema_id)
    candidates = _json_candidates(text)
    if not candidates:
        raise NoPayloadFound(f"no JSON object found for schema {schema_id!r}")
    problems: list[str] = []
    for obj in candidates:
        errors = sorted(validator.iter_errors(obj), key=lambda e: list(e.absolute_path))
        if not errors:
            return obj
        problems.extend(
            f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
            for e in errors[:5]
        )
    raise SchemaViolation(schema_id, problems)


def first_fenced_block(text: str) -> str | None:
    m = _FENCE_RE.search(text)
    return m.group(1) if m else None

import json

import pytest

from mao.backends import (
    MALFORMED,
    RATE_LIMITED,
    TRANSPORT,
    BackendError,
    HttpChatBackend,
    ReplayBackend,
    ReplayExhausted,
)

MESSAGES = [{"role": "user", "content": "hello"}]


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


def reply(content):
    return FakeResponse(payload={"choices": [{"message": {"content": content}}]})


class FakeSession:
    """Feeds canned responses and records every request made."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers})
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def make_backend(responses, **kwargs):
    session = FakeSession(responses)
    sleeps = []
    backend = HttpChatBackend(
        "http://api.test/v1",
        api_key="sk-test",
        model="m1",
        session=session,
        sleeper=sleeps.append,
        **kwargs,
    )
    return backend, session, sleeps


def test_success_extracts_content_and_shapes_request():
    backend, session, _ = make_backend([reply("hi there")])
    assert backend.complete(MESSAGES) == "hi there"
    call = session.calls[0]
    assert call["url"] == "http://api.test/v1/chat/completions"
    assert call["json"]["model"] == "m1"
    assert call["json"]["temperature"] == 0.0
    assert call["json"]["messages"] == MESSAGES
    assert call["headers"]["Authorization"] == "Bearer sk-test"


def test_params_override_payload():
    backend, session, _ = make_backend([reply("ok")])
    backend.complete(MESSAGES, params={"temperature": 0.7})
    assert session.calls[0]["json"]["temperature"] == 0.7


def test_retries_rate_limit_with_backoff():
    backend, session, sleeps = make_backend(
        [FakeResponse(status_code=429), FakeResponse(status_code=429), reply("ok")]
    )
    assert backend.complete(MESSAGES) == "ok"
    assert len(session.calls) == 3
    assert sleeps == [0.5, 1.0]  # exponential


def test_retries_server_errors_and_connection_failures():
    backend, _, _ = make_backend(
        [ConnectionError("boom"), FakeResponse(status_code=503), reply("ok")]
    )
    assert backend.complete(MESSAGES) == "ok"


def test_gives_up_after_attempts():
    backend, session, _ = make_backend([FakeResponse(status_code=429)] * 3)
    with pytest.raises(BackendError) as info:
        backend.complete(MESSAGES)
    assert info.value.kind == RATE_LIMITED
    assert len(session.calls) == 3


def test_client_error_is_not_retried():
    backend, session, _ = make_backend([FakeResponse(status_code=400)])
    with pytest.raises(BackendError) as info:
        backend.complete(MESSAGES)
    assert info.value.kind == TRANSPORT
    assert len(session.calls) == 1


def test_malformed_reply():
    backend, _, _ = make_backend([FakeResponse(payload={"nope": True})])
    with pytest.raises(BackendError) as info:
        backend.complete(MESSAGES)
    assert info.value.kind == MALFORMED


def test_from_env_requires_base_url():
    with pytest.raises(BackendError) as info:
        HttpChatBackend.from_env(environ={})
    assert "MAO_API_BASE" in str(info.value)


def test_from_env_reads_all_three():
    backend = HttpChatBackend.from_env(
        environ={
            "MAO_API_BASE": "http://x/v1",
            "MAO_API_KEY": "k",
            "MAO_MODEL": "m",
        }
    )
    assert (backend.base_url, backend.api_key, backend.model) == ("http://x/v1", "k", "m")


def test_rejects_bad_message_shapes():
    backend, _, _ = make_backend([reply("ok")])
    with pytest.raises(ValueError):
        backend.complete([])
    with pytest.raises(ValueError):
        backend.complete([{"role": "user"}])


# -- replay -------------------------------------------------------------------


def test_replay_feeds_in_order():
    backend = ReplayBackend.from_texts("one", "two")
    assert backend.complete(MESSAGES) == "one"
    assert backend.complete(MESSAGES) == "two"
    assert backend.remaining == 0


def test_replay_exhausted():
    backend = ReplayBackend.from_texts("only")
    backend.complete(MESSAGES)
    with pytest.raises(ReplayExhausted):
        backend.complete(MESSAGES)


def test_replay_from_path(tmp_path):
    script = tmp_path / "replies.jsonl"
    rows = [
        {"phase": "Generation", "content": "first"},
        {"phase": "Reviewing", "content": "second"},
    ]
    script.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
    backend = ReplayBackend.from_path(script)
    assert backend.remaining == 2
    assert backend.records[0].phase == "Generation"
    assert backend.complete(MESSAGES) == "first"


def test_replay_from_path_reports_bad_line(tmp_path):
    script = tmp_path / "replies.jsonl"
    script.write_text('{"phase": "Generation", "content": "ok"}\nnot json\n')
    with pytest.raises(ValueError) as info:
        ReplayBackend.from_path(script)
    msg = str(info.value)
    assert "replies.jsonl" in msg and "2" in msg

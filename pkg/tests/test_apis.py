import asyncio

import httpx
import pytest
import simplejson as json
from ratelimit import RateLimitException

from promptpilot.apis.chat_wrapper import ChatWrapper
from promptpilot.apis.embedding_wrapper import EmbeddingWrapper
from promptpilot.db.promptpilot_db import PromptPilotDB
from promptpilot.apis.json_api import JsonApiWrapper
from promptpilot.errors import ConfigError, EmbeddingError, EmptyCompletionError, MalformedResponseError, \
    RemoteServiceError, RemoteTransportError

MESSAGES = [{"role": "system", "content": "task"}, {"role": "user", "content": "question"}]


def _chat_reply(content):
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def _client(handler):
    return httpx.AsyncClient(transport=httpx.MockTransport(handler))


@pytest.mark.asyncio
async def test_chat_request_shape_and_auth():
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        return httpx.Response(200, json=_chat_reply("Go right."))

    async with _client(handler) as client:
        chat = ChatWrapper("http://llm.test/v1/chat/completions", api_key="secret", client=client)
        assert await chat.complete(MESSAGES) == "Go right."
    body = json.loads(seen[0].content)
    assert body == {"model": "gpt-3.5-turbo", "messages": MESSAGES, "temperature": 0.0, "max_tokens": 256}
    assert seen[0].headers["Authorization"] == "Bearer secret"


@pytest.mark.asyncio
async def test_chat_retries_after_429():
    statuses = iter([429, 429, 200])

    def handler(request: httpx.Request) -> httpx.Response:
        status = next(statuses)
        if status == 429:
            return httpx.Response(429)
        return httpx.Response(200, json=_chat_reply("ok"))

    async with _client(handler) as client:
        chat = ChatWrapper("http://llm.test", client=client, backoff_base=0.001)
        assert await chat.complete(MESSAGES) == "ok"


@pytest.mark.asyncio
async def test_chat_gives_up_after_max_retries():
    async with _client(lambda request: httpx.Response(429)) as client:
        chat = ChatWrapper("http://llm.test", client=client, backoff_base=0.001, max_retries=2)
        with pytest.raises(RemoteTransportError) as error:
            await chat.complete(MESSAGES)
    assert error.value.status_code == 429


@pytest.mark.asyncio
@pytest.mark.parametrize("status", [401, 403, 500])
async def test_chat_transport_errors(status):
    async with _client(lambda request: httpx.Response(status)) as client:
        chat = ChatWrapper("http://llm.test", client=client)
        with pytest.raises(RemoteTransportError) as error:
            await chat.complete(MESSAGES)
    assert isinstance(error.value, RemoteServiceError)
    assert not isinstance(error.value, EmbeddingError)


@pytest.mark.asyncio
async def test_chat_timeout_is_a_transport_error():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    async with _client(handler) as client:
        chat = ChatWrapper("http://llm.test", client=client, timeout=0.1)
        with pytest.raises(RemoteTransportError):
            await chat.complete(MESSAGES)


@pytest.mark.asyncio
async def test_chat_malformed_and_empty_responses():
    async with _client(lambda request: httpx.Response(200, json={"id": "x"})) as client:
        with pytest.raises(MalformedResponseError):
            await ChatWrapper("http://llm.test", client=client).complete(MESSAGES)
    async with _client(lambda request: httpx.Response(200, text="not json")) as client:
        with pytest.raises(MalformedResponseError):
            await ChatWrapper("http://llm.test", client=client).complete(MESSAGES)
    async with _client(lambda request: httpx.Response(200, json=_chat_reply("   "))) as client:
        with pytest.raises(EmptyCompletionError):
            await ChatWrapper("http://llm.test", client=client).complete(MESSAGES)


@pytest.mark.asyncio
async def test_chat_completions_are_cached(tmp_path):
    calls = []

    def handler(request):
        calls.append(request)
        return httpx.Response(200, json=_chat_reply(f"answer {len(calls)}"))

    db = PromptPilotDB(f"sqlite:///{tmp_path}/chat.db")
    async with _client(handler) as client:
        chat = ChatWrapper("http://llm.test", db=db, client=client)
        assert await chat.complete(MESSAGES) == "answer 1"
        assert await chat.complete(MESSAGES) == "answer 1"
        assert chat.requests_sent == 1
        # other settings are another request
        other = ChatWrapper("http://llm.test", db=db, client=client, temperature=0.7)
        assert await other.complete(MESSAGES) == "answer 2"
    db.close()


@pytest.mark.asyncio
async def test_embedding_wrapper_validates_payload():
    def handler(request):
        texts = json.loads(request.content)["input"]
        return httpx.Response(200, json={"data": [{"embedding": [1.0, 2.0]} for _ in texts]})

    async with _client(handler) as client:
        api = EmbeddingWrapper("http://embed.test", "bert", client=client)
        assert await api.embed(["a", "b"]) == [[1.0, 2.0], [1.0, 2.0]]

    async with _client(lambda request: httpx.Response(200, json={"data": [{"embedding": []}]})) as client:
        with pytest.raises(MalformedResponseError):
            await EmbeddingWrapper("http://embed.test", "bert", client=client).embed(["a"])

    async with _client(lambda request: httpx.Response(200, json={"data": []})) as client:
        with pytest.raises(MalformedResponseError):
            await EmbeddingWrapper("http://embed.test", "bert", client=client).embed(["a"])


def test_fractional_rate_limit_spaces_calls():
    now = [0.0]
    api = JsonApiWrapper("http://llm.test", max_calls_per_sec=0.5, clock=lambda: now[0])
    api._budget()
    with pytest.raises(RateLimitException) as error:
        api._budget()
    # half a call per second is one call every two seconds
    assert error.value.period_remaining == pytest.approx(2.0)
    now[0] = 1.5
    with pytest.raises(RateLimitException):
        api._budget()
    now[0] = 2.0
    api._budget()


def test_rate_limit_must_be_positive():
    with pytest.raises(ConfigError):
        JsonApiWrapper("http://llm.test", max_calls_per_sec=0)


@pytest.mark.asyncio
async def test_throttled_call_lets_other_tasks_run():
    api = JsonApiWrapper("http://llm.test", max_calls_per_sec=10)
    await api._throttle()
    events = []

    async def throttled():
        await api._throttle()
        events.append("throttled")

    async def ticker():
        for _ in range(3):
            events.append("tick")
            await asyncio.sleep(0.01)

    await asyncio.gather(throttled(), ticker())
    assert events[:3] == ["tick", "tick", "tick"]
    assert events[-1] == "throttled"

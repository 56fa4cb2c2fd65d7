from pathlib import Path

import httpx
import numpy as np
import pytest
import simplejson as json

from promptpilot.apis.embedding_wrapper import EmbeddingWrapper
from promptpilot.db.promptpilot_db import PromptPilotDB
from promptpilot.embeddings.providers import LocalHashingProvider, RemoteEmbeddingProvider, embed_history
from promptpilot.envs.base import Observation
from promptpilot.errors import EmbeddingError, MalformedResponseError
from promptpilot.reasoning.candidates import CandidateSet

repo_root = Path(__file__).parent.parent.resolve()


def _obs(text):
    return Observation(text=text, symbolic=(), situation="s")


@pytest.mark.asyncio
async def test_local_provider_is_deterministic_and_normalized():
    provider = LocalHashingProvider(dimension=64)
    first = await provider.embed("You are at position 4.")
    again = await LocalHashingProvider(dimension=64).embed("You are at position 4.")
    assert first == again
    assert first.dimension == 64
    assert np.linalg.norm(first.values) == pytest.approx(1.0)
    assert provider.identity() == {"provider_id": "local-hash-64", "dimension": 64}


@pytest.mark.asyncio
async def test_local_provider_handles_text_without_words():
    provider = LocalHashingProvider()
    vector = await provider.embed("?!")
    assert vector.values.any()
    with pytest.raises(EmbeddingError):
        await provider.embed("")


@pytest.mark.asyncio
async def test_shipped_candidates_embed_apart():
    provider = LocalHashingProvider()
    for name in ("chain_world", "chain_world_auto", "four_room", "overcooked"):
        candidates = await CandidateSet.load(repo_root / "config" / "candidates" / f"{name}.json").embedded(provider)
        vectors = [c.embedding.values for c in candidates]
        for i in range(len(vectors)):
            for j in range(i + 1, len(vectors)):
                assert not np.array_equal(vectors[i], vectors[j])


@pytest.mark.asyncio
async def test_embed_history_window():
    provider = LocalHashingProvider()
    history = [_obs("first"), _obs("second"), _obs("third")]
    assert await embed_history(provider, history, 0) == await provider.embed("third")
    assert await embed_history(provider, history, 1) == await provider.embed("second\nthird")
    # a window longer than the history takes everything there is
    assert await embed_history(provider, history, 8) == await provider.embed("first\nsecond\nthird")
    with pytest.raises(EmbeddingError):
        await embed_history(provider, [], 0)
    with pytest.raises(EmbeddingError):
        await embed_history(provider, history, -1)


def _embedding_transport(calls, dimension=3):
    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(json.loads(request.content))
        texts = json.loads(request.content)["input"]
        data = [{"embedding": [float(len(t))] + [0.5] * (dimension - 1)} for t in texts]
        return httpx.Response(200, json={"data": data})
    return httpx.MockTransport(handler)


@pytest.mark.asyncio
async def test_remote_provider_reads_through_db(tmp_path):
    calls = []
    db = PromptPilotDB(f"sqlite:///{tmp_path}/embeddings.db")
    client = httpx.AsyncClient(transport=_embedding_transport(calls))
    api = EmbeddingWrapper("http://embed.test/v1/embeddings", "bert-base-uncased", client=client)
    provider = RemoteEmbeddingProvider(api, db)

    first = await provider.embed("hello world")
    assert first.values.tolist() == [11.0, 0.5, 0.5]
    assert provider.dimension == 3
    assert len(calls) == 1

    # a fresh provider on the same database never goes to the network
    fresh = RemoteEmbeddingProvider(EmbeddingWrapper("http://embed.test/v1/embeddings", "bert-base-uncased",
                                                     client=client), db)
    assert await fresh.embed("hello world") == first
    assert len(calls) == 1
    assert provider.identity()["pooling"] == "service-default"
    await client.aclose()
    db.close()


@pytest.mark.asyncio
async def test_remote_provider_rejects_dimension_change(tmp_path):
    db = PromptPilotDB(f"sqlite:///{tmp_path}/embeddings.db")
    sizes = iter([3, 4])

    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"data": [{"embedding": [0.1] * next(sizes)}]})

    client = httpx.AsyncClient(transport=httpx.MockTransport(handler))
    provider = RemoteEmbeddingProvider(EmbeddingWrapper("http://embed.test", "m", client=client), db)
    await provider.embed("a")
    with pytest.raises(MalformedResponseError):
        await provider.embed("b")
    await client.aclose()
    db.close()

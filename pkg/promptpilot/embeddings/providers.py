__author__ = 'Tommi Enenkel @alice_und_bob'

import asyncio
import hashlib
import logging
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from sklearn.feature_extraction.text import HashingVectorizer

from promptpilot.apis.embedding_wrapper import EmbeddingWrapper
from promptpilot.db.promptpilot_db import PromptPilotDB
from promptpilot.errors import EmbeddingError, MalformedResponseError

DEFAULT_DIMENSION = 256


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    provider_id: str

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other):
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.provider_id == other.provider_id and np.array_equal(self.values, other.values)


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("UTF-8")).hexdigest()


class EmbeddingProvider:
    """Turns text into fixed-dimension vectors. `embed` must be a pure function of the text."""

    provider_id: str = None
    dimension: int = None

    async def embed(self, text: str) -> EmbeddingVector:
        raise NotImplementedError

    def identity(self) -> dict:
        """Backend description recorded in the run manifest."""
        return {"provider_id": self.provider_id, "dimension": self.dimension}


def _whole_text(text):
    return [text]


class LocalHashingProvider(EmbeddingProvider):
    """
    Deterministic offline provider: hashed bag of word tokens into `dimension` buckets, scaled to unit norm.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.logger = logging.getLogger(__name__)
        self.dimension = dimension
        self.provider_id = f"local-hash-{dimension}"
        self._vectorizer = HashingVectorizer(n_features=dimension, alternate_sign=False, norm="l2", lowercase=True,
                                             token_pattern=r"(?u)\b\w+\b", dtype=np.float64)
        # texts without a single word token are hashed as one opaque token
        self._fallback = HashingVectorizer(n_features=dimension, alternate_sign=False, norm="l2",
                                           analyzer=_whole_text, dtype=np.float64)
        self._memo: Dict[str, EmbeddingVector] = {}

    def embed_now(self, text: str) -> EmbeddingVector:
        """
        Synchronous variant of `embed`; the local provider never waits on anything.

        :param text: nonempty text
        :type text: str
        :rtype: EmbeddingVector
        """
        if not text:
            raise EmbeddingError("cannot embed empty text")
        cached = self._memo.get(text)
        if cached is not None:
            return cached
        values = self._vectorizer.transform([text]).toarray()[0]
        if not values.any():
            values = self._fallback.transform([text]).toarray()[0]
        vector = EmbeddingVector(values=values, provider_id=self.provider_id)
        self._memo[text] = vector
        return vector

    async def embed(self, text: str) -> EmbeddingVector:
        return self.embed_now(text)


class RemoteEmbeddingProvider(EmbeddingProvider):
    """
    Embeddings from a remote service (e.g. a frozen BERT behind an HTTP endpoint). Every vector goes through the
    `PromptPilotDB` cache, which is what makes repeated calls agree bit for bit.
    """

    def __init__(self, api: EmbeddingWrapper, db: PromptPilotDB, pooling: str = "service-default"):
        """
        :param api: configured wrapper around the embeddings endpoint
        :type api: EmbeddingWrapper
        :param db: mandatory read-through cache
        :type db: PromptPilotDB
        :param pooling: how the service pools token vectors, recorded in the manifest
        :type pooling: str
        """
        self.logger = logging.getLogger(__name__)
        self.api = api
        self.db = db
        self.pooling = pooling
        self.provider_id = f"remote-{api.model}"
        self.dimension = None
        self.lock = asyncio.Lock()
        self._memo: Dict[str, EmbeddingVector] = {}

    def identity(self) -> dict:
        return {"provider_id": self.provider_id, "dimension": self.dimension, "endpoint": self.api.endpoint,
                "model": self.api.model, "pooling": self.pooling}

    def _check_dimension(self, values: Sequence[float]):
        if self.dimension is None:
            self.dimension = len(values)
        elif len(values) != self.dimension:
            raise MalformedResponseError(f"{self.provider_id} returned dimension {len(values)}, "
                                         f"expected {self.dimension}")

    async def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise EmbeddingError("cannot embed empty text")
        if text in self._memo:
            return self._memo[text]
        digest = text_digest(text)
        record = self.db.query_embedding(self.provider_id, digest)
        if record is not None:
            values = record.values
        else:
            values = (await self.api.embed([text]))[0]
            async with self.lock:
                self.db.write_embedding(self.provider_id, digest, values)
                # another request may have won the race; the stored vector is the one we hand out
                values = self.db.query_embedding(self.provider_id, digest).values
        self._check_dimension(values)
        vector = EmbeddingVector(values=np.asarray(values, dtype=np.float64), provider_id=self.provider_id)
        self._memo[text] = vector
        return vector


async def embed_history(provider: EmbeddingProvider, observations: Sequence, window: int = 0) -> EmbeddingVector:
    """
    Embed the last `window + 1` observation texts, oldest first. With `window == 0` this is the embedding of the
    latest observation alone.

    :param provider: embedding provider
    :type provider: EmbeddingProvider
    :param observations: observation history, most recent last
    :type observations: list of Observation
    :param window: number of past observations to include besides the latest
    :type window: int
    :rtype: EmbeddingVector
    """
    if not observations:
        raise EmbeddingError("cannot embed an empty observation history")
    if window < 0:
        raise EmbeddingError(f"history window must be >= 0, got {window}")
    texts = [o.text for o in observations[-(window + 1):]]
    return await provider.embed("\n".join(texts))

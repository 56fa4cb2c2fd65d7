__author__ = 'Tommi Enenkel @alice_und_bob'

import math

from promptpilot.apis.json_api import JsonApiWrapper
from promptpilot.errors import MalformedResponseError


class EmbeddingWrapper(JsonApiWrapper):
    """Interface for an embeddings endpoint: request {model, input: [str]}, response {data: [{embedding}]}."""

    def __init__(self, endpoint: str, model: str, **kwargs):
        super().__init__(endpoint, **kwargs)
        self.model = model
        self.requests_sent = 0

    async def embed(self, texts: list) -> list:
        """
        Fetch one embedding per text.

        :param texts: the texts to embed
        :type texts: list of str
        :return: one list of floats per text, in input order
        :rtype: list
        """
        self.requests_sent += 1
        response = await self._query({"model": self.model, "input": list(texts)})
        try:
            vectors = [item["embedding"] for item in response["data"]]
        except (KeyError, TypeError) as e:
            raise MalformedResponseError("embedding response lacks data[].embedding", payload=response) from e
        if len(vectors) != len(texts):
            raise MalformedResponseError(f"asked for {len(texts)} embeddings, got {len(vectors)}", payload=response)
        for vector in vectors:
            if not isinstance(vector, list) or not vector \
                    or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in vector):
                raise MalformedResponseError("embedding is not a nonempty list of finite numbers", payload=response)
        return [[float(v) for v in vector] for vector in vectors]

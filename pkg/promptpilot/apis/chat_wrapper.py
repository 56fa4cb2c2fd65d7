__author__ = 'Tommi Enenkel @alice_und_bob'

import hashlib
import simplejson as json

from promptpilot.apis.json_api import JsonApiWrapper
from promptpilot.db.promptpilot_db import PromptPilotDB
from promptpilot.errors import EmptyCompletionError, MalformedResponseError

DEFAULT_MODEL = "gpt-3.5-turbo"


class ChatWrapper(JsonApiWrapper):
    """
    Interface for a chat-completions endpoint. Completions are cached in the `PromptPilotDB` keyed by the request,
    so a request is sent at most once per cache lifetime.
    """

    def __init__(self, endpoint: str, db: PromptPilotDB = None, model: str = DEFAULT_MODEL, temperature: float = 0.0,
                 max_tokens: int = 256, **kwargs):
        """
        :param endpoint: chat-completions URL
        :type endpoint: str
        :param db: read-through cache. None disables caching.
        :type db: PromptPilotDB
        :param model: model name sent with every request
        :type model: str
        :param temperature: sampling temperature; 0 for reproducible thoughts
        :type temperature: float
        :param max_tokens: completion length cap
        :type max_tokens: int
        """
        super().__init__(endpoint, **kwargs)
        self.db = db
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.requests_sent = 0

    def build_request(self, messages: list) -> dict:
        return {
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    @staticmethod
    def request_digest(request: dict) -> str:
        canonical = json.dumps(request, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("UTF-8")).hexdigest()

    async def complete(self, messages: list) -> str:
        """
        Return the assistant message for the given conversation.

        :param messages: list of {"role", "content"} dicts
        :type messages: list
        :return: the completion text
        :rtype: str
        """
        request = self.build_request(messages)
        digest = self.request_digest(request)
        if self.db is not None:
            cached = self.db.query_completion(self.model, digest)
            if cached is not None:
                self.logger.debug(f"completion {digest[:12]} served from cache")
                return cached.content

        self.requests_sent += 1
        response = await self._query(request)
        try:
            content = response["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise MalformedResponseError("chat response lacks choices[0].message.content", payload=response) from e
        if not isinstance(content, str):
            raise MalformedResponseError("chat completion content is not a string", payload=response)
        if not content.strip():
            raise EmptyCompletionError(f"{self.model} returned an empty completion")

        if self.db is not None:
            async with self.lock:
                self.db.write_completion(self.model, digest, request, content)
        return content

__author__ = 'Tommi Enenkel @alice_und_bob'

import hashlib
import logging
from typing import Dict, Optional

import simplejson as json

from promptpilot.apis.chat_wrapper import ChatWrapper
from promptpilot.envs.base import Observation
from promptpilot.errors import CacheMissError, ConfigError, PromptPilotError
from promptpilot.reasoning.candidates import CandidateSet, PromptCandidate
from promptpilot.reasoning.cot_cache import DEFAULT_MAX_TOKENS, CotCache, Thought, count_tokens, truncate
from promptpilot.reasoning.templates import ThoughtTemplate

BACKENDS = ("cache", "template", "remote")
KEY_MODES = ("situation", "observation")


class CotReasoner:
    """
    The frozen reasoning policy: maps (observation, prompt) to a thought. Thoughts are looked up in and written
    through to a `CotCache`, so every (situation, prompt) pair is reasoned about at most once.
    """

    def __init__(self, backend: str, cache: CotCache = None, template: ThoughtTemplate = None,
                 chat: ChatWrapper = None, task_description: str = "", key_by: str = "situation",
                 max_tokens: int = DEFAULT_MAX_TOKENS):
        """
        :param backend: "cache" (misses are errors), "template" or "remote"
        :type backend: str
        :param cache: thought cache. Required for the cache backend.
        :type cache: CotCache
        :param template: scripted thoughts for the template backend
        :type template: ThoughtTemplate
        :param chat: chat-completions client for the remote backend
        :type chat: ChatWrapper
        :param task_description: system message sent with every remote query
        :type task_description: str
        :param key_by: key thoughts on the observation's "situation" or on the full "observation" text
        :type key_by: str
        :param max_tokens: thoughts are truncated to this many tokens
        :type max_tokens: int
        """
        self.logger = logging.getLogger(__name__)
        if backend not in BACKENDS:
            raise ConfigError(f"reasoner.backend must be one of {BACKENDS}, got '{backend}'")
        if key_by not in KEY_MODES:
            raise ConfigError(f"reasoner.key_by must be one of {KEY_MODES}, got '{key_by}'")
        if backend == "cache" and cache is None:
            raise ConfigError("the cache backend needs reasoner.cache_path")
        if backend == "template" and template is None:
            raise ConfigError("the template backend needs a thought template")
        if backend == "remote" and chat is None:
            raise ConfigError("the remote backend needs reasoner.endpoint (or LLM_ENDPOINT)")
        self.backend = backend
        self.cache = cache if cache is not None else CotCache()
        self.template = template
        self.chat = chat
        self.task_description = task_description
        self.key_by = key_by
        self.max_tokens = max_tokens

    def key_of(self, observation: Observation) -> str:
        return observation.situation if self.key_by == "situation" else observation.text

    @property
    def remote_calls(self) -> int:
        return self.chat.requests_sent if self.chat is not None else 0

    def compose_messages(self, observation: Observation, prompt: PromptCandidate) -> list:
        user = f"{observation.text}\nSituation: {observation.situation}\n{prompt.text}"
        return [
            {"role": "system", "content": self.task_description},
            {"role": "user", "content": user},
        ]

    async def reason(self, observation: Observation, prompt: PromptCandidate) -> Thought:
        """
        Return the thought for this observation and prompt.

        :param observation: current observation
        :type observation: Observation
        :param prompt: the selected prompt candidate
        :type prompt: PromptCandidate
        :rtype: Thought
        """
        key = self.key_of(observation)
        cached = self.cache.get(key, prompt.id)
        if cached is not None:
            return cached
        if self.backend == "cache":
            raise CacheMissError(key, prompt.id)

        if self.backend == "template":
            text = self.template.think(observation, prompt.text)
            provenance = {"source": "template", "env_id": self.template.env_id}
        else:
            messages = self.compose_messages(observation, prompt)
            text = await self.chat.complete(messages)
            digest = hashlib.sha256(json.dumps(messages, sort_keys=True).encode("UTF-8")).hexdigest()
            provenance = {"source": "remote", "model": self.chat.model, "composed_messages_digest": digest}

        text = truncate(text, self.max_tokens)
        stored = await self.cache.put(key, prompt.id, text, provenance)
        return Thought(text=stored.text, token_count=count_tokens(stored.text), source=self.backend,
                       key=(key, prompt.id), provenance=provenance)

    async def fill_cache(self, examples: Dict[str, Observation], candidates: CandidateSet) -> dict:
        """
        Reason about every (situation, prompt) pair that is not cached yet. Failures are reported per pair and do
        not stop the fill; everything written so far stays in the cache.

        :param examples: one observation per situation key
        :type examples: dict
        :param candidates: the prompt candidates
        :type candidates: CandidateSet
        :return: counts of written and skipped pairs plus the failures
        :rtype: dict
        """
        written, skipped, failed = 0, 0, []
        for situation, observation in sorted(examples.items()):
            for prompt in candidates:
                if self.cache.get(self.key_of(observation), prompt.id) is not None:
                    skipped += 1
                    continue
                try:
                    await self.reason(observation, prompt)
                    written += 1
                except PromptPilotError as e:
                    self.logger.warning(f"could not reason about ({situation}, {prompt.id}): {e}")
                    failed.append({"situation_key": situation, "prompt_id": prompt.id, "error": type(e).__name__,
                                   "message": str(e)})
        self.logger.info(f"cache fill: {written} written, {skipped} already cached, {len(failed)} failed")
        return {"written": written, "skipped": skipped, "failed": failed}


def reasoner_identity(reasoner: Optional[CotReasoner]) -> dict:
    if reasoner is None:
        return {"backend": None}
    identity = {"backend": reasoner.backend, "key_by": reasoner.key_by, "max_tokens": reasoner.max_tokens,
                "cache_path": str(reasoner.cache.path) if reasoner.cache.path else None}
    if reasoner.chat is not None:
        identity.update({"endpoint": reasoner.chat.endpoint, "model": reasoner.chat.model,
                         "temperature": reasoner.chat.temperature})
    return identity

__author__ = 'Tommi Enenkel @alice_und_bob'

import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional

import simplejson as json

from promptpilot.apis.chat_wrapper import ChatWrapper
from promptpilot.embeddings.providers import EmbeddingProvider, EmbeddingVector
from promptpilot.errors import CandidateParseError, ConfigError

logger = logging.getLogger(__name__)

# "Prompt 1: ...", "1. ..." or "1) ..."
_NUMBERED_LINE = re.compile(r"^\s*(?:prompt\s*(\d+)\s*[:.)-]|(\d+)\s*[.)])\s*(.+?)\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class PromptCandidate:
    id: int
    text: str
    embedding: Optional[EmbeddingVector] = None


@dataclass(frozen=True)
class CandidateSet:
    task: str
    candidates: tuple

    def __post_init__(self):
        if not self.candidates:
            raise ConfigError("a candidate set needs at least one prompt")
        ids = [c.id for c in self.candidates]
        if ids != list(range(len(ids))):
            raise ConfigError(f"candidate ids must be 0..K-1 in order, got {ids}")

    def __len__(self):
        return len(self.candidates)

    def __getitem__(self, prompt_id: int) -> PromptCandidate:
        return self.candidates[prompt_id]

    def __iter__(self):
        return iter(self.candidates)

    @property
    def texts(self) -> List[str]:
        return [c.text for c in self.candidates]

    @classmethod
    def from_dict(cls, raw: dict) -> "CandidateSet":
        try:
            candidates = tuple(PromptCandidate(id=int(c["id"]), text=str(c["text"]))
                               for c in sorted(raw["candidates"], key=lambda c: int(c["id"])))
            return cls(task=raw.get("task", ""), candidates=candidates)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed candidate set: {e}") from e

    @classmethod
    def load(cls, path) -> "CandidateSet":
        """
        :param path: candidate-set JSON file {task, candidates: [{id, text}]}
        :type path: str or Path
        :rtype: CandidateSet
        """
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"candidate set file {path} does not exist")
        with path.open('r', encoding="UTF-8") as source:
            return cls.from_dict(json.load(source))

    def to_dict(self) -> dict:
        return {"task": self.task, "candidates": [{"id": c.id, "text": c.text} for c in self.candidates]}

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', encoding="UTF-8") as target:
            json.dump(self.to_dict(), target, indent=2)

    async def embedded(self, provider: EmbeddingProvider) -> "CandidateSet":
        """Copy of the set with every candidate's text embedded by `provider`."""
        candidates = tuple([replace(c, embedding=await provider.embed(c.text)) for c in self.candidates])
        return CandidateSet(task=self.task, candidates=candidates)


def build_meta_prompt(task_description: str, state_situation: str, k: int) -> str:
    return (f"Task Description:\n{task_description}\n\n"
            f"State and situation:\n{state_situation}\n\n"
            f"Please provide {k} prompt questions about how to maximize reward. "
            f"Write each one on its own line as \"Prompt <n>: <question>\".")


def parse_candidates(completion: str, k: int) -> List[str]:
    """
    Pull the first `k` numbered prompt lines out of a completion.

    :raises CandidateParseError: fewer than `k` lines could be extracted
    """
    found = []
    for line in completion.splitlines():
        match = _NUMBERED_LINE.match(line)
        if match and match.group(3):
            found.append(match.group(3))
        if len(found) == k:
            return found
    raise CandidateParseError(f"expected {k} prompt lines, found {len(found)}", raw_completion=completion)


async def generate_candidates(chat: ChatWrapper, task_description: str, state_situation: str, k: int,
                              out_path=None) -> CandidateSet:
    """
    Ask the chat model for `k` prompt candidates and optionally persist them as a candidate-set file.

    :param chat: chat-completions wrapper; its cache makes replays deterministic
    :type chat: ChatWrapper
    :param task_description: what the agent has to do
    :type task_description: str
    :param state_situation: description of the state variables and situations
    :type state_situation: str
    :param k: number of candidates
    :type k: int
    :param out_path: where to write the candidate set. None skips writing.
    :type out_path: str or Path or None
    :rtype: CandidateSet
    """
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    messages = [{"role": "user", "content": build_meta_prompt(task_description, state_situation, k)}]
    completion = await chat.complete(messages)
    texts = parse_candidates(completion, k)
    candidate_set = CandidateSet(task=task_description,
                                 candidates=tuple(PromptCandidate(id=i, text=t) for i, t in enumerate(texts)))
    if out_path is not None:
        candidate_set.save(out_path)
        logger.info(f"wrote {k} prompt candidates to {out_path}")
    return candidate_set

__author__ = 'Tommi Enenkel @alice_und_bob'

import asyncio
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import simplejson as json

DEFAULT_MAX_TOKENS = 256

_TOKEN = re.compile(r"\S+")


def count_tokens(text: str) -> int:
    """Whitespace-delimited token count, the accounting every backend truncates by."""
    return len(_TOKEN.findall(text))


def truncate(text: str, max_tokens: int = DEFAULT_MAX_TOKENS) -> str:
    """
    Cut `text` after its `max_tokens`-th token. Whitespace inside the kept part (newlines included) survives.

    :param text: thought text
    :type text: str
    :param max_tokens: token budget
    :type max_tokens: int
    :rtype: str
    """
    end = None
    for i, match in enumerate(_TOKEN.finditer(text)):
        if i == max_tokens:
            break
        end = match.end()
    if end is None:
        return ""
    return text[:end]


@dataclass(frozen=True)
class Thought:
    text: str
    token_count: int
    source: str             # "cache", "template" or "remote"
    key: Tuple[str, int]    # (situation key, prompt id)
    provenance: dict = field(default_factory=dict, compare=False)


class CotCache:
    """
    Append-only store of thoughts keyed by (situation key, prompt id), backed by a JSON-lines file.
    One line per entry: {"situation_key", "prompt_id", "thought", "provenance"}. The first line for a key wins.
    """

    def __init__(self, path=None):
        """
        :param path: JSON-lines file. None keeps the cache in memory only.
        :type path: str or Path or None
        """
        self.logger = logging.getLogger(__name__)
        self.path = Path(path) if path else None
        self.lock = asyncio.Lock()
        self._entries: Dict[Tuple[str, int], dict] = {}
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self):
        with self.path.open('r', encoding="UTF-8") as source:
            for line_number, line in enumerate(source, start=1):
                if not line.strip():
                    continue
                record = json.loads(line)
                key = (record["situation_key"], int(record["prompt_id"]))
                if key in self._entries:
                    self.logger.warning(f"{self.path}:{line_number} duplicates {key}; keeping the first entry")
                    continue
                self._entries[key] = record
        self.logger.info(f"loaded {len(self._entries)} cached thoughts from {self.path}")

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key) -> bool:
        return tuple(key) in self._entries

    def keys(self) -> list:
        return sorted(self._entries)

    def get(self, situation_key: str, prompt_id: int) -> Optional[Thought]:
        record = self._entries.get((situation_key, prompt_id))
        if record is None:
            return None
        text = record["thought"]
        return Thought(text=text, token_count=count_tokens(text), source="cache", key=(situation_key, prompt_id),
                       provenance=record.get("provenance", {}))

    async def put(self, situation_key: str, prompt_id: int, text: str, provenance: dict = None) -> Thought:
        """
        Store a thought unless the key is already present, and return whatever the cache holds afterwards.

        :param situation_key: situation (or observation text, when keying by observation)
        :type situation_key: str
        :param prompt_id: id of the prompt candidate
        :type prompt_id: int
        :param text: the thought
        :type text: str
        :param provenance: where the thought came from
        :type provenance: dict
        :rtype: Thought
        """
        async with self.lock:
            key = (situation_key, prompt_id)
            if key not in self._entries:
                record = {"situation_key": situation_key, "prompt_id": prompt_id, "thought": text,
                          "provenance": provenance or {}}
                self._entries[key] = record
                if self.path is not None:
                    self.path.parent.mkdir(parents=True, exist_ok=True)
                    with self.path.open('a', encoding="UTF-8") as target:
                        target.write(json.dumps(record) + "\n")
                        target.flush()
        return self.get(situation_key, prompt_id)

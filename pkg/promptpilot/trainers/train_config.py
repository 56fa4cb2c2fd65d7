__author__ = 'Tommi Enenkel @alice_und_bob'

import copy
import logging
import os
from pathlib import Path

import simplejson as json

from promptpilot.errors import ConfigError

logger = logging.getLogger(__name__)

repo_root = Path(__file__).parent.parent.parent.absolute()

ENV_IDS = ("chain_world", "four_room", "overcooked")

DEFAULTS = {
    "_version": 1,
    "run_name": None,
    "seeds": [0],
    "candidates": "config/candidates/chain_world.json",
    "env": {
        "id": "chain_world",
        "observability": "full",
        "length": 10,
        "max_steps": 100,
        "trace_path": None,
        "recipe": "salad",
        "layout": None,
    },
    "embeddings": {
        "provider": "local",
        "dimension": 256,
        "endpoint": None,
        "model": "bert-base-uncased",
        "pooling": "service-default",
        "db_connection_string": None,
        "max_calls_per_sec": 5,
    },
    "reasoner": {
        "backend": "cache",
        "cache_path": "config/cot_cache/chain_world.jsonl",
        "key_by": "situation",
        "max_tokens": 256,
        "endpoint": None,
        "model": "gpt-3.5-turbo",
        "temperature": 0.0,
        "timeout": 30,
        "max_calls_per_sec": 5,
        "db_connection_string": None,
    },
    "prompt_policy": {
        "selector": "learned",
        "objective": "neg-entropy",
        "history_window": 0,
        "projection_dim": 64,
        "similarity": "dot",
        "encoder": "linear",
        "init_scale": 0.1,
        "temperature": 1.0,
        "gamma": 0.95,
        "lr": 0.01,
        "epochs": 1,
        "baseline": True,
        "ucb_c": 1.0,
    },
    "action_policy": {
        "use_thoughts": True,
        "use_symbolic": False,
        "hidden": 64,
        "gamma": 0.99,
        "gae_lambda": 0.95,
        "clip_eps": 0.2,
        "epochs": 4,
        "minibatch_size": 64,
        "lr": 0.0003,
        "value_coef": 0.5,
        "entropy_coef": 0.0,
        "prob_floor": 1e-6,
    },
    "trainer": {
        "episodes": 2000,
        "batch_episodes": 16,
        "checkpoint_every": 500,
    },
}

# CLI shorthands for dotted config paths
SHORTHANDS = {
    "selector": "prompt_policy.selector",
    "objective": "prompt_policy.objective",
    "reasoner": "reasoner.backend",
    "env": "env.id",
}

# secrets and endpoints come from the environment
ENV_VARS = {
    "reasoner.endpoint": "LLM_ENDPOINT",
    "reasoner.api_key": "LLM_API_KEY",
    "embeddings.endpoint": "EMBED_ENDPOINT",
    "embeddings.api_key": "EMBED_API_KEY",
}


def _merge(base: dict, update: dict) -> dict:
    result = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = _merge(result[key], value)
        else:
            result[key] = copy.deepcopy(value)
    return result


def parse_override(assignment: str):
    """
    Split "a.b=value" into ("a.b", value). The value is read as JSON when it parses, else kept as a string.

    :param assignment: dotted path, "=" and value
    :type assignment: str
    :rtype: tuple
    """
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' is not of the form key=value")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


class TrainConfig:
    """
    Resolved run configuration: the defaults, overlaid with the config file, overlaid with overrides, plus the
    secrets taken from the environment. Sections are accessed with dotted paths.
    """

    def __init__(self, config: dict = None, environ: dict = None):
        """
        :param config: raw JSON dict of the train config
        :type config: dict
        :param environ: environment variables to read secrets from. Defaults to os.environ.
        :type environ: dict
        """
        config = config or {}
        if config.get("_version", 1) != 1:
            logger.warning("config version != 1. It could contain runtime breaking contents")
        self._data = _merge(DEFAULTS, config)
        environ = os.environ if environ is None else environ
        for path, variable in ENV_VARS.items():
            if environ.get(variable):
                self._set(path, environ[variable])

    @classmethod
    def load(cls, path, environ: dict = None) -> "TrainConfig":
        path = cls.resolve_path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        with path.open('r', encoding="UTF-8") as source:
            try:
                raw = json.load(source)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        return cls(raw, environ)

    def get(self, path: str, default=None):
        node = self._data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def __getitem__(self, path: str):
        value = self.get(path, KeyError)
        if value is KeyError:
            raise ConfigError(f"unknown config key '{path}'")
        return value

    def _set(self, path: str, value):
        node = self._data
        parts = path.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"config key '{path}' crosses a non-section value")
        node[parts[-1]] = value

    def with_overrides(self, overrides: dict) -> "TrainConfig":
        """
        Creates a copy with dotted-path overrides applied. CLI shorthands like "selector" are expanded.

        :param overrides: dotted path -> value
        :type overrides: dict
        """
        result = copy.deepcopy(self)
        for path, value in overrides.items():
            path = SHORTHANDS.get(path, path)
            if path == "seed":
                path, value = "seeds", [int(value)]
            result._set(path, value)
        return result

    def as_dict(self, redact: bool = True) -> dict:
        """Plain dict view; API keys are blanked unless `redact` is False."""
        data = copy.deepcopy(self._data)
        if redact:
            for section in ("reasoner", "embeddings"):
                if data.get(section, {}).get("api_key"):
                    data[section]["api_key"] = "***"
        return data

    @staticmethod
    def resolve_path(path) -> Path:
        """Relative paths resolve against the working directory first, then the repository root."""
        path = Path(path)
        if path.is_absolute() or path.exists():
            return path
        candidate = repo_root / path
        return candidate if candidate.exists() else path

    @property
    def seeds(self) -> list:
        return [int(s) for s in self.get("seeds")]

    @property
    def selector(self) -> str:
        return self.get("prompt_policy.selector")

    @property
    def objective(self) -> str:
        return self.get("prompt_policy.objective")

    @property
    def method(self) -> str:
        """Label that groups runs in comparison reports."""
        return self.get("run_name") or f"{self.selector}/{self.objective}"

    def validate(self) -> "TrainConfig":
        """
        Check the configuration before anything is built.

        :raises ConfigError: naming the offending key or path
        """
        env_id = self.get("env.id")
        if env_id not in ENV_IDS:
            raise ConfigError(f"env.id must be one of {ENV_IDS}, got '{env_id}'")
        if env_id == "chain_world" and int(self.get("env.length")) < 3:
            raise ConfigError(f"env.length must be at least 3, got {self.get('env.length')}")
        if not self.get("seeds"):
            raise ConfigError("seeds must list at least one seed")
        selector = self.selector
        if selector not in ("learned", "random", "ucb"):
            raise ConfigError(f"prompt_policy.selector must be learned, random or ucb, got '{selector}'")
        if self.objective not in ("neg-entropy", "env-reward"):
            raise ConfigError(f"prompt_policy.objective must be neg-entropy or env-reward, got '{self.objective}'")
        for key in ("prompt_policy.gamma", "action_policy.gamma"):
            if not 0.0 <= float(self.get(key)) < 1.0:
                raise ConfigError(f"{key} must be in [0, 1), got {self.get(key)}")
        if int(self.get("prompt_policy.history_window")) < 0:
            raise ConfigError("prompt_policy.history_window must be >= 0")
        for key in ("trainer.episodes", "trainer.batch_episodes"):
            if int(self.get(key)) < 1:
                raise ConfigError(f"{key} must be at least 1, got {self.get(key)}")

        if self.get("action_policy.use_thoughts"):
            candidates = self.resolve_path(self.get("candidates"))
            if not candidates.exists():
                raise ConfigError(f"candidate set file {candidates} does not exist")
            backend = self.get("reasoner.backend")
            if backend not in ("cache", "template", "remote"):
                raise ConfigError(f"reasoner.backend must be cache, template or remote, got '{backend}'")
            if backend == "cache" and not self.resolve_path(self.get("reasoner.cache_path")).exists():
                raise ConfigError(f"reasoner.cache_path {self.get('reasoner.cache_path')} does not exist")
            if backend == "remote" and not self.get("reasoner.endpoint"):
                raise ConfigError("the remote reasoner needs reasoner.endpoint or LLM_ENDPOINT")
        if self.get("embeddings.provider") not in ("local", "remote"):
            raise ConfigError(f"embeddings.provider must be local or remote, got '{self.get('embeddings.provider')}'")
        if self.get("embeddings.provider") == "remote" and not self.get("embeddings.endpoint"):
            raise ConfigError("the remote embedding provider needs embeddings.endpoint or EMBED_ENDPOINT")
        return self

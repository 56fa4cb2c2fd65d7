import logging
import os
from typing import Callable, List, Optional

import simplejson as json

from promptpilot.apis.chat_wrapper import ChatWrapper
from promptpilot.apis.embedding_wrapper import EmbeddingWrapper
from promptpilot.db.promptpilot_db import DEFAULT_CONNECTION_STRING, PromptPilotDB
from promptpilot.embeddings.providers import EmbeddingProvider, LocalHashingProvider, RemoteEmbeddingProvider
from promptpilot.envs.base import TextEnv
from promptpilot.envs.chain_world import ChainWorld
from promptpilot.envs.four_room import FourRoom
from promptpilot.envs.overcooked import Overcooked
from promptpilot.errors import CheckpointMismatchError, ConfigError
from promptpilot.policies.action_policy import ActionPolicy
from promptpilot.policies.prompt_policy import PromptPolicy
from promptpilot.policies.selectors import LearnedSelector, PromptSelector, RandomSelector, UcbSelector
from promptpilot.reasoning.candidates import CandidateSet, generate_candidates
from promptpilot.reasoning.cot_cache import CotCache
from promptpilot.reasoning.reasoner import CotReasoner, reasoner_identity
from promptpilot.reasoning.templates import template_for
from promptpilot.reports.run_report import RunDirectory
from promptpilot.trainers.bilevel_trainer import BilevelTrainer
from promptpilot.trainers.checkpoints import load_checkpoint, restore
from promptpilot.trainers.metrics import MetricsReport
from promptpilot.trainers.train_config import TrainConfig

logger = logging.getLogger(__name__)


def db_factory(connection_string: Optional[str] = None) -> PromptPilotDB:
    """
    Return the read-through cache for remote responses.

    :param connection_string: SQLAlchemy connection string. None uses the default sqlite file under data/cache.
    :type connection_string: str
    """
    return PromptPilotDB(connection_string or DEFAULT_CONNECTION_STRING)


def env_factory(config: TrainConfig) -> Callable[[], TextEnv]:
    """
    Return a function that builds a fresh environment as configured in the `env` section.

    :param config: resolved configuration
    :type config: TrainConfig
    """
    env_id = config.get("env.id")
    max_steps = int(config.get("env.max_steps"))
    trace_path = config.get("env.trace_path")
    layout = config.get("env.layout")
    if env_id == "chain_world":
        return lambda: ChainWorld(length=int(config.get("env.length")), observability=config.get("env.observability"),
                                  max_steps=max_steps, trace_path=trace_path)
    if env_id == "four_room":
        return lambda: FourRoom(layout=layout, max_steps=max_steps, trace_path=trace_path)
    if env_id == "overcooked":
        return lambda: Overcooked(recipe=config.get("env.recipe"), layout=layout, max_steps=max_steps,
                                  trace_path=trace_path)
    raise ConfigError(f"unknown env.id '{env_id}'")


def embedding_factory(config: TrainConfig) -> EmbeddingProvider:
    """
    Return the configured embedding provider. Remote providers always sit behind the database cache.

    :param config: resolved configuration
    :type config: TrainConfig
    """
    if config.get("embeddings.provider") == "local":
        return LocalHashingProvider(dimension=int(config.get("embeddings.dimension")))
    api = EmbeddingWrapper(config.get("embeddings.endpoint"), config.get("embeddings.model"),
                           api_key=config.get("embeddings.api_key"),
                           max_calls_per_sec=float(config.get("embeddings.max_calls_per_sec")))
    db = db_factory(config.get("embeddings.db_connection_string"))
    return RemoteEmbeddingProvider(api, db, pooling=config.get("embeddings.pooling"))


def chat_factory(config: TrainConfig) -> ChatWrapper:
    endpoint = config.get("reasoner.endpoint")
    if not endpoint:
        raise ConfigError("reasoner.endpoint (or LLM_ENDPOINT) is required for remote reasoning")
    return ChatWrapper(endpoint, db=db_factory(config.get("reasoner.db_connection_string")),
                       model=config.get("reasoner.model"), temperature=float(config.get("reasoner.temperature")),
                       max_tokens=int(config.get("reasoner.max_tokens")), api_key=config.get("reasoner.api_key"),
                       timeout=float(config.get("reasoner.timeout")),
                       max_calls_per_sec=float(config.get("reasoner.max_calls_per_sec")))


def reasoner_factory(config: TrainConfig, env: TextEnv) -> Optional[CotReasoner]:
    """
    Return the configured reasoner, or None when the action policy does not use thoughts.

    :param config: resolved configuration
    :type config: TrainConfig
    :param env: environment the thoughts are about
    :type env: TextEnv
    """
    if not config.get("action_policy.use_thoughts"):
        return None
    backend = config.get("reasoner.backend")
    cache_path = config.get("reasoner.cache_path")
    cache = CotCache(TrainConfig.resolve_path(cache_path)) if cache_path else None
    return CotReasoner(
        backend=backend,
        cache=cache,
        template=template_for(env.env_id) if backend == "template" else None,
        chat=chat_factory(config) if backend == "remote" else None,
        task_description=env.task_description,
        key_by=config.get("reasoner.key_by"),
        max_tokens=int(config.get("reasoner.max_tokens")),
    )


def selector_factory(config: TrainConfig, candidates: CandidateSet, provider: EmbeddingProvider,
                     seed: int) -> PromptSelector:
    """
    Return the prompt selector named by prompt_policy.selector.

    :param candidates: candidate set with embeddings attached
    :type candidates: CandidateSet
    """
    kind = config.selector
    if kind == "random":
        return RandomSelector(len(candidates))
    if kind == "ucb":
        return UcbSelector(len(candidates), exploration_c=float(config.get("prompt_policy.ucb_c")))
    if kind == "learned":
        policy = PromptPolicy([c.embedding.values for c in candidates],
                              projection_dim=int(config.get("prompt_policy.projection_dim")),
                              similarity=config.get("prompt_policy.similarity"),
                              encoder=config.get("prompt_policy.encoder"),
                              init_scale=float(config.get("prompt_policy.init_scale")),
                              temperature=float(config.get("prompt_policy.temperature")),
                              seed=seed)
        return LearnedSelector(policy, provider, window=int(config.get("prompt_policy.history_window")))
    raise ConfigError(f"unknown prompt_policy.selector '{kind}'")


def action_policy_factory(config: TrainConfig, env: TextEnv, embedding_dim: int, seed: int) -> ActionPolicy:
    return ActionPolicy(obs_dim=embedding_dim, n_actions=len(env.action_tokens),
                        thought_dim=embedding_dim if config.get("action_policy.use_thoughts") else 0,
                        symbolic_dim=env.symbolic_size if config.get("action_policy.use_symbolic") else 0,
                        hidden=int(config.get("action_policy.hidden")),
                        prob_floor=float(config.get("action_policy.prob_floor")),
                        seed=seed)


async def trainer_factory(config: TrainConfig, seed: int, run_dir=None, action_policy=None) -> BilevelTrainer:
    """
    Configure and return a trainer for one seed.

    :param config: resolved and validated configuration
    :type config: TrainConfig
    :param seed: run seed
    :type seed: int
    :param run_dir: where checkpoints are written. None disables checkpointing.
    :type run_dir: str or Path
    :param action_policy: optional stand-in for the PPO policy (anything with act and entropy)
    """
    make_env = env_factory(config)
    env = make_env()
    provider = embedding_factory(config)
    embedding_dim = (await provider.embed(env.task_description or env.env_id)).dimension
    reasoner = reasoner_factory(config, env)
    candidates, selector = None, None
    if reasoner is not None:
        candidates = await CandidateSet.load(TrainConfig.resolve_path(config.get("candidates"))).embedded(provider)
        selector = selector_factory(config, candidates, provider, seed)
    if action_policy is None:
        action_policy = action_policy_factory(config, env, embedding_dim, seed)
    return BilevelTrainer(config, seed, make_env, provider, action_policy, reasoner=reasoner, candidates=candidates,
                          selector=selector, run_dir=run_dir)


def backend_identities(trainer: BilevelTrainer) -> dict:
    return {"embeddings": trainer.provider.identity(), "reasoner": reasoner_identity(trainer.reasoner)}


async def train(config: TrainConfig, out_dir) -> List[MetricsReport]:
    """
    Train every configured seed and write a self-describing run directory.

    :param config: resolved configuration
    :type config: TrainConfig
    :param out_dir: run directory; must not hold a run yet
    :type out_dir: str or Path
    :return: one metrics report per seed
    :rtype: list
    """
    run = None
    reports = []
    try:
        config.validate()
        trainers = [await trainer_factory(config, seed, run_dir=out_dir) for seed in config.seeds]
        run = RunDirectory.create(out_dir, config, backend_identities(trainers[0]))
        for trainer in trainers:
            reports.append(await trainer.train())
        run.write_results(reports)
    except Exception as e:
        logger.error(f"Uncaught error during training: {e}")
        import traceback
        # log traceback
        logger.error(f"Traceback: {traceback.format_exc()}")
        if run is not None:
            run.write_error(e)
        raise e

    logger.info(f"Trained {len(reports)} seed(s); results in {out_dir}")
    return reports


async def evaluate(checkpoint, episodes: int, greedy: bool = False, config: TrainConfig = None,
                   seed: int = None) -> MetricsReport:
    """
    Rebuild a trainer from a checkpoint and play evaluation episodes without updates.

    :param checkpoint: checkpoint file written during training
    :type checkpoint: str or Path
    :param episodes: number of episodes
    :type episodes: int
    :param greedy: greedy prompt and action choice
    :type greedy: bool
    :param config: optional configuration; must describe the same environment as the checkpoint
    :type config: TrainConfig
    :param seed: evaluation seed, defaults to the first configured seed
    :type seed: int
    :rtype: MetricsReport
    """
    payload = load_checkpoint(checkpoint)
    stored = TrainConfig(payload["config"])
    if config is not None and config.get("env.id") != stored.get("env.id"):
        raise CheckpointMismatchError(f"checkpoint was trained on {stored.get('env.id')}, "
                                      f"config asks for {config.get('env.id')}")
    config = config or stored
    seed = config.seeds[0] if seed is None else seed
    trainer = await trainer_factory(config, seed)
    restore(payload, trainer.action_policy, trainer.prompt_policy)
    report = await trainer.evaluate(episodes, greedy=greedy)
    logger.info(f"evaluated {checkpoint} over {episodes} episodes: AUC {report.auc:.3f}")
    return report


async def cache_cot(config: TrainConfig) -> dict:
    """
    Fill the thought cache for every (situation, prompt) pair of the configured environment.

    :param config: configuration with a template or remote reasoner and a reasoner.cache_path
    :type config: TrainConfig
    :return: counts of written and skipped pairs plus the failures
    :rtype: dict
    """
    if config.get("reasoner.backend") == "cache":
        raise ConfigError("cache-cot needs reasoner.backend 'template' or 'remote'")
    if not config.get("reasoner.cache_path"):
        raise ConfigError("cache-cot needs reasoner.cache_path")
    env = env_factory(config)()
    candidates = CandidateSet.load(TrainConfig.resolve_path(config.get("candidates")))
    reasoner = reasoner_factory(config.with_overrides({"action_policy.use_thoughts": True}), env)
    return await reasoner.fill_cache(env.situation_examples(), candidates)


async def gen_prompts(task_file, k: int, out_path, config: TrainConfig) -> CandidateSet:
    """
    Let the chat model write a candidate set from a task file {task, state_situation}.

    :param task_file: JSON task file
    :type task_file: str or Path
    :param k: number of candidates
    :type k: int
    :param out_path: candidate-set file to write
    :type out_path: str or Path
    :param config: configuration of the remote reasoner
    :type config: TrainConfig
    :rtype: CandidateSet
    """
    task_file = TrainConfig.resolve_path(task_file)
    if not task_file.exists():
        raise ConfigError(f"task file {task_file} does not exist")
    with task_file.open('r', encoding="UTF-8") as source:
        task = json.load(source)
    return await generate_candidates(chat_factory(config), task["task"], task["state_situation"], k, out_path)


def wipe_cache():
    """
    Wipe the cache folder
    """
    if os.path.exists("data/cache"):
        import shutil
        logger.info("wiping cache folder")
        shutil.rmtree("data/cache/")
    else:
        logger.info("cache folder does not exist")

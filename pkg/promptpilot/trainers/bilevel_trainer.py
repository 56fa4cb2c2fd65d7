__author__ = 'Tommi Enenkel @alice_und_bob'

import asyncio
import logging
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np
import torch

from promptpilot.embeddings.providers import EmbeddingProvider
from promptpilot.envs.base import TextEnv
from promptpilot.errors import ConfigError, NonFiniteError, PromptPilotError, RolloutAbortedError, RunAbortedError
from promptpilot.policies.action_policy import PolicyInput
from promptpilot.policies.selectors import PromptSelector
from promptpilot.reasoning.candidates import CandidateSet
from promptpilot.reasoning.reasoner import CotReasoner
from promptpilot.trainers.checkpoints import checkpoint_path, save_checkpoint
from promptpilot.trainers.metrics import EpisodeMetrics, MetricsReport
from promptpilot.trainers.records import TransitionRecord
from promptpilot.trainers.train_config import TrainConfig

# evaluation episodes draw from a seed range training never reaches
EVAL_EPISODE_OFFSET = 1_000_000


def episode_seed(seed: int, episode_id: int) -> int:
    """Seed of the RNG streams of one episode, derived from the run seed and the episode id."""
    return int(np.random.SeedSequence([seed, episode_id]).generate_state(1)[0])


class BilevelTrainer:
    """
    Runs the bilevel loop for one seed: roll out episodes through prompt selector, reasoner, action policy and
    environment, then update the prompt policy with the action policy frozen, then the action policy with the
    prompt policy frozen.
    """

    def __init__(self, config: TrainConfig, seed: int, env_factory: Callable[[], TextEnv],
                 provider: EmbeddingProvider, action_policy, reasoner: Optional[CotReasoner] = None,
                 candidates: Optional[CandidateSet] = None, selector: Optional[PromptSelector] = None,
                 run_dir=None):
        """
        :param config: resolved configuration
        :type config: TrainConfig
        :param seed: run seed
        :type seed: int
        :param env_factory: returns a fresh environment; every episode gets its own
        :type env_factory: callable
        :param provider: embeds observations and thoughts
        :type provider: EmbeddingProvider
        :param action_policy: an `ActionPolicy`, or any object with act(input, generator, greedy) and entropy(input)
        :param reasoner: thought source. None runs without thoughts (plain PPO).
        :type reasoner: CotReasoner
        :param candidates: prompt candidates, required with a reasoner
        :type candidates: CandidateSet
        :param selector: prompt selector, required with a reasoner
        :type selector: PromptSelector
        :param run_dir: where checkpoints go. None disables checkpointing.
        :type run_dir: str or Path
        """
        self.logger = logging.getLogger(__name__)
        if reasoner is not None and (candidates is None or selector is None):
            raise ConfigError("running with thoughts needs a candidate set and a prompt selector")
        self.config = config
        self.seed = seed
        self.env_factory = env_factory
        self.provider = provider
        self.action_policy = action_policy
        self.reasoner = reasoner
        self.candidates = candidates
        self.selector = selector if reasoner is not None else None
        self.run_dir = Path(run_dir) if run_dir else None

        reference = env_factory()
        self.env_id = reference.env_id
        self.bounds = reference.reward_bounds()
        self.objective = config.objective
        self.outer_gamma = float(config.get("prompt_policy.gamma"))
        self.update_generator = torch.Generator().manual_seed(seed)
        self.episodes_done = 0
        self.last_checkpoint = None

    @property
    def selector_kind(self) -> str:
        return self.selector.kind if self.selector is not None else "none"

    @property
    def prompt_policy(self):
        return getattr(self.selector, "policy", None) if self.selector is not None else None

    def new_report(self) -> MetricsReport:
        return MetricsReport(env_id=self.env_id, selector=self.selector_kind, objective=self.objective,
                             bounds=self.bounds, seed=self.seed)

    def outer_reward(self, reward: float, entropy: float) -> float:
        return -entropy if self.objective == "neg-entropy" else reward

    async def rollout(self, episode_id: int, greedy: bool = False) -> List[TransitionRecord]:
        """
        Play one episode with the current (frozen) policies.

        :param episode_id: id of the episode; together with the run seed it fixes all randomness
        :type episode_id: int
        :param greedy: pick the most likely action instead of sampling
        :type greedy: bool
        :rtype: list of TransitionRecord
        """
        env = self.env_factory()
        seed = episode_seed(self.seed, episode_id)
        generator = torch.Generator().manual_seed(seed)
        observation = env.reset(seed)
        history = [observation]
        episode_selector = self.selector.new_episode() if self.selector is not None else None
        records: List[TransitionRecord] = []

        while True:
            decision, thought = None, None
            try:
                if episode_selector is not None:
                    decision = await episode_selector.select(history, generator)
                    thought = await self.reasoner.reason(observation, self.candidates[decision.prompt_id])
                obs_embedding = await self.provider.embed(observation.text)
                thought_embedding = await self.provider.embed(thought.text) if thought is not None else None
            except PromptPilotError as e:
                raise RolloutAbortedError(f"episode {episode_id} aborted at step {len(records)}: {e}",
                                          partial_trace=records) from e

            policy_input = PolicyInput(observation=observation, obs_embedding=obs_embedding,
                                       thought_embedding=thought_embedding, symbolic=observation.symbolic)
            action, log_prob, value = self.action_policy.act(policy_input, generator, greedy)
            entropy = self.action_policy.entropy(policy_input)
            outcome = env.step(action)

            records.append(TransitionRecord(
                t=len(records),
                observation=observation,
                prompt_id=decision.prompt_id if decision else None,
                prompt_log_prob=decision.log_prob if decision else 0.0,
                thought=thought,
                policy_input=policy_input,
                action=action,
                action_log_prob=log_prob,
                value=value,
                reward=outcome.reward,
                entropy=entropy,
                next_observation=outcome.observation,
                done=outcome.done,
                history_embedding=decision.history_embedding if decision else None,
            ))
            if episode_selector is not None:
                episode_selector.observe(decision.prompt_id, self.outer_reward(outcome.reward, entropy))

            observation = outcome.observation
            history.append(observation)
            if outcome.done:
                return records

    async def collect(self, episode_ids: Sequence[int], greedy: bool = False) -> List[List[TransitionRecord]]:
        """Roll out a batch of episodes concurrently; trajectories come back in episode id order."""
        episode_ids = sorted(episode_ids)
        return list(await asyncio.gather(*[self.rollout(i, greedy) for i in episode_ids]))

    def update(self, trajectories: List[List[TransitionRecord]]) -> dict:
        """
        Both update phases on one batch. The prompt policy goes first while the action policy is frozen, then the
        action policy while the prompt policy is frozen.
        """
        stats = {}
        prompt_policy = self.prompt_policy
        if self.selector is not None and self.selector.trainable:
            for _ in range(int(self.config.get("prompt_policy.epochs"))):
                stats["prompt_loss"] = prompt_policy.pg_update(
                    trajectories, gamma=self.outer_gamma, learning_rate=float(self.config.get("prompt_policy.lr")),
                    objective=self.objective, baseline=bool(self.config.get("prompt_policy.baseline")))
        if hasattr(self.action_policy, "ppo_update"):
            stats.update(self.action_policy.ppo_update(
                trajectories,
                gamma=float(self.config.get("action_policy.gamma")),
                gae_lambda=float(self.config.get("action_policy.gae_lambda")),
                clip_eps=float(self.config.get("action_policy.clip_eps")),
                epochs=int(self.config.get("action_policy.epochs")),
                minibatch_size=int(self.config.get("action_policy.minibatch_size")),
                lr=float(self.config.get("action_policy.lr")),
                value_coef=float(self.config.get("action_policy.value_coef")),
                entropy_coef=float(self.config.get("action_policy.entropy_coef")),
                generator=self.update_generator))
        return stats

    def save(self) -> Optional[Path]:
        if self.run_dir is None or not hasattr(self.action_policy, "state_dict"):
            return None
        path = checkpoint_path(self.run_dir, self.seed, self.episodes_done)
        self.last_checkpoint = save_checkpoint(path, self.episodes_done, self.config.as_dict(), self.action_policy,
                                               self.prompt_policy)
        return self.last_checkpoint

    async def train(self, episodes: int = None) -> MetricsReport:
        """
        Alternate rollouts and updates until the episode budget is spent.

        :param episodes: episode budget, defaults to trainer.episodes
        :type episodes: int
        :rtype: MetricsReport
        """
        total = int(episodes if episodes is not None else self.config.get("trainer.episodes"))
        batch_size = int(self.config.get("trainer.batch_episodes"))
        checkpoint_every = self.config.get("trainer.checkpoint_every")
        report = self.new_report()
        self.logger.info(f"seed {self.seed}: training {self.selector_kind}/{self.objective} on {self.env_id} "
                         f"for {total} episodes")

        try:
            while self.episodes_done < total:
                ids = range(self.episodes_done, min(self.episodes_done + batch_size, total))
                trajectories = await self.collect(ids)
                batch = [EpisodeMetrics.from_trajectory(i, self.seed, t, self.bounds) for i, t in zip(ids, trajectories)]
                for metrics in batch:
                    report.add(metrics)
                self.update(trajectories)
                before = self.episodes_done
                self.episodes_done = ids[-1] + 1
                self.logger.info(f"seed {self.seed} episodes {self.episodes_done}/{total}: "
                                 f"norm reward {np.mean([m.norm_reward for m in batch]):.3f}, "
                                 f"entropy {np.mean([m.mean_entropy for m in batch]):.3f}")
                if checkpoint_every and before // checkpoint_every != self.episodes_done // checkpoint_every:
                    self.save()
        except NonFiniteError as e:
            raise RunAbortedError(f"seed {self.seed} aborted after {self.episodes_done} episodes: {e}",
                                  last_checkpoint=self.last_checkpoint) from e
        self.save()
        return report

    async def evaluate(self, episodes: int, greedy: bool = False) -> MetricsReport:
        """
        Play episodes without any update.

        :param episodes: number of evaluation episodes, at least 1
        :type episodes: int
        :param greedy: greedy action and prompt choice
        :type greedy: bool
        :rtype: MetricsReport
        """
        if episodes < 1:
            raise ConfigError(f"evaluation needs at least one episode, got {episodes}")
        learned = self.prompt_policy is not None
        if learned:
            self.selector.greedy = greedy
        try:
            ids = list(range(EVAL_EPISODE_OFFSET, EVAL_EPISODE_OFFSET + episodes))
            trajectories = await self.collect(ids, greedy=greedy)
        finally:
            if learned:
                self.selector.greedy = False
        report = self.new_report()
        for i, trajectory in zip(ids, trajectories):
            report.add(EpisodeMetrics.from_trajectory(i - EVAL_EPISODE_OFFSET, self.seed, trajectory, self.bounds))
        return report

__author__ = 'Tommi Enenkel @alice_und_bob'

import math
from dataclasses import dataclass
from typing import List, Sequence

import torch

from promptpilot.embeddings.providers import EmbeddingProvider, embed_history
from promptpilot.errors import ConfigError
from promptpilot.policies.prompt_policy import PromptDecision, PromptPolicy

SELECTORS = ("learned", "random", "ucb")


@dataclass
class ArmStats:
    pulls: int = 0
    reward_sum: float = 0.0

    @property
    def mean(self) -> float:
        return self.reward_sum / self.pulls if self.pulls else 0.0


def ucb_select(step_stats: Sequence[ArmStats], exploration_c: float) -> int:
    """
    Upper-confidence-bound arm choice. Arms that were never pulled come first, lowest id first; otherwise the
    arm maximizing mean + c * sqrt(ln(total pulls) / pulls). Ties go to the lower id.

    :param step_stats: per-arm statistics of the current episode
    :type step_stats: list of ArmStats
    :param exploration_c: exploration constant c >= 0
    :type exploration_c: float
    :rtype: int
    """
    for arm, stats in enumerate(step_stats):
        if stats.pulls == 0:
            return arm
    total = sum(stats.pulls for stats in step_stats)
    best_arm, best_score = 0, -math.inf
    for arm, stats in enumerate(step_stats):
        score = stats.mean + exploration_c * math.sqrt(math.log(total) / stats.pulls)
        if score > best_score:
            best_arm, best_score = arm, score
    return best_arm


def random_select(k: int, generator: torch.Generator = None) -> int:
    return int(torch.randint(k, (1,), generator=generator))


class EpisodeSelector:
    """Prompt selection state scoped to one episode."""

    async def select(self, history: Sequence, generator: torch.Generator = None) -> PromptDecision:
        raise NotImplementedError

    def observe(self, prompt_id: int, outer_reward: float):
        pass


class PromptSelector:
    kind = None
    trainable = False

    def __init__(self, k: int):
        if k < 1:
            raise ConfigError(f"a prompt selector needs at least one candidate, got {k}")
        self.k = k

    def new_episode(self) -> EpisodeSelector:
        raise NotImplementedError


class _LearnedEpisode(EpisodeSelector):
    def __init__(self, selector: "LearnedSelector"):
        self.selector = selector

    async def select(self, history, generator=None) -> PromptDecision:
        embedding = await embed_history(self.selector.provider, history, self.selector.window)
        return self.selector.policy.sample(embedding, generator, greedy=self.selector.greedy)


class LearnedSelector(PromptSelector):
    kind = "learned"
    trainable = True

    def __init__(self, policy: PromptPolicy, provider: EmbeddingProvider, window: int = 0):
        """
        :param policy: the trainable prompt policy
        :type policy: PromptPolicy
        :param provider: embeds the observation history; must be the provider the candidates were embedded with
        :type provider: EmbeddingProvider
        :param window: number of past observations besides the latest to condition on
        :type window: int
        """
        super().__init__(policy.num_candidates)
        self.policy = policy
        self.provider = provider
        self.window = window
        self.greedy = False

    def new_episode(self) -> EpisodeSelector:
        return _LearnedEpisode(self)


class _RandomEpisode(EpisodeSelector):
    def __init__(self, k: int):
        self.k = k

    async def select(self, history, generator=None) -> PromptDecision:
        return PromptDecision(prompt_id=random_select(self.k, generator), log_prob=-math.log(self.k),
                              distribution=tuple([1.0 / self.k] * self.k))


class RandomSelector(PromptSelector):
    kind = "random"

    def new_episode(self) -> EpisodeSelector:
        return _RandomEpisode(self.k)


class UcbEpisode(EpisodeSelector):
    def __init__(self, k: int, exploration_c: float):
        self.exploration_c = exploration_c
        self.stats: List[ArmStats] = [ArmStats() for _ in range(k)]

    async def select(self, history, generator=None) -> PromptDecision:
        arm = ucb_select(self.stats, self.exploration_c)
        return PromptDecision(prompt_id=arm, log_prob=0.0,
                              distribution=tuple(1.0 if i == arm else 0.0 for i in range(len(self.stats))))

    def observe(self, prompt_id: int, outer_reward: float):
        self.stats[prompt_id].pulls += 1
        self.stats[prompt_id].reward_sum += outer_reward


class UcbSelector(PromptSelector):
    """Bandit over the prompt candidates. Counts start from zero in every episode."""

    kind = "ucb"

    def __init__(self, k: int, exploration_c: float = 1.0):
        super().__init__(k)
        if exploration_c < 0:
            raise ConfigError(f"prompt_policy.ucb_c must be >= 0, got {exploration_c}")
        self.exploration_c = exploration_c

    def new_episode(self) -> EpisodeSelector:
        return UcbEpisode(self.k, self.exploration_c)

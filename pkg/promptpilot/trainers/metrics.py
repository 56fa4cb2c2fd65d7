__author__ = 'Tommi Enenkel @alice_und_bob'

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from promptpilot.errors import NonFiniteError

METRIC_COLUMNS = ["episode", "seed", "raw_reward", "norm_reward", "mean_entropy", "steps", "selector", "objective"]


def normalize_reward(raw_reward: float, bounds: Tuple[float, float]) -> float:
    """
    Map an episode return into [0, 1] with fixed analytic bounds. Returns outside the bounds are clipped.

    :param raw_reward: undiscounted episode return
    :type raw_reward: float
    :param bounds: (min, max) return of the environment
    :type bounds: tuple
    :rtype: float
    """
    low, high = bounds
    if high <= low:
        raise ValueError(f"normalization bounds must satisfy min < max, got {bounds}")
    return min(1.0, max(0.0, (raw_reward - low) / (high - low)))


def auc(normalized_rewards: Sequence[float]) -> float:
    """Area under the normalized reward curve: the mean over all episodes."""
    values = np.asarray(normalized_rewards, dtype=np.float64)
    if values.size == 0:
        raise ValueError("auc of an empty curve")
    if np.any(values < 0.0) or np.any(values > 1.0) or not np.all(np.isfinite(values)):
        raise ValueError("auc expects normalized rewards in [0, 1]")
    return float(values.mean())


def standard_error(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


@dataclass(frozen=True)
class EpisodeMetrics:
    episode: int
    seed: int
    raw_reward: float
    norm_reward: float
    mean_entropy: float
    steps: int
    entropies: tuple = field(default=(), repr=False)
    prompt_ids: tuple = field(default=(), repr=False)

    @classmethod
    def from_trajectory(cls, episode: int, seed: int, trajectory: Sequence,
                        bounds: Tuple[float, float]) -> "EpisodeMetrics":
        raw = float(sum(record.reward for record in trajectory))
        entropies = tuple(float(record.entropy) for record in trajectory)
        if not math.isfinite(raw) or not all(math.isfinite(h) for h in entropies):
            raise NonFiniteError(f"episode {episode} produced a non-finite metric",
                                 diagnostics={"episode": episode, "raw_reward": raw})
        return cls(episode=episode, seed=seed, raw_reward=raw, norm_reward=normalize_reward(raw, bounds),
                   mean_entropy=float(np.mean(entropies)) if entropies else 0.0, steps=len(trajectory),
                   entropies=entropies, prompt_ids=tuple(record.prompt_id for record in trajectory))


@dataclass
class MetricsReport:
    """Per-episode metrics of one run (one seed) of one method."""
    env_id: str
    selector: str
    objective: str
    bounds: Tuple[float, float]
    seed: int
    episodes: List[EpisodeMetrics] = field(default_factory=list)

    def add(self, metrics: EpisodeMetrics):
        self.episodes.append(metrics)

    def __len__(self):
        return len(self.episodes)

    @property
    def auc(self) -> float:
        return auc([e.norm_reward for e in self.sorted_episodes()])

    def sorted_episodes(self) -> List[EpisodeMetrics]:
        return sorted(self.episodes, key=lambda e: e.episode)

    def mean_entropy(self, first: int = None, last: int = None) -> float:
        """Mean per-episode action entropy over the first or last n episodes (all of them by default)."""
        episodes = self.sorted_episodes()
        if first is not None:
            episodes = episodes[:first]
        if last is not None:
            episodes = episodes[-last:]
        return float(np.mean([e.mean_entropy for e in episodes]))

    def mean_norm_reward(self, last: int = None) -> float:
        episodes = self.sorted_episodes()
        if last is not None:
            episodes = episodes[-last:]
        return float(np.mean([e.norm_reward for e in episodes]))

    def to_frame(self) -> pd.DataFrame:
        rows = [{"episode": e.episode, "seed": e.seed, "raw_reward": e.raw_reward, "norm_reward": e.norm_reward,
                 "mean_entropy": e.mean_entropy, "steps": e.steps, "selector": self.selector,
                 "objective": self.objective} for e in self.sorted_episodes()]
        return pd.DataFrame(rows, columns=METRIC_COLUMNS)

    def summary(self) -> dict:
        if not self.episodes:
            return {"seed": self.seed, "episodes": 0}
        tail = min(100, len(self.episodes))
        return {
            "seed": self.seed,
            "episodes": len(self.episodes),
            "auc": self.auc,
            "mean_raw_reward": float(np.mean([e.raw_reward for e in self.episodes])),
            "final_norm_reward": self.mean_norm_reward(last=tail),
            "final_mean_entropy": self.mean_entropy(last=tail),
        }


def per_seed_summary(reports: Sequence[MetricsReport]) -> Dict[str, object]:
    """
    Aggregate runs of one method over seeds: mean and standard error of the AUC and of the final statistics.

    :param reports: one report per seed
    :type reports: list of MetricsReport
    :rtype: dict
    """
    if not reports:
        raise ValueError("per_seed_summary needs at least one report")
    summaries = [r.summary() for r in sorted(reports, key=lambda r: r.seed)]
    result = {"env_id": reports[0].env_id, "selector": reports[0].selector, "objective": reports[0].objective,
              "bounds": list(reports[0].bounds), "seeds": [s["seed"] for s in summaries], "per_seed": summaries}
    for key in ("auc", "final_norm_reward", "final_mean_entropy"):
        values = [s[key] for s in summaries if key in s]
        if values:
            result[key] = float(np.mean(values))
            result[f"{key}_stderr"] = standard_error(values)
    return result

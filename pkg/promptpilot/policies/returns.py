__author__ = 'Tommi Enenkel @alice_und_bob'

from typing import Sequence

import numpy as np

from promptpilot.errors import ConfigError


def check_gamma(gamma: float, name: str = "gamma"):
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"{name} must be in [0, 1), got {gamma}")


def discounted_return(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """
    G_t = sum over i >= t of gamma^(i - t) * r_i, for every t.

    :param rewards: per-step rewards of one episode
    :type rewards: sequence of float
    :param gamma: discount factor in [0, 1)
    :type gamma: float
    :rtype: numpy.ndarray
    """
    check_gamma(gamma)
    returns = np.zeros(len(rewards), dtype=np.float64)
    running = 0.0
    for t in reversed(range(len(rewards))):
        running = float(rewards[t]) + gamma * running
        returns[t] = running
    return returns


def gae(rewards: Sequence[float], values: Sequence[float], gamma: float, lam: float,
        last_value: float = 0.0) -> np.ndarray:
    """
    Generalized advantage estimates for one episode.

    :param rewards: per-step rewards
    :type rewards: sequence of float
    :param values: value estimates V(s_t) recorded during the rollout
    :type values: sequence of float
    :param gamma: discount factor in [0, 1)
    :type gamma: float
    :param lam: GAE lambda in [0, 1]
    :type lam: float
    :param last_value: bootstrap value after the final step; 0 for a finished episode
    :type last_value: float
    :rtype: numpy.ndarray
    """
    check_gamma(gamma)
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"gae_lambda must be in [0, 1], got {lam}")
    if len(rewards) != len(values):
        raise ValueError(f"got {len(rewards)} rewards but {len(values)} values")
    advantages = np.zeros(len(rewards), dtype=np.float64)
    running = 0.0
    for t in reversed(range(len(rewards))):
        next_value = float(values[t + 1]) if t + 1 < len(values) else last_value
        delta = float(rewards[t]) + gamma * next_value - float(values[t])
        running = delta + gamma * lam * running
        advantages[t] = running
    return advantages

__author__ = 'Tommi Enenkel @alice_und_bob'

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from promptpilot.embeddings.providers import EmbeddingVector
from promptpilot.envs.base import Observation
from promptpilot.errors import ConfigError, EmbeddingError, NonFiniteError
from promptpilot.policies.returns import discounted_return, gae

DEFAULT_PROB_FLOOR = 1e-6


@dataclass(frozen=True)
class PolicyInput:
    observation: Observation
    obs_embedding: EmbeddingVector
    thought_embedding: Optional[EmbeddingVector] = None
    symbolic: Optional[Tuple[float, ...]] = None


def entropy_of(probs: torch.Tensor) -> torch.Tensor:
    """-sum p log p over the last axis. Probabilities must be strictly positive."""
    return -(probs * torch.log(probs)).sum(dim=-1)


def _mlp(input_dim: int, hidden: int, output_dim: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(input_dim, hidden),
        nn.Tanh(),
        nn.Linear(hidden, hidden),
        nn.Tanh(),
        nn.Linear(hidden, output_dim),
    )


class ActionPolicy(nn.Module):
    """
    Categorical policy and value head over the concatenated [observation embedding, thought embedding, symbolic
    state] input, trained with clipped PPO. Leaving out the thought slot gives the plain PPO baseline.
    """

    def __init__(self, obs_dim: int, n_actions: int, thought_dim: int = 0, symbolic_dim: int = 0, hidden: int = 64,
                 prob_floor: float = DEFAULT_PROB_FLOOR, seed: int = 0, zero_last_layer: bool = False,
                 dtype=torch.float32):
        """
        :param obs_dim: dimension of the observation embedding
        :type obs_dim: int
        :param n_actions: size of the action set
        :type n_actions: int
        :param thought_dim: dimension of the thought embedding, 0 to ignore thoughts
        :type thought_dim: int
        :param symbolic_dim: length of the symbolic state vector, 0 to leave it out
        :type symbolic_dim: int
        :param hidden: width of both hidden layers
        :type hidden: int
        :param prob_floor: every action keeps at least this probability
        :type prob_floor: float
        :param seed: seed for the weight initialization
        :type seed: int
        :param zero_last_layer: start with zero logits, i.e. the uniform policy
        :type zero_last_layer: bool
        """
        super().__init__()
        self.logger = logging.getLogger(__name__)
        if n_actions < 1:
            raise ConfigError(f"action set must not be empty, got {n_actions} actions")
        if not 0.0 <= prob_floor * n_actions < 1.0:
            raise ConfigError(f"action_policy.prob_floor {prob_floor} is too large for {n_actions} actions")
        self.obs_dim = obs_dim
        self.thought_dim = thought_dim
        self.symbolic_dim = symbolic_dim
        self.n_actions = n_actions
        self.hidden = hidden
        self.prob_floor = prob_floor
        self.input_dim = obs_dim + thought_dim + symbolic_dim

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.policy_net = _mlp(self.input_dim, hidden, n_actions)
            self.value_net = _mlp(self.input_dim, hidden, 1)
        if zero_last_layer:
            nn.init.zeros_(self.policy_net[-1].weight)
            nn.init.zeros_(self.policy_net[-1].bias)
        self.to(dtype)
        self.optimizer = None

    @property
    def dtype(self):
        return self.policy_net[0].weight.dtype

    def architecture(self) -> dict:
        return {"obs_dim": self.obs_dim, "thought_dim": self.thought_dim, "symbolic_dim": self.symbolic_dim,
                "n_actions": self.n_actions, "hidden": self.hidden, "prob_floor": self.prob_floor}

    def features(self, inputs: Sequence[PolicyInput]) -> torch.Tensor:
        """Stack policy inputs into an (n, input_dim) tensor."""
        rows = []
        for policy_input in inputs:
            parts = [self._checked(policy_input.obs_embedding, self.obs_dim, "observation embedding")]
            if self.thought_dim:
                parts.append(self._checked(policy_input.thought_embedding, self.thought_dim, "thought embedding"))
            if self.symbolic_dim:
                parts.append(self._checked(policy_input.symbolic, self.symbolic_dim, "symbolic state"))
            rows.append(np.concatenate(parts))
        return torch.as_tensor(np.stack(rows), dtype=self.dtype)

    @staticmethod
    def _checked(values, expected: int, what: str) -> np.ndarray:
        if values is None:
            raise EmbeddingError(f"{what} is missing")
        if isinstance(values, EmbeddingVector):
            values = values.values
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (expected,):
            raise EmbeddingError(f"{what} has shape {values.shape}, the action policy expects ({expected},)")
        return values

    def distribution(self, x: torch.Tensor) -> torch.Tensor:
        """Floored action probabilities (1 - n * eps) * softmax(logits) + eps, shape (n, |A|)."""
        probs = torch.softmax(self.policy_net(x), dim=-1)
        return (1.0 - self.n_actions * self.prob_floor) * probs + self.prob_floor

    def value(self, x: torch.Tensor) -> torch.Tensor:
        return self.value_net(x).squeeze(-1)

    def act(self, policy_input: PolicyInput, generator: torch.Generator = None,
            greedy: bool = False) -> Tuple[int, float, float]:
        """
        Choose an action.

        :param policy_input: observation and thought embeddings
        :type policy_input: PolicyInput
        :param generator: RNG stream of the episode
        :type generator: torch.Generator
        :param greedy: take the most likely action instead of sampling
        :type greedy: bool
        :return: action index, its log-probability and the value estimate
        :rtype: tuple
        """
        with torch.no_grad():
            x = self.features([policy_input])
            probs = self.distribution(x)[0]
            if greedy:
                action = int(torch.argmax(probs))
            else:
                action = int(torch.multinomial(probs, 1, generator=generator))
            return action, float(torch.log(probs[action])), float(self.value(x)[0])

    def entropy(self, policy_input: PolicyInput) -> float:
        with torch.no_grad():
            return float(entropy_of(self.distribution(self.features([policy_input])))[0])

    def ppo_loss(self, x: torch.Tensor, actions, old_log_probs, advantages, returns, clip_eps: float = 0.2,
                 value_coef: float = 0.5, entropy_coef: float = 0.0):
        """
        Clipped PPO loss: -mean(min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)) + c_v * MSE(V, G) - c_h * H.

        :return: the loss and a dict of detached components
        :rtype: tuple
        """
        actions = torch.as_tensor(actions, dtype=torch.long)
        old_log_probs = torch.as_tensor(old_log_probs, dtype=self.dtype)
        advantages = torch.as_tensor(advantages, dtype=self.dtype)
        returns = torch.as_tensor(returns, dtype=self.dtype)

        probs = self.distribution(x)
        log_probs = torch.log(probs.gather(1, actions.reshape(-1, 1)).squeeze(1))
        ratio = torch.exp(log_probs - old_log_probs)
        surrogate = torch.min(ratio * advantages, torch.clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages)
        policy_loss = -surrogate.mean()
        value_loss = ((self.value(x) - returns) ** 2).mean()
        entropy = entropy_of(probs).mean()
        loss = policy_loss + value_coef * value_loss - entropy_coef * entropy
        stats = {
            "policy_loss": float(policy_loss),
            "value_loss": float(value_loss),
            "entropy": float(entropy),
            "clip_fraction": float(((ratio - 1.0).abs() > clip_eps).float().mean()),
        }
        return loss, stats

    def ppo_update(self, trajectories: Sequence[Sequence], gamma: float = 0.99, gae_lambda: float = 0.95,
                   clip_eps: float = 0.2, epochs: int = 4, minibatch_size: int = 64, lr: float = 3e-4,
                   value_coef: float = 0.5, entropy_coef: float = 0.0, generator: torch.Generator = None) -> dict:
        """
        PPO epochs over a batch of complete episodes. Advantages come from GAE and are normalized over the batch;
        the value head regresses on discounted returns.

        :param trajectories: episodes of transition records with stored log-probabilities and values
        :type trajectories: list of list of TransitionRecord
        :param generator: shuffles the minibatches
        :type generator: torch.Generator
        :return: loss statistics of the last minibatch plus the full-buffer value loss after every epoch
        :rtype: dict
        """
        trajectories = [t for t in trajectories if len(t) > 0]
        if not trajectories:
            raise ValueError("ppo_update needs a nonempty buffer")

        inputs, actions, old_log_probs, advantages, returns = [], [], [], [], []
        for trajectory in trajectories:
            rewards = [record.reward for record in trajectory]
            values = [record.value for record in trajectory]
            advantages.extend(gae(rewards, values, gamma, gae_lambda))
            returns.extend(discounted_return(rewards, gamma))
            for record in trajectory:
                inputs.append(record.policy_input)
                actions.append(record.action)
                old_log_probs.append(record.action_log_prob)

        x = self.features(inputs)
        actions = np.asarray(actions)
        old_log_probs = np.asarray(old_log_probs, dtype=np.float64)
        advantages = np.asarray(advantages, dtype=np.float64)
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
        returns = np.asarray(returns, dtype=np.float64)

        if self.optimizer is None:
            self.optimizer = torch.optim.Adam(self.parameters(), lr=lr)
        for group in self.optimizer.param_groups:
            group["lr"] = lr

        n = len(actions)
        stats = {}
        value_losses = []
        for _ in range(epochs):
            order = torch.randperm(n, generator=generator)
            for start in range(0, n, minibatch_size):
                idx = order[start:start + minibatch_size]
                rows = idx.numpy()
                loss, stats = self.ppo_loss(x[idx], actions[rows], old_log_probs[rows], advantages[rows], returns[rows],
                                            clip_eps, value_coef, entropy_coef)
                if not torch.isfinite(loss):
                    raise NonFiniteError("non-finite PPO loss", diagnostics=stats)
                self.optimizer.zero_grad()
                loss.backward()
                self.optimizer.step()
            with torch.no_grad():
                value_losses.append(float(((self.value(x) - torch.as_tensor(returns, dtype=self.dtype)) ** 2).mean()))
        stats["value_loss_per_epoch"] = value_losses
        return stats

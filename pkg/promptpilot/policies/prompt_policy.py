__author__ = 'Tommi Enenkel @alice_und_bob'

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from promptpilot.embeddings.providers import EmbeddingVector
from promptpilot.errors import ConfigError, EmbeddingError, NonFiniteError
from promptpilot.policies.returns import check_gamma, discounted_return

OBJECTIVES = ("neg-entropy", "env-reward")
SIMILARITIES = ("dot", "cosine")
ENCODERS = ("linear", "identity")


@dataclass(frozen=True)
class PromptDecision:
    prompt_id: int
    log_prob: float
    distribution: tuple
    # the embedded history the decision was conditioned on, kept for the policy-gradient update
    history_embedding: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


def _is_single(history) -> bool:
    if isinstance(history, EmbeddingVector):
        return True
    if torch.is_tensor(history):
        return history.dim() == 1
    return np.ndim(history) == 1


def entropy_return_to_go(trajectory: Sequence, gamma: float) -> np.ndarray:
    """
    Outer-loop return-to-go with the negative action entropy as reward: R_t = -sum_i gamma^(i-t) h_i.

    :param trajectory: transition records of one episode, each with a nonnegative `entropy`
    :type trajectory: list of TransitionRecord
    :param gamma: outer discount factor in [0, 1)
    :type gamma: float
    :rtype: numpy.ndarray
    """
    return -discounted_return([record.entropy for record in trajectory], gamma)


def outer_returns(trajectory: Sequence, gamma: float, objective: str = "neg-entropy") -> np.ndarray:
    if objective == "neg-entropy":
        return entropy_return_to_go(trajectory, gamma)
    if objective == "env-reward":
        return discounted_return([record.reward for record in trajectory], gamma)
    raise ConfigError(f"prompt_policy.objective must be one of {OBJECTIVES}, got '{objective}'")


class PromptPolicy(nn.Module):
    """
    Chooses one of K prompt candidates. Candidate and history embeddings are projected into a shared space and
    scored by similarity; the scores divided by a learnable temperature are the logits of a softmax.
    """

    def __init__(self, candidate_embeddings, projection_dim: int = 64, similarity: str = "dot",
                 encoder: str = "linear", init_scale: float = 0.1, temperature: float = 1.0, seed: int = 0,
                 dtype=torch.float32):
        """
        :param candidate_embeddings: K x d matrix, one embedding per prompt candidate, in id order
        :type candidate_embeddings: array-like
        :param projection_dim: width m of the shared projection space
        :type projection_dim: int
        :param similarity: "dot" or "cosine"
        :type similarity: str
        :param encoder: history encoder, "linear" (tanh(W e + b)) or "identity"
        :type encoder: str
        :param init_scale: projector weights start uniform in [-init_scale, init_scale]
        :type init_scale: float
        :param temperature: initial softmax temperature
        :type temperature: float
        :param seed: seed for the parameter initialization
        :type seed: int
        """
        super().__init__()
        self.logger = logging.getLogger(__name__)
        if similarity not in SIMILARITIES:
            raise ConfigError(f"prompt_policy.similarity must be one of {SIMILARITIES}, got '{similarity}'")
        if encoder not in ENCODERS:
            raise ConfigError(f"prompt_policy.encoder must be one of {ENCODERS}, got '{encoder}'")
        if temperature <= 0:
            raise ConfigError(f"prompt_policy temperature must be positive, got {temperature}")
        embeddings = torch.as_tensor(np.asarray(candidate_embeddings, dtype=np.float64), dtype=dtype)
        if embeddings.dim() != 2 or embeddings.shape[0] < 1:
            raise ConfigError("candidate embeddings must be a nonempty K x d matrix")
        self.register_buffer("candidate_embeddings", embeddings)
        self.similarity = similarity
        self.encoder_kind = encoder
        self.projection_dim = projection_dim
        dimension = embeddings.shape[1]

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.encoder = nn.Linear(dimension, dimension) if encoder == "linear" else None
            self.projector_p = nn.Linear(dimension, projection_dim, bias=False)
            self.projector_o = nn.Linear(dimension, projection_dim, bias=False)
            nn.init.uniform_(self.projector_p.weight, -init_scale, init_scale)
            nn.init.uniform_(self.projector_o.weight, -init_scale, init_scale)
        self.log_temperature = nn.Parameter(torch.tensor(math.log(temperature)))
        self.to(dtype)
        self.optimizer = None

    @property
    def num_candidates(self) -> int:
        return self.candidate_embeddings.shape[0]

    @property
    def embedding_dim(self) -> int:
        return self.candidate_embeddings.shape[1]

    def architecture(self) -> dict:
        return {"num_candidates": self.num_candidates, "embedding_dim": self.embedding_dim,
                "projection_dim": self.projection_dim, "similarity": self.similarity, "encoder": self.encoder_kind}

    def _as_batch(self, history) -> torch.Tensor:
        if isinstance(history, EmbeddingVector):
            history = history.values
        if not torch.is_tensor(history):
            history = np.asarray(history, dtype=np.float64)
        batch = torch.as_tensor(history, dtype=self.candidate_embeddings.dtype)
        if batch.dim() == 1:
            batch = batch.unsqueeze(0)
        if batch.shape[-1] != self.embedding_dim:
            raise EmbeddingError(f"history embedding has dimension {batch.shape[-1]}, "
                                 f"the prompt policy expects {self.embedding_dim}")
        return batch

    def scores(self, history) -> torch.Tensor:
        """Similarity logits, shape (batch, K)."""
        batch = self._as_batch(history)
        if self.encoder is not None:
            batch = torch.tanh(self.encoder(batch))
        projected_o = self.projector_o(batch)
        projected_p = self.projector_p(self.candidate_embeddings)
        if self.similarity == "cosine":
            projected_o = F.normalize(projected_o, dim=-1)
            projected_p = F.normalize(projected_p, dim=-1)
        return projected_o @ projected_p.T / torch.exp(self.log_temperature)

    def distribution(self, history) -> torch.Tensor:
        """
        Probability of every candidate given the embedded history.

        :param history: one embedding (d,) or a batch (n, d)
        :return: (K,) for a single embedding, else (n, K)
        :rtype: torch.Tensor
        """
        probs = torch.softmax(self.scores(history), dim=-1)
        return probs[0] if _is_single(history) else probs

    def log_probs(self, history, prompt_ids) -> torch.Tensor:
        log_probs = torch.log_softmax(self.scores(history), dim=-1)
        prompt_ids = torch.as_tensor(prompt_ids, dtype=torch.long).reshape(-1, 1)
        return log_probs.gather(1, prompt_ids).squeeze(1)

    def sample(self, history_embedding, generator: torch.Generator = None, greedy: bool = False) -> PromptDecision:
        """
        Draw a prompt id from the policy.

        :param history_embedding: embedded observation history
        :type history_embedding: EmbeddingVector or numpy.ndarray
        :param generator: RNG stream of the episode
        :type generator: torch.Generator
        :param greedy: take the most likely prompt instead of sampling
        :type greedy: bool
        :rtype: PromptDecision
        """
        with torch.no_grad():
            probs = self.distribution(history_embedding)
            if greedy:
                prompt_id = int(torch.argmax(probs))
            else:
                prompt_id = int(torch.multinomial(probs, 1, generator=generator))
            log_prob = float(torch.log(probs[prompt_id]))
        values = history_embedding.values if isinstance(history_embedding, EmbeddingVector) else history_embedding
        return PromptDecision(prompt_id=prompt_id, log_prob=log_prob,
                              distribution=tuple(float(p) for p in probs),
                              history_embedding=np.asarray(values, dtype=np.float64))

    def surrogate_loss(self, histories, prompt_ids, returns, n_trajectories: int,
                       baseline: bool = False) -> torch.Tensor:
        """
        Negated score-function objective: -(1/N) sum_t log pi(p_t | history_t) * (R_t - b).

        :param histories: (n, d) history embeddings, one per step of every trajectory
        :param prompt_ids: (n,) selected prompt ids
        :param returns: (n,) outer returns-to-go
        :param n_trajectories: N, the number of trajectories the steps came from
        :type n_trajectories: int
        :param baseline: subtract the mean return
        :type baseline: bool
        :rtype: torch.Tensor
        """
        returns = torch.as_tensor(np.asarray(returns, dtype=np.float64), dtype=self.candidate_embeddings.dtype)
        advantages = returns - returns.mean() if baseline else returns
        return -(self.log_probs(histories, prompt_ids) * advantages).sum() / n_trajectories

    def outer_batch(self, trajectories: Sequence[Sequence], gamma: float, objective: str = "neg-entropy"):
        """Stack the learned-selector steps of a batch of trajectories into update tensors."""
        check_gamma(gamma)
        histories: List[np.ndarray] = []
        prompt_ids: List[int] = []
        returns: List[float] = []
        for trajectory in trajectories:
            trajectory_returns = outer_returns(trajectory, gamma, objective)
            for record, outer_return in zip(trajectory, trajectory_returns):
                if record.history_embedding is None:
                    raise ValueError("transition record carries no history embedding; was it collected by the "
                                     "learned selector?")
                histories.append(record.history_embedding)
                prompt_ids.append(record.prompt_id)
                returns.append(outer_return)
        return np.stack(histories), np.asarray(prompt_ids), np.asarray(returns)

    def pg_update(self, trajectories: Sequence[Sequence], gamma: float, learning_rate: float,
                  objective: str = "neg-entropy", baseline: bool = False) -> float:
        """
        One gradient-ascent step on the outer objective, using Adam.

        :param trajectories: N trajectories of transition records
        :type trajectories: list of list of TransitionRecord
        :param gamma: outer discount factor
        :type gamma: float
        :param learning_rate: Adam step size
        :type learning_rate: float
        :param objective: "neg-entropy" or "env-reward"
        :type objective: str
        :param baseline: subtract the batch mean return
        :type baseline: bool
        :return: the surrogate loss before the step
        :rtype: float
        """
        trajectories = [t for t in trajectories if len(t) > 0]
        if not trajectories:
            raise ValueError("pg_update needs at least one nonempty trajectory")
        histories, prompt_ids, returns = self.outer_batch(trajectories, gamma, objective)

        if self.optimizer is None:
            self.optimizer = torch.optim.Adam(self.parameters(), lr=learning_rate)
        for group in self.optimizer.param_groups:
            group["lr"] = learning_rate

        self.optimizer.zero_grad()
        loss = self.surrogate_loss(histories, prompt_ids, returns, len(trajectories), baseline)
        loss.backward()
        bad = [name for name, p in self.named_parameters()
               if p.grad is not None and not torch.isfinite(p.grad).all()]
        if bad or not torch.isfinite(loss):
            self.optimizer.zero_grad()
            raise NonFiniteError("non-finite prompt policy gradient",
                                 diagnostics={"loss": float(loss), "parameters": bad,
                                              "returns_min": float(np.min(returns)),
                                              "returns_max": float(np.max(returns))})
        self.optimizer.step()
        return float(loss)

__author__ = 'Tommi Enenkel @alice_und_bob'

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from promptpilot.envs.base import Observation
from promptpilot.reasoning.cot_cache import Thought


@dataclass(frozen=True)
class TransitionRecord:
    """One step of a bilevel rollout: prompt, thought, action, reward and the action policy's entropy."""
    t: int
    observation: Observation
    prompt_id: Optional[int]
    prompt_log_prob: float
    thought: Optional[Thought]
    policy_input: Any
    action: int
    action_log_prob: float
    value: float
    reward: float
    entropy: float
    next_observation: Observation
    done: bool
    history_embedding: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def as_row(self) -> dict:
        """Flat JSON-friendly view used for replay comparison and traces."""
        return {
            "t": self.t,
            "situation": self.observation.situation,
            "obs_text": self.observation.text,
            "prompt_id": self.prompt_id,
            "prompt_log_prob": self.prompt_log_prob,
            "thought": self.thought.text if self.thought else None,
            "action": self.action,
            "action_log_prob": self.action_log_prob,
            "value": self.value,
            "reward": self.reward,
            "entropy": self.entropy,
            "done": self.done,
        }

__author__ = 'Tommi Enenkel @alice_und_bob'

import copy
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import simplejson as json

from promptpilot.errors import EpisodeDoneError, InvalidActionError


@dataclass(frozen=True)
class Observation:
    """What the agent sees after a reset or a step."""
    text: str
    symbolic: Tuple[float, ...]
    situation: str


@dataclass(frozen=True)
class Action:
    index: int
    token: str


@dataclass(frozen=True)
class StepOutcome:
    observation: Observation
    reward: float
    done: bool


class TextEnv:
    """
    Base class for the episodic text environments. Subclasses own an `EnvState` dataclass and implement the
    dynamics in `_transition`; the base class takes care of the done/step-cap contract, the RNG stream and the
    optional JSON-lines trace.
    """

    env_id = None
    action_tokens: Tuple[str, ...] = ()
    task_description = ""

    def __init__(self, max_steps: int = 100, trace_path: Optional[str] = None):
        """
        :param max_steps: episode truncation cap
        :type max_steps: int
        :param trace_path: file to append per-step JSON lines to. None disables tracing.
        :type trace_path: str or None
        """
        self.logger = logging.getLogger(__name__)
        self.max_steps = max_steps
        self.trace_path = Path(trace_path) if trace_path else None
        self.state = None
        self.rng = None
        self.done = True

    # subclass hooks

    def _initial_state(self, rng: np.random.Generator):
        raise NotImplementedError

    def _transition(self, state, action: Action) -> Tuple[object, float, bool]:
        """
        Apply the action to a copy of the state.

        :return: new state, reward and whether the episode reached a terminal state
        """
        raise NotImplementedError

    def situation(self, state) -> str:
        raise NotImplementedError

    def render_text(self, state) -> str:
        raise NotImplementedError

    def symbolic(self, state) -> Tuple[float, ...]:
        raise NotImplementedError

    def situation_examples(self) -> Dict[str, Observation]:
        """
        One representative observation for every situation the environment can produce. Used to fill the CoT cache.
        """
        raise NotImplementedError

    def reward_bounds(self) -> Tuple[float, float]:
        """Analytic (min, max) undiscounted episode return, used to normalize rewards."""
        raise NotImplementedError

    # public API

    @property
    def symbolic_size(self) -> int:
        raise NotImplementedError

    def observe(self, state) -> Observation:
        return Observation(text=self.render_text(state), symbolic=tuple(self.symbolic(state)),
                           situation=self.situation(state))

    def action(self, index: int) -> Action:
        if not isinstance(index, (int, np.integer)) or isinstance(index, bool) \
                or index < 0 or index >= len(self.action_tokens):
            raise InvalidActionError(f"action index {index!r} is not in [0, {len(self.action_tokens)})")
        return Action(int(index), self.action_tokens[index])

    def reset(self, seed: int) -> Observation:
        """
        Start a new episode. The seed fully determines the episode's randomness.

        :param seed: seed of the episode's RNG stream
        :type seed: int
        :return: the initial observation
        :rtype: Observation
        """
        self.rng = np.random.default_rng(seed)
        self.state = self._initial_state(self.rng)
        self.done = False
        observation = self.observe(self.state)
        self._trace(t=0, observation=observation, action=None, reward=None, done=False)
        return observation

    def step(self, action) -> StepOutcome:
        """
        Advance the episode by one action.

        :param action: an `Action` or a bare action index
        :type action: Action or int
        :return: observation, reward and done flag
        :rtype: StepOutcome
        """
        if self.done:
            raise EpisodeDoneError("step() called on a finished episode; call reset() first")
        if isinstance(action, Action):
            action = self.action(action.index)
        else:
            action = self.action(action)

        state, reward, terminal = self._transition(copy.deepcopy(self.state), action)
        self.state = state
        self.done = terminal or state.steps >= self.max_steps
        observation = self.observe(state)
        self._trace(t=state.steps, observation=observation, action=action.token, reward=reward, done=self.done)
        return StepOutcome(observation=observation, reward=float(reward), done=self.done)

    @staticmethod
    def state_digest(state) -> str:
        return hashlib.sha256(repr(state).encode("UTF-8")).hexdigest()[:16]

    def _trace(self, t, observation, action, reward, done):
        if self.trace_path is None:
            return
        record = {
            "t": t,
            "state_digest": self.state_digest(self.state),
            "obs_text": observation.text,
            "action": action,
            "reward": reward,
            "done": done,
            "situation": observation.situation,
        }
        self.trace_path.parent.mkdir(parents=True, exist_ok=True)
        with self.trace_path.open('a', encoding="UTF-8") as trace_file:
            trace_file.write(json.dumps(record) + "\n")


def format_position(position) -> str:
    return f"[{position[0]}, {position[1]}]"

__author__ = 'Tommi Enenkel @alice_und_bob'

from dataclasses import dataclass, replace
from typing import Dict, List, Tuple

import numpy as np

from promptpilot.envs.base import Action, Observation, TextEnv
from promptpilot.errors import ConfigError

GOAL_REWARD = 100.0
TRAP_REWARD = -5.0
MOVE_PENALTY = -1.0

LEFT = 0
RIGHT = 1


@dataclass(frozen=True)
class ChainState:
    position: int
    reward_side: str    # "left" or "right"
    steps: int = 0


class ChainWorld(TextEnv):
    """
    A chain of `length` positions. One end pays 100, the other -5, every other move costs 1. Both ends terminate
    the episode. In the partial variant the observation does not say which end pays 100.
    """

    env_id = "chain_world"
    action_tokens = ("left", "right")
    task_description = ("There is a chain world game. A chain of states in it, the agent can go left or go right. "
                        "An agent can gain the reward -5 in the one side of the chain and gain reward 100 in the "
                        "other side of the chain.")

    def __init__(self, length: int = 10, observability: str = "full", max_steps: int = 100, trace_path=None):
        """
        :param length: number of positions, at least 3
        :type length: int
        :param observability: "full" or "partial"
        :type observability: str
        """
        super().__init__(max_steps=max_steps, trace_path=trace_path)
        if length < 3:
            raise ConfigError(f"env.length must be at least 3, got {length}")
        if observability not in ("full", "partial"):
            raise ConfigError(f"env.observability must be 'full' or 'partial', got '{observability}'")
        self.length = length
        self.observability = observability

    @property
    def last(self) -> int:
        return self.length - 1

    @property
    def symbolic_size(self) -> int:
        return 2

    def _initial_state(self, rng: np.random.Generator) -> ChainState:
        side = "left" if rng.integers(2) == 0 else "right"
        position = int(rng.integers(1, self.last))
        return ChainState(position=position, reward_side=side)

    def end_reward(self, state: ChainState, position: int) -> float:
        rewarded = 0 if state.reward_side == "left" else self.last
        return GOAL_REWARD if position == rewarded else TRAP_REWARD

    def _transition(self, state: ChainState, action: Action) -> Tuple[ChainState, float, bool]:
        delta = -1 if action.index == LEFT else 1
        position = state.position + delta
        new_state = replace(state, position=position, steps=state.steps + 1)
        if position in (0, self.last):
            # the end reward replaces the move penalty
            return new_state, self.end_reward(state, position), True
        return new_state, MOVE_PENALTY, False

    def situation(self, state: ChainState) -> str:
        return f"reward-{state.reward_side}"

    def render_text(self, state: ChainState) -> str:
        text = f"You are at position {state.position} of a chain with positions 0 to {self.last}."
        if self.observability == "full":
            text += f" The reward of 100 is at the {state.reward_side} end."
        return text

    def symbolic(self, state: ChainState) -> Tuple[float, ...]:
        side = 0.0
        if self.observability == "full":
            side = -1.0 if state.reward_side == "left" else 1.0
        return (state.position / self.last, side)

    def situation_examples(self) -> Dict[str, Observation]:
        middle = self.length // 2
        return {self.situation(s): self.observe(s)
                for s in (ChainState(middle, "left"), ChainState(middle, "right"))}

    def reward_bounds(self) -> Tuple[float, float]:
        return TRAP_REWARD - self.last, GOAL_REWARD

    # value-iteration oracle

    def optimal_values(self, reward_side: str, iterations: int = 1000) -> List[float]:
        """
        Undiscounted optimal return from every position, by value iteration. Ends are terminal with value 0.

        :param reward_side: "left" or "right"
        :type reward_side: str
        :return: list of values indexed by position
        :rtype: list
        """
        reference = ChainState(position=1, reward_side=reward_side)
        values = [0.0] * self.length
        for _ in range(iterations):
            updated = [0.0] * self.length
            for position in range(1, self.last):
                updated[position] = max(self._backup(reference, values, position, delta) for delta in (-1, 1))
            if updated == values:
                break
            values = updated
        return values

    def _backup(self, reference: ChainState, values: List[float], position: int, delta: int) -> float:
        target = position + delta
        if target in (0, self.last):
            return self.end_reward(reference, target)
        return MOVE_PENALTY + values[target]

    def optimal_action(self, position: int, reward_side: str) -> int:
        values = self.optimal_values(reward_side)
        reference = ChainState(position=position, reward_side=reward_side)
        left = self._backup(reference, values, position, -1)
        right = self._backup(reference, values, position, 1)
        return RIGHT if right > left else LEFT


class ChainWorldOraclePolicy:
    """
    Stand-in action policy that plays the value-iteration optimum. Reads position and rewarded side from the
    symbolic observation, so it needs a fully observed chain.
    """

    def __init__(self, env: ChainWorld):
        self.env = env
        self.actions = {side: [env.optimal_action(p, side) if 0 < p < env.last else LEFT
                               for p in range(env.length)]
                        for side in ("left", "right")}

    def act(self, policy_input, generator=None, greedy=True):
        position_fraction, side = policy_input.observation.symbolic
        position = int(round(position_fraction * self.env.last))
        action = self.actions["left" if side < 0 else "right"][position]
        return action, 0.0, 0.0

    def entropy(self, policy_input) -> float:
        return 0.0

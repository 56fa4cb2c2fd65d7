__author__ = 'Tommi Enenkel @alice_und_bob'

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from promptpilot.envs.base import Action, Observation, TextEnv, format_position
from promptpilot.errors import ConfigError

GOAL_REWARD = 50.0
INVALID_MOVE_PENALTY = -2.0
STEP_PENALTY = -0.4

# digits are room cells, H hallways, # walls. Rooms are numbered circularly.
DEFAULT_LAYOUT = (
    "3333#0000",
    "3333#0000",
    "3333H0000",
    "3333#0000",
    "##H###H##",
    "2222#1111",
    "2222H1111",
    "2222#1111",
    "2222#1111",
)

MOVES = {
    "north": (0, -1),
    "east": (1, 0),
    "south": (0, 1),
    "west": (-1, 0),
}


@dataclass(frozen=True)
class FourRoomState:
    agent: Tuple[int, int]
    goal: Tuple[int, int]
    steps: int = 0


class FourRoom(TextEnv):
    """
    Four rooms connected by four hallways in a ring. The agent only sees the hallways of the room it is in.
    """

    env_id = "four_room"
    action_tokens = ("north", "east", "south", "west")
    task_description = ("In a four room game, there are four rooms(0,1,2,3) connected by four hallways. To move "
                        "through different rooms, agent can only go through the hallways. The agent can choose a "
                        "left-handed manner or a right-handed manner to move through different rooms. The agent's "
                        "initial position can be either in a room or in a hallway, and the goal position can be in "
                        "any room. The objective for the agent is to reach the goal.")

    def __init__(self, layout: Optional[Sequence[str]] = None, max_steps: int = 100, trace_path=None):
        """
        :param layout: ASCII map, one string per row (y), one character per column (x)
        :type layout: list of str
        """
        super().__init__(max_steps=max_steps, trace_path=trace_path)
        self.layout = tuple(layout) if layout else DEFAULT_LAYOUT
        self._parse_layout()

    def _parse_layout(self):
        widths = {len(row) for row in self.layout}
        if len(widths) != 1:
            raise ConfigError("env.layout rows must all have the same width")
        self.width = widths.pop()
        self.height = len(self.layout)
        self.rooms: Dict[Tuple[int, int], int] = {}
        self.hallways: List[Tuple[int, int]] = []
        for y, row in enumerate(self.layout):
            for x, cell in enumerate(row):
                if cell.isdigit():
                    self.rooms[(x, y)] = int(cell)
                elif cell == "H":
                    self.hallways.append((x, y))
                elif cell != "#":
                    raise ConfigError(f"env.layout has unknown cell '{cell}' at [{x}, {y}]")
        self.room_ids = sorted(set(self.rooms.values()))
        if self.room_ids != list(range(len(self.room_ids))) or len(self.room_ids) < 2:
            raise ConfigError("env.layout rooms must be numbered 0..n-1 with n >= 2")

        # which rooms does each hallway join
        self.hallway_rooms: Dict[Tuple[int, int], Tuple[int, ...]] = {}
        for hallway in self.hallways:
            joined = sorted({self.rooms[n] for n in self._neighbours(hallway) if n in self.rooms})
            if len(joined) != 2:
                raise ConfigError(f"hallway {format_position(hallway)} must join exactly two rooms")
            self.hallway_rooms[hallway] = tuple(joined)

    def _neighbours(self, cell):
        x, y = cell
        for dx, dy in MOVES.values():
            yield x + dx, y + dy

    @property
    def room_count(self) -> int:
        return len(self.room_ids)

    @property
    def symbolic_size(self) -> int:
        return 4

    def is_open(self, cell) -> bool:
        return cell in self.rooms or cell in self.hallway_rooms

    def room_of(self, cell) -> Optional[int]:
        return self.rooms.get(cell)

    def left_room(self, room: int) -> int:
        return (room - 1) % self.room_count

    def right_room(self, room: int) -> int:
        return (room + 1) % self.room_count

    def hallway_between(self, room_a: int, room_b: int) -> Optional[Tuple[int, int]]:
        wanted = tuple(sorted((room_a, room_b)))
        for hallway, joined in self.hallway_rooms.items():
            if joined == wanted:
                return hallway
        return None

    def _initial_state(self, rng: np.random.Generator) -> FourRoomState:
        room_cells = sorted(self.rooms)
        goal = room_cells[int(rng.integers(len(room_cells)))]
        open_cells = sorted(c for c in list(self.rooms) + self.hallways if c != goal)
        agent = open_cells[int(rng.integers(len(open_cells)))]
        return FourRoomState(agent=agent, goal=goal)

    def _transition(self, state: FourRoomState, action: Action) -> Tuple[FourRoomState, float, bool]:
        dx, dy = MOVES[action.token]
        target = (state.agent[0] + dx, state.agent[1] + dy)
        if not self.is_open(target):
            return replace(state, steps=state.steps + 1), INVALID_MOVE_PENALTY, False
        new_state = replace(state, agent=target, steps=state.steps + 1)
        if target == state.goal:
            return new_state, GOAL_REWARD, True
        return new_state, STEP_PENALTY, False

    def situation(self, state: FourRoomState) -> str:
        agent_room = self.room_of(state.agent)
        if agent_room is None:
            return "in-hallway"
        goal_room = self.room_of(state.goal)
        if agent_room == goal_room:
            return "same-room"
        left_hops = (agent_room - goal_room) % self.room_count
        right_hops = (goal_room - agent_room) % self.room_count
        # opposite rooms are a tie; break it towards the left-handed way
        return "goal-left-handed" if left_hops <= right_hops else "goal-right-handed"

    def render_text(self, state: FourRoomState) -> str:
        goal_room = self.room_of(state.goal)
        agent_room = self.room_of(state.agent)
        lines = []
        if agent_room is None:
            joined = self.hallway_rooms[state.agent]
            lines.append(f"You are in the hallway between Room{joined[0]} and Room{joined[1]}, "
                         f"goal is in Room{goal_room}.")
        else:
            lines.append(f"You are in Room{agent_room}, goal is in Room{goal_room}.")
            left = self.hallway_between(agent_room, self.left_room(agent_room))
            right = self.hallway_between(agent_room, self.right_room(agent_room))
            if left is not None:
                lines.append(f"The left-handed hallway's position is {format_position(left)}.")
            if right is not None:
                lines.append(f"The right-handed hallway's position is {format_position(right)}.")
        lines.append(f"Your position is {format_position(state.agent)}. "
                     f"The goal's position is {format_position(state.goal)}.")
        return " ".join(lines)

    def symbolic(self, state: FourRoomState) -> Tuple[float, ...]:
        sx = max(self.width - 1, 1)
        sy = max(self.height - 1, 1)
        return (state.agent[0] / sx, state.agent[1] / sy, state.goal[0] / sx, state.goal[1] / sy)

    def situation_examples(self) -> Dict[str, Observation]:
        examples = {}
        room_cells = sorted(self.rooms)
        for goal in room_cells:
            for agent in sorted(room_cells + self.hallways):
                if agent == goal:
                    continue
                state = FourRoomState(agent=agent, goal=goal)
                key = self.situation(state)
                if key not in examples:
                    examples[key] = self.observe(state)
        return dict(sorted(examples.items()))

    def reward_bounds(self) -> Tuple[float, float]:
        return INVALID_MOVE_PENALTY * self.max_steps, GOAL_REWARD

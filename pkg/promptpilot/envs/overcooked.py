__author__ = 'Tommi Enenkel @alice_und_bob'

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from promptpilot.envs.base import Action, Observation, TextEnv, format_position
from promptpilot.envs.four_room import MOVES
from promptpilot.errors import ConfigError

AGENT_NAME = "agent1"

DEFAULT_LAYOUT = (
    "XtXlXXX",
    "X.....a",
    "X.....b",
    "p.....X",
    "q.....X",
    "X.....*",
    "XXXXXXX",
)

DEFAULT_LEGEND = {
    "t": "tomato",
    "l": "lettuce",
    "p": "plate0",
    "q": "plate1",
    "a": "cutboard0",
    "b": "cutboard1",
    "*": "star",
    "X": "counter",
    ".": "floor",
}

RECIPES = {
    "tomato": ("tomato",),
    "salad": ("lettuce", "tomato"),
}

DEFAULT_SHAPING = {
    "fetch": 10.0,
    "chop": 30.0,
    "plate": 50.0,
    "deliver": 100.0,
    "step": -0.5,
}

FOODS = ("lettuce", "tomato")
STAGES = ("raw", "chopped", "plated", "delivered")
HOLDING_CLASSES = ("nothing", "lettuce", "tomato", "plate")


@dataclass
class KitchenState:
    agent: Tuple[int, int]
    held: Optional[str]
    # item -> (x, y) for counters, "agent" while held, or a plate name
    locations: Dict[str, object]
    progress: Dict[str, str]
    plates: Dict[str, List[str]]
    rewarded: List[str] = field(default_factory=list)
    steps: int = 0


class Overcooked(TextEnv):
    """
    Single-agent text kitchen. The agent interacts with an item by moving into the counter cell that holds it;
    what happens depends on what the agent holds and what is on the counter.
    """

    env_id = "overcooked"
    action_tokens = ("north", "east", "south", "west")
    task_description = ('I would like you to help me work with an AI agent called "agent1" in a kitchen environment '
                        'similar to the video game Overcooked. Inside the kitchen there are the following items: '
                        '["tomato", "lettuce", "plate0", "plate1", "cutboard0", "cutboard1"]. There are also the '
                        'following functions that you can use to make agent1 take actions: '
                        'agent1.fetch(item: str) - go to the item\'s location and pick it up (item will be in '
                        'agent1\'s hand), only the cutboard cannot be picked up or fetched; '
                        'agent1.put_onto(item: str) - put the object agent1 has in hand onto the item; '
                        'agent1.slice_on(item: str) - slice food (item has to be "cutboard0"); '
                        'agent1.deliver(None) - deliver the cooked food. '
                        'Note that agent can only hold one item at a time.')

    def __init__(self, recipe: str = "salad", layout: Optional[Sequence[str]] = None,
                 legend: Optional[Dict[str, str]] = None, shaping: Optional[Dict[str, float]] = None,
                 max_steps: int = 100, trace_path=None):
        """
        :param recipe: "tomato" or "salad"
        :type recipe: str
        :param layout: ASCII map, one string per row
        :type layout: list of str
        :param legend: map from layout character to item name, "counter" or "floor"
        :type legend: dict
        :param shaping: reward magnitudes, keys fetch/chop/plate/deliver/step
        :type shaping: dict
        """
        super().__init__(max_steps=max_steps, trace_path=trace_path)
        if recipe not in RECIPES:
            raise ConfigError(f"env.recipe must be one of {sorted(RECIPES)}, got '{recipe}'")
        self.recipe = recipe
        self.recipe_foods = RECIPES[recipe]
        self.layout = tuple(layout) if layout else DEFAULT_LAYOUT
        self.legend = dict(legend) if legend else dict(DEFAULT_LEGEND)
        self.shaping = dict(DEFAULT_SHAPING)
        if shaping:
            self.shaping.update(shaping)
        self._parse_layout()

    def _parse_layout(self):
        self.width = len(self.layout[0])
        self.height = len(self.layout)
        self.floor: List[Tuple[int, int]] = []
        self.fixtures: Dict[Tuple[int, int], str] = {}   # cell -> counter / cutboardN / star
        self.start_locations: Dict[str, Tuple[int, int]] = {}
        for y, row in enumerate(self.layout):
            if len(row) != self.width:
                raise ConfigError("env.layout rows must all have the same width")
            for x, char in enumerate(row):
                name = self.legend.get(char)
                if name is None:
                    raise ConfigError(f"env.layout character '{char}' at [{x}, {y}] is not in the legend")
                if name == "floor":
                    self.floor.append((x, y))
                elif name == "counter" or name == "star" or name.startswith("cutboard"):
                    self.fixtures[(x, y)] = name
                else:
                    # movable items start on a bare counter
                    self.fixtures[(x, y)] = "counter"
                    self.start_locations[name] = (x, y)
        missing = [name for name in FOODS + ("plate0",) if name not in self.start_locations]
        if missing:
            raise ConfigError(f"env.layout is missing items {missing}")
        if "star" not in self.fixtures.values():
            raise ConfigError("env.layout has no delivery star")
        self.plate_names = sorted(n for n in self.start_locations if n.startswith("plate"))
        self.cutboards = {cell: name for cell, name in self.fixtures.items() if name.startswith("cutboard")}

    @property
    def symbolic_size(self) -> int:
        return 4 + len(HOLDING_CLASSES)

    def _fresh_state(self, agent) -> KitchenState:
        return KitchenState(
            agent=agent,
            held=None,
            locations=dict(sorted(self.start_locations.items())),
            progress={food: "raw" for food in FOODS},
            plates={plate: [] for plate in self.plate_names},
        )

    def _initial_state(self, rng: np.random.Generator) -> KitchenState:
        return self._fresh_state(self.floor[int(rng.integers(len(self.floor)))])

    def item_at(self, state: KitchenState, cell) -> Optional[str]:
        for item, where in state.locations.items():
            if where == cell:
                return item
        return None

    def _reward_once(self, state: KitchenState, event: str, food: str = None) -> float:
        key = f"{event}:{food}" if food else event
        if food is not None and food not in self.recipe_foods:
            return 0.0
        if key in state.rewarded:
            return 0.0
        state.rewarded.append(key)
        return self.shaping[event]

    def _plate_food(self, state: KitchenState, food: str, plate: str) -> float:
        state.locations[food] = plate
        state.plates[plate].append(food)
        state.progress[food] = "plated"
        if sorted(state.plates[plate]) == sorted(self.recipe_foods):
            return self._reward_once(state, "plate")
        return 0.0

    def _transition(self, state: KitchenState, action: Action) -> Tuple[KitchenState, float, bool]:
        dx, dy = MOVES[action.token]
        target = (state.agent[0] + dx, state.agent[1] + dy)
        state.steps += 1
        reward = self.shaping["step"]
        if target in self.floor:
            state.agent = target
            return state, reward, False
        fixture = self.fixtures.get(target)
        if fixture is None:
            return state, reward, False

        item = self.item_at(state, target)
        held = state.held
        if held is None:
            if item in FOODS:
                if fixture.startswith("cutboard") and state.progress[item] == "raw":
                    state.progress[item] = "chopped"
                    reward += self._reward_once(state, "chop", item)
                else:
                    state.locations[item] = "agent"
                    state.held = item
                    reward += self._reward_once(state, "fetch", item)
            elif item in state.plates:
                state.locations[item] = "agent"
                state.held = item
        elif held in FOODS:
            if item is None and fixture != "star":
                state.locations[held] = target
                state.held = None
            elif item in state.plates and state.progress[held] == "chopped":
                state.held = None
                reward += self._plate_food(state, held, item)
        else:
            if item in FOODS and state.progress[item] == "chopped":
                reward += self._plate_food(state, item, held)
            elif fixture == "star":
                if sorted(state.plates[held]) == sorted(self.recipe_foods):
                    for food in state.plates[held]:
                        state.progress[food] = "delivered"
                    reward += self.shaping["deliver"]
                    return state, reward, True
            elif item is None and fixture == "counter":
                state.locations[held] = target
                state.held = None
        return state, reward, False

    def holding_class(self, state: KitchenState) -> str:
        if state.held is None:
            return "nothing"
        if state.held in state.plates:
            return "plate"
        return state.held

    def situation(self, state: KitchenState) -> str:
        stages = {food: "raw" if state.progress[food] == "raw" else "chopped" for food in FOODS}
        plated = "yes" if any(state.plates.values()) else "no"
        return (f"lettuce-{stages['lettuce']}|tomato-{stages['tomato']}|plated-{plated}"
                f"|holding-{self.holding_class(state)}")

    def _describe_item(self, state: KitchenState, item: str) -> str:
        if item in FOODS:
            stage = state.progress[item]
            return item if stage == "raw" else f"{'chopped' if stage == 'chopped' else stage} {item}"
        if item in state.plates and state.plates[item]:
            return f"{item} with {' and '.join('chopped ' + f for f in state.plates[item])}"
        return item

    def _describe_location(self, where) -> str:
        if where == "agent":
            return f"in {AGENT_NAME}'s hand"
        if isinstance(where, str):
            return f"on {where}"
        return format_position(where)

    def render_text(self, state: KitchenState) -> str:
        lines = ["Currently in the kitchen there are the following items and their location:"]
        for item, where in state.locations.items():
            lines.append(f"Name: {self._describe_item(state, item)}, Location: {self._describe_location(where)};")
        for cell, fixture in sorted(self.fixtures.items(), key=lambda kv: kv[1]):
            if fixture != "counter":
                lines.append(f"Name: {fixture}, Location: {format_position(cell)};")
        held = "nothing" if state.held is None else self._describe_item(state, state.held)
        lines.append(f"{AGENT_NAME} is at location {format_position(state.agent)} and currently holds {held}")
        return "\n".join(lines)

    def symbolic(self, state: KitchenState) -> Tuple[float, ...]:
        holding = self.holding_class(state)
        scale = len(STAGES) - 1
        return (state.agent[0] / (self.width - 1), state.agent[1] / (self.height - 1),
                STAGES.index(state.progress["lettuce"]) / scale, STAGES.index(state.progress["tomato"]) / scale) \
            + tuple(1.0 if holding == c else 0.0 for c in HOLDING_CLASSES)

    def situation_examples(self) -> Dict[str, Observation]:
        examples = {}
        agent = self.floor[len(self.floor) // 2]
        for lettuce in ("raw", "chopped"):
            for tomato in ("raw", "chopped"):
                for plated in (False, True):
                    for holding in HOLDING_CLASSES:
                        state = self._example_state(agent, {"lettuce": lettuce, "tomato": tomato}, plated, holding)
                        if state is not None:
                            examples[self.situation(state)] = self.observe(state)
        return examples

    def _example_state(self, agent, stages, plated, holding) -> Optional[KitchenState]:
        state = self._fresh_state(agent)
        state.progress.update(stages)
        plate = self.plate_names[0]
        if plated:
            candidates = [food for food in FOODS if stages[food] == "chopped" and food != holding]
            if not candidates:
                return None
            self._plate_food(state, candidates[0], plate)
        if holding == "plate":
            state.locations[plate] = "agent"
            state.held = plate
        elif holding in FOODS:
            state.locations[holding] = "agent"
            state.held = holding
        state.rewarded = []
        return state

    def reward_bounds(self) -> Tuple[float, float]:
        best = (len(self.recipe_foods) * (self.shaping["fetch"] + self.shaping["chop"])
                + self.shaping["plate"] + self.shaping["deliver"])
        return self.shaping["step"] * self.max_steps, best

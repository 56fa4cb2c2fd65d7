__author__ = 'Tommi Enenkel @alice_und_bob'

import re

from promptpilot.envs.base import Observation
from promptpilot.errors import ConfigError


class ThoughtTemplate:
    """Scripted stand-in for the reasoning LLM: a pure function of (situation, prompt text)."""

    env_id = None

    def think(self, observation: Observation, prompt_text: str) -> str:
        raise NotImplementedError


class ChainWorldTemplate(ThoughtTemplate):
    """
    A prompt that names a direction reveals the rewarded end only if it names the right one. Questions without a
    direction get the rewarded end, unless they declare the side unknown.
    """

    env_id = "chain_world"

    @staticmethod
    def prompt_direction(prompt_text: str):
        words = set(re.findall(r"[a-z]+", prompt_text.lower()))
        left, right = "left" in words, "right" in words
        if left == right:
            return None
        return "left" if left else "right"

    def think(self, observation: Observation, prompt_text: str) -> str:
        side = observation.situation.split("-", 1)[1]
        other = "right" if side == "left" else "left"
        direction = self.prompt_direction(prompt_text)
        lowered = prompt_text.lower()
        if direction == side:
            return f"The reward of 100 is at the {side} end. Go {side} at every step until you reach the end of " \
                   f"the chain."
        if direction is not None:
            return f"Going {direction} could reach the 100 points or the -5 end. It is not clear which way to go."
        if "unknown" in lowered:
            return "The 100 points could be at either end. Pick one direction and keep moving until you reach an end."
        if "avoid" in lowered:
            return f"At your position, avoid go {other} toward -5, balance with go {side} to reach 100."
        return f"To maximize the reward, consider taking the optimal sequence of go {side} actions."


class FourRoomTemplate(ThoughtTemplate):
    env_id = "four_room"

    SITUATION_SENTENCES = {
        "in-hallway": "You in hallway. Goal is not in current hallway.",
        "same-room": "You in the same room as the goal.",
        "goal-left-handed": "Goal is not in current room. To move through different rooms, you can only go through "
                            "hallways.",
        "goal-right-handed": "Goal is not in current room. To move through different rooms, you can only go through "
                             "hallways.",
    }

    @staticmethod
    def advice(prompt_text: str) -> str:
        lowered = prompt_text.lower()
        if "same room" in lowered:
            return "Walk straight to the goal's position."
        if "hallway between" in lowered:
            if "left-handed" in lowered:
                return "Go to the left-handed room entrance."
            if "right-handed" in lowered:
                return "Go to the right-handed room entrance."
        if "left-handed" in lowered:
            return "Enter the left-handed hallway."
        if "right-handed" in lowered:
            return "Enter the right-handed hallway."
        return "Explore the rooms one by one."

    def think(self, observation: Observation, prompt_text: str) -> str:
        return f"{self.SITUATION_SENTENCES[observation.situation]} {self.advice(prompt_text)} How do you choose a step?"


def _slice_plan(food: str) -> str:
    return "\n".join([
        "task_queue = []",
        f"# Step 1: Fetch a {food}",
        f'task_queue.append((agent1.fetch, "{food}"))',
        f"# Step 2: Put the {food} onto the cutboard (assuming cutboard0 is available)",
        'task_queue.append((agent1.put_onto, "cutboard0"))',
        f"# Step 3: Slice the {food} on the cutboard",
        'task_queue.append((agent1.slice_on, "cutboard0"))',
    ])


SALAD_PLAN = "\n".join([
    "task_queue = []",
    "# Step 1: Fetch a plate (choose either plate0 or plate1)",
    'task_queue.append((agent1.fetch, "plate0"))',
    "# Step 2: Put the sliced lettuce onto the plate",
    'task_queue.append((agent1.put_onto, "plate0"))',
    "# Step 3: Fetch the sliced tomato",
    'task_queue.append((agent1.fetch, "tomato"))',
    "# Step 4: Put the sliced tomato onto the plate",
    'task_queue.append((agent1.put_onto, "plate0"))',
    "# Step 5: Deliver the lettuce-tomato salad",
    "task_queue.append((agent1.deliver, None))",
])


class OvercookedTemplate(ThoughtTemplate):
    """The task-queue plan for the subtask the prompt asks about, followed by a progress comment."""

    env_id = "overcooked"

    PLANS = {
        "salad": SALAD_PLAN,
        "lettuce": _slice_plan("lettuce"),
        "tomato": _slice_plan("tomato"),
    }

    @staticmethod
    def progress(situation: str) -> str:
        parts = dict(part.split("-", 1) for part in situation.split("|"))
        plated = "food on a plate" if parts["plated"] == "yes" else "nothing plated yet"
        return f"# Progress: lettuce {parts['lettuce']}, tomato {parts['tomato']}, {plated}, " \
               f"agent1 holds {parts['holding']}"

    def think(self, observation: Observation, prompt_text: str) -> str:
        lowered = prompt_text.lower()
        plan = "task_queue = []"
        # the salad question mentions both foods, so it is matched first
        for subtask in ("salad", "lettuce", "tomato"):
            if subtask in lowered:
                plan = self.PLANS[subtask]
                break
        return f"{plan}\n{self.progress(observation.situation)}"


TEMPLATES = {template.env_id: template for template in (ChainWorldTemplate, FourRoomTemplate, OvercookedTemplate)}


def template_for(env_id: str) -> ThoughtTemplate:
    if env_id not in TEMPLATES:
        raise ConfigError(f"no thought template for environment '{env_id}'")
    return TEMPLATES[env_id]()

import pytest
import simplejson as json

from promptpilot.envs.base import Action
from promptpilot.envs.chain_world import ChainState, ChainWorld, ChainWorldOraclePolicy, LEFT, RIGHT
from promptpilot.envs.four_room import FourRoom, FourRoomState
from promptpilot.envs.overcooked import Overcooked
from promptpilot.errors import ConfigError, EpisodeDoneError, InvalidActionError
from promptpilot.policies.action_policy import PolicyInput


# ChainWorld

def test_chain_world_reset_is_seeded():
    env = ChainWorld()
    first = env.reset(7)
    second = env.reset(7)
    assert first == second
    assert 1 <= env.state.position <= 8
    assert first.situation in ("reward-left", "reward-right")


def test_chain_world_full_observation_names_side():
    env = ChainWorld()
    env.reset(0)
    env.state = ChainState(position=4, reward_side="right")
    observation = env.observe(env.state)
    assert observation.text == "You are at position 4 of a chain with positions 0 to 9. " \
                               "The reward of 100 is at the right end."
    assert observation.symbolic == (4 / 9, 1.0)
    assert observation.situation == "reward-right"


def test_chain_world_partial_observation_hides_side():
    env = ChainWorld(observability="partial")
    env.reset(0)
    env.state = ChainState(position=4, reward_side="left")
    observation = env.observe(env.state)
    assert observation.text == "You are at position 4 of a chain with positions 0 to 9."
    assert observation.symbolic == (4 / 9, 0.0)
    # the reasoner still keys on the hidden side
    assert observation.situation == "reward-left"


def test_chain_world_step_rewards():
    env = ChainWorld()
    env.reset(0)
    env.state = ChainState(position=8, reward_side="right")
    outcome = env.step(RIGHT)
    assert outcome.reward == 100.0
    assert outcome.done

    env.reset(0)
    env.state = ChainState(position=1, reward_side="right")
    outcome = env.step(LEFT)
    assert outcome.reward == -5.0
    assert outcome.done

    env.reset(0)
    env.state = ChainState(position=4, reward_side="right")
    outcome = env.step(RIGHT)
    assert outcome.reward == -1.0
    assert not outcome.done


def test_chain_world_rejects_bad_actions_and_finished_episodes():
    env = ChainWorld()
    env.reset(0)
    with pytest.raises(InvalidActionError):
        env.step(2)
    with pytest.raises(InvalidActionError):
        env.step(-1)
    env.state = ChainState(position=8, reward_side="right")
    env.step(Action(RIGHT, "right"))
    with pytest.raises(EpisodeDoneError):
        env.step(LEFT)


def test_chain_world_truncates_at_max_steps():
    env = ChainWorld(max_steps=3)
    env.reset(0)
    env.state = ChainState(position=4, reward_side="right")
    outcomes = [env.step(LEFT), env.step(RIGHT), env.step(LEFT)]
    assert [o.done for o in outcomes] == [False, False, True]


def test_chain_world_config_validation():
    with pytest.raises(ConfigError):
        ChainWorld(length=2)
    with pytest.raises(ConfigError):
        ChainWorld(observability="foggy")


def test_chain_world_value_iteration_matches_closed_form():
    env = ChainWorld()
    values = env.optimal_values("right")
    for position in range(1, 9):
        # 9 - position moves, the last one pays 100 instead of -1
        assert values[position] == 100.0 - (9 - position - 1)
    values = env.optimal_values("left")
    for position in range(1, 9):
        assert values[position] == 100.0 - (position - 1)


@pytest.mark.parametrize("side", ["left", "right"])
def test_chain_world_oracle_reaches_optimal_return_from_every_start(side):
    env = ChainWorld()
    oracle = ChainWorldOraclePolicy(env)
    values = env.optimal_values(side)
    for start in range(1, 9):
        observation = env.reset(0)
        env.state = ChainState(position=start, reward_side=side)
        observation = env.observe(env.state)
        total, done = 0.0, False
        while not done:
            action, _, _ = oracle.act(PolicyInput(observation=observation, obs_embedding=None), None, True)
            outcome = env.step(action)
            total += outcome.reward
            observation, done = outcome.observation, outcome.done
        assert total == values[start]


def test_chain_world_situation_examples_and_bounds():
    env = ChainWorld()
    examples = env.situation_examples()
    assert sorted(examples) == ["reward-left", "reward-right"]
    assert env.reward_bounds() == (-14.0, 100.0)


def test_trace_writes_json_lines(tmp_path):
    trace = tmp_path / "trace.jsonl"
    env = ChainWorld(trace_path=str(trace))
    env.reset(3)
    env.step(LEFT)
    lines = [json.loads(line) for line in trace.read_text(encoding="UTF-8").splitlines()]
    assert len(lines) == 2
    assert lines[0]["t"] == 0 and lines[0]["action"] is None
    assert lines[1]["t"] == 1 and lines[1]["action"] == "left"
    assert set(lines[1]) == {"t", "state_digest", "obs_text", "action", "reward", "done", "situation"}


# FourRoom

def test_four_room_layout_hallways():
    env = FourRoom()
    assert sorted(env.hallways) == [(2, 4), (4, 2), (4, 6), (6, 4)]
    assert env.hallway_between(1, 0) == (6, 4)
    assert env.hallway_between(1, 2) == (4, 6)


def test_four_room_observation_text():
    env = FourRoom()
    env.reset(0)
    env.state = FourRoomState(agent=(6, 6), goal=(1, 1))
    observation = env.observe(env.state)
    assert observation.text == ("You are in Room1, goal is in Room3. The left-handed hallway's position is [6, 4]. "
                                "The right-handed hallway's position is [4, 6]. Your position is [6, 6]. "
                                "The goal's position is [1, 1].")
    # opposite rooms tie, and the tie goes to the left-handed way
    assert observation.situation == "goal-left-handed"


def test_four_room_situations():
    env = FourRoom()
    assert env.situation(FourRoomState(agent=(4, 2), goal=(1, 1))) == "in-hallway"
    assert env.situation(FourRoomState(agent=(2, 2), goal=(1, 1))) == "same-room"
    # room 0 -> room 3 is one hop to the left
    assert env.situation(FourRoomState(agent=(6, 1), goal=(1, 1))) == "goal-left-handed"
    # room 2 -> room 3 is one hop to the right
    assert env.situation(FourRoomState(agent=(1, 6), goal=(1, 1))) == "goal-right-handed"
    assert sorted(env.situation_examples()) == ["goal-left-handed", "goal-right-handed", "in-hallway", "same-room"]


def test_four_room_reward_events():
    env = FourRoom()
    env.reset(0)
    env.state = FourRoomState(agent=(0, 0), goal=(8, 8))
    outcome = env.step(0)   # north, out of bounds
    assert outcome.reward == -2.0
    assert env.state.agent == (0, 0)
    assert not outcome.done

    outcome = env.step(1)   # east, a plain move
    assert outcome.reward == pytest.approx(-0.4)
    assert env.state.agent == (1, 0)

    env.state = FourRoomState(agent=(3, 0), goal=(8, 8))
    outcome = env.step(1)   # east into the wall column
    assert outcome.reward == -2.0
    assert env.state.agent == (3, 0)

    env.state = FourRoomState(agent=(1, 1), goal=(2, 1))
    outcome = env.step(1)
    assert outcome.reward == 50.0
    assert outcome.done


def test_four_room_start_never_on_goal():
    env = FourRoom()
    for seed in range(50):
        env.reset(seed)
        assert env.state.agent != env.state.goal
        assert env.state.goal in env.rooms


def test_four_room_layout_validation():
    with pytest.raises(ConfigError):
        FourRoom(layout=["00#1", "00#"])
    with pytest.raises(ConfigError):
        FourRoom(layout=["00?11"])


# Overcooked

def _walk(env, tokens):
    rewards = []
    outcome = None
    for token in tokens:
        outcome = env.step(env.action_tokens.index(token))
        rewards.append(outcome.reward)
    return rewards, outcome


def test_overcooked_tomato_golden_trace():
    env = Overcooked(recipe="tomato")
    env.reset(0)
    env.state = env._fresh_state((1, 1))

    rewards, _ = _walk(env, ["north"])
    assert rewards == [9.5]
    assert env.observe(env.state).situation == "lettuce-raw|tomato-raw|plated-no|holding-tomato"

    rewards, _ = _walk(env, ["east"] * 5)   # walk to the cutboard and put the tomato down
    assert rewards == [-0.5] * 5
    rewards, _ = _walk(env, ["east"])       # chop
    assert rewards == [29.5]
    rewards, _ = _walk(env, ["east"])       # pick up the chopped tomato, no second fetch reward
    assert rewards == [-0.5]
    assert env.observe(env.state).situation == "lettuce-raw|tomato-chopped|plated-no|holding-tomato"

    rewards, _ = _walk(env, ["south", "south", "west", "west", "west", "west", "west"])
    assert rewards[-1] == 49.5              # onto plate0 completes the recipe
    assert env.observe(env.state).situation == "lettuce-raw|tomato-chopped|plated-yes|holding-nothing"

    rewards, _ = _walk(env, ["west"])       # pick up the plate
    assert env.observe(env.state).situation == "lettuce-raw|tomato-chopped|plated-yes|holding-plate"

    rewards, outcome = _walk(env, ["south", "south", "east", "east", "east", "east", "east"])
    assert rewards[-1] == 99.5
    assert outcome.done
    assert env.state.steps == 23


def test_overcooked_progress_gating():
    env = Overcooked(recipe="salad")
    env.reset(0)
    env.state = env._fresh_state((1, 3))
    _walk(env, ["north", "north", "north"])                          # fetch the raw tomato from (1, 0)
    assert env.state.held == "tomato"
    rewards, _ = _walk(env, ["south", "south", "west"])              # raw food never goes onto a plate
    assert rewards[-1] == -0.5
    assert env.state.held == "tomato"
    assert env.state.plates["plate0"] == []

    env.state = env._fresh_state((5, 5))
    rewards, outcome = _walk(env, ["east"])                          # empty hand at the star does nothing
    assert rewards == [-0.5]
    assert not outcome.done


def test_overcooked_salad_only_rewards_complete_plate():
    env = Overcooked(recipe="salad")
    env.reset(0)
    state = env._fresh_state((1, 3))
    state.progress["tomato"] = "chopped"
    state.locations["tomato"] = "agent"
    state.held = "tomato"
    env.state = state
    rewards, _ = _walk(env, ["west"])
    # half a salad earns nothing
    assert rewards == [-0.5]
    assert env.state.plates["plate0"] == ["tomato"]


def test_overcooked_situation_examples():
    env = Overcooked()
    examples = env.situation_examples()
    assert len(examples) == 26
    assert sum(1 for key in examples if "plated-no" in key) == 16
    for key, observation in examples.items():
        assert observation.situation == key
    assert "lettuce-raw|tomato-raw|plated-yes|holding-nothing" not in examples


def test_overcooked_text_and_bounds():
    env = Overcooked(recipe="salad")
    observation = env.reset(0)
    assert observation.text.startswith("Currently in the kitchen there are the following items and their location:")
    assert "Name: tomato, Location: [1, 0];" in observation.text
    assert observation.text.endswith("currently holds nothing")
    assert len(observation.symbolic) == env.symbolic_size
    assert env.reward_bounds() == (-50.0, 230.0)
    assert Overcooked(recipe="tomato").reward_bounds() == (-50.0, 190.0)


def test_overcooked_config_validation():
    with pytest.raises(ConfigError):
        Overcooked(recipe="soup")
    with pytest.raises(ConfigError):
        Overcooked(layout=["XX", "X."])

"""
Full-length training experiments on the shipped configs. They take minutes to hours on a laptop and are skipped
by `pytest -m "not slow"`.
"""
import numpy as np
import pytest

import promptpilot
from promptpilot.embeddings.providers import LocalHashingProvider
from promptpilot.envs.chain_world import ChainState, ChainWorld
from promptpilot.trainers.metrics import standard_error
from promptpilot.trainers.train_config import TrainConfig

SEEDS = [0, 1, 2, 3, 4]


def _config(name, **overrides) -> TrainConfig:
    return TrainConfig.load(f"config/{name}.json", environ={}).with_overrides(
        dict({"seeds": SEEDS, "trainer.checkpoint_every": None}, **overrides))


async def _train(tmp_path, label, config):
    return await promptpilot.train(config, tmp_path / label)


def _pooled_stderr(a, b):
    return float(np.sqrt(standard_error(a) ** 2 + standard_error(b) ** 2))


@pytest.mark.slow
@pytest.mark.asyncio
async def test_vanilla_ppo_learns_chain_world(tmp_path):
    reports = await _train(tmp_path, "vanilla", _config("chain_world_vanilla_ppo"))
    assert np.mean([r.mean_norm_reward(last=100) for r in reports]) >= 0.9


@pytest.mark.slow
@pytest.mark.asyncio
async def test_prompt_policy_converges_to_the_situation_consistent_prompt(tmp_path):
    config = _config("sample_train_config")
    trainers = [await promptpilot.trainer_factory(config, seed) for seed in SEEDS]
    provider = LocalHashingProvider(dimension=int(config.get("embeddings.dimension")))
    env = ChainWorld()
    for trainer in trainers:
        await trainer.train()
        for side, consistent in (("left", 0), ("right", 1)):
            observation = env.observe(ChainState(position=5, reward_side=side))
            probs = trainer.prompt_policy.distribution(await provider.embed(observation.text))
            assert float(probs[consistent]) >= 0.9


@pytest.mark.slow
@pytest.mark.asyncio
async def test_learned_selector_beats_the_ablations(tmp_path):
    aucs = {}
    for selector in ("learned", "random", "ucb"):
        reports = await _train(tmp_path, selector, _config("sample_train_config", selector=selector))
        aucs[selector] = [r.auc for r in reports]
    for ablation in ("random", "ucb"):
        margin = np.mean(aucs["learned"]) - np.mean(aucs[ablation])
        assert margin > _pooled_stderr(aucs["learned"], aucs[ablation])


@pytest.mark.slow
@pytest.mark.asyncio
async def test_entropy_objective_ends_with_lower_entropy(tmp_path):
    entropy = await _train(tmp_path, "entropy", _config("sample_train_config"))
    reward = await _train(tmp_path, "reward", _config("sample_train_config", objective="env-reward"))
    assert np.mean([r.mean_entropy(last=100) for r in entropy]) < np.mean([r.mean_entropy(last=100) for r in reward])


@pytest.mark.slow
@pytest.mark.asyncio
@pytest.mark.parametrize("name", ["sample_train_config", "four_room"])
async def test_action_entropy_decays(tmp_path, name):
    reports = await _train(tmp_path, name, _config(name))
    for report in reports:
        assert report.mean_entropy(last=100) < report.mean_entropy(first=100)


@pytest.mark.slow
@pytest.mark.asyncio
async def test_training_runs_write_identical_metrics(tmp_path):
    config = _config("sample_train_config", **{"seeds": [0, 1], "trainer.episodes": 200})
    await _train(tmp_path, "first", config)
    await _train(tmp_path, "second", config)
    assert (tmp_path / "first" / "metrics.csv").read_bytes() == (tmp_path / "second" / "metrics.csv").read_bytes()

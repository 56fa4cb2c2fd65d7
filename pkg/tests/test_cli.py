import pytest
import simplejson as json

from promptpilot.cli import build_parser, main, resolve_config
from promptpilot.errors import ConfigError
from promptpilot.trainers.train_config import TrainConfig, parse_override

TINY = ["--seed", "0",
        "--set", "trainer.episodes=4",
        "--set", "trainer.batch_episodes=2",
        "--set", "embeddings.dimension=32",
        "--set", "prompt_policy.projection_dim=8",
        "--set", "action_policy.hidden=16",
        "--set", "env.max_steps=20"]


def _stderr_record(captured):
    lines = [line for line in captured.err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


def test_parse_override():
    assert parse_override("trainer.episodes=200") == ("trainer.episodes", 200)
    assert parse_override("env.observability=partial") == ("env.observability", "partial")
    assert parse_override("seeds=[1, 2]") == ("seeds", [1, 2])
    assert parse_override("prompt_policy.baseline=false") == ("prompt_policy.baseline", False)
    with pytest.raises(ConfigError):
        parse_override("trainer.episodes")


def test_flags_override_config_file():
    args = build_parser().parse_args(["train", "--config", "config/sample_train_config.json", "--selector", "ucb",
                                      "--seed", "4", "--set", "trainer.episodes=10",
                                      "--set", "env.observability=partial"])
    config = resolve_config(args)
    assert config.selector == "ucb"
    assert config.seeds == [4]
    assert config.get("trainer.episodes") == 10
    assert config.get("env.observability") == "partial"


def test_secrets_come_from_the_environment():
    config = TrainConfig({}, environ={"LLM_ENDPOINT": "http://llm.test", "EMBED_API_KEY": "k"})
    assert config.get("reasoner.endpoint") == "http://llm.test"
    assert config.get("embeddings.api_key") == "k"
    assert config.as_dict()["embeddings"]["api_key"] == "***"
    assert config.as_dict(redact=False)["embeddings"]["api_key"] == "k"


@pytest.mark.parametrize("overrides,path", [
    ({"prompt_policy.gamma": 1.0}, "prompt_policy.gamma"),
    ({"action_policy.gamma": -0.5}, "action_policy.gamma"),
    ({"env.id": "maze"}, "env.id"),
    ({"prompt_policy.selector": "greedy"}, "prompt_policy.selector"),
    ({"trainer.episodes": 0}, "trainer.episodes"),
    ({"candidates": "config/candidates/nope.json"}, "nope.json"),
    ({"reasoner.cache_path": "config/cot_cache/nope.jsonl"}, "reasoner.cache_path"),
    ({"reasoner.backend": "remote"}, "reasoner.endpoint"),
    ({"embeddings.provider": "remote"}, "embeddings.endpoint"),
])
def test_validation_names_the_offending_key(overrides, path):
    with pytest.raises(ConfigError) as error:
        TrainConfig({}, environ={}).with_overrides(overrides).validate()
    assert path in str(error.value)


def test_shipped_configs_validate():
    for name in ("sample_train_config", "chain_world_partial", "chain_world_auto", "chain_world_vanilla_ppo",
                 "chain_world_symbolic", "four_room", "overcooked_salad", "overcooked_tomato"):
        TrainConfig.load(f"config/{name}.json", environ={}).validate()


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        TrainConfig.load(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="UTF-8")
    with pytest.raises(ConfigError):
        TrainConfig.load(broken)


def test_train_eval_and_report(tmp_path, capsys):
    out = tmp_path / "learned"
    assert main(["train", "--out", str(out)] + TINY) == 0
    result = json.loads(capsys.readouterr().out)
    assert set(result["auc"]) == {"0"}
    assert 0.0 <= result["auc"]["0"] <= 1.0
    for name in ("manifest.json", "metrics.csv", "summary.json"):
        assert (out / name).exists()
    checkpoint = out / "checkpoints" / "seed_0" / "episode_000004.pt"
    assert checkpoint.exists()

    assert main(["eval", "--checkpoint", str(checkpoint), "--episodes", "2", "--greedy",
                 "--out", str(tmp_path / "eval")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["episodes"] == 2
    assert (tmp_path / "eval" / "eval_metrics.csv").exists()

    assert main(["report", str(out), "--out", str(tmp_path / "report")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["auc"][0]["method"] == "learned/neg-entropy"
    assert report["auc"][0]["auc_stderr"] == 0.0


def test_manifest_records_the_selector(tmp_path, capsys):
    out = tmp_path / "ucb"
    assert main(["train", "--selector", "ucb", "--out", str(out)] + TINY) == 0
    capsys.readouterr()
    manifest = json.loads((out / "manifest.json").read_text(encoding="UTF-8"))
    assert manifest["selector"] == "ucb"
    assert manifest["method"] == "ucb/neg-entropy"
    assert manifest["config"]["trainer"]["episodes"] == 4
    assert manifest["backends"]["reasoner"]["backend"] == "cache"


def test_symbolic_state_config_trains_and_evaluates(tmp_path, capsys):
    out = tmp_path / "symbolic"
    assert main(["train", "--config", "config/chain_world_symbolic.json", "--out", str(out)] + TINY) == 0
    capsys.readouterr()
    manifest = json.loads((out / "manifest.json").read_text(encoding="UTF-8"))
    assert manifest["method"] == "bilevel-symbolic/neg-entropy"
    assert manifest["config"]["action_policy"]["use_symbolic"] is True

    checkpoint = out / "checkpoints" / "seed_0" / "episode_000004.pt"
    assert main(["eval", "--checkpoint", str(checkpoint), "--episodes", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["episodes"] == 2


def test_existing_run_directory_is_refused(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--out", str(out)] + TINY) == 0
    capsys.readouterr()
    before = (out / "manifest.json").read_text(encoding="UTF-8")
    assert main(["train", "--out", str(out)] + TINY) == 1
    assert _stderr_record(capsys.readouterr())["error"] == "ConfigError"
    assert (out / "manifest.json").read_text(encoding="UTF-8") == before
    assert not (out / "error.json").exists()


def test_invalid_config_prints_error_record(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path / "run"), "--set", "prompt_policy.gamma=1.5"]) == 1
    record = _stderr_record(capsys.readouterr())
    assert record["error"] == "ConfigError"
    assert "prompt_policy.gamma" in record["message"]
    assert not (tmp_path / "run").exists()


def test_cache_cot_fills_missing_pairs(tmp_path, capsys):
    cache = tmp_path / "thoughts.jsonl"
    argv = ["cache-cot", "--reasoner", "template", "--set", f"reasoner.cache_path={cache}"]
    assert main(argv) == 0
    assert json.loads(capsys.readouterr().out) == {"written": 6, "skipped": 0, "failed": []}
    assert len(cache.read_text(encoding="UTF-8").splitlines()) == 6
    assert main(argv) == 0
    assert json.loads(capsys.readouterr().out)["skipped"] == 6


def test_cache_cot_needs_a_generating_backend(capsys):
    assert main(["cache-cot", "--reasoner", "cache"]) == 1
    assert _stderr_record(capsys.readouterr())["error"] == "ConfigError"


def test_gen_prompts_needs_an_endpoint(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("LLM_ENDPOINT", raising=False)
    assert main(["gen-prompts", "--task-file", "config/tasks/chain_world.json",
                 "--out", str(tmp_path / "prompts.json")]) == 1
    assert _stderr_record(capsys.readouterr())["error"] == "ConfigError"

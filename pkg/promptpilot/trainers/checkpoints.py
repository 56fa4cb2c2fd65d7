__author__ = 'Tommi Enenkel @alice_und_bob'

import logging
from pathlib import Path

import torch

from promptpilot.errors import CheckpointMismatchError

FORMAT_VERSION = 1

logger = logging.getLogger(__name__)


def checkpoint_path(run_dir, seed: int, episode: int) -> Path:
    return Path(run_dir) / "checkpoints" / f"seed_{seed}" / f"episode_{episode:06d}.pt"


def save_checkpoint(path, episode: int, config: dict, action_policy, prompt_policy=None) -> Path:
    """
    Write both policies, their optimizer states, the architecture and the resolved config into one file.

    :param path: target file
    :type path: str or Path
    :param episode: number of training episodes finished
    :type episode: int
    :param config: resolved config dict, enough to rebuild the trainer
    :type config: dict
    :param action_policy: the PPO policy
    :type action_policy: ActionPolicy
    :param prompt_policy: the learned prompt policy, if any
    :type prompt_policy: PromptPolicy or None
    :rtype: Path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": FORMAT_VERSION,
        "episode": episode,
        "config": config,
        "architecture": {
            "action_policy": action_policy.architecture(),
            "prompt_policy": prompt_policy.architecture() if prompt_policy is not None else None,
        },
        "action_policy": action_policy.state_dict(),
        "action_optimizer": action_policy.optimizer.state_dict() if action_policy.optimizer else None,
        "prompt_policy": prompt_policy.state_dict() if prompt_policy is not None else None,
        "prompt_optimizer": prompt_policy.optimizer.state_dict()
        if prompt_policy is not None and prompt_policy.optimizer else None,
    }
    # written under a temporary name and renamed into place
    partial = path.with_suffix(".partial")
    torch.save(payload, partial)
    partial.replace(path)
    logger.info(f"checkpoint written to {path}")
    return path


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointMismatchError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != FORMAT_VERSION:
        raise CheckpointMismatchError(f"checkpoint {path} has format version {payload.get('format_version')}, "
                                      f"expected {FORMAT_VERSION}")
    return payload


def restore(payload: dict, action_policy, prompt_policy=None):
    """Load weights and optimizer states into freshly built policies with matching architecture."""
    expected = payload["architecture"]["action_policy"]
    if expected != action_policy.architecture():
        raise CheckpointMismatchError(f"action policy architecture {action_policy.architecture()} does not match "
                                      f"the checkpoint's {expected}")
    action_policy.load_state_dict(payload["action_policy"])
    if payload.get("action_optimizer"):
        action_policy.optimizer = torch.optim.Adam(action_policy.parameters())
        action_policy.optimizer.load_state_dict(payload["action_optimizer"])
    if prompt_policy is not None:
        if payload.get("prompt_policy") is None:
            raise CheckpointMismatchError("checkpoint holds no prompt policy")
        if payload["architecture"]["prompt_policy"] != prompt_policy.architecture():
            raise CheckpointMismatchError("prompt policy architecture does not match the checkpoint")
        prompt_policy.load_state_dict(payload["prompt_policy"])
        if payload.get("prompt_optimizer"):
            prompt_policy.optimizer = torch.optim.Adam(prompt_policy.parameters())
            prompt_policy.optimizer.load_state_dict(payload["prompt_optimizer"])

__author__ = 'Tommi Enenkel @alice_und_bob'

import logging
from datetime import datetime
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Sequence

import pandas
import simplejson as json

from promptpilot.errors import ConfigError, PromptPilotError
from promptpilot.trainers.metrics import MetricsReport, per_seed_summary
from promptpilot.trainers.train_config import TrainConfig

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
METRICS = "metrics.csv"
SUMMARY = "summary.json"
ERROR = "error.json"


def code_version() -> str:
    try:
        return metadata.version("promptpilot")
    except metadata.PackageNotFoundError:
        return "unknown"


def error_record(error: BaseException) -> dict:
    """Machine-readable description of an abort."""
    details = error.details() if isinstance(error, PromptPilotError) else {}
    return {"error": type(error).__name__, "message": str(error), "details": details}


class RunDirectory:
    """
    A self-describing training run: manifest, per-episode metrics, summary and checkpoints live side by side, so
    reports need nothing but the directory.
    """

    def __init__(self, path):
        self.path = Path(path)

    @classmethod
    def create(cls, path, config: TrainConfig, backends: dict) -> "RunDirectory":
        """
        Create the directory and write the manifest. The manifest is never rewritten afterwards.

        :param path: run directory
        :type path: str or Path
        :param config: resolved configuration
        :type config: TrainConfig
        :param backends: identities of the embedding provider and reasoner
        :type backends: dict
        :raises ConfigError: the directory already holds a run
        """
        run = cls(path)
        if (run.path / MANIFEST).exists():
            raise ConfigError(f"{run.path} already holds a run; choose another --out")
        run.path.mkdir(parents=True, exist_ok=True)
        manifest = {
            "method": config.method,
            "env_id": config.get("env.id"),
            "selector": config.selector if config.get("action_policy.use_thoughts") else "none",
            "objective": config.objective,
            "seeds": config.seeds,
            "code_version": code_version(),
            "created": datetime.now().isoformat(timespec="seconds"),
            "backends": backends,
            "config": config.as_dict(),
            "outputs": {"metrics": METRICS, "summary": SUMMARY, "checkpoints": "checkpoints"},
        }
        with (run.path / MANIFEST).open('w', encoding="UTF-8") as target:
            json.dump(manifest, target, indent=2)
        logger.info(f"run manifest written to {run.path / MANIFEST}")
        return run

    @property
    def manifest(self) -> dict:
        path = self.path / MANIFEST
        if not path.exists():
            raise ConfigError(f"{self.path} is not a run directory (no {MANIFEST})")
        with path.open('r', encoding="UTF-8") as source:
            return json.load(source)

    def write_results(self, reports: Sequence[MetricsReport]):
        """Write metrics.csv (all seeds, sorted by seed and episode) and summary.json."""
        frame = pandas.concat([r.to_frame() for r in sorted(reports, key=lambda r: r.seed)], ignore_index=True)
        frame.to_csv(self.path / METRICS, index=False)
        with (self.path / SUMMARY).open('w', encoding="UTF-8") as target:
            json.dump(per_seed_summary(reports), target, indent=2)
        logger.info(f"metrics of {len(reports)} seed(s) written to {self.path}")

    def write_error(self, error: BaseException):
        with (self.path / ERROR).open('w', encoding="UTF-8") as target:
            json.dump(error_record(error), target, indent=2)

    def metrics(self) -> pandas.DataFrame:
        path = self.path / METRICS
        if not path.exists():
            raise ConfigError(f"{self.path} has no {METRICS}; did the run finish?")
        return pandas.read_csv(path)

    def summary(self) -> dict:
        with (self.path / SUMMARY).open('r', encoding="UTF-8") as source:
            return json.load(source)


def _mean_and_stderr(frame: pandas.DataFrame, keys: List[str], column: str, prefix: str) -> pandas.DataFrame:
    grouped = frame.groupby(keys)[column]
    result = pandas.DataFrame({f"{prefix}_mean": grouped.mean(), f"{prefix}_stderr": grouped.sem(ddof=1)})
    result[f"{prefix}_stderr"] = result[f"{prefix}_stderr"].fillna(0.0)
    return result.reset_index()


def build_report(run_dirs: Sequence, out_dir) -> Dict[str, pandas.DataFrame]:
    """
    Compare runs of one environment: per-method learning curves, entropy curves and AUC bars, as CSV plot data
    plus one workbook.

    :param run_dirs: run directories written by `train`
    :type run_dirs: list of str or Path
    :param out_dir: where curves.csv, entropy.csv, auc.csv and report.xlsx go
    :type out_dir: str or Path
    :return: the three tables
    :rtype: dict
    """
    if not run_dirs:
        raise ConfigError("report needs at least one run directory")
    frames = []
    env_ids = set()
    for run_dir in run_dirs:
        run = RunDirectory(run_dir)
        manifest = run.manifest
        env_ids.add(manifest["env_id"])
        frame = run.metrics()
        frame["method"] = manifest["method"]
        frames.append(frame)
    if len(env_ids) > 1:
        raise ConfigError(f"cannot compare runs of different environments: {sorted(env_ids)}")
    metrics = pandas.concat(frames, ignore_index=True)

    rewards = _mean_and_stderr(metrics, ["method", "episode"], "norm_reward", "norm_reward")
    entropy = _mean_and_stderr(metrics, ["method", "episode"], "mean_entropy", "entropy")
    curves = rewards.merge(entropy, on=["method", "episode"])

    per_seed = metrics.groupby(["method", "seed"])["norm_reward"].mean().reset_index()
    grouped = per_seed.groupby("method")["norm_reward"]
    auc = pandas.DataFrame({"auc": grouped.mean(), "auc_stderr": grouped.sem(ddof=1).fillna(0.0),
                            "seeds": grouped.count()}).reset_index()

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = {"curves": curves, "auc": auc, "entropy": entropy}
    for name, table in tables.items():
        table.to_csv(out_dir / f"{name}.csv", index=False)

    xlsx_file_path = out_dir / "report.xlsx"
    if xlsx_file_path.exists():     # delete and recreate the file
        xlsx_file_path.unlink()
    writer = pandas.ExcelWriter(xlsx_file_path, engine='xlsxwriter')
    for name, table in tables.items():
        table.to_excel(writer, sheet_name=name, index=False, freeze_panes=(1, 1))
        worksheet = writer.sheets[name]
        # Auto-adjust columns' width
        for column in table:
            column_width = max(table[column].astype(str).map(len).max(), len(column))
            col_idx = table.columns.get_loc(column)
            worksheet.set_column(col_idx, col_idx, column_width)
    writer.close()

    logger.info(f"report for {len(run_dirs)} run(s) of {env_ids.pop()} written to {out_dir}")
    return tables

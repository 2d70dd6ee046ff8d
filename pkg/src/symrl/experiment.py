"""Seeded experiment runs: config parsing, per-seed JSONL metrics, summaries and comparisons.

Config files are YAML documents::

    name: gridworld-bsc-sppo
    env: gridworld            # gridworld | cartpole | pointmass
    noise: {kind: bsc, p: 0.1}
    seeds: [0, 1, 2, 3, 4]
    output_dir: runs/gridworld-bsc-sppo
    trainer:
      algorithm: PPO
      loss: {alpha: 0.5, beta: 10.0, Z: -1.0, clip_epsilon: 0.2}
      gae: {gamma: 0.99, lam: 0.95, normalize: true}
      total_updates: 80

Any :class:`~symrl.trainer.TrainerConfig` field may appear under ``trainer``;
omitted fields keep their defaults. ``seed`` is taken from ``seeds``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from symrl.envs import ENVIRONMENTS, NoiseChannel
from symrl.errors import ContractViolation, NumericError, ValidationError
from symrl.trainer import Trainer, TrainerConfig, mean_and_se

OUTPUT_DIR_ENV = "SYMRL_OUTPUT_DIR"
METRIC_FIELDS = (
    "update",
    "env_steps",
    "mean_return_clean",
    "loss_forward",
    "loss_reverse",
    "loss_value",
    "entropy",
    "adv_sign_flip_rate",
    "clipped_fraction",
    "grad_norm",
    "seconds",
)
EVAL_FIELDS = ("eval_return_mean", "eval_return_se", "eval_returns", "grad_probe_rel_error")


@dataclass
class ExperimentConfig:
    name: str
    env: str
    noise: dict
    trainer: TrainerConfig
    seeds: list[int]
    output_dir: Path

    @classmethod
    def from_dict(cls, raw: dict, output_dir=None, seeds=None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ValidationError("config must be a mapping")
        unknown = set(raw) - {"name", "env", "noise", "trainer", "seeds", "output_dir"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        env = raw.get("env")
        if env not in ENVIRONMENTS:
            raise ValidationError(f"unknown env {env!r}; choose from {sorted(ENVIRONMENTS)}")
        noise = dict(raw.get("noise") or {"kind": "none"})
        try:
            channel = NoiseChannel(**noise)
        except (TypeError, ContractViolation) as exc:
            raise ValidationError(f"bad noise spec {noise}: {exc}") from None
        if channel.kind == "bsc" and not ENVIRONMENTS[env].binary_rewards:
            raise ValidationError(f"bsc noise needs {{0,1}} rewards, which {env} does not produce")
        seeds = list(seeds if seeds is not None else raw.get("seeds") or [])
        if not seeds or len(set(seeds)) != len(seeds) or not all(isinstance(s, int) for s in seeds):
            raise ValidationError("seeds must be a non-empty list of distinct integers")
        try:
            trainer = TrainerConfig.from_dict(dict(raw.get("trainer") or {}))
        except (TypeError, ContractViolation) as exc:
            raise ValidationError(f"bad trainer section: {exc}") from None
        name = str(raw.get("name") or "experiment")
        out = output_dir or raw.get("output_dir") or os.environ.get(OUTPUT_DIR_ENV) or "runs"
        out = Path(out)
        if output_dir is None and raw.get("output_dir") is None:
            out = out / name
        return cls(name, env, _canonical_noise(channel), trainer, seeds, out)

    @classmethod
    def load(cls, path, output_dir=None, seeds=None) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        return cls.from_dict(raw, output_dir=output_dir, seeds=seeds)

    def semantic_dict(self) -> dict:
        trainer = self.trainer.to_dict()
        trainer.pop("seed")
        return {"env": self.env, "noise": self.noise, "seeds": list(self.seeds), "trainer": trainer}

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _canonical_noise(ch: NoiseChannel) -> dict:
    if ch.kind == "bsc":
        return {"kind": "bsc", "p": float(ch.p)}
    if ch.kind == "gaussian":
        return {"kind": "gaussian", "sigma": float(ch.sigma)}
    return {"kind": "none"}


@dataclass
class SeedResult:
    seed: int
    final_mean: float | None
    final_se: float | None
    final_returns: list[float] | None
    metrics_file: str
    error: str | None = None


@dataclass
class RunSummary:
    name: str
    env: str
    noise: dict
    config_hash: str
    seeds: list[SeedResult]
    aggregate_mean: float | None
    aggregate_se: float | None
    wall_clock_seconds: float
    config: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(s.error for s in self.seeds)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "env": self.env,
            "noise": self.noise,
            "config_hash": self.config_hash,
            "config": self.config,
            "seeds": [vars(s) for s in self.seeds],
            "aggregate": {"mean": self.aggregate_mean, "se": self.aggregate_se, "n": len(self.seeds)},
            "wall_clock_seconds": self.wall_clock_seconds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunSummary":
        return cls(
            name=d["name"],
            env=d["env"],
            noise=d["noise"],
            config_hash=d["config_hash"],
            seeds=[SeedResult(**s) for s in d["seeds"]],
            aggregate_mean=d["aggregate"]["mean"],
            aggregate_se=d["aggregate"]["se"],
            wall_clock_seconds=d["wall_clock_seconds"],
            config=d.get("config", {}),
        )

    @classmethod
    def load(cls, path) -> "RunSummary":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def metrics_path(output_dir, seed: int) -> Path:
    return Path(output_dir) / f"metrics_seed{seed}.jsonl"


def _record_line(metrics) -> str:
    rec = metrics.to_record()
    ordered = {k: rec[k] for k in METRIC_FIELDS + EVAL_FIELDS}
    return json.dumps(ordered, allow_nan=False) + "\n"


def run_seed(cfg: ExperimentConfig, seed: int, quiet: bool = True) -> SeedResult:
    path = metrics_path(cfg.output_dir, seed)
    trainer_cfg = replace(cfg.trainer, seed=seed)
    trainer = Trainer(cfg.env, trainer_cfg, NoiseChannel(**cfg.noise))
    last_eval = None
    with open(path, "w", encoding="utf-8") as fh:
        try:
            for m in trainer.train():
                fh.write(_record_line(m))
                if m.eval_returns is not None:
                    last_eval = m
                if not quiet:
                    print(f"[{cfg.name} seed={seed}] update {m.update} return={m.mean_return_clean}", flush=True)
        except (NumericError, ValueError, FloatingPointError) as exc:
            return SeedResult(seed, None, None, None, path.name, error=f"{type(exc).__name__}: {exc}")
    return SeedResult(seed, last_eval.eval_return_mean, last_eval.eval_return_se, last_eval.eval_returns, path.name)


def _aggregate(results: list[SeedResult]) -> tuple[float | None, float | None]:
    finals = [r.final_mean for r in results if r.final_mean is not None]
    if not finals:
        return None, None
    return mean_and_se(finals)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, quiet: bool = True) -> RunSummary:
    """Train every seed, write ``metrics_seed<k>.jsonl`` files and ``summary.json``."""
    started = time.perf_counter()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_seed, [cfg] * len(cfg.seeds), cfg.seeds, [quiet] * len(cfg.seeds)))
    else:
        results = [run_seed(cfg, s, quiet) for s in cfg.seeds]
    mean, se = _aggregate(results)
    summary = RunSummary(
        name=cfg.name,
        env=cfg.env,
        noise=cfg.noise,
        config_hash=cfg.config_hash(),
        seeds=results,
        aggregate_mean=mean,
        aggregate_se=se,
        wall_clock_seconds=time.perf_counter() - started,
        config=cfg.semantic_dict(),
    )
    with open(cfg.output_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
        fh.write("\n")
    return summary


def read_metrics(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def summarize_metrics(paths: dict[int, Path]) -> tuple[list[SeedResult], float | None, float | None]:
    """Rebuild per-seed finals and the aggregate from metrics files alone."""
    results = []
    for seed, path in paths.items():
        evals = [r for r in read_metrics(path) if r.get("eval_returns") is not None]
        if not evals:
            results.append(SeedResult(seed, None, None, None, Path(path).name, error="no evaluation"))
            continue
        returns = evals[-1]["eval_returns"]
        m, se = mean_and_se(returns)
        results.append(SeedResult(seed, m, se, returns, Path(path).name))
    mean, se = _aggregate(results)
    return results, mean, se


def compare(summary_a, summary_b) -> dict:
    """Paired per-seed comparison of two runs over the same env, noise and seeds.

    Differences are ``b - a``; the verdict names the run with the higher
    aggregate mean, or ``tie``.
    """
    a = summary_a if isinstance(summary_a, RunSummary) else RunSummary.load(summary_a)
    b = summary_b if isinstance(summary_b, RunSummary) else RunSummary.load(summary_b)
    if a.env != b.env or a.noise != b.noise:
        raise ValidationError(f"runs differ in env/noise: {a.env}/{a.noise} vs {b.env}/{b.noise}")
    seeds_a = {s.seed: s for s in a.seeds}
    seeds_b = {s.seed: s for s in b.seeds}
    if set(seeds_a) != set(seeds_b):
        raise ValidationError(f"seed sets differ: {sorted(seeds_a)} vs {sorted(seeds_b)}")
    paired = []
    for seed in sorted(seeds_a):
        ma, mb = seeds_a[seed].final_mean, seeds_b[seed].final_mean
        if ma is None or mb is None:
            raise ValidationError(f"seed {seed} has no final evaluation in one of the runs")
        paired.append({"seed": seed, "a": ma, "b": mb, "diff": mb - ma})
    diffs = np.array([p["diff"] for p in paired])
    diff_mean, diff_se = mean_and_se(diffs)
    mean_a, se_a = mean_and_se([p["a"] for p in paired])
    mean_b, se_b = mean_and_se([p["b"] for p in paired])
    if mean_b > mean_a:
        verdict = "b"
    elif mean_a > mean_b:
        verdict = "a"
    else:
        verdict = "tie"
    return {
        "env": a.env,
        "noise": a.noise,
        "a": {"name": a.name, "mean": mean_a, "se": se_a},
        "b": {"name": b.name, "mean": mean_b, "se": se_b},
        "paired": paired,
        "mean_difference": diff_mean,
        "difference_se": diff_se,
        "b_wins_seeds": int((diffs > 0).sum()),
        "a_wins_seeds": int((diffs < 0).sum()),
        "verdict": verdict,
    }


def export_csv(metrics_file, out_path=None) -> Path:
    """Write the metrics of one JSONL file as CSV (``eval_returns`` is dropped)."""
    records = read_metrics(metrics_file)
    out = Path(out_path) if out_path else Path(metrics_file).with_suffix(".csv")
    columns = list(METRIC_FIELDS) + ["eval_return_mean", "eval_return_se"]
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rec in records:
            writer.writerow(["" if rec.get(c) is None else rec.get(c) for c in columns])
    return out

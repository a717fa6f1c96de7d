"""Seeded multi-trial execution with epoch-averaged metrics and persistence.

Every seed produces one RunRecord and one CSV; the cross-seed summary is a
deterministic merge (timing is written to a separate file so reruns stay
byte-identical).  The reported loss is the objective at the pre-update
iterate of each batch, and epoch averages window exactly the past
batches_per_epoch losses.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..optimizers import Trajectory, run_multistage
from .config import ExperimentConfig


@dataclass
class RunRecord:
    """Per-seed summary series at epoch granularity."""

    config_hash: str
    problem_label: str
    algorithm_label: str
    seed: int
    epoch: np.ndarray
    k_end: np.ndarray
    loss_epoch_avg: np.ndarray
    grad_norm_sq_mean: np.ndarray
    stage: np.ndarray
    diverged: bool
    final: dict = field(default_factory=dict)
    timing_sec: float = 0.0

    def metric(self, name: str) -> np.ndarray:
        if name not in ("loss_epoch_avg", "grad_norm_sq_mean"):
            raise ValueError(f"unknown metric {name!r}")
        return getattr(self, name)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,k_end,loss_epoch_avg,grad_norm_sq_mean,stage\n")
            for i in range(len(self.epoch)):
                fh.write(
                    f"{int(self.epoch[i])},{int(self.k_end[i])},{self.loss_epoch_avg[i]:.17g},"
                    f"{self.grad_norm_sq_mean[i]:.17g},{int(self.stage[i])}\n"
                )


def record_from_trajectory(traj: Trajectory, m: int, config_hash: str, algorithm_label: str) -> RunRecord:
    """Collapse a trajectory to epoch rows: window means over exactly m batches."""
    n_epochs = traj.K // m
    loss = np.array([np.mean(traj.f_x[e * m : (e + 1) * m]) for e in range(n_epochs)])
    running = np.cumsum(traj.grad_norm_sq) / np.arange(1, traj.K + 1)
    k_end = np.arange(1, n_epochs + 1) * m
    final = {}
    if n_epochs:
        final = {
            "loss_epoch_avg": float(loss[-1]),
            "grad_norm_sq_mean": float(running[k_end[-1] - 1]),
            "f_last": float(traj.f_x[-1]),
        }
    return RunRecord(
        config_hash=config_hash,
        problem_label=traj.problem_label,
        algorithm_label=algorithm_label,
        seed=traj.seed,
        epoch=np.arange(1, n_epochs + 1),
        k_end=k_end,
        loss_epoch_avg=loss,
        grad_norm_sq_mean=running[k_end - 1] if n_epochs else np.empty(0),
        stage=traj.stage[k_end - 1] if n_epochs else np.empty(0, dtype=int),
        diverged=traj.diverged,
        final=final,
    )


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None, name: Optional[str] = None) -> list:
    """One RunRecord per seed, plus per-seed CSVs and an aggregate summary.

    A diverging seed is flagged in its record and the summary but does not
    abort sibling seeds.  All written files are a deterministic function of
    the config.
    """
    p = cfg.build_problem()
    nm = cfg.build_noise()
    s = cfg.build_schedule()
    x0 = cfg.initial_point(p.dimension)
    label = cfg.algorithm_label()
    records = []
    for seed in cfg.seeds:
        t0 = time.perf_counter()
        traj = run_multistage(p, nm, s, seed=seed, recording=cfg.recording, x0=x0)
        rec = record_from_trajectory(traj, cfg.batches_per_epoch, cfg.config_hash, label)
        rec.timing_sec = time.perf_counter() - t0
        records.append(rec)
    if out_dir is not None:
        prefix = name or cfg.config_hash
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for rec in records:
            rec.to_csv(out / f"{prefix}_seed{rec.seed}.csv")
        _write_summary(out / f"{prefix}_summary.json", cfg, records)
        timings = {str(r.seed): r.timing_sec for r in records}
        with open(out / f"{prefix}_timings.json", "w") as fh:
            json.dump(timings, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return records


def _write_summary(path, cfg: ExperimentConfig, records: list) -> None:
    n_epochs = min((len(r.epoch) for r in records), default=0)
    payload = {
        "config_hash": cfg.config_hash,
        "algorithm": cfg.algorithm_label(),
        "problem": records[0].problem_label if records else None,
        "seeds": [r.seed for r in records],
        "diverged": {str(r.seed): r.diverged for r in records},
        "final": {str(r.seed): r.final for r in records},
    }
    for metric in ("loss_epoch_avg", "grad_norm_sq_mean"):
        series = np.array([r.metric(metric)[:n_epochs] for r in records])
        if series.size:
            payload[f"{metric}_mean"] = [float(v) for v in np.mean(series, axis=0)]
            payload[f"{metric}_std"] = [float(v) for v in np.std(series, axis=0)]
    payload["epochs"] = list(range(1, n_epochs + 1))
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _phase_epoch(phase, n_epochs: int) -> int:
    if isinstance(phase, int):
        if not 1 <= phase <= n_epochs:
            raise ValueError(f"epoch {phase} out of range 1..{n_epochs}")
        return phase
    if phase == "initial":
        return max(1, round(n_epochs / 10))
    if phase == "final":
        return n_epochs
    raise ValueError(f"unknown phase {phase!r} (use 'initial', 'final', or an epoch number)")


def compare_runs(records: list, metric: str = "loss_epoch_avg", phase="final") -> dict:
    """Paired-across-seeds comparison of two record groups at one epoch.

    The difference is first minus second per seed; the result is confident
    only when every seed agrees in sign.
    """
    if len(records) != 2:
        raise ValueError("expected exactly two record groups")
    first, second = records
    if not first or not second:
        raise ValueError("record groups must be nonempty")
    if {r.problem_label for r in first} != {r.problem_label for r in second}:
        raise ValueError("record groups come from different problems")
    seeds_a = sorted(r.seed for r in first)
    seeds_b = sorted(r.seed for r in second)
    if seeds_a != seeds_b:
        raise ValueError(f"record groups use different seeds: {seeds_a} vs {seeds_b}")
    n_epochs = min(min(len(r.epoch) for r in first), min(len(r.epoch) for r in second))
    epoch = _phase_epoch(phase, n_epochs)
    by_seed_a = {r.seed: r for r in first}
    by_seed_b = {r.seed: r for r in second}
    diffs = {}
    for seed in seeds_a:
        va = float(by_seed_a[seed].metric(metric)[epoch - 1])
        vb = float(by_seed_b[seed].metric(metric)[epoch - 1])
        diffs[seed] = va - vb
    values = np.array(list(diffs.values()))
    mean_diff = float(np.mean(values))
    signs = np.sign(values)
    confident = bool(np.all(signs == signs[0]) and signs[0] != 0)
    better = "tie" if mean_diff == 0 else ("second" if mean_diff > 0 else "first")
    return {
        "metric": metric,
        "phase": phase,
        "epoch": epoch,
        "diffs": diffs,
        "mean_diff": mean_diff,
        "better": better,
        "confident": confident,
    }

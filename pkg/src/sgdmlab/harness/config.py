"""Experiment configuration: strict JSON schema with path-qualified errors.

Unknown keys are rejected, every violation names the JSON path of the
offending key, and a parsed config deterministically materializes its
problem, noise model, and parameter schedule.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import problems as pb
from ..schedule import Schedule, from_stage_list, plan_from_lengths


class ConfigError(ValueError):
    """Schema violation carrying the JSON path of the offending key."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _require_mapping(obj, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected an object, got {type(obj).__name__}")
    return obj


def _check_keys(obj, path, required, optional=()):
    _require_mapping(obj, path)
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}.{key}", "missing required key")
    allowed = set(required) | set(optional)
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")


def _number(obj, path, key, positive=False, nonnegative=False):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {type(v).__name__}")
    v = float(v)
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key}", f"must be > 0, got {v}")
    if nonnegative and v < 0:
        raise ConfigError(f"{path}.{key}", f"must be >= 0, got {v}")
    return v


def _integer(obj, path, key, minimum=None):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {type(v).__name__}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}, got {v}")
    return v


def _int_list(obj, path, key, minimum=None):
    v = obj[key]
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{path}.{key}", "expected a nonempty list")
    out = []
    for i, item in enumerate(v):
        if isinstance(item, bool) or not isinstance(item, int):
            raise ConfigError(f"{path}.{key}[{i}]", "expected an integer")
        if minimum is not None and item < minimum:
            raise ConfigError(f"{path}.{key}[{i}]", f"must be >= {minimum}")
        out.append(item)
    return out


@dataclass
class ExperimentConfig:
    """Validated experiment description plus its canonical hash."""

    raw: dict
    problem_cfg: dict
    noise_cfg: dict
    algorithm_cfg: dict
    iterations: int
    batches_per_epoch: int
    seeds: list
    recording: str
    x0_cfg: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @property
    def epochs(self) -> int:
        return self.iterations // self.batches_per_epoch

    def build_problem(self) -> pb.ProblemSpec:
        c = self.problem_cfg
        if c["kind"] == "quadratic":
            if "diag" in c:
                A = np.diag(np.asarray(c["diag"], dtype=float))
            else:
                A = np.asarray(c["matrix"], dtype=float)
            b = np.asarray(c.get("b", np.zeros(A.shape[0])), dtype=float)
            return pb.make_quadratic(A, b)
        if c["kind"] == "synthetic_logistic":
            data = pb.make_synthetic_classification(c["n"], c["d"], c["separation"], c["seed"])
            return pb.make_logistic(data, c["lambda"])
        if c["kind"] == "logistic_csv":
            return pb.make_logistic(pb.load_dataset_csv(c["path"]), c["lambda"])
        if c["kind"] == "least_squares_csv":
            data = pb.load_dataset_csv(c["path"])
            return pb.make_least_squares(data.features, data.labels)
        raise ConfigError("problem.kind", f"unhandled kind {c['kind']!r}")

    def build_noise(self) -> pb.NoiseModel:
        c = self.noise_cfg
        if c["kind"] == "additive":
            return pb.additive_noise(c["sigma"])
        return pb.minibatch_noise(c["batch_size"])

    def build_schedule(self) -> Schedule:
        c = self.algorithm_cfg
        if c["kind"] == "sgd":
            return from_stage_list([(c["alpha"], 0.0, self.iterations)])
        if c["kind"] == "sgdm":
            return from_stage_list([(c["alpha"], c["beta"], self.iterations)])
        if c["kind"] == "multistage":
            s = plan_from_lengths(c["a1"], c["a2"], c["lengths"])
        else:  # explicit stage list
            s = from_stage_list([tuple(st) for st in c["stages"]])
        if c.get("lengths_unit", "epochs") == "epochs":
            s = s.scaled(self.batches_per_epoch)
        return s

    def initial_point(self, dimension: int) -> np.ndarray:
        if "value" in self.x0_cfg:
            v = np.asarray(self.x0_cfg["value"], dtype=float)
            if v.shape != (dimension,):
                raise ConfigError("x0.value", f"expected length {dimension}, got {v.shape}")
            return v
        return np.ones(dimension) * float(self.x0_cfg.get("scale", 1.0))

    def algorithm_label(self) -> str:
        c = self.algorithm_cfg
        if c["kind"] == "sgd":
            return f"sgd(alpha={c['alpha']:g})"
        if c["kind"] == "sgdm":
            return f"sgdm(alpha={c['alpha']:g},beta={c['beta']:g})"
        if c["kind"] == "multistage":
            return f"multistage(A1={c['a1']:g},A2={c['a2']:g},T={c['lengths']})"
        return f"stages({c['stages']})"


def parse_config(raw: dict) -> ExperimentConfig:
    _check_keys(raw, "$", ("problem", "noise", "algorithm", "run", "seeds"), ("recording", "x0", "checks"))

    problem = raw["problem"]
    _require_mapping(problem, "problem")
    kind = problem.get("kind")
    if kind == "quadratic":
        _check_keys(problem, "problem", ("kind",), ("diag", "matrix", "b"))
        if ("diag" in problem) == ("matrix" in problem):
            raise ConfigError("problem", "quadratic needs exactly one of 'diag' or 'matrix'")
    elif kind == "synthetic_logistic":
        _check_keys(problem, "problem", ("kind", "n", "d", "separation", "lambda", "seed"))
        _integer(problem, "problem", "n", minimum=1)
        _integer(problem, "problem", "d", minimum=1)
        _number(problem, "problem", "separation", nonnegative=True)
        _number(problem, "problem", "lambda", positive=True)
        _integer(problem, "problem", "seed")
    elif kind in ("logistic_csv", "least_squares_csv"):
        req = ("kind", "path", "lambda") if kind == "logistic_csv" else ("kind", "path")
        _check_keys(problem, "problem", req)
        if kind == "logistic_csv":
            _number(problem, "problem", "lambda", positive=True)
    else:
        raise ConfigError("problem.kind", f"unknown problem kind {kind!r}")

    noise = raw["noise"]
    _require_mapping(noise, "noise")
    nkind = noise.get("kind")
    if nkind == "additive":
        _check_keys(noise, "noise", ("kind", "sigma"))
        _number(noise, "noise", "sigma", nonnegative=True)
    elif nkind == "minibatch":
        _check_keys(noise, "noise", ("kind", "batch_size"))
        _integer(noise, "noise", "batch_size", minimum=1)
    else:
        raise ConfigError("noise.kind", f"unknown noise kind {nkind!r}")

    algo = raw["algorithm"]
    _require_mapping(algo, "algorithm")
    akind = algo.get("kind")
    if akind == "sgd":
        _check_keys(algo, "algorithm", ("kind", "alpha"))
        _number(algo, "algorithm", "alpha", positive=True)
    elif akind == "sgdm":
        _check_keys(algo, "algorithm", ("kind", "alpha", "beta"))
        _number(algo, "algorithm", "alpha", positive=True)
        beta = _number(algo, "algorithm", "beta", nonnegative=True)
        if beta >= 1.0:
            raise ConfigError("algorithm.beta", f"must be < 1, got {beta}")
    elif akind == "multistage":
        _check_keys(algo, "algorithm", ("kind", "a1", "a2", "lengths"), ("lengths_unit",))
        _number(algo, "algorithm", "a1", positive=True)
        _number(algo, "algorithm", "a2", positive=True)
        _int_list(algo, "algorithm", "lengths", minimum=1)
    elif akind == "stages":
        _check_keys(algo, "algorithm", ("kind", "stages"), ("lengths_unit",))
        stages = algo["stages"]
        if not isinstance(stages, list) or not stages:
            raise ConfigError("algorithm.stages", "expected a nonempty list of [alpha, beta, length]")
        for i, st in enumerate(stages):
            if not isinstance(st, list) or len(st) != 3:
                raise ConfigError(f"algorithm.stages[{i}]", "expected [alpha, beta, length]")
    else:
        raise ConfigError("algorithm.kind", f"unknown algorithm kind {akind!r}")
    if akind in ("multistage", "stages"):
        unit = algo.get("lengths_unit", "epochs")
        if unit not in ("epochs", "iterations"):
            raise ConfigError("algorithm.lengths_unit", f"must be 'epochs' or 'iterations', got {unit!r}")

    run = raw["run"]
    _require_mapping(run, "run")
    if "epochs" in run:
        _check_keys(run, "run", ("epochs", "batches_per_epoch"))
        epochs = _integer(run, "run", "epochs", minimum=1)
        m = _integer(run, "run", "batches_per_epoch", minimum=1)
        iterations = epochs * m
    elif "iterations" in run:
        _check_keys(run, "run", ("iterations",), ("batches_per_epoch",))
        iterations = _integer(run, "run", "iterations", minimum=1)
        m = _integer(run, "run", "batches_per_epoch", minimum=1) if "batches_per_epoch" in run else 1
    else:
        raise ConfigError("run", "need either 'epochs' + 'batches_per_epoch' or 'iterations'")

    seeds = _int_list(raw, "$", "seeds")

    recording = raw.get("recording", "summary")
    if not (recording in ("summary", "full") or (isinstance(recording, str) and recording.startswith("thinned:"))):
        raise ConfigError("recording", f"expected 'summary', 'full', or 'thinned:<stride>', got {recording!r}")

    x0_cfg = raw.get("x0", {})
    if x0_cfg:
        _check_keys(x0_cfg, "x0", (), ("scale", "value"))

    checks = raw.get("checks", [])
    if checks and (not isinstance(checks, list) or not all(isinstance(c, str) for c in checks)):
        raise ConfigError("checks", "expected a list of check names")

    cfg = ExperimentConfig(
        raw=raw,
        problem_cfg=problem,
        noise_cfg=noise,
        algorithm_cfg=algo,
        iterations=iterations,
        batches_per_epoch=m,
        seeds=seeds,
        recording=recording,
        x0_cfg=x0_cfg,
        checks=list(checks),
    )
    # cross-field consistency: staged run lengths must cover the run exactly
    if akind in ("multistage", "stages"):
        total = cfg.build_schedule().total_iterations
        if total != iterations:
            raise ConfigError(
                "algorithm.lengths" if akind == "multistage" else "algorithm.stages",
                f"stage lengths cover {total} iterations but the run specifies {iterations}",
            )
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("$", f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError("$", f"invalid JSON: {e}") from None
    return parse_config(raw)

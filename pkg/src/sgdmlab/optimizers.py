"""Heavy-ball SGD (SGDM) and its multistage variant, with exact bookkeeping.

The update is m <- beta*m + (1-beta)*gtilde, x <- x - alpha*m, with the
momentum buffer starting at zero.  Runs record everything the verification
layer needs (iterates, momentum buffers, both stochastic and full gradients)
under a configurable recording policy, and are a pure function of
(problem, noise, parameters, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.random import Generator, default_rng

from .problems import NoiseModel, ProblemSpec, full_gradient, objective, stochastic_gradient
from .schedule import Schedule, single_stage, validate

DIVERGENCE_NORM = 1e12


@dataclass(frozen=True)
class OptState:
    """Iterate, momentum buffer, and counters; k is the index of the next update."""

    x: np.ndarray
    m: np.ndarray
    k: int = 1
    stage_index: int = 1


def initial_state(x0: np.ndarray) -> OptState:
    x0 = np.asarray(x0, dtype=float)
    return OptState(x=x0.copy(), m=np.zeros_like(x0), k=1, stage_index=1)


def sgdm_step(state: OptState, alpha: float, beta: float, gtilde: np.ndarray) -> OptState:
    """One momentum update; beta = 0 reduces to plain SGD, alpha = 0 moves only the buffer."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    gtilde = np.asarray(gtilde, dtype=float)
    if gtilde.shape != state.x.shape:
        raise ValueError(f"gradient shape {gtilde.shape} does not match iterate shape {state.x.shape}")
    if not np.all(np.isfinite(gtilde)):
        raise FloatingPointError(f"non-finite stochastic gradient at iteration {state.k}")
    m = beta * state.m + (1.0 - beta) * gtilde
    x = state.x - alpha * m
    return OptState(x=x, m=m, k=state.k + 1, stage_index=state.stage_index)


def _normalize_recording(recording) -> tuple[str, int]:
    if recording == "full":
        return "full", 1
    if recording == "summary":
        return "summary", 0
    if isinstance(recording, str) and recording.startswith("thinned:"):
        return "thinned", int(recording.split(":", 1)[1])
    if isinstance(recording, tuple) and recording[0] == "thinned":
        return "thinned", int(recording[1])
    raise ValueError(f"unknown recording policy {recording!r}")


@dataclass
class Trajectory:
    """One seeded run.

    Vector arrays use the convention row j <-> superscript j+1: `x` has K+1
    rows (row 0 is the initial iterate, row K the post-run iterate), `m` has
    K+1 rows (row 0 is the zero buffer), and `g`/`gtilde` have K rows (the
    gradients used by updates 1..K).  Scalar series are always recorded;
    vector arrays are None under summary recording and subsampled under
    thinned recording (see recorded_rows).
    """

    problem_label: str
    noise_label: str
    seed: int
    recording: str
    K: int
    alphas: np.ndarray
    betas: np.ndarray
    stage: np.ndarray
    f_x: np.ndarray
    grad_norm_sq: np.ndarray
    m_norm: np.ndarray
    diverged: bool = False
    x: Optional[np.ndarray] = None
    m: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    gtilde: Optional[np.ndarray] = None
    recorded_rows: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def is_full(self) -> bool:
        return self.recording == "full"

    def iterate(self, k: int) -> np.ndarray:
        """x^k for 1 <= k <= K+1 (full recording only)."""
        if not self.is_full:
            raise ValueError("iterates are only addressable under full recording")
        if not 1 <= k <= self.K + 1:
            raise ValueError(f"k={k} out of range 1..{self.K + 1}")
        return self.x[k - 1]

    def to_csv(self, path, batches_per_epoch: Optional[int] = None) -> None:
        """Per-iteration CSV; loss_epoch_avg is the trailing mean of f_x over
        the past min(k, m) iterations (m = batches_per_epoch, all past ones
        when unset)."""
        win = batches_per_epoch
        csum = np.concatenate([[0.0], np.cumsum(self.f_x)])
        with open(path, "w") as fh:
            fh.write("k,stage,alpha,beta,f_x,grad_norm_sq,m_norm,loss_epoch_avg\n")
            for i in range(self.K):
                k = i + 1
                lo = 0 if win is None else max(0, k - win)
                avg = (csum[k] - csum[lo]) / (k - lo)
                fh.write(
                    f"{k},{int(self.stage[i])},{self.alphas[i]:.17g},{self.betas[i]:.17g},"
                    f"{self.f_x[i]:.17g},{self.grad_norm_sq[i]:.17g},{self.m_norm[i]:.17g},{avg:.17g}\n"
                )

    def save_iterates(self, path) -> None:
        """Binary dump of the full vector record for verification runs."""
        if not self.is_full:
            raise ValueError("binary iterate dump requires full recording")
        np.savez_compressed(
            path,
            x=self.x,
            m=self.m,
            g=self.g,
            gtilde=self.gtilde,
            alphas=self.alphas,
            betas=self.betas,
            stage=self.stage,
            f_x=self.f_x,
            seed=self.seed,
        )


def _run(
    p: ProblemSpec,
    nm: NoiseModel,
    alphas: np.ndarray,
    betas: np.ndarray,
    stage_idx: np.ndarray,
    seed: int,
    recording,
    x0: Optional[np.ndarray],
) -> Trajectory:
    mode, stride = _normalize_recording(recording)
    K = len(alphas)
    d = p.dimension
    x = np.ones(d) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (d,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({d},)")
    m = np.zeros(d)
    rng = default_rng(seed)

    keep_vectors = mode in ("full", "thinned")
    f_x = np.empty(K)
    gnorm2 = np.empty(K)
    mnorm = np.empty(K)
    if keep_vectors:
        xs = np.empty((K + 1, d))
        ms = np.empty((K + 1, d))
        gs = np.empty((K, d))
        gts = np.empty((K, d))
        xs[0] = x
        ms[0] = m
    diverged = False
    done = 0
    for i in range(K):
        g = full_gradient(p, x)
        f_x[i] = objective(p, x)
        gnorm2[i] = float(g @ g)
        if nm.kind == "additive_gaussian":
            gt = g if nm.sigma == 0.0 else g + rng.standard_normal(d) * (nm.sigma / np.sqrt(d))
        else:
            gt = stochastic_gradient(p, nm, x, rng)
        if not np.all(np.isfinite(gt)):
            raise FloatingPointError(f"non-finite stochastic gradient at iteration {i + 1}")
        m = betas[i] * m + (1.0 - betas[i]) * gt
        x = x - alphas[i] * m
        mnorm[i] = float(np.linalg.norm(m))
        if keep_vectors:
            gs[i] = g
            gts[i] = gt
            ms[i + 1] = m
            xs[i + 1] = x
        done = i + 1
        if np.linalg.norm(x) > DIVERGENCE_NORM:
            diverged = True
            break

    K_eff = done
    traj = Trajectory(
        problem_label=p.label,
        noise_label=nm.label,
        seed=seed,
        recording=mode if mode != "thinned" else f"thinned:{stride}",
        K=K_eff,
        alphas=alphas[:K_eff].copy(),
        betas=betas[:K_eff].copy(),
        stage=stage_idx[:K_eff].copy(),
        f_x=f_x[:K_eff],
        grad_norm_sq=gnorm2[:K_eff],
        m_norm=mnorm[:K_eff],
        diverged=diverged,
    )
    if keep_vectors:
        if mode == "full":
            traj.x, traj.m, traj.g, traj.gtilde = xs[: K_eff + 1], ms[: K_eff + 1], gs[:K_eff], gts[:K_eff]
        else:
            rows = np.arange(0, K_eff + 1, stride)
            if rows[-1] != K_eff:
                rows = np.append(rows, K_eff)
            traj.x, traj.m = xs[rows], ms[rows]
            traj.g, traj.gtilde = gs[np.minimum(rows[:-1], K_eff - 1)], gts[np.minimum(rows[:-1], K_eff - 1)]
            traj.recorded_rows = rows
    return traj


def run_sgdm(
    p: ProblemSpec,
    nm: NoiseModel,
    alpha: float,
    beta: float,
    K: int,
    seed: int,
    recording="full",
    x0: Optional[np.ndarray] = None,
) -> Trajectory:
    """Run K fixed-parameter updates from x0 (defaults to the all-ones vector)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    alphas = np.full(K, float(alpha))
    betas = np.full(K, float(beta))
    stages = np.ones(K, dtype=int)
    return _run(p, nm, alphas, betas, stages, seed, recording, x0)


def run_multistage(
    p: ProblemSpec,
    nm: NoiseModel,
    schedule: Schedule,
    seed: int,
    recording="full",
    x0: Optional[np.ndarray] = None,
) -> Trajectory:
    """Run the staged recursion; the momentum buffer carries across stage boundaries."""
    report = validate(schedule, L=p.L, mode="practical")
    if not report.practical_ok:
        failed = [c.name for c in report.conditions if not c.passed]
        raise ValueError(f"schedule fails practical validation: {failed}")
    alphas, betas, stage_idx = schedule.per_iteration()
    traj = _run(p, nm, alphas, betas, stage_idx, seed, recording, x0)
    traj.meta["schedule"] = [(s.alpha, s.beta, s.length) for s in schedule.stages]
    return traj


@dataclass(frozen=True)
class OutputSelection:
    """Result of the two-level randomized output rule.

    The stage is drawn uniformly, then an iterate within that stage is drawn
    uniformly; when stage lengths differ this is deliberately non-uniform
    over iterations.
    """

    stage: int
    index_in_stage: int
    k: int
    x_tilde: np.ndarray


def select_output(traj: Trajectory, schedule: Schedule, rng: Generator) -> OutputSelection:
    if not traj.is_full:
        raise ValueError("output selection needs full recording (iterates unavailable)")
    if traj.diverged or traj.K != schedule.total_iterations:
        raise ValueError("trajectory does not cover the full schedule; output rule undefined")
    n = schedule.n_stages
    stage = int(rng.integers(1, n + 1))
    lengths = schedule.lengths
    offset = int(np.sum(lengths[: stage - 1]))
    index = int(rng.integers(1, lengths[stage - 1] + 1))
    k = offset + index
    return OutputSelection(stage=stage, index_in_stage=index, k=k, x_tilde=traj.iterate(k))


def run_schedule_as_sgdm(p, nm, s: Schedule, seed, recording="full", x0=None) -> Trajectory:
    """Single-stage convenience wrapper used by reductions in tests."""
    if s.n_stages != 1:
        raise ValueError("expected a single-stage schedule")
    st = s.stages[0]
    return run_sgdm(p, nm, st.alpha, st.beta, st.length, seed, recording, x0)


__all__ = [
    "OptState",
    "OutputSelection",
    "Trajectory",
    "initial_state",
    "run_multistage",
    "run_sgdm",
    "select_output",
    "sgdm_step",
    "single_stage",
]

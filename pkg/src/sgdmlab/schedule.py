"""Multistage parameter schedules: planning, validation, and stepsize caps.

A schedule is a list of per-stage (alpha_i, beta_i, T_i) triples coupled by
two invariants: alpha_i * beta_i / (1 - beta_i) is a constant A1 across
stages, and alpha_i * T_i is a constant A2.  Momentum weights must be
nondecreasing.  The validator reports signed margins for the practical
invariants and for the extra conditions required by the convergence
guarantees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CONSISTENCY_RTOL = 1e-9
A1_THEORY_RTOL = 1e-6


@dataclass(frozen=True)
class Stage:
    alpha: float
    beta: float
    length: int

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"stage stepsize must be > 0, got {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"stage momentum weight must be in [0, 1), got {self.beta}")
        if self.length < 1:
            raise ValueError(f"stage length must be >= 1, got {self.length}")


@dataclass(frozen=True)
class Schedule:
    stages: tuple[Stage, ...]

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def total_iterations(self) -> int:
        return sum(s.length for s in self.stages)

    @property
    def a1(self) -> float:
        s = self.stages[0]
        return s.alpha * s.beta / (1.0 - s.beta)

    @property
    def a2(self) -> float:
        s = self.stages[0]
        return s.alpha * s.length

    @property
    def alphas(self) -> np.ndarray:
        return np.array([s.alpha for s in self.stages])

    @property
    def betas(self) -> np.ndarray:
        return np.array([s.beta for s in self.stages])

    @property
    def lengths(self) -> np.ndarray:
        return np.array([s.length for s in self.stages], dtype=int)

    def per_iteration(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-iteration (alpha, beta, stage index) arrays, stage index 1-based."""
        alphas = np.repeat(self.alphas, self.lengths)
        betas = np.repeat(self.betas, self.lengths)
        stage_idx = np.repeat(np.arange(1, self.n_stages + 1), self.lengths)
        return alphas, betas, stage_idx

    def stage_slices(self) -> list[slice]:
        """0-based iterate slices covering each stage."""
        bounds = np.concatenate([[0], np.cumsum(self.lengths)])
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def scaled(self, factor: int) -> "Schedule":
        """Same per-stage parameters with every stage length multiplied.

        Used to convert epoch-denominated plans to iteration counts; the
        stepsize/momentum pairs are unchanged, so A1 is preserved and A2
        scales by the factor.
        """
        if factor < 1:
            raise ValueError("scale factor must be >= 1")
        return Schedule(tuple(Stage(s.alpha, s.beta, s.length * factor) for s in self.stages))


def single_stage(alpha: float, beta: float, length: int) -> Schedule:
    return Schedule((Stage(alpha, beta, length),))


def from_stage_list(stages: list[tuple[float, float, int]]) -> Schedule:
    if not stages:
        raise ValueError("schedule needs at least one stage")
    return Schedule(tuple(Stage(a, b, int(t)) for a, b, t in stages))


def plan_from_lengths(a1: float, a2: float, lengths: list[int]) -> Schedule:
    """Build a schedule from stage lengths: alpha_i = A2/T_i, beta_i = A1/(A1 + alpha_i).

    Both coupling identities then hold exactly by construction.  Lengths must
    be nondecreasing, otherwise the implied momentum weights would decrease.
    """
    if a1 <= 0 or a2 <= 0:
        raise ValueError("A1 and A2 must be > 0")
    if not lengths:
        raise ValueError("need at least one stage length")
    if any(t < 1 for t in lengths):
        raise ValueError("stage lengths must be >= 1")
    for i in range(len(lengths) - 1):
        if lengths[i + 1] < lengths[i]:
            raise ValueError(
                f"stage lengths must be nondecreasing for monotone momentum weights: "
                f"T_{i + 1}={lengths[i]} > T_{i + 2}={lengths[i + 1]}"
            )
    stages = []
    for t in lengths:
        alpha = a2 / t
        beta = a1 / (a1 + alpha)
        stages.append(Stage(alpha=alpha, beta=beta, length=int(t)))
    return Schedule(tuple(stages))


# --- validation -----------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    name: str
    passed: bool
    margin: float  # signed distance to the constraint boundary; negative iff violated
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    conditions: tuple[ConditionReport, ...]
    practical_ok: bool
    theoretical_ok: bool

    def __getitem__(self, name: str) -> ConditionReport:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        def safe(x: float):
            return x if math.isfinite(x) else None

        return {
            "conditions": [
                {"name": c.name, "passed": c.passed, "margin": safe(c.margin), "detail": c.detail}
                for c in self.conditions
            ],
            "practical_ok": self.practical_ok,
            "theoretical_ok": self.theoretical_ok,
        }


def theoretical_a1(L: float) -> float:
    """The A1 value required by the multistage convergence guarantee."""
    return 1.0 / (24.0 * math.sqrt(2.0) * L)


def validate(s: Schedule, L: float, mode: str = "practical") -> ValidationReport:
    """Evaluate every schedule condition with a signed margin.

    practical mode checks the coupling identities and momentum monotonicity;
    theoretical mode additionally checks the conditions under which the
    multistage stationarity bound is proved, including A1 = 1/(24*sqrt(2)*L).
    """
    if L <= 0:
        raise ValueError("L must be > 0")
    if mode not in ("practical", "theoretical"):
        raise ValueError(f"unknown validation mode {mode!r}")
    alphas, betas, lengths = s.alphas, s.betas, s.lengths
    a1s = alphas * betas / (1.0 - betas)
    a2s = alphas * lengths

    def rel_spread(v: np.ndarray) -> float:
        ref = max(abs(float(v[0])), 1e-300)
        return float(np.max(np.abs(v - v[0]))) / ref

    conds = []
    a1_dev = rel_spread(a1s)
    conds.append(
        ConditionReport(
            "A1_consistent",
            a1_dev <= CONSISTENCY_RTOL,
            CONSISTENCY_RTOL - a1_dev,
            f"per-stage A1: {a1s.tolist()}",
        )
    )
    a2_dev = rel_spread(a2s)
    conds.append(
        ConditionReport(
            "A2_consistent",
            a2_dev <= CONSISTENCY_RTOL,
            CONSISTENCY_RTOL - a2_dev,
            f"per-stage A2: {a2s.tolist()}",
        )
    )
    mono_margin = float(np.min(np.diff(betas))) if s.n_stages > 1 else math.inf
    conds.append(ConditionReport("beta_monotone", mono_margin >= 0, mono_margin))

    b1_margin = float(betas[0] - 0.5)
    conds.append(ConditionReport("beta1_at_least_half", b1_margin >= 0, b1_margin))

    decay = betas ** (2 * lengths)
    decay_margin = float(np.min(0.5 - decay))
    conds.append(
        ConditionReport(
            "beta_decay",
            decay_margin >= 0,
            decay_margin,
            f"per-stage beta_i^(2 T_i): {decay.tolist()}",
        )
    )

    b1, bn = float(betas[0]), float(betas[-1])
    lhs = (1.0 - b1) / b1 if b1 > 0 else math.inf
    rhs = 12.0 * (1.0 - bn) / math.sqrt(bn + bn**2) if bn > 0 else math.inf
    spread_margin = rhs - lhs
    conds.append(ConditionReport("spread", spread_margin >= 0, spread_margin, f"lhs={lhs:.6g} rhs={rhs:.6g}"))

    a1_star = theoretical_a1(L)
    a1_theory_dev = abs(s.a1 - a1_star) / a1_star
    conds.append(
        ConditionReport(
            "A1_theoretical",
            a1_theory_dev <= A1_THEORY_RTOL,
            A1_THEORY_RTOL - a1_theory_dev,
            f"A1={s.a1:.8g} target={a1_star:.8g}",
        )
    )

    by_name = {c.name: c for c in conds}
    practical_ok = all(by_name[n].passed for n in ("A1_consistent", "A2_consistent", "beta_monotone"))
    theoretical_ok = practical_ok and all(
        by_name[n].passed for n in ("beta1_at_least_half", "beta_decay", "spread", "A1_theoretical")
    )
    return ValidationReport(tuple(conds), practical_ok, theoretical_ok)


# --- stepsize caps and burn-in --------------------------------------------


def max_stepsize_nonconvex(beta: float, L: float) -> float:
    """Largest admissible constant stepsize in the smooth nonconvex regime.

    Uses the conservative polynomial 4 - beta + 2*beta^2 (see
    stepsize_cap_variants for the alternative).  At beta = 0 the momentum
    term is vacuous and the cap is 1/(4L).
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    if L <= 0:
        raise ValueError("L must be > 0")
    first = (1.0 - beta) / (L * (4.0 - beta + 2.0 * beta**2))
    if beta == 0.0:
        return first
    second = (1.0 - beta) / (2.0 * math.sqrt(2.0) * L * math.sqrt(beta + beta**2))
    return min(first, second)


def stepsize_cap_variants(beta: float, L: float) -> dict:
    """Both readings of the nonconvex cap polynomial, for reporting.

    The conservative 4 - beta + 2*beta^2 is what max_stepsize_nonconvex
    enforces; the looser 4 - beta + beta^2 variant is surfaced alongside.
    """
    second = math.inf if beta == 0.0 else (1.0 - beta) / (2.0 * math.sqrt(2.0) * L * math.sqrt(beta + beta**2))
    return {
        "conservative": (1.0 - beta) / (L * (4.0 - beta + 2.0 * beta**2)),
        "loose": (1.0 - beta) / (L * (4.0 - beta + beta**2)),
        "momentum_term": second,
        "enforced": max_stepsize_nonconvex(beta, L),
    }


def max_stepsize_strongly_convex(beta: float, L: float, mu: float) -> float:
    """Largest admissible constant stepsize in the strongly convex regime."""
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    if not 0.0 < mu <= L:
        raise ValueError("need 0 < mu <= L")
    first = (1.0 - beta) / (5.0 * L)
    denom = 3.0 - beta + 2.0 * beta**2 + (48.0 * math.sqrt(beta) / 25.0) * (2.0 * L + 18.0 * mu) / L
    second = (1.0 - beta) / (L * denom)
    return min(first, second)


def k0(beta: float) -> int:
    """Burn-in iteration count floor(log 0.5 / log beta); 0 at beta = 0."""
    if beta < 0 or beta >= 1:
        raise ValueError("beta must be in [0, 1)")
    if beta == 0.0:
        return 0
    return int(math.floor(math.log(0.5) / math.log(beta)))

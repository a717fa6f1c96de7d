"""Named verification checks over a configured problem/noise/parameter context.

Each check id maps to a function producing one or more CheckResult values
with per-iteration evidence rows.  The registry backs the `verify` CLI
subcommand; the same functions run at full scale in the acceptance suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.random import default_rng

from . import problems as pb
from .optimizers import run_multistage, run_sgdm
from .schedule import Schedule, max_stepsize_nonconvex, plan_from_lengths, theoretical_a1, validate
from .theory import (
    CheckResult,
    DiagnosticsReport,
    aux_z_fixed,
    aux_z_multistage,
    c_sequence_multistage,
    c_sequence_nonconvex,
    check_deviation_pathwise,
    choose_horizon,
    dev_coeffs_a,
    dev_coeffs_a_prime,
    ema_direct,
    mc_descent_check,
    mc_momentum_variance,
    mc_theorem1_check,
    mc_theorem2_check,
    mc_theorem3_check,
    multistage_dev_coeffs,
    multistage_weights_b,
    reconstruct_x_from_z,
    scvx_constants,
    z_increment_residuals,
)
from .theory.montecarlo import mc_momentum_variance_multistage

Z_IDENTITY_RTOL = 1e-10
EMA_RTOL = 1e-10
WEIGHT_SUM_RTOL = 1e-12
RECONSTRUCT_RTOL = 1e-8
DEVIATION_REL_SLACK = 1e-9
COEFF_LIMIT_REL = 1e-9


def theoretical_schedule(L: float, scale: int = 10, a2_over_a1: float = 1.0) -> Schedule:
    """A three-stage schedule satisfying every theoretical validation condition.

    Lengths (3, 6, 21) * scale with A1 at its admissible value and A2 =
    a2_over_a1 * A1; a2_over_a1 in [ln2/2, 3*scale] keeps the first momentum
    weight at least 1/2 and every stage decay condition satisfied.
    """
    a1 = theoretical_a1(L)
    s = plan_from_lengths(a1, a2_over_a1 * a1, [3 * scale, 6 * scale, 21 * scale])
    report = validate(s, L, mode="theoretical")
    if not report.theoretical_ok:
        failed = [c.name for c in report.conditions if not c.passed]
        raise ValueError(f"constructed schedule unexpectedly fails validation: {failed}")
    return s


@dataclass
class VerifyContext:
    """Everything a check needs: problem, noise, parameters, sizes."""

    problem: pb.ProblemSpec
    noise: pb.NoiseModel
    alpha: float
    beta: float
    schedule: Schedule
    K: int = 150
    n_mc: int = 1000
    seeds: tuple = (1, 2, 3, 4, 5)
    x0: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)

    @property
    def x_start(self) -> np.ndarray:
        return np.ones(self.problem.dimension) if self.x0 is None else self.x0


def default_context(K: int = 150, n_mc: int = 1000) -> VerifyContext:
    """Well-conditioned quadratic with unit-variance additive noise."""
    p = pb.make_quadratic(np.diag([1.0, 10.0]), np.zeros(2))
    nm = pb.additive_noise(1.0)
    beta = 0.9
    alpha = max_stepsize_nonconvex(beta, p.L) / 2.0
    return VerifyContext(
        problem=p,
        noise=nm,
        alpha=alpha,
        beta=beta,
        schedule=theoretical_schedule(p.L),
        K=K,
        n_mc=n_mc,
        x0=np.array([3.0, 1.0]),
    )


def _rows_from_tolerance(ks, values, tol) -> tuple:
    values = np.asarray(values, dtype=float)
    margin = tol - values
    ok = margin >= 0
    return ks, values, np.full(len(values), tol), margin, ok


# --- exact identity checks ---------------------------------------------------


def check_identity_z(ctx: VerifyContext) -> list:
    results = []
    fixed = run_sgdm(ctx.problem, ctx.noise, ctx.alpha, ctx.beta, ctx.K, seed=ctx.seeds[0], x0=ctx.x_start)
    z = aux_z_fixed(fixed, ctx.beta)
    res = z_increment_residuals(fixed, z)
    results.append(
        CheckResult.from_arrays(
            "identity_z", *_rows_from_tolerance(np.arange(1, fixed.K + 1), res, Z_IDENTITY_RTOL)
        )
    )
    staged = run_multistage(ctx.problem, ctx.noise, ctx.schedule, seed=ctx.seeds[0], x0=ctx.x_start)
    zs = aux_z_multistage(staged, ctx.schedule.a1)
    res_s = z_increment_residuals(staged, zs)
    results.append(
        CheckResult.from_arrays(
            "identity_z_multistage", *_rows_from_tolerance(np.arange(1, staged.K + 1), res_s, Z_IDENTITY_RTOL)
        )
    )
    return results


def check_ema(ctx: VerifyContext) -> list:
    traj = run_sgdm(ctx.problem, ctx.noise, ctx.alpha, ctx.beta, ctx.K, seed=ctx.seeds[0], x0=ctx.x_start)
    direct = ema_direct(traj.gtilde, traj.betas)
    scale = np.linalg.norm(direct, axis=1) + 1e-300
    rel = np.linalg.norm(traj.m[1:] - direct, axis=1) / scale
    r1 = CheckResult.from_arrays("ema", *_rows_from_tolerance(np.arange(1, traj.K + 1), rel, EMA_RTOL))
    staged = run_multistage(ctx.problem, ctx.noise, ctx.schedule, seed=ctx.seeds[0], x0=ctx.x_start)
    direct_s = ema_direct(staged.gtilde, staged.betas)
    rel_s = np.linalg.norm(staged.m[1:] - direct_s, axis=1) / (np.linalg.norm(direct_s, axis=1) + 1e-300)
    r2 = CheckResult.from_arrays(
        "ema_multistage", *_rows_from_tolerance(np.arange(1, staged.K + 1), rel_s, EMA_RTOL)
    )
    return [r1, r2]


def check_weights(ctx: VerifyContext) -> list:
    staged = run_multistage(ctx.problem, ctx.noise, ctx.schedule, seed=ctx.seeds[0], x0=ctx.x_start)
    K = staged.K
    rel = np.empty(K)
    for k in range(1, K + 1):
        b = multistage_weights_b(staged.betas, k)
        expected = 1.0 - float(np.prod(staged.betas[:k]))
        rel[k - 1] = abs(float(np.sum(b)) - expected) / max(expected, 1e-300)
    return [
        CheckResult.from_arrays("weights", *_rows_from_tolerance(np.arange(1, K + 1), rel, WEIGHT_SUM_RTOL))
    ]


def check_reconstruct_x(ctx: VerifyContext) -> list:
    traj = run_sgdm(ctx.problem, ctx.noise, ctx.alpha, ctx.beta, ctx.K, seed=ctx.seeds[0], x0=ctx.x_start)
    z = aux_z_fixed(traj, ctx.beta)
    K = traj.K
    rel = np.empty(K)
    for k in range(1, K + 1):
        xk = traj.iterate(k)
        rel[k - 1] = float(np.linalg.norm(reconstruct_x_from_z(z, ctx.beta, k) - xk)) / (
            1.0 + float(np.linalg.norm(xk))
        )
    return [
        CheckResult.from_arrays(
            "reconstruct_x", *_rows_from_tolerance(np.arange(1, K + 1), rel, RECONSTRUCT_RTOL)
        )
    ]


# --- pathwise inequality checks ----------------------------------------------


def check_lemma2(ctx: VerifyContext) -> list:
    worst = None
    for seed in ctx.seeds:
        traj = run_sgdm(ctx.problem, ctx.noise, ctx.alpha, ctx.beta, ctx.K, seed=seed, x0=ctx.x_start)
        out = check_deviation_pathwise(traj, ctx.beta, ctx.problem.L)
        norm_margin = out["margin"] + DEVIATION_REL_SLACK * out["rhs"]
        if worst is None or np.min(norm_margin) < np.min(worst["norm_margin"]):
            worst = {**out, "norm_margin": norm_margin, "seed": seed}
    ok = worst["norm_margin"] >= 0
    return [
        CheckResult.from_arrays(
            "lemma2",
            worst["k"],
            worst["lhs"],
            worst["rhs"],
            worst["norm_margin"],
            ok,
            summary={"seeds": list(ctx.seeds), "worst_seed": worst["seed"]},
        )
    ]


def check_dominance_da(ctx: VerifyContext) -> list:
    rng = default_rng(ctx.seeds[0])
    n_plans = ctx.extras.get("n_plans", 200)
    k_max = ctx.extras.get("k_max", 30)
    violations = np.empty(n_plans)
    for t in range(n_plans):
        n_stages = int(rng.integers(1, 5))
        lengths = rng.integers(1, 11, size=n_stages)
        betas_stages = np.sort(rng.uniform(0.0, 0.99, size=n_stages))
        betas = np.repeat(betas_stages, lengths)
        total = len(betas)
        k = int(min(k_max, total))
        if k < 2:
            violations[t] = -1.0
            continue
        d, a = multistage_dev_coeffs(betas, k, L=1.0)
        violations[t] = float(np.max(d - a)) if len(d) else -1.0
    rows = _rows_from_tolerance(np.arange(1, n_plans + 1), np.maximum(violations, 0.0), 1e-12)
    r1 = CheckResult.from_arrays("dominance_da", *rows, summary={"plans": n_plans, "k_max": k_max})

    # strict ordering of the two lag-weight forms on a (k, j, beta) grid
    worst = math.inf
    count = 0
    for beta in np.linspace(0.1, 0.9, 9):
        for k in range(2, 22):
            a = dev_coeffs_a(k, beta, 1.0)
            ap = dev_coeffs_a_prime(k, beta, 1.0)
            j_hi = min(len(a), 20)
            worst = min(worst, float(np.min(a[:j_hi] - ap[:j_hi])))
            count += j_hi
    r2 = CheckResult(
        name="dominance_a_prime",
        passed=worst > 0,
        summary={"grid_points": count, "min_gap": worst},
        rows=[(0, worst, 0.0, worst, worst > 0)],
    )
    return [r1, r2]


# --- coefficient checks --------------------------------------------------------


def _coeff_rows(cs) -> list:
    idx = list(range(min(50, len(cs.c)))) + list(range(50, len(cs.c), max(1, len(cs.c) // 20)))
    rows = []
    for i in sorted(set(idx)):
        positive = bool(cs.log_c is not None and np.isfinite(cs.log_c[i])) or cs.c[i] > 0
        rows.append((i + 1, float(cs.c[i]), 0.0, float(cs.c[i]), positive))
    return rows


def check_coeffs_nc(ctx: VerifyContext) -> list:
    L = ctx.problem.L
    beta = ctx.beta
    cap = (1.0 - beta) / (2.0 * math.sqrt(2.0) * L * math.sqrt(beta + beta**2)) if beta > 0 else ctx.alpha
    cs = c_sequence_nonconvex(min(ctx.alpha, cap), beta, L, H=max(choose_horizon(beta), 1))
    limit_ok = abs(cs.c_limit) <= COEFF_LIMIT_REL * max(cs.c1, 1e-300)
    return [
        CheckResult(
            name="coeffs_nc",
            passed=cs.all_positive and limit_ok,
            summary={
                "c1": cs.c1,
                "horizon": cs.horizon,
                "tail_mass": cs.tail_mass,
                "c_limit": cs.c_limit,
                "denominator": cs.inputs["denominator"],
                "all_positive": cs.all_positive,
            },
            rows=_coeff_rows(cs),
        )
    ]


def check_coeffs_ms(ctx: VerifyContext) -> list:
    s = ctx.schedule
    st1 = s.stages[0]
    cs = c_sequence_multistage(st1.alpha, st1.beta, s.stages[-1].beta, ctx.problem.L, H=choose_horizon(s.stages[-1].beta))
    cap_margin = cs.inputs.get("c1_cap_margin", 0.0)
    return [
        CheckResult(
            name="coeffs_ms",
            passed=cs.all_positive and cap_margin >= 0,
            summary={
                "c1": cs.c1,
                "c1_cap": cs.inputs.get("c1_cap"),
                "c1_cap_margin": cap_margin,
                "horizon": cs.horizon,
                "all_positive": cs.all_positive,
            },
            rows=_coeff_rows(cs),
        )
    ]


def check_coeffs_sc(ctx: VerifyContext) -> list:
    from .schedule import max_stepsize_strongly_convex

    p = ctx.problem
    alpha = min(ctx.alpha, max_stepsize_strongly_convex(ctx.beta, p.L, p.mu))
    cs = scvx_constants(alpha, ctx.beta, p.L, p.mu)
    est_ok = cs.inputs["c1_estimate_margin"] >= 0
    contraction_ok = cs.B1 < 0 and cs.inputs["sqrt_beta"] <= cs.inputs["one_plus_B1"] < 1.0
    return [
        CheckResult(
            name="coeffs_sc",
            passed=cs.all_positive and est_ok and contraction_ok,
            summary={
                "B1": cs.B1,
                "B2_per_sigma2": cs.B2,
                "B3_per_sigma2": cs.B3,
                "c1": cs.c1,
                "c1_estimate_margin": cs.inputs["c1_estimate_margin"],
                "one_plus_B1": cs.inputs["one_plus_B1"],
                "horizon": cs.horizon,
                "all_positive": cs.all_positive,
            },
            rows=_coeff_rows(cs),
        )
    ]


# --- Monte Carlo bound checks ----------------------------------------------------


def check_lemma1(ctx: VerifyContext) -> list:
    out = mc_momentum_variance(
        ctx.problem, ctx.noise, ctx.alpha, ctx.beta, min(ctx.K, 100), ctx.n_mc, ctx.seeds[0], x0=ctx.x_start
    )
    ok = out["upper_ok"] & out["lower_ok"]
    margin = np.minimum(
        out["bound"] * (1 + 4 / math.sqrt(ctx.n_mc)) - out["estimate"],
        out["estimate"] - out["bound"] * (1 - 4 / math.sqrt(ctx.n_mc)) if out["two_sided"] else np.inf,
    )
    results = [
        CheckResult.from_arrays(
            "lemma1", out["k"], out["estimate"], out["bound"], margin, ok, summary={"n_mc": ctx.n_mc}
        )
    ]
    staged = mc_momentum_variance_multistage(
        ctx.problem, ctx.noise, ctx.schedule, ctx.n_mc, ctx.seeds[0], x0=ctx.x_start
    )
    ok_s = staged["current_ok"] & staged["lagged_ok"]
    margin_s = staged["bound_current"] - staged["estimate"]
    results.append(
        CheckResult.from_arrays(
            "lemma1_multistage",
            staged["k"],
            staged["estimate"],
            staged["bound_current"],
            margin_s,
            ok_s,
            summary={"n_mc": ctx.n_mc, "lagged_bound_max": float(np.max(staged["bound_lagged"]))},
        )
    )
    return results


def check_descent(ctx: VerifyContext) -> list:
    out = mc_descent_check(
        ctx.problem, ctx.noise, ctx.alpha, ctx.beta, ctx.K, ctx.n_mc, ctx.seeds[0], x0=ctx.x_start
    )
    return [
        CheckResult.from_arrays(
            "descent",
            out["k"],
            out["lhs"],
            out["rhs"],
            out["margin"],
            out["ok"],
            summary={"c1": out["c1"], "horizon": out["horizon"], "n_mc": ctx.n_mc},
        )
    ]


def check_thm1(ctx: VerifyContext) -> list:
    ks = [k for k in (50, 100, 200) if k <= ctx.K] or [ctx.K]
    out = mc_theorem1_check(
        ctx.problem, ctx.noise, ctx.alpha, ctx.beta, ctx.K, ctx.n_mc, ctx.seeds[0], ks=ks, x0=ctx.x_start
    )
    margin = out["bound"] + 4 * out["se"] - out["lhs"]
    return [
        CheckResult.from_arrays(
            "thm1", out["k"], out["lhs"], out["bound"], margin, out["ok"], summary={"n_mc": ctx.n_mc}
        )
    ]


def check_thm2(ctx: VerifyContext) -> list:
    from .schedule import max_stepsize_strongly_convex

    p = ctx.problem
    alpha = min(ctx.alpha, max_stepsize_strongly_convex(ctx.beta, p.L, p.mu) / 2.0)
    K = max(ctx.K, ctx.extras.get("thm2_K", 800))
    out = mc_theorem2_check(p, ctx.noise, alpha, ctx.beta, K, ctx.n_mc, ctx.seeds[0], x0=ctx.x_start)
    margin = out["bound"] + out["slack"] - out["lhs"]
    return [
        CheckResult.from_arrays(
            "thm2",
            out["k"],
            out["lhs"],
            out["bound"],
            margin,
            out["ok"],
            summary={
                "k0": out["k0"],
                "L_k0": out["L_k0"],
                "fitted_rate": out["fitted_rate"],
                "corollary_rate": out["corollary_rate"],
                "rate_ok": out["rate_ok"],
                "alpha": alpha,
                "n_mc": ctx.n_mc,
            },
        ),
        CheckResult(
            name="thm2_corollary_rate",
            passed=out["rate_ok"],
            summary={
                "fitted_rate": out["fitted_rate"],
                "fitted_rate_se": out["fitted_rate_se"],
                "corollary_rate": out["corollary_rate"],
            },
            rows=[(0, out["fitted_rate"], out["corollary_rate"], out["corollary_rate"] - out["fitted_rate"], out["rate_ok"])],
        ),
    ]


def check_thm3(ctx: VerifyContext) -> list:
    out = mc_theorem3_check(ctx.problem, ctx.noise, ctx.schedule, ctx.n_mc, ctx.seeds[0], x0=ctx.x_start)
    margin = out["bound"] + 4 * out["se"] - out["lhs"]
    return [
        CheckResult(
            name="thm3",
            passed=out["passed"],
            summary={"lhs": out["lhs"], "bound": out["bound"], "se": out["se"], "n_mc": ctx.n_mc},
            rows=[(0, out["lhs"], out["bound"], margin, out["ok"])],
        )
    ]


CHECKS = {
    "identity_z": check_identity_z,
    "ema": check_ema,
    "weights": check_weights,
    "lemma1": check_lemma1,
    "lemma2": check_lemma2,
    "dominance_da": check_dominance_da,
    "coeffs_nc": check_coeffs_nc,
    "coeffs_ms": check_coeffs_ms,
    "coeffs_sc": check_coeffs_sc,
    "descent": check_descent,
    "thm1": check_thm1,
    "thm2": check_thm2,
    "thm3": check_thm3,
    "reconstruct_x": check_reconstruct_x,
}


def run_checks(names, ctx: VerifyContext) -> DiagnosticsReport:
    """Run the named checks (or all) over the context; never aborts at first failure."""
    if names in (None, "all", ["all"]):
        names = list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown check name(s): {unknown}; known: {sorted(CHECKS)}")
    results = []
    for name in names:
        results.extend(CHECKS[name](ctx))
    meta = {
        "problem": ctx.problem.label,
        "noise": ctx.noise.label,
        "alpha": ctx.alpha,
        "beta": ctx.beta,
        "K": ctx.K,
        "n_mc": ctx.n_mc,
        "schedule": [(s.alpha, s.beta, s.length) for s in ctx.schedule.stages],
    }
    return DiagnosticsReport(checks=results, meta=meta)

"""Monte Carlo verification of the expectation bounds.

Each check simulates a batch of independent trajectories (trial t uses seed
base_seed + t, so aggregation is order-independent), estimates the left side
of a bound, and asserts dominance with a four-standard-error slack.
Quadratic objectives with additive noise run through the batch engine in
sgdmlab._core; everything else takes a per-trial path through the same
recursion in Python.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from numpy.random import default_rng

from .. import _core
from ..problems import NoiseModel, ProblemSpec, full_gradient, objective, stochastic_gradient
from ..schedule import Schedule, k0 as burn_in, max_stepsize_strongly_convex, validate
from .coefficients import CoefficientSet, c_sequence_nonconvex, choose_horizon, scvx_constants

MC_SLACK_SE = 4.0


def _per_iteration_arrays(alpha, beta, K) -> tuple[np.ndarray, np.ndarray, float]:
    alphas = np.full(K, float(alpha))
    betas = np.full(K, float(beta))
    a1 = alpha * beta / (1.0 - beta)
    return alphas, betas, a1


def _schedule_arrays(s: Schedule) -> tuple[np.ndarray, np.ndarray, float]:
    alphas, betas, _ = s.per_iteration()
    return alphas, betas, s.a1 if s.stages[0].beta > 0 else 0.0


def _trial_stats_general(p, nm, alphas, betas, a1, x0, seed):
    """One trajectory's summary statistics via the generic recursion."""
    K = len(alphas)
    d = p.dimension
    rng = default_rng(seed)
    x = x0.copy()
    m = np.zeros(d)
    S = np.zeros(d)
    out = {
        "f_x": np.empty(K),
        "g_norm2": np.empty(K),
        "step_norm2": np.empty(K),
        "m_resid2": np.empty(K),
        "f_z": np.empty(K + 1),
    }
    for k in range(K):
        out["f_z"][k] = objective(p, x - a1 * m)
        g = full_gradient(p, x)
        out["f_x"][k] = objective(p, x)
        out["g_norm2"][k] = float(g @ g)
        if nm.kind == "additive_gaussian":
            gt = g if nm.sigma == 0.0 else g + rng.standard_normal(d) * (nm.sigma / np.sqrt(d))
        else:
            gt = stochastic_gradient(p, nm, x, rng)
        m = betas[k] * m + (1.0 - betas[k]) * gt
        S = betas[k] * S + (1.0 - betas[k]) * g
        out["m_resid2"][k] = float(np.sum((m - S) ** 2))
        out["step_norm2"][k] = alphas[k] ** 2 * float(m @ m)
        x = x - alphas[k] * m
    out["f_z"][K] = objective(p, x - a1 * m)
    return out


def batch_stats(
    p: ProblemSpec,
    nm: NoiseModel,
    alphas: np.ndarray,
    betas: np.ndarray,
    a1: float,
    x0: np.ndarray,
    n_mc: int,
    seed: int,
) -> dict:
    """Per-(trial, iteration) summary statistics for n_mc independent runs."""
    K = len(alphas)
    d = p.dimension
    if p.kind == "quadratic" and nm.kind == "additive_gaussian":
        if nm.sigma == 0.0:
            noise = np.zeros((n_mc, K, d))
        else:
            scale = nm.sigma / np.sqrt(d)
            noise = np.empty((n_mc, K, d))
            for t in range(n_mc):
                noise[t] = default_rng(seed + t).standard_normal((K, d)) * scale
        return _core.simulate_quadratic_additive(p.payload.A, p.payload.b, x0, alphas, betas, a1, noise)
    out = None
    for t in range(n_mc):
        trial = _trial_stats_general(p, nm, alphas, betas, a1, x0, seed + t)
        if out is None:
            out = {key: np.empty((n_mc, len(val))) for key, val in trial.items()}
        for key, val in trial.items():
            out[key][t] = val
    return out


def _mean_se(a: np.ndarray, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    n = a.shape[axis]
    mean = np.mean(a, axis=axis)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, np.std(a, axis=axis, ddof=1) / math.sqrt(n)


# --- moving-average variance ------------------------------------------------


def mc_momentum_variance(
    p: ProblemSpec,
    nm: NoiseModel,
    alpha: float,
    beta: float,
    K: int,
    n_mc: int,
    seed: int,
    x0: Optional[np.ndarray] = None,
) -> dict:
    """Estimate E||m^k - (1-beta) sum beta^(k-i) g^i||^2 against its bound.

    The bound is (1-beta)/(1+beta) (1 - beta^(2k)) sigma^2.  For additive
    noise the underlying derivation is tight, so the estimate must bracket
    the bound from both sides within the sampling slack; for minibatch noise
    only the upper direction is asserted (the certificate is an upper bound).
    """
    if n_mc < 1000:
        raise ValueError("n_mc must be >= 1000")
    sigma2 = nm.sigma2_certificate
    if sigma2 is None:
        raise ValueError("noise model has no variance certificate; estimate it first")
    x0 = np.ones(p.dimension) if x0 is None else np.asarray(x0, dtype=float)
    alphas, betas, a1 = _per_iteration_arrays(alpha, beta, K)
    stats = batch_stats(p, nm, alphas, betas, a1, x0, n_mc, seed)
    estimate, se = _mean_se(stats["m_resid2"])
    ks = np.arange(1, K + 1)
    bound = (1.0 - beta) / (1.0 + beta) * (1.0 - beta ** (2 * ks)) * sigma2
    slack = MC_SLACK_SE / math.sqrt(n_mc)
    tiny = 1e-15 * max(sigma2, 1.0)
    upper_ok = estimate <= bound * (1.0 + slack) + tiny
    exact_noise = nm.kind == "additive_gaussian"
    lower_ok = estimate >= bound * (1.0 - slack) - tiny if exact_noise else np.ones(K, dtype=bool)
    return {
        "k": ks,
        "estimate": estimate,
        "se": se,
        "bound": bound,
        "upper_ok": upper_ok,
        "lower_ok": lower_ok,
        "two_sided": exact_noise,
        "passed": bool(np.all(upper_ok) and np.all(lower_ok)),
    }


def mc_momentum_variance_multistage(
    p: ProblemSpec,
    nm: NoiseModel,
    s: Schedule,
    n_mc: int,
    seed: int,
    x0: Optional[np.ndarray] = None,
) -> dict:
    """Staged analogue: buffer-vs-average distance against the two staged bounds.

    Checks E||m^k - sum b_{k,i} g^i||^2 <= 2 (1-beta_1) sigma^2 and the
    lagged form E||m^(k-1) - ...||^2 / (1-beta(k)) <= 24 beta_1 /
    sqrt(beta_n + beta_n^2) * sigma^2, which hold under the schedule's
    stage-decay, spread, and beta_1 >= 1/2 conditions.
    """
    if n_mc < 1000:
        raise ValueError("n_mc must be >= 1000")
    sigma2 = nm.sigma2_certificate
    if sigma2 is None:
        raise ValueError("noise model has no variance certificate; estimate it first")
    report = validate(s, L=p.L, mode="theoretical")
    needed = ("beta1_at_least_half", "beta_decay", "spread")
    failed = [name for name in needed if not report[name].passed]
    if failed:
        raise ValueError(f"schedule does not satisfy the staged variance-bound conditions: {failed}")
    x0 = np.ones(p.dimension) if x0 is None else np.asarray(x0, dtype=float)
    alphas, betas, a1 = _schedule_arrays(s)
    K = len(alphas)
    stats = batch_stats(p, nm, alphas, betas, a1, x0, n_mc, seed)
    estimate, se = _mean_se(stats["m_resid2"])
    b1 = float(betas[0])
    bn = float(betas[-1])
    slack = MC_SLACK_SE / math.sqrt(n_mc)
    tiny = 1e-15 * max(sigma2, 1.0)
    bound_current = 2.0 * (1.0 - b1) * sigma2
    current_ok = estimate <= bound_current * (1.0 + slack) + tiny
    # lagged buffer at iteration k is the buffer after k-1 updates
    lagged = np.concatenate([[0.0], estimate[:-1]])
    bound_lagged = 24.0 * b1 / math.sqrt(bn + bn**2) * sigma2 * (1.0 - betas)
    lagged_ok = lagged <= bound_lagged * (1.0 + slack) + tiny
    return {
        "k": np.arange(1, K + 1),
        "estimate": estimate,
        "se": se,
        "bound_current": np.full(K, bound_current),
        "lagged_estimate": lagged,
        "bound_lagged": bound_lagged,
        "current_ok": current_ok,
        "lagged_ok": lagged_ok,
        "passed": bool(np.all(current_ok) and np.all(lagged_ok)),
    }


# --- descent inequality -------------------------------------------------------


def _lyapunov_batch(f_z: np.ndarray, step_norm2: np.ndarray, c: np.ndarray, f_star: float) -> np.ndarray:
    """Per-trial Lyapunov values for k = 1..K+1 from batch statistics."""
    T, K1 = f_z.shape
    H = len(c)
    values = f_z - f_star
    for k in range(2, K1 + 1):
        depth = min(k - 1, H)
        hist = step_norm2[:, k - 1 - depth : k - 1][:, ::-1]
        values[:, k - 1] += hist @ c[:depth]
    return values


def mc_descent_check(
    p: ProblemSpec,
    nm: NoiseModel,
    alpha: float,
    beta: float,
    K: int,
    n_mc: int,
    seed: int,
    x0: Optional[np.ndarray] = None,
) -> dict:
    """Check E[L^(k+1) - L^k] against the per-step descent display, all k.

    The gradient coefficient uses the conservative polynomial
    (3 - beta + 2 beta^2); the looser (3 - beta + beta^2) variant is reported
    alongside.  The test statistic is per-trial (so the slack covers the
    correlation between the two sides): D_t = Delta L_t - coef * ||g^k_t||^2,
    and mean(D) must not exceed the noise terms by more than 4 SE.
    """
    sigma2 = nm.sigma2_certificate
    if sigma2 is None:
        raise ValueError("noise model has no variance certificate; estimate it first")
    L = p.L
    if beta > 0:
        cap = (1.0 - beta) / (2.0 * math.sqrt(2.0) * L * math.sqrt(beta + beta**2))
        if alpha > cap * (1 + 1e-12):
            raise ValueError(f"alpha={alpha:.6g} exceeds the admissible cap {cap:.6g}")
    x0 = np.ones(p.dimension) if x0 is None else np.asarray(x0, dtype=float)
    coeffs = c_sequence_nonconvex(alpha, beta, L, H=min(choose_horizon(beta), max(K, 1)))
    c1 = coeffs.c1
    alphas, betas, a1 = _per_iteration_arrays(alpha, beta, K)
    stats = batch_stats(p, nm, alphas, betas, a1, x0, n_mc, seed)
    lya = _lyapunov_batch(stats["f_z"], stats["step_norm2"], coeffs.c, p.f_star)
    dL = lya[:, 1:] - lya[:, :-1]  # (T, K)
    coef_proof = -alpha + (3.0 - beta + 2.0 * beta**2) / (2.0 * (1.0 - beta)) * L * alpha**2 + 4.0 * c1 * alpha**2
    coef_stmt = -alpha + (3.0 - beta + beta**2) / (2.0 * (1.0 - beta)) * L * alpha**2 + 4.0 * c1 * alpha**2
    noise_terms = (
        beta**2 / (2.0 * (1.0 + beta)) * L * alpha**2
        + 0.5 * L * alpha**2
        + 2.0 * c1 * (1.0 - beta) / (1.0 + beta) * alpha**2
    ) * sigma2
    D = dL - coef_proof * stats["g_norm2"]
    mean_D, se_D = _mean_se(D)
    g2_mean, _ = _mean_se(stats["g_norm2"])
    lhs, _ = _mean_se(dL)
    tiny = 1e-12 * alpha * (np.abs(g2_mean) + 1.0)
    ok = mean_D <= noise_terms + MC_SLACK_SE * se_D + tiny
    return {
        "k": np.arange(1, K + 1),
        "lhs": lhs,
        "rhs": coef_proof * g2_mean + noise_terms,
        "rhs_loose_variant": coef_stmt * g2_mean + noise_terms,
        "margin": noise_terms + MC_SLACK_SE * se_D + tiny - mean_D,
        "ok": ok,
        "passed": bool(np.all(ok)),
        "c1": c1,
        "horizon": coeffs.horizon,
    }


# --- stationarity and convergence bounds ---------------------------------------


def bound_theorem1(f1_gap: float, k, alpha: float, beta: float, L: float, sigma2: float):
    """Stationarity bound for the running mean of squared gradient norms."""
    k = np.asarray(k, dtype=float)
    return 2.0 * f1_gap / (k * alpha) + ((beta + 5.0 * beta**2) / (8.0 * (1.0 + beta)) + 1.0) * L * alpha * sigma2


def mc_theorem1_check(
    p: ProblemSpec,
    nm: NoiseModel,
    alpha: float,
    beta: float,
    K: int,
    n_mc: int,
    seed: int,
    ks: Sequence[int] = (50, 100, 200),
    x0: Optional[np.ndarray] = None,
) -> dict:
    """Running-mean squared gradient norm vs. the stationarity bound at chosen k."""
    sigma2 = nm.sigma2_certificate
    if sigma2 is None:
        raise ValueError("noise model has no variance certificate; estimate it first")
    x0 = np.ones(p.dimension) if x0 is None else np.asarray(x0, dtype=float)
    alphas, betas, a1 = _per_iteration_arrays(alpha, beta, K)
    stats = batch_stats(p, nm, alphas, betas, a1, x0, n_mc, seed)
    f1_gap = objective(p, x0) - p.f_star
    ks = np.asarray(sorted(ks), dtype=int)
    if ks[-1] > K:
        raise ValueError("requested checkpoints exceed the run length")
    running = np.cumsum(stats["g_norm2"], axis=1) / np.arange(1, K + 1)
    sample = running[:, ks - 1]
    mean, se = _mean_se(sample)
    bound = bound_theorem1(f1_gap, ks, alpha, beta, p.L, sigma2)
    ok = mean <= bound + MC_SLACK_SE * se
    return {
        "k": ks,
        "lhs": mean,
        "se": se,
        "bound": bound,
        "ok": ok,
        "passed": bool(np.all(ok)),
    }


def bound_theorem2(
    L0_at_k0: float,
    k,
    k0: int,
    alpha: float,
    beta: float,
    L: float,
    mu: float,
    sigma2: float,
    c1: Optional[float] = None,
):
    """Linear-rate bound on E[f(z^k) - f*] for k >= k0, plus stationary terms.

    When c1 is given, a tighter stationary expression using the actual first
    Lyapunov coefficient is available via bound_theorem2_stationary_terms.
    """
    k = np.asarray(k, dtype=float)
    curv = 1.0 + 8.0 * mu / L
    rate = 1.0 - alpha * mu / curv
    return rate ** (k - k0) * L0_at_k0 + bound_theorem2_stationary_terms(alpha, beta, L, mu, sigma2, c1=c1)


def bound_theorem2_stationary_terms(
    alpha: float, beta: float, L: float, mu: float, sigma2: float, c1: Optional[float] = None
) -> float:
    """The three noise-floor terms of the strongly convex bound.

    With c1=None the middle term uses the closed-form coefficient estimate
    (12 sqrt(beta)/25)(2L + 18 mu)/mu; passing the actual c1 gives the
    sharper 2 c1 (1-beta)/mu form from the underlying recursion.
    """
    curv = 1.0 + 8.0 * mu / L
    first = (1.0 + beta + beta**2) / (2.0 * (1.0 + beta)) * (L / mu) * alpha * sigma2
    if c1 is None:
        middle = (1.0 / (1.0 + beta)) * (12.0 * math.sqrt(beta) / 25.0) * (2.0 * L + 18.0 * mu) / mu * alpha * sigma2
    else:
        middle = (1.0 - beta) / (1.0 + beta) * 2.0 * c1 / mu * alpha * sigma2
    last = (beta**2 + (L * alpha / 10.0) * beta**2) / curv * (2.0 / (1.0 + beta)) * alpha * sigma2
    return curv * (first + middle + last)


def corollary_rate(alpha: float, beta: float, mu: float) -> float:
    """Transient decay rate max(1 - alpha*mu, beta) for the iterate objective gap."""
    return max(1.0 - alpha * mu, beta)


def _loglinear_fit(ks: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of log(values) over ks and its standard error."""
    y = np.log(values)
    n = len(ks)
    xbar = np.mean(ks)
    sxx = float(np.sum((ks - xbar) ** 2))
    slope, intercept = np.polyfit(ks, y, 1)
    resid = y - (slope * ks + intercept)
    dof = max(n - 2, 1)
    se = math.sqrt(float(np.sum(resid**2)) / dof / sxx)
    return float(slope), se


def mc_theorem2_check(
    p: ProblemSpec,
    nm: NoiseModel,
    alpha: float,
    beta: float,
    K: int,
    n_mc: int,
    seed: int,
    x0: Optional[np.ndarray] = None,
) -> dict:
    """Strongly convex bound dominance plus the transient-rate corollary.

    Part one: E[f(z^k) - f*] <= bound for every k >= k0, where the bound's
    starting level is the Monte Carlo estimate of the Lyapunov value at k0
    (its own uncertainty is folded into the slack).  Part two: a log-linear
    fit of the transient of E[f(x^k) - f*] must decay at least as fast as
    max(1 - alpha*mu, beta).
    """
    sigma2 = nm.sigma2_certificate
    if sigma2 is None:
        raise ValueError("noise model has no variance certificate; estimate it first")
    L, mu = p.L, p.mu
    cap = max_stepsize_strongly_convex(beta, L, mu)
    if alpha > cap * (1 + 1e-12):
        raise ValueError(f"alpha={alpha:.6g} exceeds the admissible cap {cap:.6g}")
    x0 = np.ones(p.dimension) if x0 is None else np.asarray(x0, dtype=float)
    coeffs = scvx_constants(alpha, beta, L, mu)
    k0v = max(burn_in(beta), 1)
    if K <= k0v:
        raise ValueError(f"K={K} must exceed the burn-in k0={k0v}")
    alphas, betas, a1 = _per_iteration_arrays(alpha, beta, K)
    stats = batch_stats(p, nm, alphas, betas, a1, x0, n_mc, seed)
    lya = _lyapunov_batch(stats["f_z"], stats["step_norm2"], coeffs.c, p.f_star)
    L_k0, L_k0_se = _mean_se(lya[:, k0v - 1])
    fz_gap = stats["f_z"][:, :K] - p.f_star
    mean_gap, se_gap = _mean_se(fz_gap)
    ks = np.arange(k0v, K + 1)
    bound = bound_theorem2(float(L_k0), ks, k0v, alpha, beta, L, mu, sigma2)
    curv = 1.0 + 8.0 * mu / L
    rate = 1.0 - alpha * mu / curv
    slack = MC_SLACK_SE * (se_gap[ks - 1] + float(L_k0_se) * rate ** (ks - k0v))
    ok = mean_gap[ks - 1] <= bound + slack
    # transient-rate corollary on the iterate gap
    fx_gap, fx_se = _mean_se(stats["f_x"] - p.f_star)
    r = corollary_rate(alpha, beta, mu)
    tail = max(10, K // 10)
    plateau = float(np.mean(fx_gap[-tail:]))
    transient = fx_gap - plateau
    floor = np.maximum(5.0 * fx_se, 0.05 * abs(plateau))
    fit_mask = (np.arange(1, K + 1) >= k0v) & (transient > floor) & (transient > 0)
    fit_ks = np.arange(1, K + 1)[fit_mask]
    if len(fit_ks) < 20:
        raise RuntimeError("not enough transient samples above the noise floor for a rate fit")
    slope, slope_se = _loglinear_fit(fit_ks.astype(float), transient[fit_mask])
    fitted_rate = math.exp(slope)
    rate_se = fitted_rate * slope_se
    rate_ok = fitted_rate <= r + MC_SLACK_SE * rate_se + 1e-9
    return {
        "k": ks,
        "lhs": mean_gap[ks - 1],
        "bound": bound,
        "slack": slack,
        "ok": ok,
        "L_k0": float(L_k0),
        "k0": k0v,
        "fitted_rate": fitted_rate,
        "fitted_rate_se": rate_se,
        "corollary_rate": r,
        "rate_ok": bool(rate_ok),
        "passed": bool(np.all(ok) and rate_ok),
    }


def bound_theorem3(f1_gap: float, s: Schedule, L: float, sigma2: float) -> float:
    """Staged stationarity bound on the per-stage-averaged squared gradient norm."""
    n = s.n_stages
    alphas, betas = s.alphas, s.betas
    b1, bn = float(betas[0]), float(betas[-1])
    per_stage = (24.0 * betas**2 * b1 / math.sqrt(bn + bn**2) * L + 3.0 * L) * alphas * sigma2
    return 2.0 * f1_gap / (n * s.a2) + float(np.mean(per_stage))


def mc_theorem3_check(
    p: ProblemSpec,
    nm: NoiseModel,
    s: Schedule,
    n_mc: int,
    seed: int,
    x0: Optional[np.ndarray] = None,
) -> dict:
    """Staged aggregate (1/n) sum_l (1/T_l) sum_{k in stage l} E||g^k||^2 vs. its bound."""
    sigma2 = nm.sigma2_certificate
    if sigma2 is None:
        raise ValueError("noise model has no variance certificate; estimate it first")
    report = validate(s, L=p.L, mode="theoretical")
    if not report.theoretical_ok:
        failed = [c.name for c in report.conditions if not c.passed]
        raise ValueError(f"schedule fails theoretical validation: {failed}")
    x0 = np.ones(p.dimension) if x0 is None else np.asarray(x0, dtype=float)
    alphas, betas, a1 = _schedule_arrays(s)
    stats = batch_stats(p, nm, alphas, betas, a1, x0, n_mc, seed)
    per_stage = np.stack(
        [np.mean(stats["g_norm2"][:, sl], axis=1) for sl in s.stage_slices()], axis=1
    )  # (T, n_stages)
    aggregate = np.mean(per_stage, axis=1)
    mean, se = _mean_se(aggregate)
    f1_gap = objective(p, x0) - p.f_star
    bound = bound_theorem3(f1_gap, s, p.L, sigma2)
    ok = mean <= bound + MC_SLACK_SE * se
    return {
        "lhs": float(mean),
        "se": float(se),
        "bound": float(bound),
        "stage_means": np.mean(per_stage, axis=0),
        "ok": bool(ok),
        "passed": bool(ok),
    }

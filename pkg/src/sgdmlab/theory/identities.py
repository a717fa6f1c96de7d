"""Pathwise identities and checks evaluated on recorded trajectories.

Everything here is exact algebra on realized runs (no expectation): the
auxiliary sequence whose increments are plain stochastic-gradient steps, the
convex-combination reconstruction of the iterates from it, the closed-form
moving average of past gradients, the per-iteration deviation bound, and the
Lyapunov values themselves.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..optimizers import Trajectory
from ..problems import ProblemSpec, objective
from .coefficients import CoefficientSet, dev_coeffs_a, multistage_weights_b

CONSISTENT_A1_RTOL = 1e-9


def _require_full(traj: Trajectory, what: str) -> None:
    if not traj.is_full:
        raise ValueError(f"{what} requires full recording, got {traj.recording!r}")


def _require_fixed(traj: Trajectory, beta: float) -> None:
    if traj.K and (np.any(traj.betas != beta) or np.any(traj.alphas != traj.alphas[0])):
        raise ValueError("expected a fixed-parameter trajectory matching the given beta")


def aux_z_fixed(traj: Trajectory, beta: float) -> np.ndarray:
    """z^1 = x^1 and z^k = (x^k - beta x^(k-1)) / (1 - beta) for k >= 2.

    Returns K+1 rows (z^1 .. z^(K+1)); the increment z^(k+1) - z^k equals
    -alpha * gtilde^k exactly.
    """
    _require_full(traj, "auxiliary sequence")
    _require_fixed(traj, beta)
    x = traj.x
    z = np.empty_like(x)
    z[0] = x[0]
    if beta == 0.0:
        z[1:] = x[1:]
    else:
        z[1:] = (x[1:] - beta * x[:-1]) / (1.0 - beta)
    return z


def aux_z_multistage(traj: Trajectory, a1: float) -> np.ndarray:
    """z^k = x^k - A1 * m^(k-1) under a consistently coupled staged run.

    Reduces to the fixed-parameter sequence when parameters are constant.
    Rejects trajectories whose per-iteration alpha*beta/(1-beta) is not the
    given constant.
    """
    _require_full(traj, "auxiliary sequence")
    with np.errstate(divide="ignore", invalid="ignore"):
        per_iter = traj.alphas * traj.betas / (1.0 - traj.betas)
    dev = np.max(np.abs(per_iter - a1)) if traj.K else 0.0
    if dev > CONSISTENT_A1_RTOL * max(abs(a1), 1e-300):
        raise ValueError(f"trajectory stepsize/momentum coupling deviates from A1={a1:g} by {dev:.3e}")
    return traj.x - a1 * traj.m


def z_increment_residuals(traj: Trajectory, z: np.ndarray, eps: float = 1e-300) -> np.ndarray:
    """Relative residuals of z^(k+1) - z^k = -alpha(k) gtilde^k, per k."""
    steps = z[1:] - z[:-1]
    expected = -traj.alphas[:, None] * traj.gtilde
    num = np.linalg.norm(steps - expected, axis=1)
    den = traj.alphas * np.linalg.norm(traj.gtilde, axis=1) + eps
    return num / den


def reconstruct_x_from_z(z: np.ndarray, beta: float, k: int) -> np.ndarray:
    """x^k rebuilt as the convex combination (1-beta) sum beta^(k-i) z^i + beta^(k-1) z^1.

    Only valid for fixed-parameter runs (the combination weights assume a
    single beta).
    """
    if not 1 <= k <= len(z):
        raise ValueError(f"k={k} out of range 1..{len(z)}")
    if k == 1 or beta == 0.0:
        return z[k - 1].copy()
    i = np.arange(2, k + 1)
    w = (1.0 - beta) * beta ** (k - i)
    return w @ z[1:k] + beta ** (k - 1) * z[0]


def ema_direct(gtilde: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """Momentum buffers recomputed from scratch as weighted sums of gradients.

    Row k-1 is sum_i b_{k,i} gtilde^i, the closed form the recursion must
    reproduce; for constant beta the weights are (1-beta) beta^(k-i).
    """
    K = len(betas)
    out = np.empty_like(gtilde)
    for k in range(1, K + 1):
        b = multistage_weights_b(betas, k)
        out[k - 1] = b @ gtilde[:k]
    return out


def check_deviation_pathwise(traj: Trajectory, beta: float, L: float) -> dict:
    """Per-iteration margins of the deviation bound, on realized quantities.

    lhs_k = || (1-beta)/(1-beta^k) sum beta^(k-i) g^i  -  g^k ||^2,
    rhs_k = sum_{i<k} a_{k,i} ||x^(i+1) - x^i||^2; every inequality used to
    derive the bound holds per realization, so margin = rhs - lhs must be
    nonnegative up to rounding.
    """
    _require_full(traj, "deviation check")
    _require_fixed(traj, beta)
    K = traj.K
    g = traj.g
    steps_sq = np.sum((traj.x[1:] - traj.x[:-1]) ** 2, axis=1)
    lhs = np.empty(K)
    rhs = np.empty(K)
    S = np.zeros(traj.x.shape[1])  # (1-beta) sum_i beta^(k-i) g^i
    Q = 0.0  # sum_{i<k} beta^(k-i) u_i            with u_i = ||x^(i+1) - x^i||^2
    R = 0.0  # sum_{i<k} beta^(k-i) (k-i) u_i
    B = beta / (1.0 - beta) if beta > 0 else 0.0
    for k in range(1, K + 1):
        S = beta * S + (1.0 - beta) * g[k - 1]
        wsum = 1.0 - beta**k if beta > 0 else 1.0
        r = S / wsum - g[k - 1]
        lhs[k - 1] = float(r @ r)
        rhs[k - 1] = L**2 / wsum * (R + B * Q) if beta > 0 else 0.0
        u = steps_sq[k - 1]
        R = beta * (R + Q + u)
        Q = beta * (Q + u)
    margin = rhs - lhs
    return {"k": np.arange(1, K + 1), "lhs": lhs, "rhs": rhs, "margin": margin}


def lyapunov_values(
    p: ProblemSpec,
    traj: Trajectory,
    coeffs: CoefficientSet,
    z: np.ndarray,
    f_star: Optional[float] = None,
) -> tuple[np.ndarray, dict]:
    """Lyapunov values L^k = (f(z^k) - f*) + sum_i c_i ||x^(k+1-i) - x^(k-i)||^2.

    History is truncated at the coefficient horizon; the dropped mass is
    bounded by tail_mass times the largest recorded squared step and
    reported alongside the values.
    """
    _require_full(traj, "Lyapunov evaluation")
    f_star = p.f_star if f_star is None else f_star
    K = traj.K
    H = coeffs.horizon
    steps_sq = np.sum((traj.x[1:] - traj.x[:-1]) ** 2, axis=1)
    values = np.empty(K)
    c = coeffs.c
    for k in range(1, K + 1):
        depth = min(k - 1, H)
        hist = steps_sq[k - 1 - depth : k - 1][::-1]  # steps k-1, k-2, ..., k-depth
        values[k - 1] = objective(p, z[k - 1]) - f_star + float(c[:depth] @ hist)
    tail_bound = coeffs.tail_mass * float(np.max(steps_sq, initial=0.0))
    return values, {"horizon": H, "truncation_bound": tail_bound}


def deviation_weight_sum_oracle(k: int, beta: float, L: float, steps_sq: np.ndarray) -> float:
    """Brute-force double sum bounding the deviation at iteration k.

    Evaluates (1-beta)/(1-beta^k) * sum_i beta^(k-i) (k-i) sum_{j=i..k-1} L^2 u_j
    directly; equals the sharper lag-weight sum and is dominated by the
    a_{k,i} sum.  Used as an independent oracle by tests.
    """
    if k < 2 or beta == 0.0:
        return 0.0
    total = 0.0
    for i in range(1, k):
        inner = float(np.sum(steps_sq[i - 1 : k - 1]))
        total += beta ** (k - i) * (k - i) * inner
    return (1.0 - beta) / (1.0 - beta**k) * L**2 * total

"""Coefficient sequences appearing in the Lyapunov analysis.

Three families live here:

* lag weights a_{k,i} (and the sharper a'_{k,i}) bounding how far the
  normalized gradient moving average can drift from the current gradient,
  in terms of past squared iterate differences;
* moving-average weights b_{k,i} of the staged recursion and the derived
  d_{k,i}, which the a_{k,i} dominate whenever momentum weights are
  nondecreasing;
* the Lyapunov coefficients c_i (nonconvex, multistage, strongly convex
  regimes), each defined by a first term plus a linear decrement recursion.

The nonconvex and multistage c-recursions telescope exactly to zero, so the
sequences are evaluated through the closed-form tail sums they solve; this
keeps every term positive out to horizons like 1e4 where the literal
floating-point recursion would drown in rounding noise.  Tests tie the two
forms together over the well-conditioned prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..schedule import max_stepsize_strongly_convex, theoretical_a1

TAIL_REL = 1e-12
CAP_SLACK = 1.0 + 1e-12  # tolerate exact-cap inputs under floating point


@dataclass(frozen=True)
class CoefficientSet:
    """A Lyapunov coefficient sequence c_1..c_H with its defining inputs.

    tail_mass is the total coefficient mass beyond the horizon
    (sum of c_i for i > H, in closed form where available); c_limit is the
    analytic limit of the sequence.  B1/B2/B3 are only set in the strongly
    convex regime; B2 and B3 are per unit noise variance where applicable.
    """

    regime: str
    c: np.ndarray
    log_c: Optional[np.ndarray]
    horizon: int
    tail_mass: float
    c_limit: float
    inputs: dict = field(default_factory=dict)
    B1: Optional[float] = None
    B2: Optional[float] = None
    B3: Optional[float] = None

    @property
    def c1(self) -> float:
        return float(self.c[0]) if len(self.c) else 0.0

    @property
    def min_c(self) -> float:
        return float(np.min(self.c)) if len(self.c) else 0.0

    @property
    def all_positive(self) -> bool:
        """True iff every coefficient is mathematically positive.

        Judged on the log-space representation, which stays finite far past
        the point where the float64 values underflow to zero (e.g. 0.9^10000
        is about exp(-1054), well below the smallest subnormal).
        """
        if len(self.c) == 0:
            return False
        if self.log_c is not None:
            return bool(np.all(np.isfinite(self.log_c)))
        return bool(np.all(self.c > 0.0))


# --- deviation lag weights -------------------------------------------------


def dev_coeffs_a(k: int, beta: float, L: float) -> np.ndarray:
    """Lag weights a_{k,i} = L^2 beta^(k-i)/(1-beta^k) * (k-i + beta/(1-beta)), i=1..k-1."""
    if k < 2:
        return np.zeros(max(k - 1, 0))
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    if beta == 0.0:
        return np.zeros(k - 1)
    i = np.arange(1, k)
    return L**2 * beta ** (k - i) / (1.0 - beta**k) * ((k - i) + beta / (1.0 - beta))


def dev_coeffs_a_prime(k: int, beta: float, L: float) -> np.ndarray:
    """The sharper weights a'_{k,j} the proof of the deviation bound produces.

    a'_{k,j} = L^2 beta^k/(1-beta^k) * (-(k-1) - 1/(1-beta))
             + L^2 beta^(k-j)/(1-beta^k) * (k-j + beta/(1-beta)),
    strictly below a_{k,j} for beta in (0,1).
    """
    if k < 2:
        return np.zeros(max(k - 1, 0))
    if beta == 0.0:
        return np.zeros(k - 1)
    j = np.arange(1, k)
    common = L**2 / (1.0 - beta**k)
    return common * (beta**k * (-(k - 1) - 1.0 / (1.0 - beta)) + beta ** (k - j) * ((k - j) + beta / (1.0 - beta)))


# --- staged moving-average weights ------------------------------------------


def multistage_weights_b(betas: np.ndarray, k: int) -> np.ndarray:
    """Weights b_{k,i} = (1 - beta(i)) * prod_{j=i+1..k} beta(j), i = 1..k.

    betas is the per-iteration momentum-weight path; the recursion's buffer
    after k updates is exactly sum_i b_{k,i} * gtilde^i, and the weights sum
    to 1 - prod_{j<=k} beta(j).
    """
    betas = np.asarray(betas, dtype=float)
    if not 1 <= k <= len(betas):
        raise ValueError(f"k={k} out of range 1..{len(betas)}")
    bk = betas[:k]
    # suffix[i] = prod_{j=i+1..k} beta(j), built right-to-left so zero weights are exact
    suffix = np.ones(k)
    suffix[:-1] = np.cumprod(bk[::-1])[:-1][::-1]
    return (1.0 - bk) * suffix


def multistage_dev_coeffs(betas: np.ndarray, k: int, L: float) -> tuple[np.ndarray, np.ndarray]:
    """Staged lag weights (d_{k,i}, a_{k,i}) for i = 1..k-1, with d <= a verified.

    d_{k,i} = L^2/(1 - prod beta) * sum_{j<=i} (k-j) b_{k,j};
    a_{k,i} uses the final-iteration weight beta(k).  The dominance d <= a
    requires a nondecreasing momentum path and is asserted on the computed
    values.
    """
    betas = np.asarray(betas, dtype=float)
    if np.any(np.diff(betas[:k]) < 0):
        raise ValueError("momentum weights must be nondecreasing for the dominance bound")
    if k < 2:
        return np.zeros(0), np.zeros(0)
    b = multistage_weights_b(betas, k)
    prod_beta = float(np.prod(betas[:k]))
    denom = 1.0 - prod_beta
    j = np.arange(1, k + 1)
    d = L**2 / denom * np.cumsum((k - j) * b)[: k - 1]
    bk = float(betas[k - 1])
    i = np.arange(1, k)
    if bk == 0.0:
        a = np.zeros(k - 1)
    else:
        a = L**2 * bk ** (k - i) / denom * ((k - i) + bk / (1.0 - bk))
    slack = a - d
    worst = float(np.min(slack)) if len(slack) else 0.0
    if worst < -1e-12 * max(1.0, float(np.max(a, initial=0.0))):
        raise ArithmeticError(f"lag-weight dominance violated: min(a - d) = {worst:.3e}")
    return d, a


# --- Lyapunov coefficient sequences ------------------------------------------


def _tail_sums(beta: float, start: int) -> tuple[float, float]:
    """(sum_{i>=start} i beta^i, sum_{i>=start} beta^i) in closed form."""
    if beta == 0.0:
        return 0.0, 0.0
    bs = beta**start
    return bs * (start / (1.0 - beta) + beta / (1.0 - beta) ** 2), bs / (1.0 - beta)


def _geometric_c(D: float, beta: float, H: int) -> tuple[np.ndarray, Optional[np.ndarray], float]:
    """Sequence c_i = D * beta^i * (i/(1-beta) + 2 beta/(1-beta)^2) and its tail mass.

    This is the exact solution of c_{i+1} = c_i - D beta^i (i + beta/(1-beta))
    with the fixed-point first term, i.e. the tail sum of the decrements.
    Returned both as float64 values (which underflow to zero at very deep
    indices) and in log-space, where positivity is visible at any depth.
    """
    if beta == 0.0 or D == 0.0:
        return np.zeros(H), None, 0.0
    i = np.arange(1, H + 1, dtype=float)
    log_c = math.log(D) + i * math.log(beta) + np.log(i / (1.0 - beta) + 2.0 * beta / (1.0 - beta) ** 2)
    ti, t1 = _tail_sums(beta, H + 1)
    tail = D * (ti / (1.0 - beta) + (2.0 * beta / (1.0 - beta) ** 2) * t1)
    return np.exp(log_c), log_c, tail


def choose_horizon(beta: float, rel: float = TAIL_REL, max_h: int = 200000) -> int:
    """Smallest horizon H with coefficient mass beyond H below rel * c_1.

    Depends only on the decay weight: the mass ratio tail(H)/c_1 is
    independent of the decrement scale D.
    """
    if beta == 0.0:
        return 1
    c1_like, _, _ = _geometric_c(1.0, beta, 1)
    c1 = float(c1_like[0])
    lo, hi = 1, 2
    # grow until tail fits, then binary search the crossing
    def tail(h: int) -> float:
        ti, t1 = _tail_sums(beta, h + 1)
        return ti / (1.0 - beta) + (2.0 * beta / (1.0 - beta) ** 2) * t1

    while tail(hi) > rel * c1:
        hi *= 2
        if hi > max_h:
            return max_h
    while lo < hi:
        mid = (lo + hi) // 2
        if tail(mid) <= rel * c1:
            hi = mid
        else:
            lo = mid + 1
    return lo


def c_sequence_nonconvex(alpha: float, beta: float, L: float, H: int) -> CoefficientSet:
    """Lyapunov coefficients for the smooth nonconvex regime, constant parameters.

    Requires alpha <= (1-beta) / (2 sqrt(2) L sqrt(beta + beta^2)); that cap
    keeps the first-term denominator at least 1/2.  The sequence telescopes
    exactly to zero, reported as c_limit (its floating-point residual must
    vanish relative to c_1).
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    if alpha <= 0 or L <= 0 or H < 1:
        raise ValueError("need alpha > 0, L > 0, H >= 1")
    if beta == 0.0:
        return CoefficientSet(
            regime="nonconvex",
            c=np.zeros(H),
            log_c=None,
            horizon=H,
            tail_mass=0.0,
            c_limit=0.0,
            inputs={"alpha": alpha, "beta": beta, "L": L, "denominator": 1.0},
        )
    cap = (1.0 - beta) / (2.0 * math.sqrt(2.0) * L * math.sqrt(beta + beta**2))
    if alpha > cap * CAP_SLACK:
        raise ValueError(f"alpha={alpha:.6g} exceeds the admissible cap {cap:.6g}")
    ratio = (beta + beta**2) / (1.0 - beta) ** 2
    denominator = 1.0 - 4.0 * alpha**2 * ratio * L**2
    if denominator <= 0:
        raise ValueError("stepsize too large: first-term denominator is non-positive")
    c1 = (ratio / (1.0 - beta)) * L**3 * alpha**2 / denominator
    D = (4.0 * c1 * alpha**2 + L * alpha**2 / (1.0 - beta)) * L**2
    c, log_c, tail = _geometric_c(D, beta, H)
    c_limit = c1 - D * ratio
    return CoefficientSet(
        regime="nonconvex",
        c=c,
        log_c=log_c,
        horizon=H,
        tail_mass=tail,
        c_limit=c_limit,
        inputs={"alpha": alpha, "beta": beta, "L": L, "denominator": denominator, "decrement_scale": D},
    )


def c_sequence_multistage(alpha1: float, beta1: float, beta_n: float, L: float, H: int) -> CoefficientSet:
    """Lyapunov coefficients for staged parameters.

    The first stage contributes the scale (alpha_1, beta_1) and the last
    stage's momentum weight beta_n drives the decay.  Admissibility needs the
    theoretical A1 = 1/(24 sqrt(2) L) coupling together with the spread
    condition (1-beta_1)/beta_1 <= 12 (1-beta_n)/sqrt(beta_n + beta_n^2);
    those two keep the first-term denominator at least 1/2 and give
    c_1 <= L / (4 (1 - beta_1)).
    """
    if not 0.0 <= beta1 <= beta_n < 1.0:
        raise ValueError("need 0 <= beta1 <= beta_n < 1")
    if alpha1 <= 0 or L <= 0 or H < 1:
        raise ValueError("need alpha1 > 0, L > 0, H >= 1")
    a1 = alpha1 * beta1 / (1.0 - beta1) if beta1 > 0 else 0.0
    a1_star = theoretical_a1(L)
    if beta1 > 0 and abs(a1 - a1_star) > 1e-6 * a1_star:
        raise ValueError(f"A1={a1:.8g} is not the admissible value {a1_star:.8g}")
    if beta1 > 0:
        spread_lhs = (1.0 - beta1) / beta1
        spread_rhs = 12.0 * (1.0 - beta_n) / math.sqrt(beta_n + beta_n**2)
        if spread_lhs > spread_rhs * CAP_SLACK:
            raise ValueError(f"spread condition violated: {spread_lhs:.6g} > {spread_rhs:.6g}")
    if beta_n == 0.0:
        return CoefficientSet(
            regime="multistage",
            c=np.zeros(H),
            log_c=None,
            horizon=H,
            tail_mass=0.0,
            c_limit=0.0,
            inputs={"alpha1": alpha1, "beta1": beta1, "beta_n": beta_n, "L": L, "denominator": 1.0},
        )
    ratio = (beta_n + beta_n**2) / (1.0 - beta_n) ** 2
    denominator = 1.0 - 4.0 * alpha1**2 * ratio * L**2
    if denominator <= 0:
        raise ValueError("stepsize too large: first-term denominator is non-positive")
    c1 = (alpha1**2 / (1.0 - beta1)) * ratio * L**3 / denominator
    c1_cap = L / (4.0 * (1.0 - beta1))
    D = (4.0 * c1 * alpha1**2 + L * alpha1**2 / (1.0 - beta1)) * L**2
    c, log_c, tail = _geometric_c(D, beta_n, H)
    c_limit = c1 - D * ratio
    return CoefficientSet(
        regime="multistage",
        c=c,
        log_c=log_c,
        horizon=H,
        tail_mass=tail,
        c_limit=c_limit,
        inputs={
            "alpha1": alpha1,
            "beta1": beta1,
            "beta_n": beta_n,
            "L": L,
            "denominator": denominator,
            "decrement_scale": D,
            "c1_cap": c1_cap,
            "c1_cap_margin": c1_cap - c1,
        },
    )


def scvx_constants(alpha: float, beta: float, L: float, mu: float, H: Optional[int] = None) -> CoefficientSet:
    """Descent constants B1, B2, B3 and coefficients for the strongly convex regime.

    B1 < 0 is the contraction coefficient -alpha*mu/(1 + 8 mu/L); B2 and B3
    are reported per unit noise variance.  The coefficient recursion is
    c_{i+1} = (1 + B1) c_i - 2 L^2 B3 beta^i (i + beta/(1-beta)) with the
    sqrt(beta)-form first term, which keeps every term positive under the
    stepsize cap (the sequence then decays geometrically at rate 1 + B1).
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    if not 0.0 < mu <= L:
        raise ValueError("need 0 < mu <= L")
    cap = max_stepsize_strongly_convex(beta, L, mu)
    if alpha > cap * CAP_SLACK:
        raise ValueError(f"alpha={alpha:.6g} exceeds the admissible cap {cap:.6g}")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    curv = 1.0 + 8.0 * mu / L
    B1 = -alpha * mu / curv

    sb = math.sqrt(beta)
    if beta > 0:
        shape = sb / (1.0 - sb) ** 2 + (sb / (1.0 - sb)) * (beta / (1.0 - beta))
    else:
        shape = 0.0
    c1 = shape * (4.0 * L**3 * alpha**2 / (1.0 - beta) + 30.0 * L**2 * mu * alpha**2 / ((1.0 - beta) * curv))
    c1_estimate_bound = (6.0 * sb / (25.0 * (1.0 - beta))) * (2.0 * L + 18.0 * mu)

    # per unit sigma^2
    bracket = alpha * beta**2 / (1.0 - beta) + 0.5 * L * alpha**2 * (beta / (1.0 - beta)) ** 2
    B2 = (
        beta**2 / (2.0 * (1.0 + beta)) * L * alpha**2
        + 0.5 * L * alpha**2
        + 2.0 * c1 * (1.0 - beta) / (1.0 + beta) * alpha**2
        + alpha * mu * bracket * 2.0 * (1.0 - beta) / ((1.0 + beta) * curv)
    )
    B3 = (
        4.0 * c1 * alpha**2
        + L * alpha**2 / (1.0 - beta)
        + alpha * mu * (11.0 * alpha / (2.0 * (1.0 - beta)) + 2.0 * L * alpha**2 / (1.0 - beta) ** 2) / curv
    )

    if H is None:
        # 1 + B1 sets the asymptotic decay; size the horizon from it
        H = max(choose_horizon(beta), int(math.log(TAIL_REL) / math.log1p(B1)) + 1) if beta > 0 else 1
    if beta == 0.0:
        c = np.zeros(H)
        log_c = None
        tail = 0.0
    else:
        growth = math.log(beta) - math.log1p(B1)
        if growth >= 0:
            raise ArithmeticError("decay ordering beta < 1 + B1 violated")
        j = np.arange(1, H, dtype=float)
        terms = 2.0 * L**2 * B3 * np.exp(j * math.log(beta) - (j + 1.0) * math.log1p(B1)) * (
            j + beta / (1.0 - beta)
        )
        u = c1 / (1.0 + B1) - np.concatenate([[0.0], np.cumsum(terms)])
        if np.any(u <= 0):
            bad = int(np.argmax(u <= 0)) + 1
            raise ArithmeticError(f"strongly convex coefficient sequence lost positivity at i={bad}")
        i = np.arange(1, H + 1, dtype=float)
        log_c = i * math.log1p(B1) + np.log(u)
        c = np.exp(log_c)
        tail = float(c[-1]) * (1.0 + B1) / (-B1)  # geometric envelope of the remaining terms
    return CoefficientSet(
        regime="strongly_convex",
        c=c,
        log_c=log_c,
        horizon=H,
        tail_mass=tail,
        c_limit=0.0,
        inputs={
            "alpha": alpha,
            "beta": beta,
            "L": L,
            "mu": mu,
            "c1_estimate_bound": c1_estimate_bound,
            "c1_estimate_margin": c1_estimate_bound - c1,
            "one_plus_B1": 1.0 + B1,
            "sqrt_beta": sb,
        },
        B1=B1,
        B2=B2,
        B3=B3,
    )

"""Pure-numpy batch engine for quadratic objectives with additive noise.

Runs n_trials momentum recursions in lockstep (vectorized across trials,
Python loop over iterations) and fills the per-iteration summary statistics
the Monte Carlo checks consume.  The compiled kernel implements the same
contract; see sgdmlab._core.simulate_quadratic_additive for the signature.
"""

from __future__ import annotations

import numpy as np


def simulate_quadratic_additive(
    A: np.ndarray,
    b: np.ndarray,
    x0: np.ndarray,
    alphas: np.ndarray,
    betas: np.ndarray,
    a1: float,
    noise: np.ndarray,
    f_x: np.ndarray,
    g_norm2: np.ndarray,
    step_norm2: np.ndarray,
    m_resid2: np.ndarray,
    f_z: np.ndarray,
) -> None:
    T, K, d = noise.shape
    x = np.broadcast_to(x0, (T, d)).copy()
    m = np.zeros((T, d))
    S = np.zeros((T, d))  # moving average of full gradients, same weights as m
    for k in range(K):
        z = x - a1 * m
        f_z[:, k] = 0.5 * np.einsum("td,td->t", z @ A, z) - z @ b
        g = x @ A - b
        f_x[:, k] = 0.5 * np.einsum("td,td->t", x @ A, x) - x @ b
        g_norm2[:, k] = np.einsum("td,td->t", g, g)
        gt = g + noise[:, k, :]
        bk = betas[k]
        m = bk * m + (1.0 - bk) * gt
        S = bk * S + (1.0 - bk) * g
        r = m - S
        m_resid2[:, k] = np.einsum("td,td->t", r, r)
        step_norm2[:, k] = alphas[k] ** 2 * np.einsum("td,td->t", m, m)
        x = x - alphas[k] * m
    z = x - a1 * m
    f_z[:, K] = 0.5 * np.einsum("td,td->t", z @ A, z) - z @ b

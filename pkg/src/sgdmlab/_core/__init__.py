"""Batch simulation core with compiled kernel and pure-numpy fallback.

The compiled extension is preferred when importable; set
SGDMLAB_FORCE_NUMPY=1 to force the fallback (used by the backend-equivalence
tests and the benchmark).
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

try:
    from . import _kernel  # type: ignore[attr-defined]
except ImportError:
    _kernel = None

_FORCED = os.environ.get("SGDMLAB_FORCE_NUMPY", "") not in ("", "0")
BACKEND = "numpy" if (_kernel is None or _FORCED) else "cython"


def get_backend() -> str:
    return BACKEND


def simulate_quadratic_additive(A, b, x0, alphas, betas, a1, noise, backend=None):
    """Run a batch of momentum recursions on f(x) = 1/2 x'Ax - b'x.

    noise has shape (n_trials, K, d) and is added to the full gradient at
    each step.  Returns dict arrays of shape (n_trials, K): objective at the
    pre-update iterate, squared gradient norm, squared step length, squared
    distance between the momentum buffer and the same-weight moving average
    of full gradients; f_z (n_trials, K+1) is the objective at the auxiliary
    point x - A1 * m evaluated one step past the end.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    alphas = np.ascontiguousarray(alphas, dtype=np.float64)
    betas = np.ascontiguousarray(betas, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    T, K, d = noise.shape
    if A.shape != (d, d) or b.shape != (d,) or x0.shape != (d,):
        raise ValueError("problem arrays do not match the noise dimension")
    if len(alphas) != K or len(betas) != K:
        raise ValueError("parameter arrays must have one entry per iteration")
    out = {
        "f_x": np.empty((T, K)),
        "g_norm2": np.empty((T, K)),
        "step_norm2": np.empty((T, K)),
        "m_resid2": np.empty((T, K)),
        "f_z": np.empty((T, K + 1)),
    }
    which = backend or BACKEND
    if which == "cython":
        if _kernel is None:
            raise RuntimeError("compiled kernel is not available")
        impl = _kernel.simulate_quadratic_additive
    elif which == "numpy":
        impl = _fallback.simulate_quadratic_additive
    else:
        raise ValueError(f"unknown backend {which!r}")
    impl(
        A,
        b,
        x0,
        alphas,
        betas,
        float(a1),
        noise,
        out["f_x"],
        out["g_norm2"],
        out["step_norm2"],
        out["m_resid2"],
        out["f_z"],
    )
    return out

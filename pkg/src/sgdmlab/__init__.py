"""sgdmlab: heavy-ball SGD, multistage schedules, and numerical verification
of their convergence guarantees on analytically tractable objectives."""

from ._core import get_backend
from .optimizers import OutputSelection, Trajectory, run_multistage, run_sgdm, select_output, sgdm_step
from .problems import (
    Dataset,
    NoiseModel,
    ProblemSpec,
    additive_noise,
    estimate_sigma2,
    full_gradient,
    load_dataset_csv,
    make_logistic,
    make_least_squares,
    make_quadratic,
    make_synthetic_classification,
    minibatch_noise,
    objective,
    stochastic_gradient,
)
from .schedule import (
    Schedule,
    k0,
    max_stepsize_nonconvex,
    max_stepsize_strongly_convex,
    plan_from_lengths,
    validate,
)

__version__ = "0.1.0"

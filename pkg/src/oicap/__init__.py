"""Capacity bounds for Gaussian and Poisson optical intensity channels under
an average-intensity budget, with a Blahut-Arimoto oracle and Monte-Carlo
checks of the MAP detector.
"""

__version__ = "0.1.0"

from .channels import (  # noqa: E402
    AuxDistGaussian,
    AuxDistPoisson,
    ChannelSpec,
    ConstraintBudget,
    kl_to_aux,
    likelihood,
    log_likelihood,
    make_aux_gaussian,
    make_aux_poisson,
    make_rng,
    sample,
)
from .errors import (  # noqa: E402
    AccuracyError,
    BracketError,
    ConstraintError,
    ConvergenceError,
    DomainError,
    OicapError,
    RegimeError,
    UsageError,
    ValidityViolated,
)
from .reports import BinaryInput, BoundReport  # noqa: E402

__all__ = [
    "AccuracyError",
    "AuxDistGaussian",
    "AuxDistPoisson",
    "BinaryInput",
    "BoundReport",
    "BracketError",
    "ChannelSpec",
    "ConstraintBudget",
    "ConstraintError",
    "ConvergenceError",
    "DomainError",
    "OicapError",
    "RegimeError",
    "UsageError",
    "ValidityViolated",
    "kl_to_aux",
    "likelihood",
    "log_likelihood",
    "make_aux_gaussian",
    "make_aux_poisson",
    "make_rng",
    "sample",
]

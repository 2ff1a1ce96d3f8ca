"""Exposure, sensitivity, adaptation and total impact of drivers on a
coupled fishery model, with the model, its dynamics and its calibration."""

__version__ = "0.1.0"

from .errors import (AdaptImpactError, BoundaryWarning, ConvergenceError,  # noqa: E402
                     DataFormatError, DomainError, ValidationError)
from .model import ModelParams, StockState, market_equilibrium  # noqa: E402
from .framework import (DriverVector, ImpactModel, PropertySchema, exposure,  # noqa: E402
                        sensitivity_abs, sensitivity_marginal, argmax_adaptation,
                        adaptation_abs, adaptation_behaviour, adaptation_marginals,
                        total_impact, sweep)
from .dynamics import (find_steady_state, integrate, bifurcation_scan,  # noqa: E402
                       relative_steady_table)

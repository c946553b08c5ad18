"""Integrate-and-fire neuron models in voltage form and their phase duals."""

from .catalog import CATALOG_NAMES, catalog_get, catalog_info
from .dual import NumericDual, build_dual, h_inverse, legendre_potential, phase_threshold
from .errors import (ConvergenceFailure, DivergenceGuard, DivergentError, DomainError,
                     DualIFError, ExprError, ExprSyntaxError, InvalidExponent, InvalidModel,
                     InvalidWrap, NegativeInput, QuadratureFailure, RangeError,
                     UnknownIdentifier, UnknownModel, ValidationError)
from .expr import DynamicsExpr, evaluate, parse
from .models import (DualPair, InputSignal, PhaseModel, VoltageModel, validate_phase,
                     validate_voltage)
from .quadrature import QuadratureSpec
from .rate import (FICurve, dilog, fi_curve, monomial_model, onset_rate_monomial,
                   period_quadrature, rate, rate_closed_form)
from .sim import (SimConfig, SpikeTrain, Trajectory, compare_spike_trains,
                  integrate_phase, integrate_voltage, map_trajectory)

__version__ = "0.1.0"

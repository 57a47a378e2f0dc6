"""
Map/objective abstraction shared by every other module.

A map bundle carries the state update f(u, s), its analytic derivatives
Df and d_s f, and an objective J(u, s) with DJ and d_s J. States are numpy
arrays of shape (..., m); every operation broadcasts over the leading axes
so a whole trajectory can be differentiated in one call.
"""
import abc
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

# State: (..., m) array; Jacobian: (..., m, m); ParamDerivative: (..., m)
State = npt.NDArray[np.float64]
Jacobian = npt.NDArray[np.float64]
ParamDerivative = npt.NDArray[np.float64]


# --- Errors ---

class LssError(Exception):
    """Base class for every error raised by lssmap."""


class ConfigError(LssError):
    """Invalid or inconsistent configuration values."""


class UnknownMap(ConfigError):
    def __init__(self, name, known=()):
        self.name = name
        msg = f"unknown map '{name}'"
        if known:
            msg += f" (choose from: {', '.join(sorted(known))})"
        super().__init__(msg)


class NumericalError(LssError):
    """A computation produced an unusable numeric result."""


class NonFiniteState(NumericalError):
    pass


class DegenerateRadius(NumericalError):
    pass


class DimensionMismatch(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class InfeasibleSolution(NumericalError):
    pass


class SizeLimitExceeded(NumericalError):
    pass


class NoAnalyticDirection(LssError):
    pass


# --- Shared value types ---

class ObjectiveGradient(NamedTuple):
    dJ_du: np.ndarray  # (..., m)
    dJ_ds: np.ndarray  # (...)


@dataclass(frozen=True)
class DerivativeReport:
    max_rel_err_jac: float
    max_rel_err_paramderiv: float
    max_rel_err_objgrad: float

    @property
    def worst(self):
        return max(self.max_rel_err_jac, self.max_rel_err_paramderiv, self.max_rel_err_objgrad)


class MapSystem(abc.ABC):
    """
    A parameterized map with analytic derivatives.

    Implementations hold only immutable configuration, so one instance can be
    shared between workers. `f` is assumed bijective in u; the algorithm never
    evaluates the inverse, so this is documented per map and not checked.
    """

    name: str = ""
    dimension: int = 0
    coordinate_names: tuple = ()
    default_spinup: int = 1000

    @abc.abstractmethod
    def step(self, u: State, s: float) -> State:
        ...

    @abc.abstractmethod
    def jacobian(self, u: State, s: float) -> Jacobian:
        ...

    @abc.abstractmethod
    def param_deriv(self, u: State, s: float) -> ParamDerivative:
        ...

    @abc.abstractmethod
    def objective(self, u: State, s: float) -> np.ndarray:
        ...

    @abc.abstractmethod
    def objective_grad(self, u: State, s: float) -> ObjectiveGradient:
        ...

    @abc.abstractmethod
    def sample_initial_state(self, rng: np.random.Generator, s: float) -> State:
        """Draw u_{-n0} uniformly from the map's sampling box."""

    def analytic_shadow_direction(self, u: State, s: float) -> Optional[np.ndarray]:
        """Closed-form shadowing direction at u, or None when the map has none."""
        return None

    def displacement(self, a: State, b: State) -> np.ndarray:
        """a - b in the map's state space (overridden on the torus)."""
        return np.asarray(a) - np.asarray(b)

    def __repr__(self):
        return f"{type(self).__name__}(m={self.dimension})"


def require_finite(values, what="state"):
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise NonFiniteState(f"non-finite {what} encountered")
    return values


def require_seed(seed):
    """Integer seeds must be non-negative; SeedSequence objects pass through."""
    if isinstance(seed, (int, np.integer)) and seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed}")
    return seed


def _relative_error(analytic, reference):
    analytic = np.asarray(analytic, dtype=float)
    reference = np.asarray(reference, dtype=float)
    scale = max(float(np.max(np.abs(reference), initial=0.0)), np.finfo(float).tiny)
    return float(np.max(np.abs(analytic - reference), initial=0.0)) / scale


def verify_derivatives(sys: MapSystem, u: State, s: float, h: float = 1e-6) -> DerivativeReport:
    """
    Compare the analytic derivatives of `sys` at (u, s) against central
    differences with step h. Finite differences are an oracle only; the
    solver always consumes the analytic values.
    """
    if h <= 0:
        raise ConfigError(f"finite-difference step must be positive, got {h}")
    u = require_finite(np.array(u, dtype=float))
    m = sys.dimension

    jac = require_finite(sys.jacobian(u, s), "Jacobian")
    jac_fd = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        plus = require_finite(sys.step(u + e, s))
        minus = require_finite(sys.step(u - e, s))
        jac_fd[:, j] = sys.displacement(plus, minus) / (2 * h)

    dfds = require_finite(sys.param_deriv(u, s), "parameter derivative")
    dfds_fd = sys.displacement(require_finite(sys.step(u, s + h)),
                               require_finite(sys.step(u, s - h))) / (2 * h)

    grad = sys.objective_grad(u, s)
    require_finite(grad.dJ_du, "objective gradient")
    dJdu_fd = np.empty(m)
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        dJdu_fd[j] = (sys.objective(u + e, s) - sys.objective(u - e, s)) / (2 * h)
    dJds_fd = (sys.objective(u, s + h) - sys.objective(u, s - h)) / (2 * h)
    require_finite(dJdu_fd, "objective")

    report = DerivativeReport(
        max_rel_err_jac=_relative_error(jac, jac_fd),
        max_rel_err_paramderiv=_relative_error(dfds, dfds_fd),
        max_rel_err_objgrad=_relative_error(
            np.append(grad.dJ_du, grad.dJ_ds), np.append(dJdu_fd, dJds_fd)),
    )
    logger.debug("derivative check for %r at s=%g: %s", sys, s, report)
    return report

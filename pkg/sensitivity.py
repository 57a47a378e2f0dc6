"""
Sensitivity pipeline: spin-up, trajectory, LSS solve and the ergodic-average
derivative estimator

    d<J>/ds ~ 1/(n - 2 trim) * sum_{i=trim+1}^{n-trim} DJ(u_i) v_i + d_s J(u_i)

The tangent solve always spans the whole window; trim only narrows the average.
"""
import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from dynsys import ConfigError, MapSystem, require_finite, require_seed
from lss_solver import SOLVERS, LssProblem, TangentSolution, solve_lss
from maps import get_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    map_name: str
    s: float
    n: int
    n0: Optional[int] = None
    seed: int = 0
    trim: int = 0
    solver: str = "thomas"

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be at least 2, got {self.n}")
        if self.n0 is not None and self.n0 < 0:
            raise ConfigError(f"n0 must be non-negative, got {self.n0}")
        require_seed(self.seed)
        if self.trim < 0 or 2 * self.trim >= self.n:
            raise ConfigError(f"trim must satisfy 0 <= 2*trim < n, got trim={self.trim}, n={self.n}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got '{self.solver}'")

    def resolved(self, sys: MapSystem):
        """Fill n0 from the map's default spin-up."""
        if self.n0 is not None:
            return self
        return RunConfig(self.map_name, self.s, self.n, sys.default_spinup,
                         self.seed, self.trim, self.solver)


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # (n, m): u_1 .. u_n
    s: float
    n0: int
    seed: object

    @property
    def n(self):
        return self.states.shape[0]


@dataclass(frozen=True)
class SensitivityResult:
    estimate: float
    mean_J: float
    config: RunConfig
    constraint_residual: float
    wall_time_s: float

    def to_dict(self):
        c = self.config
        return {
            "map": c.map_name,
            "s": float(c.s),
            "n": int(c.n),
            "n0": int(c.n0),
            "seed": int(c.seed),
            "trim": int(c.trim),
            "estimate": float(self.estimate),
            "mean_J": float(self.mean_J),
            "constraint_residual": float(self.constraint_residual),
            "wall_time_s": float(self.wall_time_s),
        }


def sample_trajectory(sys: MapSystem, s, n, n0, seed) -> Trajectory:
    """
    Iterate from a seeded random start: n0 steps to u_0 are discarded,
    u_1 .. u_n are kept. `seed` is anything np.random.default_rng accepts.
    """
    if n0 < 0:
        raise ConfigError(f"n0 must be non-negative, got {n0}")
    rng = np.random.default_rng(require_seed(seed))
    u = sys.sample_initial_state(rng, s)
    for _ in range(n0):
        u = sys.step(u, s)
    require_finite(u, f"state after {n0} spin-up steps of {sys.name} at s={s}")

    states = np.empty((n, sys.dimension))
    for i in range(n):
        u = sys.step(u, s)
        states[i] = u
    require_finite(states, f"trajectory state of {sys.name} at s={s}")
    return Trajectory(states=states, s=s, n0=n0, seed=seed)


def generate_trajectory(sys: MapSystem, config: RunConfig) -> Trajectory:
    config = config.resolved(sys)
    return sample_trajectory(sys, config.s, config.n, config.n0, config.seed)


def linearize(sys: MapSystem, trajectory: Trajectory) -> LssProblem:
    head = trajectory.states[:-1]
    return LssProblem(jacobians=sys.jacobian(head, trajectory.s),
                      param_derivs=sys.param_deriv(head, trajectory.s))


def shadow(sys: MapSystem, trajectory: Trajectory, solver="thomas") -> TangentSolution:
    return solve_lss(linearize(sys, trajectory), solver=solver)


def estimator_terms(sys: MapSystem, trajectory: Trajectory, v):
    """Per-step DJ(u_i) v_i + d_s J(u_i)."""
    grad = sys.objective_grad(trajectory.states, trajectory.s)
    return np.einsum("ij,ij->i", grad.dJ_du, v) + grad.dJ_ds


def compute_sensitivity(sys: MapSystem, config: RunConfig) -> SensitivityResult:
    start = time.perf_counter()
    config = config.resolved(sys)
    trajectory = generate_trajectory(sys, config)
    solution = shadow(sys, trajectory, config.solver)

    window = slice(config.trim, config.n - config.trim)
    terms = estimator_terms(sys, trajectory, solution.v)[window]
    mean_J = sys.objective(trajectory.states, config.s)[window]
    estimate = float(np.mean(terms))
    require_finite(estimate, "sensitivity estimate")

    elapsed = time.perf_counter() - start
    logger.info("%s s=%g n=%d seed=%d: d<J>/ds = %.6f (%.2fs)",
                config.map_name, config.s, config.n, config.seed, estimate, elapsed)
    return SensitivityResult(
        estimate=estimate,
        mean_J=float(np.mean(mean_J)),
        config=config,
        constraint_residual=solution.constraint_residual,
        wall_time_s=elapsed,
    )


def run(config: RunConfig) -> SensitivityResult:
    """compute_sensitivity for a bundled map selected by name (picklable for workers)."""
    return compute_sensitivity(get_map(config.map_name), config)

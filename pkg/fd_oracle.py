"""
Ensemble finite-difference reference for d<J>/ds.

Independent trajectories are run at s + ds and s - ds, J is averaged along
each, and the two ensemble means are differenced. The 3 sigma band assumes
independent members, so every member gets its own child seed and the two
sides draw from disjoint halves of the spawned seed list.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from dynsys import ConfigError, require_finite, require_seed
from maps import get_map
from workers import parallel_map

logger = logging.getLogger(__name__)

# Members integrated together in one vectorized batch. Fixed, so results do
# not depend on the worker count.
BATCH_SIZE = 50


@dataclass(frozen=True)
class FdConfig:
    map_name: str
    s: float
    ds: float = 0.05
    ensemble: int = 100
    n: int = 5000
    n0: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not self.ds > 0:
            raise ConfigError(f"ds must be positive, got {self.ds}")
        if self.ensemble < 2:
            raise ConfigError(f"ensemble must be at least 2, got {self.ensemble}")
        if self.n < 1:
            raise ConfigError(f"n must be positive, got {self.n}")
        if self.n0 is not None and self.n0 < 0:
            raise ConfigError(f"n0 must be non-negative, got {self.n0}")
        require_seed(self.seed)


@dataclass(frozen=True)
class FdResult:
    estimate: float
    sigma: float
    config: FdConfig

    @property
    def ci3(self):
        return 3.0 * self.sigma

    def to_dict(self):
        c = self.config
        return {
            "map": c.map_name,
            "s": float(c.s),
            "ds": float(c.ds),
            "ensemble": int(c.ensemble),
            "n": int(c.n),
            "n0": None if c.n0 is None else int(c.n0),
            "seed": int(c.seed),
            "estimate": float(self.estimate),
            "sigma": float(self.sigma),
            "ci3": float(self.ci3),
        }


def _batch_means(task):
    """Time-averaged J for one batch of members, integrated side by side."""
    map_name, s, n, n0, seeds = task
    sys = get_map(map_name)
    n0 = sys.default_spinup if n0 is None else n0
    u = np.stack([sys.sample_initial_state(np.random.default_rng(seq), s) for seq in seeds])
    for _ in range(n0):
        u = sys.step(u, s)
    total = np.zeros(len(seeds))
    for _ in range(n):
        u = sys.step(u, s)
        total += sys.objective(u, s)
    return require_finite(total / n, f"ensemble mean of {map_name} at s={s}")


def ensemble_means(map_name, s, n, n0, seeds, jobs=1):
    batches = [(map_name, s, n, n0, seeds[i:i + BATCH_SIZE])
               for i in range(0, len(seeds), BATCH_SIZE)]
    return np.concatenate(parallel_map(_batch_means, batches, jobs))


def central_difference(plus_means, minus_means, ds, config):
    """Difference of two ensemble means with its propagated standard error."""
    plus_means = np.asarray(plus_means, dtype=float)
    minus_means = np.asarray(minus_means, dtype=float)
    estimate = (np.mean(plus_means) - np.mean(minus_means)) / (2 * ds)
    variance = (np.var(plus_means, ddof=1) / plus_means.size
                + np.var(minus_means, ddof=1) / minus_means.size)
    return FdResult(estimate=float(estimate), sigma=float(np.sqrt(variance) / (2 * ds)), config=config)


def fd_derivative(config: FdConfig, jobs=1) -> FdResult:
    children = np.random.SeedSequence(config.seed).spawn(2 * config.ensemble)
    plus_seeds, minus_seeds = children[:config.ensemble], children[config.ensemble:]

    logger.info("finite difference for %s at s=%g +/- %g: 2 x %d trajectories of length %d",
                config.map_name, config.s, config.ds, config.ensemble, config.n)
    plus = ensemble_means(config.map_name, config.s + config.ds, config.n, config.n0, plus_seeds, jobs)
    minus = ensemble_means(config.map_name, config.s - config.ds, config.n, config.n0, minus_seeds, jobs)
    result = central_difference(plus, minus, config.ds, config)
    logger.info("finite difference estimate %.6f +/- %.6f (3 sigma)", result.estimate, result.ci3)
    return result

"""
Desk-scale studies on the solenoid benchmark:

- error_profile: pointwise distance between the LSS tangent and the analytic
  shadowing direction along one trajectory.
- sweep: LSS estimates over a grid of s next to ensemble finite differences.
- convergence_study: mean |error| against a reference value as n grows,
  with log-log slopes for the small-n and large-n halves.
- estimate_truth: reference value from many trimmed LSS runs.
- attractor_points: a sample of the attractor at a given s.

Every study is a pure function of its seeds; tables come back as pandas
DataFrames in sorted key order.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats

from dynsys import ConfigError, MapSystem, NoAnalyticDirection
from fd_oracle import FdConfig, fd_derivative
from maps import get_map
from sensitivity import RunConfig, compute_sensitivity, sample_trajectory, shadow
from workers import parallel_map

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def write_csv(frame: pd.DataFrame, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("wrote %d rows to %s", len(frame), path)
    return path


def fit_loglog_slope(x, y):
    """Least-squares line through (log x, log y): (slope, intercept, correlation)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return float("nan"), float("nan"), float("nan")
    fit = stats.linregress(np.log(x), np.log(y))
    return float(fit.slope), float(fit.intercept), float(fit.rvalue)


def _seeded_runs(sys, configs, jobs):
    return parallel_map(_estimate, [(sys, c) for c in configs], jobs)


def _estimate(task):
    sys, config = task
    return compute_sensitivity(sys, config).estimate


# --- Shadowing error profile ---

@dataclass(frozen=True)
class ErrorProfile:
    e_norm: np.ndarray
    map_name: str
    s: float
    n: int
    n0: int
    seed: int

    def to_frame(self):
        return pd.DataFrame({"i": np.arange(1, self.n + 1), "e_norm": self.e_norm})

    def middle_max(self):
        lo, hi = self.n // 3, self.n - self.n // 3
        return float(np.max(self.e_norm[lo:hi]))

    def head_decay(self, first=2, last=20):
        """Slope and correlation of log e_i over i in [first, last]."""
        i = np.arange(first, min(last, self.n) + 1)
        logs = np.log(np.maximum(self.e_norm[i - 1], np.finfo(float).tiny))
        fit = stats.linregress(i, logs)
        return float(fit.slope), float(fit.rvalue)


def error_profile(n, s, seed, sys: MapSystem = None, n0=None, solver="thomas") -> ErrorProfile:
    if n < 2:
        raise ConfigError(f"n must be at least 2, got {n}")
    sys = get_map("solenoid") if sys is None else sys
    n0 = sys.default_spinup if n0 is None else n0
    trajectory = sample_trajectory(sys, s, n, n0, seed)
    exact = sys.analytic_shadow_direction(trajectory.states, s)
    if exact is None:
        raise NoAnalyticDirection(f"map '{sys.name}' has no closed-form shadowing direction")

    solution = shadow(sys, trajectory, solver)
    e_norm = np.linalg.norm(solution.v - exact, axis=1)
    logger.info("error profile n=%d s=%g: endpoints %.3e / %.3e, min %.3e",
                n, s, e_norm[0], e_norm[-1], e_norm.min())
    return ErrorProfile(e_norm=e_norm, map_name=sys.name, s=s, n=n, n0=n0, seed=seed)


# --- Derivative sweep ---

def sweep(s_values, n, reps, fd_config: FdConfig, sys: MapSystem = None,
          seed=0, trim=0, n0=None, jobs=1) -> pd.DataFrame:
    """
    LSS estimates for every (s, n, rep) next to one finite-difference result
    per s. `n` may be a single length or several; rep r uses seed + r.
    fd_config supplies ds/ensemble/length/seed; its s is replaced per row.
    """
    s_values = sorted(float(s) for s in s_values)
    n_values = sorted(int(k) for k in np.atleast_1d(n))
    if not s_values:
        raise ConfigError("sweep needs at least one value of s")
    if reps < 1:
        raise ConfigError(f"reps must be at least 1, got {reps}")
    sys = get_map(fd_config.map_name) if sys is None else sys

    keys = [(s, k, r) for s in s_values for k in n_values for r in range(reps)]
    configs = [RunConfig(sys.name, s, k, n0, seed + r, trim) for s, k, r in keys]
    lss = _seeded_runs(sys, configs, jobs)

    fd = {}
    for s in s_values:
        fd[s] = fd_derivative(FdConfig(fd_config.map_name, s, fd_config.ds, fd_config.ensemble,
                                       fd_config.n, fd_config.n0, fd_config.seed), jobs)

    return pd.DataFrame({
        "s": [k[0] for k in keys],
        "n": [k[1] for k in keys],
        "rep": [k[2] for k in keys],
        "lss_estimate": lss,
        "fd_estimate": [fd[k[0]].estimate for k in keys],
        "fd_ci3": [fd[k[0]].ci3 for k in keys],
    })


# --- Convergence ---

@dataclass(frozen=True)
class ConvergenceStudy:
    rows: pd.DataFrame  # n, rep, abs_error
    truth: float
    s: float
    trim: int
    slopes: dict = field(default_factory=dict)

    def means(self):
        out = self.rows.groupby("n", sort=True)["abs_error"].mean().reset_index()
        return out.rename(columns={"abs_error": "mean_abs_error"})

    def slope_over(self, n_min, n_max):
        means = self.means()
        sel = means[(means["n"] >= n_min) & (means["n"] <= n_max)]
        return fit_loglog_slope(sel["n"], sel["mean_abs_error"])[0]

    def summary(self):
        means = self.means()
        return {
            "s": float(self.s),
            "truth": float(self.truth),
            "trim": int(self.trim),
            "mean_abs_error": {str(k): float(e) for k, e in
                               zip(means["n"], means["mean_abs_error"])},
            # a half with a single length has no slope; null keeps the JSON valid
            "slopes": {k: float(v) if np.isfinite(v) else None for k, v in self.slopes.items()},
        }


def _halves(n_values):
    half = (len(n_values) + 1) // 2
    return n_values[:half], n_values[len(n_values) // 2:]


def convergence_study(s, n_list, reps, truth, trim=0, sys: MapSystem = None,
                      n0=None, seed=0, jobs=1) -> ConvergenceStudy:
    """
    Mean |estimate - truth| per trajectory length. Leave trim at 0 to see both
    error stages: the boundary part of the tangent error gives the O(1/n) decay
    at small n, and trimming removes it, leaving only the O(n^-1/2) sampling
    error. The truth value itself should come from trimmed runs (estimate_truth).
    """
    n_values = sorted(int(k) for k in n_list)
    if reps < 1:
        raise ConfigError(f"reps must be at least 1, got {reps}")
    sys = get_map("solenoid") if sys is None else sys

    keys = [(k, r) for k in n_values for r in range(reps)]
    configs = [RunConfig(sys.name, s, k, n0, seed + r, trim) for k, r in keys]
    estimates = np.asarray(_seeded_runs(sys, configs, jobs))

    rows = pd.DataFrame({
        "n": [k for k, _ in keys],
        "rep": [r for _, r in keys],
        "abs_error": np.abs(estimates - truth),
    })
    means = rows.groupby("n", sort=True)["abs_error"].mean()
    small, large = _halves(n_values)
    slopes = {}
    for label, group in (("small_n", small), ("large_n", large), ("all", n_values)):
        sel = means.loc[group]
        slopes[label] = fit_loglog_slope(sel.index, sel.values)[0]
    logger.info("convergence slopes: %s", slopes)
    return ConvergenceStudy(rows=rows, truth=truth, s=s, trim=trim, slopes=slopes)


# --- Reference value ---

@dataclass(frozen=True)
class TruthEstimate:
    mean: float
    sigma: float
    reps: int
    n: int
    trim: int

    @property
    def ci3(self):
        return 3.0 * self.sigma

    def to_dict(self):
        return {"mean": self.mean, "sigma": self.sigma, "ci3": self.ci3,
                "reps": self.reps, "n": self.n, "trim": self.trim}


def estimate_truth(s, n, reps, trim=20, sys: MapSystem = None, n0=None, seed=0, jobs=1) -> TruthEstimate:
    if reps < 2:
        raise ConfigError(f"reps must be at least 2 to estimate a spread, got {reps}")
    sys = get_map("solenoid") if sys is None else sys
    configs = [RunConfig(sys.name, s, n, n0, seed + r, trim) for r in range(reps)]
    estimates = np.asarray(_seeded_runs(sys, configs, jobs))
    sigma = float(np.std(estimates, ddof=1) / np.sqrt(reps))
    return TruthEstimate(mean=float(np.mean(estimates)), sigma=sigma, reps=reps, n=n, trim=trim)


# --- Attractor sample ---

def attractor_points(s, n, sys: MapSystem = None, n0=None, seed=0) -> pd.DataFrame:
    if n < 1:
        raise ConfigError(f"n must be positive, got {n}")
    sys = get_map("solenoid") if sys is None else sys
    n0 = sys.default_spinup if n0 is None else n0
    trajectory = sample_trajectory(sys, s, n, n0, seed)
    return pd.DataFrame(trajectory.states, columns=list(sys.coordinate_names))

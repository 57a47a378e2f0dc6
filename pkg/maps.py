"""
Bundled map systems: the Smale-Williams solenoid benchmark and two controls
whose parameter sensitivity is known in closed form.

Maps are selected by name ("solenoid", "affine", "cat") through `get_map`.
"""
import logging
from dataclasses import dataclass

import numpy as np

from dynsys import DegenerateRadius, MapSystem, ObjectiveGradient, UnknownMap

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


# --- Solenoid ---
# State is stored in Cartesian coordinates; the update itself is written in
# cylindrical (r, theta, z):
#   r' = s + (r - s)/4 + cos(theta)/2,  theta' = 2 theta,  z' = z/4 + sin(theta)/2

def _cylindrical(u):
    u = np.asarray(u, dtype=float)
    x, y, z = u[..., 0], u[..., 1], u[..., 2]
    r = np.hypot(x, y)
    if np.any(r == 0):
        raise DegenerateRadius("cylindrical angle undefined at r = 0")
    return r, np.arctan2(y, x), z


def _cartesian(r, theta, z):
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=-1)


def _cyl_to_cart_jacobian(r, theta):
    """d(x, y, z) / d(r, theta, z)"""
    c, s = np.cos(theta), np.sin(theta)
    T = np.zeros(np.shape(r) + (3, 3))
    T[..., 0, 0] = c
    T[..., 0, 1] = -r * s
    T[..., 1, 0] = s
    T[..., 1, 1] = r * c
    T[..., 2, 2] = 1.0
    return T


def _cart_to_cyl_jacobian(r, theta):
    c, s = np.cos(theta), np.sin(theta)
    T = np.zeros(np.shape(r) + (3, 3))
    T[..., 0, 0] = c
    T[..., 0, 1] = s
    T[..., 1, 0] = -s / r
    T[..., 1, 1] = c / r
    T[..., 2, 2] = 1.0
    return T


def _solenoid_cyl_update(r, theta, z, s):
    r1 = s + (r - s) / 4 + np.cos(theta) / 2
    # only cos/sin of theta' are consumed; reduce to keep coordinates bounded
    theta1 = np.mod(2 * theta, TWO_PI)
    z1 = z / 4 + np.sin(theta) / 2
    return r1, theta1, z1


def solenoid_step(u, s):
    r, theta, z = _cylindrical(u)
    return _cartesian(*_solenoid_cyl_update(r, theta, z, s))


def solenoid_jacobian(u, s):
    """Cartesian Jacobian T(u') . Df_cyl . T(u)^-1"""
    r, theta, z = _cylindrical(u)
    r1, theta1, _ = _solenoid_cyl_update(r, theta, z, s)

    Df_cyl = np.zeros(np.shape(r) + (3, 3))
    Df_cyl[..., 0, 0] = 0.25
    Df_cyl[..., 0, 1] = -np.sin(theta) / 2
    Df_cyl[..., 1, 1] = 2.0
    Df_cyl[..., 2, 1] = np.cos(theta) / 2
    Df_cyl[..., 2, 2] = 0.25

    return _cyl_to_cart_jacobian(r1, theta1) @ Df_cyl @ _cart_to_cyl_jacobian(r, theta)


def solenoid_param_deriv(u, s):
    # d_s f in cylindrical coordinates is (1 - 1/4, 0, 0)
    r, theta, z = _cylindrical(u)
    _, theta1, _ = _solenoid_cyl_update(r, theta, z, s)
    return 0.75 * np.stack([np.cos(theta1), np.sin(theta1), np.zeros_like(theta1)], axis=-1)


def solenoid_objective(u, s):
    """J = sqrt(r^2 + z^2), which is the Euclidean norm of the Cartesian state."""
    J = np.linalg.norm(np.asarray(u, dtype=float), axis=-1)
    if np.any(J == 0):
        raise DegenerateRadius("objective gradient undefined at the origin")
    return J


def solenoid_objective_grad(u, s):
    u = np.asarray(u, dtype=float)
    J = solenoid_objective(u, s)
    # (r/J) dr/d(x,y,z) + (z/J) e_z collapses to u/J
    return ObjectiveGradient(dJ_du=u / J[..., None], dJ_ds=np.zeros_like(J))


@dataclass(frozen=True)
class SolenoidMap(MapSystem):
    name = "solenoid"
    dimension = 3
    coordinate_names = ("x", "y", "z")
    default_spinup = 1000

    def step(self, u, s):
        return solenoid_step(u, s)

    def jacobian(self, u, s):
        return solenoid_jacobian(u, s)

    def param_deriv(self, u, s):
        return solenoid_param_deriv(u, s)

    def objective(self, u, s):
        return solenoid_objective(u, s)

    def objective_grad(self, u, s):
        return solenoid_objective_grad(u, s)

    def sample_initial_state(self, rng, s):
        r = rng.uniform(max(s - 1.0, 0.0), s + 1.0)
        theta = rng.uniform(0.0, TWO_PI)
        z = rng.uniform(-1.0, 1.0)
        return _cartesian(r, theta, z)

    def analytic_shadow_direction(self, u, s):
        # unit radial vector: the constant cylindrical sequence (1, 0, 0)
        r, theta, _ = _cylindrical(u)
        return np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=-1)


# --- Controls ---

@dataclass(frozen=True)
class AffineContractionMap(MapSystem):
    """u' = a u + s with J = u; fixed point s/(1-a), d<J>/ds = 1/(1-a)."""

    a: float = 0.5

    name = "affine"
    dimension = 1
    coordinate_names = ("u",)
    default_spinup = 60

    def __post_init__(self):
        if not abs(self.a) < 1:
            raise ValueError(f"contraction factor must satisfy |a| < 1, got {self.a}")

    @property
    def fixed_point_sensitivity(self):
        return 1.0 / (1.0 - self.a)

    def step(self, u, s):
        return self.a * np.asarray(u, dtype=float) + s

    def jacobian(self, u, s):
        u = np.asarray(u, dtype=float)
        return np.full(u.shape[:-1] + (1, 1), self.a)

    def param_deriv(self, u, s):
        return np.ones_like(np.asarray(u, dtype=float))

    def objective(self, u, s):
        return np.asarray(u, dtype=float)[..., 0]

    def objective_grad(self, u, s):
        u = np.asarray(u, dtype=float)
        return ObjectiveGradient(dJ_du=np.ones_like(u), dJ_ds=np.zeros(u.shape[:-1]))

    def sample_initial_state(self, rng, s):
        center = s * self.fixed_point_sensitivity
        return np.array([rng.uniform(center - 1.0, center + 1.0)])

    def analytic_shadow_direction(self, u, s):
        u = np.asarray(u, dtype=float)
        return np.full(u.shape, self.fixed_point_sensitivity)


# Integer matrix of the cat map; the mod-1 wrap is not differentiated.
CAT_MATRIX = np.array([[2.0, 1.0], [1.0, 1.0]])


@dataclass(frozen=True)
class ShiftedCatMap(MapSystem):
    """
    (x, y) -> (2x + y + s mod 1, x + y mod 1) with J = cos(2 pi x).

    Lebesgue measure is invariant for every s, so d<J>/ds = 0.
    """

    name = "cat"
    dimension = 2
    coordinate_names = ("x", "y")
    default_spinup = 100

    def step(self, u, s):
        u = np.asarray(u, dtype=float)
        x, y = u[..., 0], u[..., 1]
        return np.stack([np.mod(2 * x + y + s, 1.0), np.mod(x + y, 1.0)], axis=-1)

    def jacobian(self, u, s):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(CAT_MATRIX, u.shape[:-1] + (2, 2)).copy()

    def param_deriv(self, u, s):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        out[..., 0] = 1.0
        return out

    def objective(self, u, s):
        return np.cos(TWO_PI * np.asarray(u, dtype=float)[..., 0])

    def objective_grad(self, u, s):
        u = np.asarray(u, dtype=float)
        dJ = np.zeros_like(u)
        dJ[..., 0] = -TWO_PI * np.sin(TWO_PI * u[..., 0])
        return ObjectiveGradient(dJ_du=dJ, dJ_ds=np.zeros(u.shape[:-1]))

    def sample_initial_state(self, rng, s):
        return rng.uniform(0.0, 1.0, size=2)

    def analytic_shadow_direction(self, u, s):
        # constant bounded solution of v = A v + (1, 0): v = (I - A)^-1 (1, 0)
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        out[..., 1] = -1.0
        return out

    def displacement(self, a, b):
        d = np.asarray(a) - np.asarray(b)
        return d - np.round(d)


MAPS = {
    "solenoid": SolenoidMap,
    "affine": AffineContractionMap,
    "cat": ShiftedCatMap,
}


def get_map(name, **options):
    try:
        factory = MAPS[name]
    except KeyError:
        raise UnknownMap(name, MAPS) from None
    return factory(**options)

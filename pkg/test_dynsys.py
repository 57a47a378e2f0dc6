from dataclasses import dataclass

import numpy as np
import pytest

from conftest import cylindrical_point, solenoid_attractor_points
from dynsys import ConfigError, NonFiniteState, verify_derivatives
from maps import AffineContractionMap, ShiftedCatMap, SolenoidMap


@dataclass(frozen=True)
class PerturbedSolenoid(SolenoidMap):
    """Solenoid with one Jacobian entry knocked off by 1e-2."""

    def jacobian(self, u, s):
        J = super().jacobian(u, s).copy()
        J[..., 0, 1] += 1e-2
        return J


@dataclass(frozen=True)
class ExplodingMap(AffineContractionMap):
    def objective(self, u, s):
        return np.full(np.shape(u)[:-1], np.nan)


def test_affine_derivatives_exact_on_dyadic_grid(affine):
    report = verify_derivatives(affine, np.array([0.5]), 0.25, h=2.0 ** -20)
    assert report.worst <= 1e-12


def test_affine_derivatives_generic_point(affine):
    report = verify_derivatives(affine, np.array([1.7]), 1.3, h=1e-6)
    assert report.worst <= 1e-8


def test_solenoid_derivatives_at_reference_point(solenoid):
    report = verify_derivatives(solenoid, np.array([1.5, 0.0, 0.0]), 1.0, h=1e-6)
    assert report.max_rel_err_jac <= 1e-5
    assert report.max_rel_err_paramderiv <= 1e-5
    assert report.max_rel_err_objgrad <= 1e-5


def test_injected_jacobian_fault_is_detected():
    report = verify_derivatives(PerturbedSolenoid(), cylindrical_point(1.2, 0.7, 0.1), 1.0, h=1e-6)
    assert report.max_rel_err_jac >= 1e-3
    assert report.max_rel_err_paramderiv <= 1e-5


def test_solenoid_derivatives_on_attractor(solenoid):
    for u in solenoid_attractor_points(100):
        assert verify_derivatives(solenoid, u, 1.0, h=1e-6).worst <= 1e-5


def test_cat_derivatives_on_torus(cat, rng):
    for u in rng.uniform(0.0, 1.0, size=(100, 2)):
        assert verify_derivatives(cat, u, 0.3, h=1e-6).worst <= 1e-5


def test_cat_derivatives_across_the_wrap(cat):
    # 2x + y + s lands within h of an integer
    report = verify_derivatives(cat, np.array([0.25, 0.2]), 0.3 - 1e-7, h=1e-6)
    assert report.worst <= 1e-5


def test_affine_derivatives_random(affine, rng):
    for u in rng.uniform(-5.0, 5.0, size=(100, 1)):
        assert verify_derivatives(affine, u, 1.0, h=1e-6).worst <= 1e-5


def test_nonpositive_step_rejected(affine):
    with pytest.raises(ConfigError):
        verify_derivatives(affine, np.array([0.0]), 1.0, h=0.0)


def test_nonfinite_evaluation_raises():
    with pytest.raises(NonFiniteState):
        verify_derivatives(ExplodingMap(), np.array([1.0]), 1.0)
    with pytest.raises(NonFiniteState):
        verify_derivatives(SolenoidMap(), np.array([np.inf, 0.0, 0.0]), 1.0)


@pytest.mark.parametrize("sys", [SolenoidMap(), AffineContractionMap(), ShiftedCatMap()])
def test_step_is_pure(sys, rng):
    u = sys.sample_initial_state(rng, 1.0)
    first = sys.step(u, 1.0)
    second = sys.step(u.copy(), 1.0)
    assert first.tobytes() == second.tobytes()
    assert first.shape == (sys.dimension,)

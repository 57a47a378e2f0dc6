import numpy as np
import pytest

from dynsys import DimensionMismatch, NotPositiveDefinite, SizeLimitExceeded
from lss_solver import (
    BlockTridiagonalSystem,
    LssProblem,
    assemble,
    constraint_residual,
    recover_tangent,
    solve_banded,
    solve_block_tridiagonal,
    solve_dense_oracle,
    solve_lss,
)


def random_problem(rng, n, m, scale=0.8):
    A = rng.normal(size=(n - 1, m, m)) * scale / np.sqrt(m)
    b = rng.normal(size=(n - 1, m))
    return LssProblem(jacobians=A, param_derivs=b)


def homogeneous_tangent(problem, h1):
    h = np.empty((problem.n, problem.m))
    h[0] = h1
    for i in range(problem.n - 1):
        h[i + 1] = problem.jacobians[i] @ h[i]
    return h


def random_problems(count=50, seed=7):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield random_problem(rng, int(rng.integers(2, 51)), int(rng.integers(1, 5)))


@pytest.fixture
def scalar_problem():
    # min (v1^2 + v2^2)/2 s.t. v2 = 2 v1 + 1  ->  v = (-2/5, 1/5)
    return LssProblem(jacobians=np.array([[[2.0]]]), param_derivs=np.array([[1.0]]))


class TestAssemble:

    def test_scalar_problem(self, scalar_problem):
        system = assemble(scalar_problem)
        np.testing.assert_allclose(system.diag, [[[5.0]]])
        assert system.lower.shape == (0, 1, 1)
        np.testing.assert_allclose(system.rhs, [[1.0]])

    def test_zero_jacobians_give_identity(self, rng):
        b = rng.normal(size=(9, 3))
        problem = LssProblem(jacobians=np.zeros((9, 3, 3)), param_derivs=b)
        system = assemble(problem)
        np.testing.assert_array_equal(system.to_dense(), np.eye(27))
        w = solve_block_tridiagonal(system)
        np.testing.assert_allclose(w, b, atol=1e-15)
        solution = recover_tangent(problem, w)
        np.testing.assert_array_equal(solution.v[0], np.zeros(3))
        np.testing.assert_allclose(solution.v[1:], b, atol=1e-15)

    def test_assembled_system_is_symmetric_positive_definite(self, rng):
        system = assemble(random_problem(rng, 10, 3))
        dense = system.to_dense()
        np.testing.assert_array_equal(dense, dense.T)
        assert np.all(np.diag(np.linalg.cholesky(dense)) > 0)

    def test_schur_system_matches_dense_kkt(self, rng):
        problem = random_problem(rng, 10, 3)
        w = np.linalg.solve(assemble(problem).to_dense(), problem.param_derivs.ravel())
        expected = solve_dense_oracle(problem)
        np.testing.assert_allclose(w.reshape(9, 3), expected.w, atol=1e-10)

    def test_bad_shapes(self):
        with pytest.raises(DimensionMismatch):
            LssProblem(jacobians=np.zeros((4, 2, 3)), param_derivs=np.zeros((4, 2)))
        with pytest.raises(DimensionMismatch):
            LssProblem(jacobians=np.zeros((4, 2, 2)), param_derivs=np.zeros((3, 2)))
        with pytest.raises(DimensionMismatch):
            LssProblem(jacobians=np.zeros((0, 2, 2)), param_derivs=np.zeros((0, 2)))


class TestBlockSolve:

    def test_scalar_problem(self, scalar_problem):
        w = solve_block_tridiagonal(assemble(scalar_problem))
        np.testing.assert_allclose(w, [[0.2]], rtol=1e-15)

    def test_identity_diagonal(self, rng):
        b = rng.normal(size=(6, 2))
        system = BlockTridiagonalSystem(diag=np.broadcast_to(np.eye(2), (6, 2, 2)).copy(),
                                        lower=np.zeros((5, 2, 2)), rhs=b)
        np.testing.assert_allclose(solve_block_tridiagonal(system), b, atol=1e-15)

    def test_matches_dense_factorization(self, rng):
        system = assemble(random_problem(rng, 51, 3))
        w = solve_block_tridiagonal(system)
        dense = np.linalg.solve(system.to_dense(), system.rhs.ravel()).reshape(w.shape)
        np.testing.assert_allclose(w, dense, atol=1e-10 * (1 + np.max(np.abs(dense))))
        assert system.residual(w) <= 1e-10 * (1 + np.max(np.abs(system.rhs)))

    def test_banded_path_agrees(self, rng):
        for m in (1, 2, 3, 4):
            system = assemble(random_problem(rng, 40, m))
            np.testing.assert_allclose(solve_banded(system), solve_block_tridiagonal(system), atol=1e-10)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_banded_single_block(self, rng, m):
        system = assemble(random_problem(rng, 2, m))
        assert system.blocks == 1
        np.testing.assert_allclose(solve_banded(system), solve_block_tridiagonal(system), atol=1e-14)

    def test_indefinite_pivot(self):
        system = BlockTridiagonalSystem(diag=np.array([np.eye(2), -np.eye(2)]),
                                        lower=np.zeros((1, 2, 2)), rhs=np.ones((2, 2)))
        with pytest.raises(NotPositiveDefinite, match="pivot block 1"):
            solve_block_tridiagonal(system)
        with pytest.raises(NotPositiveDefinite):
            solve_banded(system)


class TestTangentSolution:

    def test_scalar_problem(self, scalar_problem):
        for solution in (solve_lss(scalar_problem), solve_dense_oracle(scalar_problem),
                         solve_lss(scalar_problem, solver="banded")):
            np.testing.assert_allclose(solution.v.ravel(), [-0.4, 0.2], atol=1e-14)

    def test_boundary_multipliers_are_zero(self, rng):
        solution = solve_lss(random_problem(rng, 12, 2))
        full = solution.multipliers
        assert full.shape == (13, 2)
        assert np.all(full[0] == 0.0) and np.all(full[-1] == 0.0)

    def test_zero_forcing(self, rng):
        A = rng.normal(size=(19, 3, 3))
        problem = LssProblem(jacobians=A, param_derivs=np.zeros((19, 3)))
        for solution in (solve_lss(problem), solve_dense_oracle(problem)):
            np.testing.assert_array_equal(solution.v, np.zeros((20, 3)))
            assert solution.objective_value == 0.0

    def test_block_path_matches_dense_oracle(self):
        for problem in random_problems():
            block = solve_lss(problem)
            dense = solve_dense_oracle(problem)
            scale = 1 + np.max(np.abs(dense.v))
            np.testing.assert_allclose(block.v, dense.v, atol=1e-10 * scale)
            np.testing.assert_allclose(block.w, dense.w, atol=1e-10 * (1 + np.max(np.abs(dense.w))))

    def test_feasibility(self):
        for problem in random_problems(seed=8):
            solution = solve_lss(problem)
            bound = 1e-9 * (1 + np.max(np.linalg.norm(solution.v, axis=1)))
            assert solution.constraint_residual <= bound
            assert constraint_residual(problem, solution.v) == solution.constraint_residual

    def test_optimality_orthogonality(self):
        rng = np.random.default_rng(99)
        for problem in random_problems(seed=9):
            v = solve_lss(problem).v
            for _ in range(10):
                h = homogeneous_tangent(problem, rng.normal(size=problem.m))
                scale = np.sum(np.linalg.norm(v, axis=1) * np.linalg.norm(h, axis=1))
                assert abs(np.sum(v * h)) <= 1e-8 * scale

    def test_minimality(self, rng):
        problem = random_problem(rng, 30, 3)
        solution = solve_lss(problem)
        for _ in range(20):
            h = homogeneous_tangent(problem, rng.normal(size=3))
            h /= np.max(np.linalg.norm(h, axis=1))
            perturbed = solution.v + 1e-3 * h
            assert 0.5 * np.sum(perturbed ** 2) >= solution.objective_value - 1e-12

    def test_recover_rejects_wrong_shape(self, scalar_problem):
        with pytest.raises(DimensionMismatch):
            recover_tangent(scalar_problem, np.zeros((2, 1)))

    def test_unknown_solver(self, scalar_problem):
        with pytest.raises(ValueError):
            solve_lss(scalar_problem, solver="krylov")

    def test_dense_oracle_size_guard(self, rng):
        with pytest.raises(SizeLimitExceeded):
            solve_dense_oracle(random_problem(rng, 700, 3))
        solve_dense_oracle(random_problem(rng, 5, 2), limit=10)
        with pytest.raises(SizeLimitExceeded):
            solve_dense_oracle(random_problem(rng, 6, 2), limit=10)

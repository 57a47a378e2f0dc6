"""
Least squares shadowing solver.

Solves

    min 1/2 sum_i v_i^T v_i   s.t.  v_{i+1} = A_i v_i + b_i,  i = 1..n-1

with A_i = Df(u_i, s) and b_i = d_s f(u_i, s). Stationarity gives
v_i = w_{i-1/2} - A_i^T w_{i+1/2} (with w_{1/2} = w_{n+1/2} = 0), and
substituting into the constraints leaves a symmetric positive definite
block-tridiagonal system in the interior multipliers:

    -A_i w_{i-1/2} + (I + A_i A_i^T) w_{i+1/2} - A_{i+1}^T w_{i+3/2} = b_i

In the arrays below w[k] stands for w_{k+3/2}, k = 0..n-2.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

import settings
from dynsys import (
    DimensionMismatch,
    InfeasibleSolution,
    NonFiniteState,
    NotPositiveDefinite,
    SizeLimitExceeded,
)

logger = logging.getLogger(__name__)

SOLVERS = ("thomas", "banded")


@dataclass(frozen=True)
class LssProblem:
    jacobians: np.ndarray      # (n-1, m, m)
    param_derivs: np.ndarray   # (n-1, m)

    def __post_init__(self):
        A = np.asarray(self.jacobians, dtype=float)
        b = np.asarray(self.param_derivs, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise DimensionMismatch(f"jacobians must have shape (n-1, m, m), got {A.shape}")
        if b.shape != A.shape[:2]:
            raise DimensionMismatch(
                f"param_derivs shape {b.shape} does not match jacobians {A.shape}")
        if A.shape[0] < 1:
            raise DimensionMismatch("trajectory length n must be at least 2")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise NonFiniteState("non-finite entries in the linearized problem")
        object.__setattr__(self, "jacobians", A)
        object.__setattr__(self, "param_derivs", b)

    @property
    def n(self):
        return self.jacobians.shape[0] + 1

    @property
    def m(self):
        return self.jacobians.shape[1]


@dataclass(frozen=True)
class BlockTridiagonalSystem:
    """Symmetric block-tridiagonal matrix; block (k+1, k) is lower[k], block (k, k+1) its transpose."""

    diag: np.ndarray   # (K, m, m)
    lower: np.ndarray  # (K-1, m, m)
    rhs: np.ndarray    # (K, m)

    @property
    def blocks(self):
        return self.diag.shape[0]

    @property
    def block_size(self):
        return self.diag.shape[1]

    def matvec(self, w):
        w = np.asarray(w, dtype=float)
        out = np.einsum("kij,kj->ki", self.diag, w)
        out[1:] += np.einsum("kij,kj->ki", self.lower, w[:-1])
        out[:-1] += np.einsum("kji,kj->ki", self.lower, w[1:])
        return out

    def residual(self, w):
        return float(np.max(np.abs(self.matvec(w) - self.rhs)))

    def to_dense(self):
        K, m = self.blocks, self.block_size
        M = np.zeros((K * m, K * m))
        for k in range(K):
            M[k * m:(k + 1) * m, k * m:(k + 1) * m] = self.diag[k]
        for k in range(K - 1):
            M[(k + 1) * m:(k + 2) * m, k * m:(k + 1) * m] = self.lower[k]
            M[k * m:(k + 1) * m, (k + 1) * m:(k + 2) * m] = self.lower[k].T
        return M


@dataclass(frozen=True)
class TangentSolution:
    v: np.ndarray   # (n, m)
    w: np.ndarray   # (n-1, m), interior multipliers
    constraint_residual: float
    objective_value: float
    solver: str = field(default="thomas", compare=False)

    @property
    def multipliers(self):
        """All multipliers w_{1/2} .. w_{n+1/2}, boundary values zero."""
        m = self.w.shape[1]
        return np.concatenate([np.zeros((1, m)), self.w, np.zeros((1, m))])


def assemble(problem: LssProblem) -> BlockTridiagonalSystem:
    A = problem.jacobians
    eye = np.eye(problem.m)
    diag = eye + np.einsum("kij,klj->kil", A, A)
    return BlockTridiagonalSystem(diag=diag, lower=-A[1:], rhs=problem.param_derivs.copy())


def solve_block_tridiagonal(system: BlockTridiagonalSystem) -> np.ndarray:
    """Block Thomas sweep with a Cholesky factorization of every pivot block. O(K m^3)."""
    K, m = system.blocks, system.block_size
    gains = np.empty((max(K - 1, 0), m, m))
    z = np.empty((K, m))

    pivot, y = system.diag[0], system.rhs[0]
    for k in range(K):
        if k > 0:
            L = system.lower[k - 1]
            pivot = system.diag[k] - L @ gains[k - 1]
            y = system.rhs[k] - L @ z[k - 1]
        try:
            factor = scipy.linalg.cho_factor(pivot, lower=True)
        except np.linalg.LinAlgError as e:
            raise NotPositiveDefinite(f"pivot block {k} of {K} failed Cholesky: {e}") from e
        z[k] = scipy.linalg.cho_solve(factor, y)
        if k < K - 1:
            gains[k] = scipy.linalg.cho_solve(factor, system.lower[k].T)

    w = np.empty_like(z)
    w[-1] = z[-1]
    for k in range(K - 2, -1, -1):
        w[k] = z[k] - gains[k] @ w[k + 1]
    return w


def to_banded(system: BlockTridiagonalSystem) -> np.ndarray:
    """Lower banded storage (2m rows) for LAPACK's symmetric band routines."""
    K, m = system.blocks, system.block_size
    ab = np.zeros((2 * m, K * m))
    for p in range(m):
        for q in range(p + 1):
            ab[p - q, q::m] = system.diag[:, p, q]
        for q in range(m):
            ab[m + p - q, q:(K - 1) * m:m] = system.lower[:, p, q]
    return ab


def solve_banded(system: BlockTridiagonalSystem) -> np.ndarray:
    """Same system through LAPACK's banded Cholesky (bandwidth 2m - 1)."""
    if system.blocks == 1:
        # no off-diagonal band; scipy's two-row tridiagonal path rejects it
        try:
            factor = scipy.linalg.cho_factor(system.diag[0], lower=True)
        except np.linalg.LinAlgError as e:
            raise NotPositiveDefinite(f"banded Cholesky failed: {e}") from e
        return scipy.linalg.cho_solve(factor, system.rhs[0])[None, :]
    try:
        w = scipy.linalg.solveh_banded(to_banded(system), system.rhs.ravel(), lower=True)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"banded Cholesky failed: {e}") from e
    return w.reshape(system.rhs.shape)


def _tangent_from_multipliers(problem, w):
    A = problem.jacobians
    v = np.zeros((problem.n, problem.m))
    v[1:] += w
    v[:-1] -= np.einsum("kji,kj->ki", A, w)
    return v


def constraint_residual(problem, v):
    r = v[1:] - np.einsum("kij,kj->ki", problem.jacobians, v[:-1]) - problem.param_derivs
    return float(np.max(np.linalg.norm(r, axis=1)))


def _checked_solution(problem, v, w, solver, rtol=None):
    rtol = settings.constraint_rtol() if rtol is None else rtol
    residual = constraint_residual(problem, v)
    bound = rtol * (1.0 + float(np.max(np.linalg.norm(v, axis=1))))
    if residual > bound:
        raise InfeasibleSolution(
            f"tangent constraint residual {residual:.3e} exceeds {bound:.3e} ({solver})")
    return TangentSolution(v=v, w=w, constraint_residual=residual,
                           objective_value=0.5 * float(np.sum(v * v)), solver=solver)


def recover_tangent(problem: LssProblem, w, rtol=None, solver="thomas") -> TangentSolution:
    w = np.asarray(w, dtype=float)
    if w.shape != (problem.n - 1, problem.m):
        raise DimensionMismatch(f"multipliers shape {w.shape}, expected {(problem.n - 1, problem.m)}")
    return _checked_solution(problem, _tangent_from_multipliers(problem, w), w, solver, rtol)


def solve_lss(problem: LssProblem, solver="thomas", rtol=None) -> TangentSolution:
    system = assemble(problem)
    if solver == "thomas":
        w = solve_block_tridiagonal(system)
    elif solver == "banded":
        w = solve_banded(system)
    else:
        raise ValueError(f"unknown solver '{solver}', expected one of {SOLVERS}")
    logger.debug("LSS solve n=%d m=%d via %s, Schur residual %.3e",
                 problem.n, problem.m, solver, system.residual(w))
    return recover_tangent(problem, w, rtol=rtol, solver=solver)


def solve_dense_oracle(problem: LssProblem, limit=None, rtol=None) -> TangentSolution:
    """
    Solve the same problem from the full KKT system

        [ I  B^T ] [v]   [0]
        [ B   0  ] [l] = [b]

    where B is the stacked constraint operator. Independent check on the
    block path; too expensive for anything but small problems.
    """
    limit = settings.dense_limit() if limit is None else limit
    n, m = problem.n, problem.m
    if n * m > limit:
        raise SizeLimitExceeded(f"dense KKT oracle limited to n*m <= {limit}, got {n * m}")

    nv, nc = n * m, (n - 1) * m
    B = np.zeros((nc, nv))
    for i in range(n - 1):
        B[i * m:(i + 1) * m, i * m:(i + 1) * m] = -problem.jacobians[i]
        B[i * m:(i + 1) * m, (i + 1) * m:(i + 2) * m] = np.eye(m)

    kkt = np.block([[np.eye(nv), B.T], [B, np.zeros((nc, nc))]])
    rhs = np.concatenate([np.zeros(nv), problem.param_derivs.ravel()])
    sol = scipy.linalg.solve(kkt, rhs, assume_a="sym")

    v = sol[:nv].reshape(n, m)
    # v = -B^T l, so the multipliers of the Schur form are w = -l
    w = -sol[nv:].reshape(n - 1, m)
    return _checked_solution(problem, v, w, "dense", rtol)

"""
Acceptance checks for lssmap.
Runs the quick checks by default; --full adds the long solenoid studies
(truth reproduction, two-stage convergence, FD agreement), several minutes.

    python verify_acceptance.py [--full] [--jobs 4]
"""
import argparse
import sys
import tempfile
from pathlib import Path

import numpy as np

import lssmap
from dynsys import verify_derivatives
from experiments import convergence_study, error_profile
from fd_oracle import FdConfig, fd_derivative
from lss_solver import LssProblem, solve_dense_oracle, solve_lss
from maps import MAPS, AffineContractionMap, ShiftedCatMap
from sensitivity import RunConfig, compute_sensitivity, run, sample_trajectory
from settings import SOLENOID_TRUTH_S1
from workers import parallel_map

results = []


def banner(title):
    print("\n" + "=" * 70)
    print(title)
    print("=" * 70)


def check(label, ok, detail=""):
    results.append(ok)
    print(f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" | {detail}" if detail else ""))


def error_profile_shape():
    banner("ERROR PROFILE (n=100, s=2.0)")
    profile = error_profile(100, 2.0, seed=3)
    e = profile.e_norm
    check("minimum at roundoff", e.min() <= 1e-10, f"min {e.min():.2e}")
    check("endpoints order one", e[0] >= 1e-3 and e[-1] >= 1e-3, f"e_1 {e[0]:.2e}, e_n {e[-1]:.2e}")
    check("middle third small", profile.middle_max() <= 1e-6, f"max {profile.middle_max():.2e}")


def analytic_controls():
    banner("ANALYTIC CONTROLS")
    affine = AffineContractionMap(a=0.5)
    # untrimmed runs carry an O(1/n) boundary bias; trim=40 pushes it below roundoff
    result = compute_sensitivity(affine, RunConfig("affine", 1.0, 1000, n0=60, seed=1, trim=40))
    check("affine estimate = 1/(1-a)", abs(result.estimate - 2.0) <= 1e-10, f"{result.estimate!r}")
    result = compute_sensitivity(ShiftedCatMap(), RunConfig("cat", 0.3, 10000, seed=5))
    check("cat estimate ~ 0", abs(result.estimate) <= 0.02, f"{result.estimate:+.5f}")


def solver_oracle():
    banner("SOLVER vs DENSE KKT ORACLE (50 random problems)")
    rng = np.random.default_rng(7)
    worst_v = worst_res = worst_orth = 0.0
    for _ in range(50):
        n, m = int(rng.integers(2, 51)), int(rng.integers(1, 5))
        problem = LssProblem(jacobians=rng.normal(size=(n - 1, m, m)) * 0.8 / np.sqrt(m),
                             param_derivs=rng.normal(size=(n - 1, m)))
        block, dense = solve_lss(problem), solve_dense_oracle(problem)
        worst_v = max(worst_v, np.max(np.abs(block.v - dense.v)) / (1 + np.max(np.abs(dense.v))))
        worst_res = max(worst_res, block.constraint_residual / (1 + np.max(np.linalg.norm(block.v, axis=1))))
        for _ in range(10):
            h = np.empty((n, m))
            h[0] = rng.normal(size=m)
            for i in range(n - 1):
                h[i + 1] = problem.jacobians[i] @ h[i]
            scale = np.sum(np.linalg.norm(block.v, axis=1) * np.linalg.norm(h, axis=1))
            worst_orth = max(worst_orth, abs(np.sum(block.v * h)) / scale)
    check("block path matches oracle", worst_v <= 1e-10, f"{worst_v:.2e}")
    check("constraints satisfied", worst_res <= 1e-9, f"{worst_res:.2e}")
    check("orthogonal to homogeneous tangents", worst_orth <= 1e-8, f"{worst_orth:.2e}")


def derivative_consistency():
    banner("DERIVATIVE CONSISTENCY (100 attractor points per map)")
    for name, cls in MAPS.items():
        sys_ = cls()
        s = 1.0
        states = sample_trajectory(sys_, s, 100, sys_.default_spinup, seed=0).states
        worst = max(verify_derivatives(sys_, u, s).worst for u in states)
        check(f"{name:9s} analytic derivatives", worst <= 1e-5, f"worst rel err {worst:.2e}")


def determinism(jobs):
    banner(f"DETERMINISM (--jobs 1 vs {jobs})")
    with tempfile.TemporaryDirectory() as tmp:
        outputs = []
        for j in (1, jobs):
            path = Path(tmp) / f"sweep-{j}.csv"
            lssmap.main(["sweep", "--map", "cat", "--s-list", "0.1,0.3", "--n-list", "200", "--reps", "2",
                         "--ensemble", "10", "--fd-n", "200", "--seed", "8", "--jobs", str(j), "-o", str(path)])
            outputs.append(path.read_bytes())
    check("sweep CSV byte-identical", outputs[0] == outputs[1])


def truth_reproduction(jobs):
    banner("TRUTH REPRODUCTION (solenoid s=1, n=10000, 16 seeds)")
    configs = [RunConfig("solenoid", 1.0, 10000, n0=1000, seed=seed, trim=20) for seed in range(16)]
    estimates = [r.estimate for r in parallel_map(run, configs, jobs)]
    mean = float(np.mean(estimates))
    check(f"mean within 0.01 of {SOLENOID_TRUTH_S1}", abs(mean - SOLENOID_TRUTH_S1) <= 0.01, f"{mean:.6f}")


def two_stage_convergence(jobs):
    banner("TWO-STAGE CONVERGENCE (16 reps, untrimmed runs against the trimmed truth)")
    small = convergence_study(1.0, [100, 200, 400, 800], 16, SOLENOID_TRUTH_S1, jobs=jobs)
    slope = small.slopes["all"]
    check("slope over n=100..800 in [-1.4, -0.6]", -1.4 <= slope <= -0.6, f"{slope:.3f}")
    large = convergence_study(1.0, [10000, 20000, 40000], 16, SOLENOID_TRUTH_S1, jobs=jobs)
    slope = large.slopes["all"]
    check("slope over n=1e4..4e4 in [-0.8, -0.25]", -0.8 <= slope <= -0.25, f"{slope:.3f}")


def fd_agreement(jobs):
    banner("FD AGREEMENT (ensemble=1000, n=5000, ds=0.05)")
    for s in (0.9, 1.0, 1.1):
        fd = fd_derivative(FdConfig("solenoid", s, ds=0.05, ensemble=1000, n=5000, seed=11), jobs=jobs)
        lss = [run(RunConfig("solenoid", s, 1000, seed=seed)).estimate for seed in range(4)]
        inside = all(abs(x - fd.estimate) <= fd.ci3 for x in lss)
        check(f"s={s}: LSS inside FD band", inside,
              f"FD {fd.estimate:.4f} +/- {fd.ci3:.4f}, LSS {min(lss):.4f}..{max(lss):.4f}")


def main():
    parser = argparse.ArgumentParser(description="lssmap acceptance checks")
    parser.add_argument("--full", action="store_true", help="also run the long solenoid studies")
    parser.add_argument("--jobs", type=int, default=4)
    args = parser.parse_args()

    error_profile_shape()
    analytic_controls()
    solver_oracle()
    derivative_consistency()
    determinism(args.jobs)
    if args.full:
        truth_reproduction(args.jobs)
        two_stage_convergence(args.jobs)
        fd_agreement(args.jobs)

    banner(f"COMPLETE: {sum(results)}/{len(results)} passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())

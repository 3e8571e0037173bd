"""Anisotropy functional J(rho; M) = int |grad rho(z) . (M z)| dz and its minimisation.

Integration by parts gives J >= |tr M| for every admissible kernel, and that
bound is the infimum.  Images of one bump under a single linear map cannot
approach it when M has eigenvalues of both signs (conjugation keeps them), so
the default search family averages the bump along the flow exp(tG).
"""
import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import InputError, ParameterError
from .mollify import KernelProfile, build_kernel

LOWER_BOUND_TOL = 1e-6
MIN_BUDGET = 50


def anisotropy_functional(rho, M):
    """Node quadrature of int |grad rho(z) . (M z)| dz."""
    M = _matrix(M, rho.dim)
    flow = rho.nodes @ M.T
    return float(np.sum(rho.weights * np.abs(np.einsum("ki,ki->k", rho.gradients, flow))))


def trace_lower_bound(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return float(abs(np.trace(M)))


def _matrix(M, dim):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (dim, dim):
        raise InputError(f"M must be {dim}x{dim}")
    if not np.all(np.isfinite(M)):
        raise InputError("M must be finite")
    return M


@dataclass(frozen=True)
class AnisotropyProblem:
    """Search setup.

    ``family`` is ``flow-averaged-bump`` (parameters: the generator G, start
    0) or ``anisotropic-bump`` (parameters: the matrix A, start I).  Points
    whose fitted images have a singular-value ratio above ``guard`` are
    infeasible.
    """

    M: tuple
    family: str = "flow-averaged-bump"
    budget: int = 500
    resolution: int = 24
    levels: int = 64
    taper: float = 0.1
    guard: float = 1e4
    step: float = 1.0
    seed: int = 0
    x0: tuple = None

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] not in (1, 2):
            raise InputError("M must be a square 1x1 or 2x2 matrix")
        if not np.all(np.isfinite(M)):
            raise InputError("M must be finite")
        object.__setattr__(self, "M", tuple(map(tuple, M.tolist())))
        if self.family not in ("flow-averaged-bump", "anisotropic-bump"):
            raise ParameterError(f"unsupported search family {self.family!r}")
        if self.budget < MIN_BUDGET:
            raise InputError(f"budget must be at least {MIN_BUDGET} evaluations")
        if self.guard <= 1:
            raise ParameterError("guard must exceed 1")

    @property
    def dim(self):
        return len(self.M)

    def start(self):
        if self.x0 is not None:
            return np.asarray(self.x0, dtype=float).ravel()
        base = np.zeros(self.dim**2) if self.family == "flow-averaged-bump" else np.eye(self.dim).ravel()
        return base

    def profile(self, x):
        mat = tuple(map(tuple, np.asarray(x, dtype=float).reshape(self.dim, self.dim).tolist()))
        if self.family == "flow-averaged-bump":
            return KernelProfile("flow-averaged-bump", generator=mat, levels=self.levels, taper=self.taper)
        return KernelProfile("anisotropic-bump", matrix=mat)

    def spread(self, x):
        """Largest singular-value ratio over the images the kernel uses."""
        X = np.asarray(x, dtype=float).reshape(self.dim, self.dim)
        if self.family == "anisotropic-bump":
            s = np.linalg.svd(X, compute_uv=False)
            return np.inf if s.min() <= 0 or np.linalg.det(X) <= 0 else s.max() / s.min()
        # exp(tG), |t| <= 1: ratio bounded by exp(2 |G|)
        sv = np.linalg.svd(X, compute_uv=False)
        return float(np.exp(2.0 * sv.max()))


@dataclass
class OptimizationResult:
    params: np.ndarray
    J: float
    gap: float
    baseline: float
    evaluations: int
    trace: list = field(default_factory=list)     # (index, params, J, gap, feasible)
    best_so_far: list = field(default_factory=list)
    violations: int = 0
    infeasible: int = 0


def _evaluate(problem, x, M):
    rho = build_kernel(problem.profile(x), problem.dim, problem.resolution)
    return anisotropy_functional(rho, M)


def optimize_kernel(problem, trace_path=None):
    """Nelder-Mead over the family parameters, seeded and evaluation-only.

    Every evaluated kernel is checked against J >= |tr M| - 1e-6; the count
    of violations is reported.  If more than half of the proposals fall
    beyond the guard the family is declared degenerate and ParameterError is
    raised with the best feasible result attached as ``best``.
    """
    M = np.asarray(problem.M, dtype=float)
    bound = trace_lower_bound(M)
    x0 = problem.start()
    if not problem.spread(x0) <= problem.guard:
        raise ParameterError("starting point lies beyond the guard")
    baseline = anisotropy_functional(build_kernel(KernelProfile(), problem.dim, problem.resolution), M)
    res = OptimizationResult(x0.copy(), np.inf, np.inf, baseline, 0)

    def objective(x):
        if res.evaluations >= problem.budget:
            return np.inf
        res.evaluations += 1
        k = res.evaluations
        if not problem.spread(x) <= problem.guard:
            res.infeasible += 1
            res.trace.append((k, tuple(x), np.inf, np.inf, False))
            res.best_so_far.append(res.J)
            return np.inf
        J = _evaluate(problem, x, M)
        if J < bound - LOWER_BOUND_TOL:
            res.violations += 1
        res.trace.append((k, tuple(x), J, J - bound, True))
        if J < res.J:
            res.J, res.params, res.gap = J, np.array(x, dtype=float), J - bound
        res.best_so_far.append(res.J)
        return J

    rng = np.random.default_rng(problem.seed)
    n = len(x0)
    dirs, _ = np.linalg.qr(rng.standard_normal((n, n)))
    simplex = np.vstack([x0, x0 + problem.step * dirs.T])
    minimize(objective, x0, method="Nelder-Mead",
             options={"initial_simplex": simplex, "maxfev": problem.budget,
                      "xatol": 1e-6, "fatol": 1e-9})
    if trace_path is not None:
        write_trace_csv(res, trace_path)
    if res.infeasible * 2 > res.evaluations:
        raise ParameterError(f"family degenerate: {res.infeasible} of {res.evaluations} "
                             "proposals beyond the guard", best=res)
    return res


def write_trace_csv(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        npar = len(result.params)
        w.writerow(["evaluation"] + [f"p{i}" for i in range(npar)] + ["J", "trace_gap", "feasible"])
        for k, x, J, gap, ok in result.trace:
            w.writerow([k] + [repr(float(v)) for v in x] + [repr(float(J)), repr(float(gap)), int(ok)])
        fh.write("# best " + " ".join(repr(float(v)) for v in result.params)
                 + f" J={result.J!r} gap={result.gap!r} evaluations={result.evaluations}\n")

"""Dual quadratic program of the linear soft-margin SVM.

We maximize the standard dual

    D(a) = sum_i a_i - 1/2 sum_ij y_i y_j a_i a_j K_ij
    s.t.  sum_i a_i y_i = 0,  0 <= a_i <= C

(equivalently minimize 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij) by
sequential minimal optimization with the maximal violating pair as the
working set. ``brute_force_dual`` enumerates every active-set pattern and is
only meant as an independent check on tiny instances.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProblem, DimensionMismatch, InstanceTooLarge, SchemaError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-3
DEFAULT_MAX_PASSES = 1000
ORACLE_MAX_L = 8

_TAU = 1e-12


@dataclass(frozen=True)
class QpProblem:
    gram: np.ndarray
    labels: np.ndarray
    C: float = 1.0

    def __post_init__(self):
        K = np.array(self.gram, dtype=float)
        y = np.array(self.labels)
        if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] == 0:
            raise DimensionMismatch("gram must be a non-empty square matrix")
        if y.shape != (K.shape[0],):
            raise DimensionMismatch(
                f"labels length {y.shape} does not match gram size {K.shape[0]}")
        if not np.all(np.isin(y, (-1, 1))):
            raise SchemaError("labels must be +1 or -1")
        if not (np.isfinite(self.C) and self.C > 0):
            raise SchemaError(f"box constant C must be positive, got {self.C}")
        if not np.all(np.isfinite(K)):
            raise SchemaError("gram matrix has non-finite entries")
        scale = max(1.0, float(np.abs(K).max()))
        if np.abs(K - K.T).max() > 1e-9 * scale:
            raise SchemaError("gram matrix is not symmetric")
        if K.shape[0] <= 2000:
            lo = np.linalg.eigvalsh((K + K.T) / 2).min()
            if lo < -1e-8 * scale * K.shape[0]:
                raise SchemaError(f"gram matrix is not positive semidefinite (min eig {lo:g})")
        K.setflags(write=False)
        y = y.astype(float)
        y.setflags(write=False)
        object.__setattr__(self, "gram", K)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "C", float(self.C))

    @classmethod
    def from_vectors(cls, X, y, C=1.0) -> "QpProblem":
        X = np.asarray(X, dtype=float)
        return cls(X @ X.T, y, C)

    @property
    def size(self) -> int:
        return self.gram.shape[0]

    def hessian(self) -> np.ndarray:
        y = self.labels
        return self.gram * np.outer(y, y)

    def objective(self, alphas) -> float:
        a = np.asarray(alphas, dtype=float)
        return float(a.sum() - 0.5 * a @ self.hessian() @ a)


@dataclass(frozen=True)
class DualSolution:
    alphas: np.ndarray
    offset: float
    objective: float
    iterations: int
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "alphas": [repr(float(a)) for a in self.alphas],
            "offset": repr(float(self.offset)),
            "objective": repr(float(self.objective)),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }


def dump_solution(problem: QpProblem, solution: DualSolution) -> str:
    """JSON debugging dump: alphas, offset, objective and KKT violation."""
    d = solution.to_dict()
    d["kkt_violation"] = repr(kkt_violation(problem, solution))
    d["C"] = repr(problem.C)
    return json.dumps(d, indent=2)


def _offset(v, a, y, C):
    """Offset b from the scores v_i = -y_i * grad_i.

    Mean of v over free multipliers; without free ones, the midpoint of the
    interval of b values consistent with the bound multipliers.
    """
    free = (a > 0) & (a < C)
    if free.any():
        return float(v[free].mean())
    at0 = a <= 0
    lower = (at0 & (y > 0)) | (~at0 & (y < 0))
    upper = ~lower
    lb = v[lower].max() if lower.any() else -np.inf
    ub = v[upper].min() if upper.any() else np.inf
    if np.isfinite(lb) and np.isfinite(ub):
        return float((lb + ub) / 2)
    if np.isfinite(lb):
        return float(lb)
    if np.isfinite(ub):
        return float(ub)
    return 0.0


def solve_dual(problem: QpProblem, tol: float = DEFAULT_TOL,
               max_passes: int = DEFAULT_MAX_PASSES) -> DualSolution:
    """SMO on the dual.

    Stops when the maximal KKT violation of the best pair drops to ``tol``,
    which bounds every per-point KKT residual by ``tol``. One pass is ``l``
    pair updates. If the budget runs out, the last iterate is returned with
    ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_passes < 1:
        raise ValueError("max_passes must be >= 1")
    y = problem.labels
    if np.all(y == y[0]):
        raise DegenerateProblem("all labels are identical; the dual is degenerate")
    C = problem.C
    K = problem.gram
    Q = problem.hessian()
    l = problem.size
    a = np.zeros(l)
    G = -np.ones(l)
    diagK = np.diag(K)
    pos = y > 0
    budget = max_passes * l
    converged = False
    it = 0
    while True:
        v = -y * G
        up = np.where(pos, a < C, a > 0)
        low = np.where(pos, a > 0, a < C)
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        if v[i] - v[j] <= tol:
            converged = True
            break
        if it >= budget:
            break
        it += 1

        ai, aj = a[i], a[j]
        quad = diagK[i] + diagK[j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = _TAU
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        a[i], a[j] = ni, nj
        G += Q[:, i] * (ni - ai) + Q[:, j] * (nj - aj)

    if not converged:
        log.warning("SMO stopped after %d updates with KKT gap %.3g > tol %.3g",
                    it, v[i] - v[j], tol)
    a.setflags(write=False)
    b = _offset(-y * G, a, y, C)
    return DualSolution(a, b, problem.objective(a), it, converged)


def brute_force_dual(problem: QpProblem) -> DualSolution:
    """Exact optimum by enumerating all 3^l patterns (0, free, C) for l <= 8.

    For each pattern the free multipliers and b solve the stationarity
    equations Q_FF a_F + y_F b = 1 - C Q_FU 1 together with the equality
    constraint. Among the patterns whose solution stays inside the box, the
    one with the largest dual objective wins.
    """
    l = problem.size
    if l > ORACLE_MAX_L:
        raise InstanceTooLarge(f"oracle handles l <= {ORACLE_MAX_L}, got {l}")
    C = problem.C
    y = problem.labels
    Q = problem.hessian()
    feas_tol = 1e-10 * max(1.0, C)
    best = None
    for pattern in itertools.product((0, 1, 2), repeat=l):
        pat = np.array(pattern)
        F = np.flatnonzero(pat == 1)
        U = np.flatnonzero(pat == 2)
        a = np.zeros(l)
        a[U] = C
        b = None
        if F.size:
            n = F.size
            A = np.zeros((n + 1, n + 1))
            A[:n, :n] = Q[np.ix_(F, F)]
            A[:n, n] = y[F]
            A[n, :n] = y[F]
            rhs = np.empty(n + 1)
            rhs[:n] = 1.0 - C * Q[np.ix_(F, U)].sum(axis=1)
            rhs[n] = -C * y[U].sum()
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if np.abs(A @ sol - rhs).max() > 1e-9 * max(1.0, np.abs(rhs).max()):
                continue
            aF = sol[:n]
            if aF.min() < -feas_tol or aF.max() > C + feas_tol:
                continue
            aF = np.where(aF <= feas_tol, 0.0, aF)
            a[F] = np.where(aF >= C - feas_tol, C, aF)
            if ((a[F] > 0) & (a[F] < C)).any():
                b = float(sol[n])
        elif abs(y @ a) > feas_tol:
            continue
        obj = problem.objective(a)
        if best is None or obj > best[0] + 1e-13 * max(1.0, abs(obj)):
            best = (obj, a, b)
    obj, a, b = best  # the all-zero pattern is always feasible
    if b is None:
        # every multiplier sits on a bound: b is only pinned to an interval
        b = _offset(-y * (Q @ a - 1.0), a, y, C)
    a.setflags(write=False)
    return DualSolution(a, b, obj, 0, True)


def decision_scores(problem: QpProblem, solution: DualSolution) -> np.ndarray:
    """f(x_i) = sum_j a_j y_j K_ji + b for every training point."""
    a = np.asarray(solution.alphas, dtype=float)
    return problem.gram @ (a * problem.labels) + solution.offset


def kkt_residuals(problem: QpProblem, solution: DualSolution) -> np.ndarray:
    a = np.asarray(solution.alphas, dtype=float)
    if a.shape != (problem.size,):
        raise DimensionMismatch(
            f"solution has {a.size} multipliers, problem has {problem.size}")
    eps = 1e-12 * problem.C
    r = problem.labels * decision_scores(problem, solution) - 1.0
    at0 = a <= eps
    atC = a >= problem.C - eps
    res = np.abs(r)
    res[at0] = np.maximum(0.0, -r[at0])
    res[atC & ~at0] = np.maximum(0.0, r[atC & ~at0])
    return res


def kkt_violation(problem: QpProblem, solution: DualSolution) -> float:
    """Largest KKT residual over all points; 0 means exact optimality.

    a_i = 0 needs y_i f(x_i) >= 1, 0 < a_i < C needs y_i f(x_i) = 1 and
    a_i = C needs y_i f(x_i) <= 1.
    """
    return float(kkt_residuals(problem, solution).max())

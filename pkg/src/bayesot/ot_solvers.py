"""Deterministic optimal transport solvers.

* :func:`exact_ot` -- the transportation linear program.
* :func:`sinkhorn` -- entropy-regularized OT by log-domain Sinkhorn scaling.
* :func:`regularized_ot` -- OT with a separable strictly convex regularizer
  (negative entropy, weighted quadratic, Tsallis) by cyclic Bregman
  projections onto the row and column constraints, carried out on the dual
  potentials.

Atoms with zero mass are removed before solving and the corresponding rows
and columns of the returned plan are exactly zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from . import _pykernels
from ._backend import kernels
from .polytope import TransportPlan, as_measure

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
DEFAULT_SIZE_CAP = 4096
# above this many cells numpy's vectorized exp beats the scalar compiled loop
COMPILED_SINKHORN_MAX_CELLS = 2500


class ConvergenceError(RuntimeError):
    """Raised by callers that require a converged solve."""


@dataclass(frozen=True)
class SolverReport:
    """Outcome of a solve.

    ``objective`` is always the transport cost ``<cost, plan>``;
    ``regularized_objective`` adds the regularization term where one applies.
    ``unique`` is only determined by :func:`exact_ot` and is ``False`` when
    the optimal face contains more than one plan.
    """

    objective: float
    iterations: int
    converged: bool
    residual: float
    regularized_objective: float | None = None
    unique: bool | None = None
    method: str = ""

    def to_dict(self):
        return {
            "method": self.method,
            "objective": self.objective,
            "regularized_objective": self.regularized_objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
            "unique": self.unique,
        }


def as_cost_matrix(cost, shape=None) -> np.ndarray:
    c = np.array(cost, dtype=float)
    if c.ndim != 2:
        raise ValueError("cost matrix must be 2-d")
    if shape is not None and c.shape != tuple(shape):
        raise ValueError(f"cost has shape {c.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost entries must be finite")
    if np.any(c < 0):
        raise ValueError("cost entries must be nonnegative")
    return c


def transport_cost(cost, plan) -> float:
    """``sum_ij plan_ij * cost_ij``."""
    g = np.asarray(getattr(plan, "entries", plan), dtype=float)
    c = np.asarray(cost, dtype=float)
    if c.shape != g.shape:
        raise ValueError(f"cost shape {c.shape} != plan shape {g.shape}")
    return float(np.sum(c * g))


def _support(mu, nu):
    return mu.support, nu.support


def _scatter(sub, rows, cols, shape):
    out = np.zeros(shape)
    out[np.ix_(rows, cols)] = sub
    return out


# -- exact ----------------------------------------------------------------

def exact_ot(cost, mu, nu, *, size_cap: int = DEFAULT_SIZE_CAP, check_unique: bool = True):
    """Solve the transportation LP.

    Only the optimal value is contract-bound; under degeneracy any optimal
    vertex may be returned.  With ``check_unique`` a second LP maximizes the
    mass on the zero cells of the solution over the optimal face, which is
    positive exactly when another optimal plan exists.
    """
    mu, nu = as_measure(mu), as_measure(nu)
    n, m = mu.size, nu.size
    c = as_cost_matrix(cost, (n, m))
    if n * m > size_cap:
        raise ValueError(f"problem size {n * m} exceeds cap {size_cap}")
    rows, cols = _support(mu, nu)
    cs = c[np.ix_(rows, cols)]
    a, b = mu.weights[rows], nu.weights[cols]
    k, l = cs.shape
    a_eq = np.zeros((k + l, k * l))
    for i in range(k):
        a_eq[i, i * l:(i + 1) * l] = 1.0
    for j in range(l):
        a_eq[k + j, j::l] = 1.0
    b_eq = np.concatenate([a, b])
    res = linprog(cs.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise ConvergenceError(f"transportation LP failed: {res.message}")
    x = np.maximum(res.x, 0.0)
    plan = TransportPlan(_scatter(x.reshape(k, l), rows, cols, (n, m)), mu, nu)
    objective = transport_cost(c, plan)

    unique = None
    if check_unique:
        zero = x <= 1e-12
        unique = True
        if np.any(zero):
            slack = 1e-9 * max(1.0, abs(objective))
            face = linprog(
                -zero.astype(float),
                A_ub=cs.ravel()[None, :],
                b_ub=[res.fun + slack],
                A_eq=a_eq,
                b_eq=b_eq,
                bounds=(0, None),
                method="highs",
            )
            unique = not (face.status == 0 and -face.fun > 1e-7)
    report = SolverReport(
        objective=objective,
        iterations=int(getattr(res, "nit", 0) or 0),
        converged=True,
        residual=plan.marginal_residual(),
        regularized_objective=objective,
        unique=unique,
        method="exact",
    )
    return plan, report


# -- entropic ---------------------------------------------------------------

def _entropy(g):
    pos = g > 0
    return float(-np.sum(g[pos] * np.log(g[pos])))


def sinkhorn(cost, mu, nu, epsilon: float, tol: float = DEFAULT_TOL,
             max_iter: int = DEFAULT_MAX_ITER):
    """Minimize ``<plan, cost> - epsilon * H(plan)`` over the coupling polytope.

    Scaling updates are done on log-domain dual potentials, so ``epsilon``
    far below the cost range does not underflow.  Iteration stops once the
    largest marginal violation is at most ``tol``; otherwise the report has
    ``converged=False`` and the current iterate is returned.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    mu, nu = as_measure(mu), as_measure(nu)
    n, m = mu.size, nu.size
    c = as_cost_matrix(cost, (n, m))
    rows, cols = _support(mu, nu)
    cs = np.ascontiguousarray(c[np.ix_(rows, cols)])
    a = np.ascontiguousarray(mu.weights[rows])
    b = np.ascontiguousarray(nu.weights[cols])
    f = np.zeros(len(rows))
    g = np.zeros(len(cols))
    mod = kernels if cs.size <= COMPILED_SINKHORN_MAX_CELLS else _pykernels
    it, residual = mod.sinkhorn_log(cs, a, b, float(epsilon), f, g, float(tol), int(max_iter))
    sub = np.exp((f[:, None] + g[None, :] - cs) / epsilon)
    plan = TransportPlan(_scatter(sub, rows, cols, (n, m)), mu, nu)
    objective = transport_cost(c, plan)
    residual = plan.marginal_residual()
    report = SolverReport(
        objective=objective,
        iterations=int(it),
        converged=residual <= tol,
        residual=residual,
        regularized_objective=objective - epsilon * _entropy(plan.entries),
        method="sinkhorn",
    )
    return plan, report


# -- general Bregman --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Regularizer:
    """A separable strictly convex regularizer ``R(plan) = sum_ij f_ij(plan_ij)``.

    kind ``"entropy"``: ``f(x) = x log x`` (negative entropy).
    kind ``"quadratic"``: ``f(x) = weight/2 * (x - mean)^2``.
    kind ``"tsallis"``: ``f(x) = (x^q - x) / (q - 1)``, so that
    ``R(plan) = (sum plan^q - 1) / (q - 1)`` on the polytope.
    """

    kind: str
    q: float = 0.5
    mean: np.ndarray | float = 0.0
    weight: np.ndarray | float = 1.0

    def __post_init__(self):
        if self.kind not in ("entropy", "quadratic", "tsallis"):
            raise ValueError(f"unsupported regularizer {self.kind!r}")
        if self.kind == "tsallis" and (self.q <= 0 or self.q == 1):
            raise ValueError("tsallis q must be positive and different from 1")
        if self.kind == "quadratic" and np.any(np.asarray(self.weight) <= 0):
            raise ValueError("quadratic weights must be positive")

    @classmethod
    def entropy(cls):
        return cls("entropy")

    @classmethod
    def quadratic(cls, mean=0.0, weight=1.0):
        return cls("quadratic", mean=mean, weight=weight)

    @classmethod
    def tsallis(cls, q=0.5):
        return cls("tsallis", q=q)

    def value(self, plan) -> float:
        x = np.asarray(plan, dtype=float)
        if self.kind == "entropy":
            return -_entropy(x)
        if self.kind == "quadratic":
            return float(0.5 * np.sum(self.weight * (x - self.mean) ** 2))
        return float((np.sum(x ** self.q) - 1.0) / (self.q - 1.0))

    def _dual_map(self, s, mean, weight):
        """Plan entries minimizing ``f(x) - s x`` over ``x >= 0``, and d/ds."""
        if self.kind == "quadratic":
            x = mean + s / weight
            pos = x > 0
            return np.where(pos, x, 0.0), np.where(pos, 1.0 / weight, 0.0)
        q = self.q
        # f'(x) = (q x^(q-1) - 1) / (q - 1); invert on the domain of s
        z = ((q - 1.0) * s + 1.0) / q
        if q < 1:
            # maps s < 1/(1-q) to (0, inf)
            z = np.where(z > 0, z, np.nan)
            x = z ** (1.0 / (q - 1.0))
            dx = x / (z * q)
            return x, dx
        pos = z > 0.0
        zz = np.where(pos, z, 1.0)
        x = np.where(pos, zz ** (1.0 / (q - 1.0)), 0.0)
        dx = np.where(pos, x / (zz * q), 0.0)
        return x, dx

    def _bracket(self, shift, target, eps, mean, weight):
        """Per-row interval containing the potential that meets ``target``.

        The row mass is ``h(u) = sum_j x_j((u + shift_j) / eps)``.
        """
        k = shift.shape[1]
        if self.kind == "quadratic":
            # every entry is clipped to zero below ``lo``
            lo = np.min(-shift - eps * weight * mean, axis=1)
            return lo, lo + eps * np.max(weight, axis=1) * target
        q = self.q
        fprime = lambda x: (q * x ** (q - 1.0) - 1.0) / (q - 1.0)
        top = np.max(shift, axis=1)
        if q < 1:
            hi = np.min(eps / (1.0 - q) - shift, axis=1)
            lo = eps * fprime(target / (2.0 * k)) - top
            return lo, hi
        return eps * fprime(0.0) - top, eps * fprime(target) - top

    def project(self, shift, target, eps, mean, weight):
        """Solve ``h(u) = target`` row-wise for the dual potential ``u``.

        Safeguarded Newton on a bracket; the row mass is monotone in ``u``.
        """
        if self.kind == "entropy":
            return eps * (np.log(target) - logsumexp(shift / eps - 1.0, axis=1))
        lo, hi = self._bracket(shift, target, eps, mean, weight)
        u = 0.5 * (lo + hi)
        for _ in range(200):
            x, dx = self._dual_map((u[:, None] + shift) / eps, mean, weight)
            h = np.nansum(x, axis=1)
            dh = np.nansum(dx, axis=1) / eps
            h = np.where(np.isnan(x).any(axis=1), np.inf, h)
            r = h - target
            done = np.abs(r) <= 1e-15 * np.maximum(target, 1.0)
            if np.all(done) or np.all(hi - lo <= 1e-16 * np.maximum(1.0, np.abs(u))):
                break
            lo = np.where(r < 0, u, lo)
            hi = np.where(r > 0, u, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = u - r / dh
            ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
            u = np.where(done, u, np.where(ok, newton, 0.5 * (lo + hi)))
        return u


def regularized_ot(cost, mu, nu, regularizer: Regularizer | str, epsilon: float,
                   tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Minimize ``<plan, cost> + epsilon * R(plan)`` over the coupling polytope.

    Alternates exact Bregman projections onto the row-sum and column-sum
    constraint sets, expressed as coordinate ascent on the dual potentials
    ``u`` (rows) and ``v`` (columns); for regularizers that do not keep the
    plan positive on their own, the primal map clips at zero, which is the
    projection onto the nonnegativity constraint.
    """
    if isinstance(regularizer, str):
        regularizer = Regularizer(regularizer)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    mu, nu = as_measure(mu), as_measure(nu)
    n, m = mu.size, nu.size
    c = as_cost_matrix(cost, (n, m))
    rows, cols = _support(mu, nu)
    cs = c[np.ix_(rows, cols)]
    a, b = mu.weights[rows], nu.weights[cols]
    mean = np.broadcast_to(np.asarray(regularizer.mean, dtype=float), (n, m))
    weight = np.broadcast_to(np.asarray(regularizer.weight, dtype=float), (n, m))
    mean = mean[np.ix_(rows, cols)]
    weight = weight[np.ix_(rows, cols)]
    eps = float(epsilon)

    def primal(u, v):
        s = (u[:, None] + v[None, :] - cs) / eps
        if regularizer.kind == "entropy":
            return np.exp(s - 1.0)
        return regularizer._dual_map(s, mean, weight)[0]

    u = np.zeros(len(rows))
    v = np.zeros(len(cols))
    residual = math.inf
    it = 0
    while it < max_iter:
        it += 1
        u = regularizer.project(v[None, :] - cs, a, eps, mean, weight)
        v = regularizer.project((u[:, None] - cs).T, b, eps, mean.T, weight.T)
        sub = primal(u, v)
        residual = float(np.abs(sub.sum(axis=1) - a).max())
        if residual <= tol:
            break
    sub = primal(u, v)
    plan = TransportPlan(_scatter(sub, rows, cols, (n, m)), mu, nu)
    objective = transport_cost(c, plan)
    residual = plan.marginal_residual()
    report = SolverReport(
        objective=objective,
        iterations=it,
        converged=residual <= tol,
        residual=residual,
        regularized_objective=objective + eps * regularizer.value(plan.entries),
        method=f"bregman-{regularizer.kind}",
    )
    return plan, report

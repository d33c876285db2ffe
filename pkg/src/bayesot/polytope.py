"""Discrete measures, transport plans and the linear chart of the transport polytope.

A coupling of ``mu`` (n atoms) and ``nu`` (m atoms) is parameterized by an
unconstrained ``(n-1, m-1)`` array ``theta``::

    plan(theta) = base + embed(theta)

where ``embed(theta)`` has zero row and column sums, so every plan produced
this way carries the marginals of ``base``.  Nonnegativity is not enforced by
the chart; callers check it with :func:`is_feasible`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

#: Marginal sums farther than this from 1 are rejected instead of renormalized.
RENORMALIZE_TOL = 1e-6
#: Default tolerance on marginal and sign constraints.
FEASIBILITY_TOL = 1e-9


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weights of a finite probability measure.

    Input weights whose total lies within ``1e-6`` of one are rescaled to sum
    to one exactly (up to rounding); anything farther off raises ``ValueError``.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("a measure needs at least one atom")
        if not np.all(np.isfinite(w)):
            raise ValueError("measure weights must be finite")
        if np.any(w < 0):
            raise ValueError("measure weights must be nonnegative")
        total = w.sum()
        if abs(total - 1.0) > RENORMALIZE_TOL:
            raise ValueError(f"measure weights sum to {total!r}, expected 1")
        if total != 1.0:
            logger.info("renormalizing measure weights (sum was %r)", total)
            w = w / total
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def support(self) -> np.ndarray:
        """Indices of atoms with positive mass."""
        return np.flatnonzero(self.weights > 0)

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"DiscreteMeasure({self.weights.tolist()!r})"


def as_measure(x) -> DiscreteMeasure:
    return x if isinstance(x, DiscreteMeasure) else DiscreteMeasure(x)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """An ``n x m`` coupling matrix together with its intended marginals.

    Construction only checks shapes.  Plans off the polytope (negative
    entries, unconverged solver iterates) are representable on purpose;
    use :func:`is_feasible` or :attr:`feasible` to test membership.
    """

    entries: np.ndarray
    mu: DiscreteMeasure
    nu: DiscreteMeasure

    def __post_init__(self):
        mu, nu = as_measure(self.mu), as_measure(self.nu)
        e = np.array(self.entries, dtype=float)
        if e.shape != (mu.size, nu.size):
            raise ValueError(
                f"plan has shape {e.shape}, marginals imply {(mu.size, nu.size)}"
            )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "entries", _frozen(e))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def chart_shape(self) -> tuple[int, int]:
        n, m = self.shape
        return n - 1, m - 1

    @property
    def feasible(self) -> bool:
        return is_feasible(self)

    def marginal_residual(self) -> float:
        """Largest absolute violation of the row or column sum constraints."""
        rows = np.abs(self.entries.sum(axis=1) - self.mu.weights).max()
        cols = np.abs(self.entries.sum(axis=0) - self.nu.weights).max()
        return float(max(rows, cols))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def independent_coupling(mu, nu) -> TransportPlan:
    """The product coupling ``mu_i * nu_j``, used as the chart origin."""
    mu, nu = as_measure(mu), as_measure(nu)
    return TransportPlan(np.outer(mu.weights, nu.weights), mu, nu)


def _check_theta(theta, shape):
    theta = np.asarray(theta, dtype=float)
    n, m = shape
    if theta.shape != (n - 1, m - 1):
        raise ValueError(
            f"chart coordinates have shape {theta.shape}, expected {(n - 1, m - 1)}"
        )
    return theta


def chart_embed(theta) -> np.ndarray:
    """Map ``(n-1, m-1)`` coordinates to the ``n x m`` zero-row/column-sum matrix.

    The top-left block is ``theta``, the last column and row hold the negated
    row and column sums, and the corner holds the total.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2:
        raise ValueError("chart coordinates must be a 2-d array")
    k, l = theta.shape
    out = np.empty((k + 1, l + 1))
    out[:k, :l] = theta
    out[:k, l] = -theta.sum(axis=1)
    out[k, :l] = -theta.sum(axis=0)
    out[k, l] = theta.sum()
    return out


def chart_adjoint(grad) -> np.ndarray:
    """Adjoint of :func:`chart_embed`: pulls an ``n x m`` gradient back to the chart."""
    g = np.asarray(grad, dtype=float)
    return g[:-1, :-1] - g[:-1, -1:] - g[-1:, :-1] + g[-1, -1]


def plan_from_chart(theta, base: TransportPlan) -> TransportPlan:
    theta = _check_theta(theta, base.shape)
    return TransportPlan(base.entries + chart_embed(theta), base.mu, base.nu)


def chart_from_plan(plan: TransportPlan, base: TransportPlan) -> np.ndarray:
    """Inverse of :func:`plan_from_chart` for plans sharing ``base``'s marginals."""
    if plan.shape != base.shape:
        raise ValueError(f"plan shape {plan.shape} != base shape {base.shape}")
    for name, a, b in (("row", plan.mu, base.mu), ("column", plan.nu, base.nu)):
        if np.abs(a.weights - b.weights).max() > FEASIBILITY_TOL:
            raise ValueError(f"{name} marginals of plan and base differ")
    sums = (plan.entries.sum(axis=1), plan.entries.sum(axis=0))
    if (
        np.abs(sums[0] - base.mu.weights).max() > FEASIBILITY_TOL
        or np.abs(sums[1] - base.nu.weights).max() > FEASIBILITY_TOL
    ):
        raise ValueError("plan does not satisfy the base marginals")
    return (plan.entries - base.entries)[:-1, :-1].copy()


def is_feasible(plan: TransportPlan, tol: float = FEASIBILITY_TOL) -> bool:
    """True iff all entries are ``>= -tol`` and both marginals hold within ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if np.any(plan.entries < -tol) or not np.all(np.isfinite(plan.entries)):
        return False
    return plan.marginal_residual() <= tol


def axis_distances(base: TransportPlan) -> np.ndarray:
    """Distance from ``base`` to the polytope boundary along each chart axis.

    Moving coordinate ``(a, b)`` by ``t`` shifts entries ``(a, b)`` and
    ``(n-1, m-1)`` by ``+t`` and entries ``(a, m-1)``, ``(n-1, b)`` by ``-t``.
    """
    g = base.entries
    up = np.minimum(g[:-1, -1:], g[-1:, :-1])
    down = np.minimum(g[:-1, :-1], g[-1, -1])
    return np.minimum(up, down)

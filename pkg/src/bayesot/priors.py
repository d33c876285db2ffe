"""Prior log-densities over transport plans, up to additive constants.

Every prior may be multiplied by a barrier factor:

``"entropy"`` (default)
    ``exp(barrier_epsilon * H(plan))`` with a small ``barrier_epsilon``; its
    log-density is undefined for negative entries, so samplers reject them.
``"simplex"``
    The indicator of nonnegative plans.
``"none"``
    No extra factor.

Gaussian priors act on the row-major flattening ``vec(plan)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .polytope import TransportPlan, chart_adjoint, plan_from_chart

KINDS = ("uniform", "entropy", "dirichlet", "gaussian", "tsallis")
BARRIERS = ("none", "entropy", "simplex")
DEFAULT_BARRIER_EPSILON = 1e-3


class InfeasiblePointError(ValueError):
    """The log-density has no gradient at the requested plan."""


@dataclass(frozen=True, eq=False)
class Prior:
    """Prior over plans.

    ``alpha`` (dirichlet) and ``mean`` (gaussian) are scalars or ``n x m``
    arrays.  ``precision`` is a scalar, an ``n*m`` vector (diagonal) or an
    ``(n*m, n*m)`` symmetric positive-definite matrix; ``None`` means identity.
    """

    kind: str = "uniform"
    epsilon: float = 1.0
    alpha: np.ndarray | float = 1.0
    mean: np.ndarray | float = 0.0
    precision: np.ndarray | float | None = None
    q: float = 0.5
    barrier: str = "entropy"
    barrier_epsilon: float = DEFAULT_BARRIER_EPSILON

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}; expected one of {KINDS}")
        if self.barrier not in BARRIERS:
            raise ValueError(f"unknown barrier {self.barrier!r}; expected one of {BARRIERS}")
        if self.kind in ("entropy", "tsallis") and not self.epsilon > 0:
            raise ValueError("prior epsilon must be positive")
        if self.barrier == "entropy" and not self.barrier_epsilon > 0:
            raise ValueError("barrier epsilon must be positive")
        if self.kind == "dirichlet" and np.any(np.asarray(self.alpha, dtype=float) <= 0):
            raise ValueError("dirichlet concentrations must be positive")
        if self.kind == "tsallis" and (self.q <= 0 or self.q == 1):
            raise ValueError("tsallis q must be positive and different from 1")
        if self.kind == "gaussian" and self.precision is not None:
            p = np.asarray(self.precision, dtype=float)
            if p.ndim == 2:
                if not np.allclose(p, p.T):
                    raise ValueError("gaussian precision must be symmetric")
                if np.linalg.eigvalsh(p).min() <= 0:
                    raise ValueError("gaussian precision must be positive-definite")
            elif np.any(p <= 0):
                raise ValueError("gaussian precision must be positive-definite")

    # convenience constructors
    @classmethod
    def uniform(cls, **kw):
        return cls("uniform", **kw)

    @classmethod
    def entropy(cls, epsilon=1.0, **kw):
        return cls("entropy", epsilon=epsilon, **kw)

    @classmethod
    def dirichlet(cls, alpha=1.0, **kw):
        return cls("dirichlet", alpha=alpha, **kw)

    @classmethod
    def gaussian(cls, mean=0.0, precision=None, **kw):
        return cls("gaussian", mean=mean, precision=precision, **kw)

    @classmethod
    def tsallis(cls, epsilon=1.0, q=0.5, **kw):
        return cls("tsallis", epsilon=epsilon, q=q, **kw)

    # shape-resolved parameters
    def alpha_for(self, shape):
        return np.broadcast_to(np.asarray(self.alpha, dtype=float), shape).copy()

    def mean_for(self, shape):
        return np.broadcast_to(np.asarray(self.mean, dtype=float), shape).copy()

    def precision_for(self, shape):
        """Return ``(precision, dense)`` for plans of ``shape``."""
        size = shape[0] * shape[1]
        if self.precision is None:
            return np.ones(size), False
        p = np.asarray(self.precision, dtype=float)
        if p.ndim == 2 and p.shape == (size, size):
            return p.copy(), True
        if p.ndim == 2 and p.shape == tuple(shape):
            return p.ravel().copy(), False
        if p.ndim <= 1:
            return np.broadcast_to(p, (size,)).copy(), False
        raise ValueError(f"precision of shape {p.shape} does not fit plans of shape {shape}")

    @property
    def needs_interior(self) -> bool:
        """Whether the gradient requires strictly positive plan entries."""
        return (
            self.kind == "entropy"
            or (self.kind == "dirichlet" and np.any(np.asarray(self.alpha) != 1.0))
            or (self.kind == "tsallis" and self.q < 1)
            or self.barrier == "entropy"
        )

    def to_dict(self):
        def enc(x):
            return x.tolist() if isinstance(x, np.ndarray) else x
        return {
            "kind": self.kind,
            "epsilon": self.epsilon,
            "alpha": enc(self.alpha),
            "mean": enc(self.mean),
            "precision": enc(self.precision),
            "q": self.q,
            "barrier": self.barrier,
            "barrier_epsilon": self.barrier_epsilon,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("alpha", "mean", "precision"):
            if isinstance(d.get(key), list):
                d[key] = np.asarray(d[key], dtype=float)
        return cls(**d)


def _entries(plan):
    return np.asarray(getattr(plan, "entries", plan), dtype=float)


def _entropy(g):
    pos = g > 0
    return float(-np.sum(g[pos] * np.log(g[pos])))


def log_prior(prior: Prior, plan) -> float:
    """Log-density of ``plan`` under ``prior`` (barrier included), possibly ``-inf``."""
    g = _entries(plan)
    if g.ndim != 2:
        raise ValueError("plan must be a 2-d array")
    kind = prior.kind
    if prior.barrier in ("entropy", "simplex") and np.any(g < 0):
        return -math.inf
    if kind == "uniform":
        if np.any(g < 0):
            return -math.inf
        value = 0.0
    elif kind == "entropy":
        if np.any(g < 0):
            return -math.inf
        value = prior.epsilon * _entropy(g)
    elif kind == "dirichlet":
        a1 = prior.alpha_for(g.shape) - 1.0
        if np.any(g < 0):
            return -math.inf
        active = a1 != 0
        if np.any(g[active] <= 0):
            return -math.inf
        value = float(np.sum(a1[active] * np.log(g[active])))
    elif kind == "gaussian":
        d = (g - prior.mean_for(g.shape)).ravel()
        prec, dense = prior.precision_for(g.shape)
        value = -0.5 * float(d @ (prec @ d if dense else prec * d))
    else:
        if np.any(g < 0):
            return -math.inf
        value = -prior.epsilon / (prior.q - 1.0) * (float(np.sum(g ** prior.q)) - 1.0)
    if prior.barrier == "entropy":
        value += prior.barrier_epsilon * _entropy(g)
    return value


def grad_log_prior_plan(prior: Prior, plan) -> np.ndarray:
    """Gradient of :func:`log_prior` with respect to the plan entries."""
    g = _entries(plan)
    if np.any(g < 0) and prior.barrier != "none":
        raise InfeasiblePointError("plan has negative entries")
    if prior.needs_interior and np.any(g <= 0):
        raise InfeasiblePointError("log-density gradient requires strictly positive entries")
    kind = prior.kind
    if kind == "uniform":
        if np.any(g < 0):
            raise InfeasiblePointError("plan has negative entries")
        out = np.zeros_like(g)
    elif kind == "entropy":
        out = -prior.epsilon * (np.log(g) + 1.0)
    elif kind == "dirichlet":
        a1 = prior.alpha_for(g.shape) - 1.0
        out = np.divide(a1, g, out=np.zeros_like(g), where=a1 != 0)
    elif kind == "gaussian":
        d = (g - prior.mean_for(g.shape)).ravel()
        prec, dense = prior.precision_for(g.shape)
        out = -(prec @ d if dense else prec * d).reshape(g.shape)
    else:
        q = prior.q
        out = -prior.epsilon * q / (q - 1.0) * g ** (q - 1.0)
    if prior.barrier == "entropy":
        out = out - prior.barrier_epsilon * (np.log(g) + 1.0)
    return out


def grad_log_prior_theta(prior: Prior, theta, base: TransportPlan) -> np.ndarray:
    """Gradient of ``log_prior(plan_from_chart(theta, base))`` in chart coordinates."""
    plan = plan_from_chart(theta, base)
    return chart_adjoint(grad_log_prior_plan(prior, plan))

"""Posterior densities over transport plans given an ensemble of cost samples.

Each cost sample ``C_k`` contributes the optimality likelihood
``exp(-cost_scale * <C_k, plan>)``.  Two ways of combining them are
supported:

``"forall"``
    the plan is optimal for every sample; the likelihood terms multiply, so
    the energy is ``cost_scale * <sum_k C_k, plan>``.
``"exists"``
    the plan is optimal for some sample; the energy is the smooth minimum
    ``-logsumexp_k(-cost_scale * <C_k, plan>)``.

The negative log-posterior adds ``-log_prior(plan)``; it is evaluated on chart
coordinates and is ``+inf`` off the polytope.  Rescaling every cost by ``a``
is the same as multiplying ``cost_scale`` by ``a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .ot_solvers import (
    Regularizer,
    as_cost_matrix,
    exact_ot,
    regularized_ot,
    sinkhorn,
    transport_cost,
)
from .polytope import (
    TransportPlan,
    as_measure,
    chart_adjoint,
    independent_coupling,
    plan_from_chart,
)
from .priors import Prior, grad_log_prior_plan, log_prior

CONDITIONS = ("forall", "exists")


class UnsupportedOperation(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CostEnsemble:
    """``N`` sampled cost matrices of a common shape, stored as ``(N, n, m)``."""

    samples: np.ndarray

    def __post_init__(self):
        s = self.samples
        if isinstance(s, (list, tuple)):
            if len(s) == 0:
                raise ValueError("ensemble must contain at least one sample")
            shape = np.shape(s[0])
            for k, c in enumerate(s):
                if np.shape(c) != shape:
                    raise ValueError(f"sample {k} has shape {np.shape(c)}, expected {shape}")
        s = np.array(s, dtype=float)
        if s.ndim == 2:
            s = s[None]
        if s.ndim != 3 or s.shape[0] == 0:
            raise ValueError("ensemble must contain at least one sample")
        for k in range(s.shape[0]):
            try:
                as_cost_matrix(s[k])
            except ValueError as exc:
                raise ValueError(f"sample {k}: {exc}") from None
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape[1:]

    def __len__(self):
        return self.size

    def canonical(self) -> np.ndarray:
        """Samples in a fixed order independent of how they were listed."""
        flat = self.samples.reshape(self.size, -1)
        order = np.lexsort(flat.T[::-1])
        return self.samples[order]

    def total(self) -> np.ndarray:
        """``sum_k C_k``, summed in canonical order so permutations agree bit for bit."""
        return self.canonical().sum(axis=0)

    def mean(self) -> np.ndarray:
        return self.total() / self.size


@dataclass(frozen=True, eq=False)
class PosteriorSpec:
    ensemble: CostEnsemble
    prior: Prior
    condition: str
    base: TransportPlan
    cost_scale: float = 1.0

    def __post_init__(self):
        if not isinstance(self.ensemble, CostEnsemble):
            object.__setattr__(self, "ensemble", CostEnsemble(self.ensemble))
        if self.condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}, got {self.condition!r}")
        if not self.cost_scale > 0:
            raise ValueError("cost_scale must be positive")
        if self.ensemble.shape != self.base.shape:
            raise ValueError(
                f"ensemble shape {self.ensemble.shape} != plan shape {self.base.shape}"
            )

    @classmethod
    def build(cls, mu, nu, ensemble, prior=None, condition="forall", cost_scale=1.0, base=None):
        """Spec with the independent coupling as chart origin unless ``base`` is given."""
        mu, nu = as_measure(mu), as_measure(nu)
        if base is None:
            base = independent_coupling(mu, nu)
        if not isinstance(ensemble, CostEnsemble):
            ensemble = CostEnsemble(ensemble)
        return cls(ensemble, prior or Prior(), condition, base, float(cost_scale))

    @property
    def shape(self):
        return self.base.shape

    @property
    def chart_shape(self):
        return self.base.chart_shape

    @property
    def dim(self) -> int:
        k, l = self.chart_shape
        return k * l

    def with_base(self, base: TransportPlan) -> "PosteriorSpec":
        return replace(self, base=base)


def log_likelihood_single(cost, plan, cost_scale: float = 1.0) -> float:
    """Log-probability that ``plan`` is optimal for one cost sample."""
    return -cost_scale * transport_cost(cost, plan)


def _ot_terms(spec: PosteriorSpec, g: np.ndarray) -> np.ndarray:
    costs = spec.ensemble.canonical()
    return spec.cost_scale * np.einsum("kij,ij->k", costs, g)


def _likelihood_energy(spec: PosteriorSpec, g: np.ndarray) -> float:
    if spec.condition == "forall":
        return spec.cost_scale * transport_cost(spec.ensemble.total(), g)
    x = _ot_terms(spec, g)
    lo = x.min()
    return float(lo - math.log(np.sum(np.exp(lo - x))))


def _likelihood_grad(spec: PosteriorSpec, g: np.ndarray) -> np.ndarray:
    if spec.condition == "forall":
        return spec.cost_scale * spec.ensemble.total()
    x = _ot_terms(spec, g)
    w = np.exp(x.min() - x)
    w /= w.sum()
    return spec.cost_scale * np.einsum("k,kij->ij", w, spec.ensemble.canonical())


def neg_log_posterior(spec: PosteriorSpec, theta) -> float:
    """Negative log-posterior at chart coordinates ``theta``, dropping constants."""
    plan = plan_from_chart(theta, spec.base)
    g = plan.entries
    if np.any(g < 0):
        return math.inf
    lp = log_prior(spec.prior, g)
    if lp == -math.inf:
        return math.inf
    return -lp + _likelihood_energy(spec, g)


def grad_neg_log_posterior(spec: PosteriorSpec, theta) -> np.ndarray:
    """Chart gradient of :func:`neg_log_posterior`.

    Raises :class:`~bayesot.priors.InfeasiblePointError` where it is undefined.
    """
    from .priors import InfeasiblePointError

    plan = plan_from_chart(theta, spec.base)
    g = plan.entries
    if np.any(g < 0):
        raise InfeasiblePointError("plan has negative entries")
    plan_grad = -grad_log_prior_plan(spec.prior, g) + _likelihood_grad(spec, g)
    return chart_adjoint(plan_grad)


def map_mapping(prior: Prior) -> str:
    """Human-readable description of the prior-to-regularizer correspondence."""
    return {
        "uniform": "constant prior -> unregularized OT on the summed cost",
        "entropy": f"entropy prior (epsilon={prior.epsilon}) -> Sinkhorn on the summed cost",
        "gaussian": "gaussian prior -> quadratically regularized OT on the summed cost",
        "tsallis": f"tsallis prior (epsilon={prior.epsilon}, q={prior.q}) -> "
                   "Tsallis-regularized OT on the summed cost",
    }.get(prior.kind, "unsupported")


def map_estimate(spec: PosteriorSpec, tol: float = 1e-9, max_iter: int = 100_000):
    """Posterior mode under the ``forall`` condition, solved as regularized OT.

    The regularizer is ``-log prior`` and the cost is ``cost_scale * sum_k C_k``.
    The barrier factor only serves the sampler and is left out here.
    """
    if spec.condition != "forall":
        raise UnsupportedOperation(
            "MAP estimation is only supported for the forall condition; "
            "its exists counterpart is non-convex"
        )
    prior = spec.prior
    mu, nu = spec.base.mu, spec.base.nu
    cost = spec.cost_scale * spec.ensemble.total()
    if prior.kind == "uniform":
        return exact_ot(cost, mu, nu)
    if prior.kind == "entropy":
        return sinkhorn(cost, mu, nu, prior.epsilon, tol=tol, max_iter=max_iter)
    if prior.kind == "gaussian":
        prec, dense = prior.precision_for(spec.shape)
        if dense:
            off = prec - np.diag(np.diag(prec))
            if np.any(off != 0):
                raise UnsupportedOperation(
                    "MAP under a gaussian prior needs a diagonal precision"
                )
            prec = np.diag(prec)
        reg = Regularizer.quadratic(
            mean=prior.mean_for(spec.shape), weight=prec.reshape(spec.shape)
        )
        return regularized_ot(cost, mu, nu, reg, 1.0, tol=tol, max_iter=max_iter)
    if prior.kind == "tsallis":
        return regularized_ot(
            cost, mu, nu, Regularizer.tsallis(prior.q), prior.epsilon, tol=tol, max_iter=max_iter
        )
    raise UnsupportedOperation(f"MAP unsupported for {prior.kind}")


# -- kernel targets -------------------------------------------------------

_PRIOR_CODES = {"uniform": 0, "entropy": 1, "dirichlet": 2, "gaussian": 3, "tsallis": 4}
_BARRIER_CODES = {"none": 0, "entropy": 1, "simplex": 2}


def compile_target(spec: PosteriorSpec, backend: str | None = None):
    """Build the kernel-side potential for ``spec``.

    Targets hold scratch buffers: use one per thread.
    """
    mod = _backend.load(backend) if backend else _backend.kernels
    n, m = spec.shape
    if spec.condition == "forall":
        costs = (spec.cost_scale * spec.ensemble.total()).reshape(1, n * m)
    else:
        costs = spec.cost_scale * spec.ensemble.canonical().reshape(-1, n * m)
    # the compiled kernels take writable buffers
    prior = spec.prior
    precision, dense = prior.precision_for((n, m))
    return mod.Target(
        n, m,
        np.array(spec.base.entries, dtype=float).ravel(),
        np.array(costs, dtype=float),
        0 if spec.condition == "forall" else 1,
        float(spec.cost_scale),
        _PRIOR_CODES[prior.kind],
        float(prior.epsilon),
        prior.alpha_for((n, m)).ravel(),
        prior.mean_for((n, m)).ravel(),
        precision,
        bool(dense),
        float(prior.q),
        _BARRIER_CODES[prior.barrier],
        float(prior.barrier_epsilon),
    )


def reduce_support(spec: PosteriorSpec):
    """Drop zero-mass atoms.

    Returns ``(reduced_spec, rows, cols)``; plans of the reduced problem embed
    back into the full one by zero-filling the dropped rows and columns.
    """
    mu, nu = spec.base.mu, spec.base.nu
    rows, cols = mu.support, nu.support
    if len(rows) == mu.size and len(cols) == nu.size:
        return spec, rows, cols
    sub = np.ix_(rows, cols)
    rmu, rnu = as_measure(mu.weights[rows]), as_measure(nu.weights[cols])
    base = TransportPlan(spec.base.entries[sub], rmu, rnu)
    prior = spec.prior
    changes = {}
    if np.ndim(prior.alpha) == 2:
        changes["alpha"] = np.asarray(prior.alpha)[sub]
    if np.ndim(prior.mean) == 2:
        changes["mean"] = np.asarray(prior.mean)[sub]
    if prior.precision is not None and np.ndim(prior.precision) > 0:
        n, m = spec.shape
        p, dense = prior.precision_for((n, m))
        keep = (rows[:, None] * m + cols[None, :]).ravel()
        changes["precision"] = p[np.ix_(keep, keep)] if dense else p[keep]
    if changes:
        prior = replace(prior, **changes)
    ensemble = CostEnsemble(spec.ensemble.samples[:, rows][:, :, cols])
    reduced = PosteriorSpec(ensemble, prior, spec.condition, base, spec.cost_scale)
    return reduced, rows, cols

"""Pure-Python (numpy) implementation of the hot kernels.

Mirrors ``_ckernels.pyx`` function for function; selected at import when the
compiled extension is unavailable or ``BAYESOT_PURE_PYTHON`` is set.

All arrays are C-contiguous float64.  Plans are flattened row-major
(``n*m``) and chart coordinates flattened row-major (``(n-1)*(m-1)``).
"""
import math

import numpy as np

PRIOR_UNIFORM, PRIOR_ENTROPY, PRIOR_DIRICHLET, PRIOR_GAUSSIAN, PRIOR_TSALLIS = range(5)
BARRIER_NONE, BARRIER_ENTROPY, BARRIER_SIMPLEX = range(3)
FORALL, EXISTS = 0, 1

STATUS_OK, STATUS_DIVERGENT = 0, 1


def _xlogx(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


class Target:
    """Negative log-posterior in chart coordinates, with gradient.

    ``costs`` holds the ensemble as a ``(K, n*m)`` array.  With ``condition``
    FORALL it must already be reduced to the scaled sum (``K == 1``).
    """

    def __init__(self, n, m, base, costs, condition, scale,
                 prior_kind, prior_eps, alpha, mean, precision, dense_precision,
                 q, barrier_kind, barrier_eps):
        self.n, self.m = int(n), int(m)
        self.base = np.ascontiguousarray(base, dtype=float)
        self.costs = np.ascontiguousarray(costs, dtype=float)
        self.condition = int(condition)
        self.scale = float(scale)
        self.prior_kind = int(prior_kind)
        self.prior_eps = float(prior_eps)
        self.alpha = np.ascontiguousarray(alpha, dtype=float)
        self.mean = np.ascontiguousarray(mean, dtype=float)
        self.precision = np.ascontiguousarray(precision, dtype=float)
        self.dense_precision = bool(dense_precision)
        self.q = float(q)
        self.barrier_kind = int(barrier_kind)
        self.barrier_eps = float(barrier_eps)
        self.strict = (
            self.prior_kind == PRIOR_ENTROPY
            or (self.prior_kind == PRIOR_DIRICHLET and np.any(self.alpha != 1.0))
            or (self.prior_kind == PRIOR_TSALLIS and self.q < 1.0)
            or self.barrier_kind == BARRIER_ENTROPY
        )
        self.dim = (self.n - 1) * (self.m - 1)

    # -- chart ---------------------------------------------------------
    def plan(self, theta):
        n, m = self.n, self.m
        t = np.asarray(theta, dtype=float).reshape(n - 1, m - 1)
        g = self.base.reshape(n, m).copy()
        g[:-1, :-1] += t
        g[:-1, -1] -= t.sum(axis=1)
        g[-1, :-1] -= t.sum(axis=0)
        g[-1, -1] += t.sum()
        return g.ravel()

    def embed(self, v):
        n, m = self.n, self.m
        t = v.reshape(n - 1, m - 1)
        out = np.empty((n, m))
        out[:-1, :-1] = t
        out[:-1, -1] = -t.sum(axis=1)
        out[-1, :-1] = -t.sum(axis=0)
        out[-1, -1] = t.sum()
        return out.ravel()

    def adjoint(self, g):
        g = g.reshape(self.n, self.m)
        return (g[:-1, :-1] - g[:-1, -1:] - g[-1:, :-1] + g[-1, -1]).ravel()

    # -- energy --------------------------------------------------------
    def _prior_energy(self, gam, want_grad):
        """Return (-log prior, plan-space gradient or None); inf if out of domain."""
        kind = self.prior_kind
        grad = np.zeros_like(gam) if want_grad else None
        if kind == PRIOR_UNIFORM:
            u = 0.0
        elif kind == PRIOR_ENTROPY:
            u = self.prior_eps * _xlogx(gam).sum()
            if want_grad:
                grad += self.prior_eps * (np.log(gam) + 1.0)
        elif kind == PRIOR_DIRICHLET:
            a1 = self.alpha - 1.0
            active = a1 != 0.0
            if np.any(gam[active] <= 0.0):
                return math.inf, None
            u = -float(np.sum(a1[active] * np.log(gam[active])))
            if want_grad:
                grad[active] -= a1[active] / gam[active]
        elif kind == PRIOR_GAUSSIAN:
            d = gam - self.mean
            pd = self.precision @ d if self.dense_precision else self.precision * d
            u = 0.5 * float(d @ pd)
            if want_grad:
                grad += pd
        else:
            q = self.q
            u = self.prior_eps / (q - 1.0) * (np.sum(gam ** q) - 1.0)
            if want_grad:
                grad += self.prior_eps * q / (q - 1.0) * gam ** (q - 1.0)
        if self.barrier_kind == BARRIER_ENTROPY:
            u += self.barrier_eps * _xlogx(gam).sum()
            if want_grad:
                grad += self.barrier_eps * (np.log(gam) + 1.0)
        return float(u), grad

    def _likelihood_energy(self, gam, want_grad):
        ot = self.costs @ gam
        if self.condition == FORALL:
            return float(ot[0]), (self.costs[0] if want_grad else None)
        lo = ot.min()
        w = np.exp(lo - ot)
        total = w.sum()
        u = lo - math.log(total)
        if not want_grad:
            return float(u), None
        return float(u), (w / total) @ self.costs

    def potential(self, theta):
        gam = self.plan(theta)
        if np.any(gam < 0.0):
            return math.inf
        prior, _ = self._prior_energy(gam, False)
        if not math.isfinite(prior):
            return math.inf
        return prior + self._likelihood_energy(gam, False)[0]

    def potential_grad(self, theta, grad_out):
        """Write the chart gradient into ``grad_out``; return the potential.

        Returns ``inf`` (leaving ``grad_out`` unspecified) at points where the
        gradient is undefined.
        """
        gam = self.plan(theta)
        if np.any(gam < 0.0) or (self.strict and np.any(gam <= 0.0)):
            return math.inf
        prior, gp = self._prior_energy(gam, True)
        if not math.isfinite(prior):
            return math.inf
        lik, gl = self._likelihood_energy(gam, True)
        u = prior + lik
        g = self.adjoint(gp + gl)
        if not (math.isfinite(u) and np.all(np.isfinite(g))):
            return math.inf
        grad_out[:] = g
        return u

    # -- integrator ----------------------------------------------------
    def _drift(self, theta, p, inv_mass, tau, reflect, max_reflections):
        """Move ``theta`` for time ``tau``; return (status, reflections)."""
        v = inv_mass * p
        if not reflect:
            theta += tau * v
            return STATUS_OK, 0
        n, m = self.n, self.m
        remaining = tau
        count = 0
        hit = -1
        while True:
            gam = self.plan(theta)
            if hit >= 0:
                gam[hit] = 0.0
            rate = self.embed(v)
            falling = rate < 0.0
            if not np.any(falling):
                theta += remaining * v
                return STATUS_OK, count
            times = np.full(gam.shape, math.inf)
            times[falling] = np.maximum(gam[falling], 0.0) / -rate[falling]
            hit = int(np.argmin(times))
            t_hit = times[hit]
            if t_hit >= remaining:
                theta += remaining * v
                return STATUS_OK, count
            count += 1
            if count > max_reflections:
                return STATUS_DIVERGENT, count
            theta += t_hit * v
            remaining -= t_hit
            normal = self._facet_normal(hit // m, hit % m, n, m)
            num = normal @ v
            den = normal @ (inv_mass * normal)
            p -= (2.0 * num / den) * normal
            v = inv_mass * p

    @staticmethod
    def _facet_normal(i, j, n, m):
        nv = np.zeros((n - 1, m - 1))
        if i < n - 1 and j < m - 1:
            nv[i, j] = 1.0
        elif i < n - 1:
            nv[i, :] = -1.0
        elif j < m - 1:
            nv[:, j] = -1.0
        else:
            nv[:, :] = 1.0
        return nv.ravel()

    def trajectory(self, theta, p, grad, step, n_steps, inv_mass, reflect,
                   max_reflections):
        """Leapfrog ``n_steps`` in place on ``theta``, ``p``, ``grad``.

        ``grad`` must hold the gradient at the starting ``theta``.  Returns
        ``(potential, status, reflections)``; status is nonzero when the
        trajectory left the domain, hit a non-finite energy, or exceeded the
        reflection budget.
        """
        u = math.nan
        total = 0
        if n_steps == 0:
            return self.potential(theta), STATUS_OK, 0
        for _ in range(n_steps):
            p -= 0.5 * step * grad
            status, k = self._drift(theta, p, inv_mass, step, reflect,
                                    max_reflections - total)
            total += k
            if status != STATUS_OK:
                return math.inf, status, total
            u = self.potential_grad(theta, grad)
            if not math.isfinite(u):
                return math.inf, STATUS_DIVERGENT, total
            p -= 0.5 * step * grad
        return u, STATUS_OK, total


def sinkhorn_log(cost, mu, nu, eps, f, g, tol, max_iter):
    """Log-domain Sinkhorn on strictly positive marginals.

    Updates the dual potentials ``f`` (rows) and ``g`` (columns) in place so
    that ``plan = exp((f[:, None] + g[None, :] - cost) / eps)``.  After every
    column update the column sums are exact; iteration stops once the row sum
    violation is at most ``tol``.  Returns ``(iterations, residual)``.
    """
    log_mu = np.log(mu)
    log_nu = np.log(nu)
    residual = math.inf
    it = 0
    while it < max_iter:
        it += 1
        s = (g[None, :] - cost) / eps
        smax = s.max(axis=1)
        f[:] = eps * (log_mu - smax - np.log(np.exp(s - smax[:, None]).sum(axis=1)))
        s = (f[:, None] - cost) / eps
        smax = s.max(axis=0)
        g[:] = eps * (log_nu - smax - np.log(np.exp(s - smax[None, :]).sum(axis=0)))
        rows = np.exp((f[:, None] + g[None, :] - cost) / eps).sum(axis=1)
        residual = float(np.abs(rows - mu).max())
        if residual <= tol:
            break
    return it, residual

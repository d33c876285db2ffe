# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: posterior potential/gradient, leapfrog trajectories
with facet reflection, and log-domain Sinkhorn iterations.

Interface and semantics match ``_pykernels`` exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, INFINITY, isfinite, pow, fabs

cnp.import_array()

cdef enum:
    PRIOR_UNIFORM = 0
    PRIOR_ENTROPY = 1
    PRIOR_DIRICHLET = 2
    PRIOR_GAUSSIAN = 3
    PRIOR_TSALLIS = 4

cdef enum:
    BARRIER_ENTROPY = 1

cdef enum:
    FORALL = 0

STATUS_OK = 0
STATUS_DIVERGENT = 1


cdef inline double xlogx(double x) noexcept nogil:
    return x * log(x) if x > 0.0 else 0.0


cdef class Target:
    cdef public int n, m, dim, condition, prior_kind, barrier_kind, K
    cdef public bint dense_precision, strict
    cdef public double scale, prior_eps, q, barrier_eps
    cdef double[::1] base, alpha, mean, precision
    cdef double[:, ::1] costs
    # scratch
    cdef double[::1] gam, gplan, ot, pd, rate, tmpv
    cdef object _keep

    def __init__(self, n, m, base, costs, condition, scale,
                 prior_kind, prior_eps, alpha, mean, precision, dense_precision,
                 q, barrier_kind, barrier_eps):
        self.n = n
        self.m = m
        self.dim = (n - 1) * (m - 1)
        base = np.ascontiguousarray(base, dtype=np.float64)
        costs = np.ascontiguousarray(costs, dtype=np.float64)
        alpha = np.ascontiguousarray(alpha, dtype=np.float64)
        mean = np.ascontiguousarray(mean, dtype=np.float64)
        precision = np.ascontiguousarray(precision, dtype=np.float64).ravel()
        self._keep = (base, costs, alpha, mean, precision)
        self.base = base
        self.costs = costs
        self.K = costs.shape[0]
        self.condition = condition
        self.scale = scale
        self.prior_kind = prior_kind
        self.prior_eps = prior_eps
        self.alpha = alpha
        self.mean = mean
        self.precision = precision
        self.dense_precision = dense_precision
        self.q = q
        self.barrier_kind = barrier_kind
        self.barrier_eps = barrier_eps
        self.strict = (
            prior_kind == PRIOR_ENTROPY
            or (prior_kind == PRIOR_DIRICHLET and bool(np.any(alpha != 1.0)))
            or (prior_kind == PRIOR_TSALLIS and q < 1.0)
            or barrier_kind == BARRIER_ENTROPY
        )
        nm = n * m
        self.gam = np.empty(nm)
        self.gplan = np.empty(nm)
        self.ot = np.empty(self.K)
        self.pd = np.empty(nm)
        self.rate = np.empty(nm)
        self.tmpv = np.empty(max(self.dim, 1))

    # -- chart ---------------------------------------------------------
    cdef void _plan(self, const double[::1] theta, double[::1] out) noexcept nogil:
        cdef int n = self.n, m = self.m, a, b
        cdef double rs, total = 0.0
        for a in range(n * m):
            out[a] = self.base[a]
        for a in range(n - 1):
            rs = 0.0
            for b in range(m - 1):
                out[a * m + b] += theta[a * (m - 1) + b]
                rs += theta[a * (m - 1) + b]
            out[a * m + m - 1] -= rs
            total += rs
        for b in range(m - 1):
            rs = 0.0
            for a in range(n - 1):
                rs += theta[a * (m - 1) + b]
            out[(n - 1) * m + b] -= rs
        out[n * m - 1] += total

    cdef void _embed(self, const double[::1] v, double[::1] out) noexcept nogil:
        cdef int n = self.n, m = self.m, a, b
        cdef double rs, total = 0.0
        for a in range(n - 1):
            rs = 0.0
            for b in range(m - 1):
                out[a * m + b] = v[a * (m - 1) + b]
                rs += v[a * (m - 1) + b]
            out[a * m + m - 1] = -rs
            total += rs
        for b in range(m - 1):
            rs = 0.0
            for a in range(n - 1):
                rs += v[a * (m - 1) + b]
            out[(n - 1) * m + b] = -rs
        out[n * m - 1] = total

    cdef void _adjoint(self, const double[::1] g, double[::1] out) noexcept nogil:
        cdef int n = self.n, m = self.m, a, b
        cdef double corner = g[n * m - 1]
        for a in range(n - 1):
            for b in range(m - 1):
                out[a * (m - 1) + b] = (g[a * m + b] - g[a * m + m - 1]
                                        - g[(n - 1) * m + b] + corner)

    # -- energy --------------------------------------------------------
    cdef double _energy(self, const double[::1] theta, double[::1] grad,
                        bint want_grad) noexcept nogil:
        cdef int nm = self.n * self.m, i, j, k
        cdef double u = 0.0, x, a1, lo, total, w, d
        cdef double[::1] gam = self.gam
        cdef double[::1] gp = self.gplan
        self._plan(theta, gam)
        for i in range(nm):
            if gam[i] < 0.0:
                return INFINITY
            if want_grad and self.strict and gam[i] <= 0.0:
                return INFINITY
            gp[i] = 0.0

        if self.prior_kind == PRIOR_ENTROPY:
            for i in range(nm):
                u += self.prior_eps * xlogx(gam[i])
                if want_grad:
                    gp[i] += self.prior_eps * (log(gam[i]) + 1.0)
        elif self.prior_kind == PRIOR_DIRICHLET:
            for i in range(nm):
                a1 = self.alpha[i] - 1.0
                if a1 != 0.0:
                    if gam[i] <= 0.0:
                        return INFINITY
                    u -= a1 * log(gam[i])
                    if want_grad:
                        gp[i] -= a1 / gam[i]
        elif self.prior_kind == PRIOR_GAUSSIAN:
            if self.dense_precision:
                for i in range(nm):
                    x = 0.0
                    for j in range(nm):
                        x += self.precision[i * nm + j] * (gam[j] - self.mean[j])
                    self.pd[i] = x
            else:
                for i in range(nm):
                    self.pd[i] = self.precision[i] * (gam[i] - self.mean[i])
            x = 0.0
            for i in range(nm):
                x += (gam[i] - self.mean[i]) * self.pd[i]
                if want_grad:
                    gp[i] += self.pd[i]
            u += 0.5 * x
        elif self.prior_kind == PRIOR_TSALLIS:
            x = 0.0
            for i in range(nm):
                x += pow(gam[i], self.q)
                if want_grad:
                    gp[i] += self.prior_eps * self.q / (self.q - 1.0) * pow(gam[i], self.q - 1.0)
            u += self.prior_eps / (self.q - 1.0) * (x - 1.0)

        if self.barrier_kind == BARRIER_ENTROPY:
            x = 0.0
            for i in range(nm):
                x += xlogx(gam[i])
                if want_grad:
                    gp[i] += self.barrier_eps * (log(gam[i]) + 1.0)
            u += self.barrier_eps * x

        if not isfinite(u):
            return INFINITY

        # likelihood
        for k in range(self.K):
            x = 0.0
            for i in range(nm):
                x += self.costs[k, i] * gam[i]
            self.ot[k] = x
        if self.condition == FORALL:
            u += self.ot[0]
            if want_grad:
                for i in range(nm):
                    gp[i] += self.costs[0, i]
        else:
            lo = self.ot[0]
            for k in range(1, self.K):
                if self.ot[k] < lo:
                    lo = self.ot[k]
            total = 0.0
            for k in range(self.K):
                self.ot[k] = exp(lo - self.ot[k])
                total += self.ot[k]
            u += lo - log(total)
            if want_grad:
                for k in range(self.K):
                    w = self.ot[k] / total
                    for i in range(nm):
                        gp[i] += w * self.costs[k, i]

        if want_grad:
            self._adjoint(gp, grad)
            for i in range(self.dim):
                if not isfinite(grad[i]):
                    return INFINITY
        if not isfinite(u):
            return INFINITY
        return u

    def plan(self, theta):
        cdef double[::1] t = np.ascontiguousarray(theta, dtype=np.float64).ravel()
        out = np.empty(self.n * self.m)
        self._plan(t, out)
        return out

    def potential(self, theta):
        cdef double[::1] t = np.ascontiguousarray(theta, dtype=np.float64).ravel()
        return self._energy(t, self.tmpv, False)

    def potential_grad(self, theta, double[::1] grad_out):
        cdef double[::1] t = np.ascontiguousarray(theta, dtype=np.float64).ravel()
        cdef double[::1] g = np.empty(max(self.dim, 1))
        cdef double u = self._energy(t, g, True)
        cdef int i
        if isfinite(u):
            for i in range(self.dim):
                grad_out[i] = g[i]
        return u

    # -- integrator ----------------------------------------------------
    cdef int _drift(self, double[::1] theta, double[::1] p,
                    const double[::1] inv_mass, double tau, bint reflect,
                    int budget, int* count) noexcept nogil:
        cdef int d = self.dim, nm = self.n * self.m, n = self.n, m = self.m
        cdef int i, hit = -1, hi, hj, a, b
        cdef double remaining = tau, t_hit, t, num, den
        cdef double[::1] gam = self.gam
        cdef double[::1] rate = self.rate
        cdef double[::1] v = self.tmpv
        for i in range(d):
            v[i] = inv_mass[i] * p[i]
        if not reflect:
            for i in range(d):
                theta[i] += tau * v[i]
            return 0
        while True:
            self._plan(theta, gam)
            if hit >= 0:
                gam[hit] = 0.0
            self._embed(v, rate)
            t_hit = INFINITY
            hit = -1
            for i in range(nm):
                if rate[i] < 0.0:
                    t = (gam[i] if gam[i] > 0.0 else 0.0) / -rate[i]
                    if t < t_hit:
                        t_hit = t
                        hit = i
            if hit < 0 or t_hit >= remaining:
                for i in range(d):
                    theta[i] += remaining * v[i]
                return 0
            count[0] += 1
            if count[0] > budget:
                return 1
            for i in range(d):
                theta[i] += t_hit * v[i]
            remaining -= t_hit
            hi = hit // m
            hj = hit % m
            # facet normal in chart coordinates, applied implicitly
            num = 0.0
            den = 0.0
            for a in range(n - 1):
                for b in range(m - 1):
                    if hi < n - 1 and hj < m - 1:
                        t = 1.0 if (a == hi and b == hj) else 0.0
                    elif hi < n - 1:
                        t = -1.0 if a == hi else 0.0
                    elif hj < m - 1:
                        t = -1.0 if b == hj else 0.0
                    else:
                        t = 1.0
                    if t != 0.0:
                        num += t * v[a * (m - 1) + b]
                        den += t * t * inv_mass[a * (m - 1) + b]
            num = 2.0 * num / den
            for a in range(n - 1):
                for b in range(m - 1):
                    if hi < n - 1 and hj < m - 1:
                        t = 1.0 if (a == hi and b == hj) else 0.0
                    elif hi < n - 1:
                        t = -1.0 if a == hi else 0.0
                    elif hj < m - 1:
                        t = -1.0 if b == hj else 0.0
                    else:
                        t = 1.0
                    if t != 0.0:
                        p[a * (m - 1) + b] -= num * t
            for i in range(d):
                v[i] = inv_mass[i] * p[i]

    def trajectory(self, double[::1] theta, double[::1] p, double[::1] grad,
                   double step, int n_steps, const double[::1] inv_mass,
                   bint reflect, int max_reflections):
        cdef int s, i, status = 0, total = 0, count
        cdef double u = 0.0
        cdef double[::1] g = np.empty(max(self.dim, 1))
        if n_steps == 0:
            return self.potential(np.asarray(theta)), 0, 0
        with nogil:
            for s in range(n_steps):
                for i in range(self.dim):
                    p[i] -= 0.5 * step * grad[i]
                count = 0
                status = self._drift(theta, p, inv_mass, step, reflect,
                                     max_reflections - total, &count)
                total += count
                if status != 0:
                    u = INFINITY
                    break
                u = self._energy(theta, g, True)
                if not isfinite(u):
                    u = INFINITY
                    status = 1
                    break
                for i in range(self.dim):
                    grad[i] = g[i]
                    p[i] -= 0.5 * step * grad[i]
        return u, status, total


def sinkhorn_log(double[:, ::1] cost, const double[::1] mu, const double[::1] nu,
                 double eps, double[::1] f, double[::1] g, double tol, long max_iter):
    cdef int n = cost.shape[0], m = cost.shape[1], i, j
    cdef long it = 0
    cdef double smax, acc, s, residual = INFINITY, r
    cdef double[::1] log_mu = np.log(np.asarray(mu))
    cdef double[::1] log_nu = np.log(np.asarray(nu))
    with nogil:
        while it < max_iter:
            it += 1
            for i in range(n):
                smax = -INFINITY
                for j in range(m):
                    s = (g[j] - cost[i, j]) / eps
                    if s > smax:
                        smax = s
                acc = 0.0
                for j in range(m):
                    acc += exp((g[j] - cost[i, j]) / eps - smax)
                f[i] = eps * (log_mu[i] - smax - log(acc))
            for j in range(m):
                smax = -INFINITY
                for i in range(n):
                    s = (f[i] - cost[i, j]) / eps
                    if s > smax:
                        smax = s
                acc = 0.0
                for i in range(n):
                    acc += exp((f[i] - cost[i, j]) / eps - smax)
                g[j] = eps * (log_nu[j] - smax - log(acc))
            residual = 0.0
            for i in range(n):
                acc = 0.0
                for j in range(m):
                    acc += exp((f[i] + g[j] - cost[i, j]) / eps)
                r = fabs(acc - mu[i])
                if r > residual:
                    residual = r
            if residual <= tol:
                break
    return it, residual

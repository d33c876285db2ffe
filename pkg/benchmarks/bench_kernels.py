"""Compare the compiled and numpy kernel backends.

Times the two inner loops: a leapfrog trajectory on posterior targets of
several sizes, and log-domain Sinkhorn.  Run from the repository root:

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from bayesot import _backend
from bayesot.polytope import as_measure
from bayesot.posterior import PosteriorSpec, compile_target
from bayesot.priors import Prior


def _spec(n, m, condition, rng):
    mu = rng.dirichlet(np.full(n, 5.0))
    nu = rng.dirichlet(np.full(m, 5.0))
    ens = rng.uniform(0, 1, (8, n, m))
    return PosteriorSpec.build(mu, nu, ens, Prior.entropy(0.1), condition)


def bench_trajectory(backend, n, m, condition, repeat, steps=256):
    rng = np.random.default_rng(0)
    spec = _spec(n, m, condition, rng)
    target = compile_target(spec, backend)
    d = spec.dim
    best = np.inf
    for _ in range(repeat):
        theta = np.zeros(d)
        p = 1e-3 * rng.standard_normal(d)
        grad = np.zeros(d)
        target.potential_grad(theta, grad)
        t0 = time.perf_counter()
        target.trajectory(theta, p, grad, 1e-3, steps, np.ones(d), True, 1000)
        best = min(best, time.perf_counter() - t0)
    return best / steps


def bench_sinkhorn(backend, n, repeat, eps=1e-2):
    mod = _backend.load(backend)
    rng = np.random.default_rng(1)
    cost = np.ascontiguousarray(rng.uniform(0, 1, (n, n)))
    mu = as_measure(rng.dirichlet(np.full(n, 5.0))).weights.copy()
    nu = as_measure(rng.dirichlet(np.full(n, 5.0))).weights.copy()
    best, iters = np.inf, 0
    for _ in range(repeat):
        f, g = np.zeros(n), np.zeros(n)
        t0 = time.perf_counter()
        iters, _ = mod.sinkhorn_log(cost, mu, nu, eps, f, g, 1e-9, 100_000)
        best = min(best, time.perf_counter() - t0)
    return best / iters


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = _backend.available()
    print(f"backends: {', '.join(backends)}")
    print(f"{'kernel':<32}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    rows = []
    for n, m in [(2, 2), (5, 4), (10, 10), (30, 30)]:
        for cond in ("forall", "exists"):
            name = f"leapfrog step {n}x{m} {cond}"
            rows.append((name, [bench_trajectory(b, n, m, cond, args.repeat) for b in backends]))
    for n in (10, 50, 200):
        rows.append((f"sinkhorn iteration {n}x{n}", [bench_sinkhorn(b, n, args.repeat) for b in backends]))
    for name, times in rows:
        line = f"{name:<32}" + "".join(f"{t * 1e6:>12.2f}us" for t in times)
        if len(times) == 2:
            line += f"{times[1] / times[0]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()

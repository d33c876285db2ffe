"""Hamiltonian Monte Carlo over chart coordinates.

The sampler targets ``exp(-Q(theta))`` where ``Q`` is a negative
log-posterior from :mod:`bayesot.posterior`.  Momentum lives on the chart, so
every state satisfies the marginal constraints by construction; only
positivity has to be handled.  Two boundary treatments are available:

``"reflect"`` (default)
    the drift is linear between kicks, so the exact time at which an entry of
    the plan reaches zero is known; the momentum is reflected off that facet
    under the mass metric.  This is volume preserving and reversible.
``"reject"``
    a trajectory that leaves the polytope is a divergent proposal and is
    rejected, as with the entropy barrier acting alone.

Trajectories also count as divergent when the reflection budget is exhausted
or the energy becomes non-finite.
"""
from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .polytope import TransportPlan, as_measure, axis_distances, chart_from_plan
from .posterior import PosteriorSpec, compile_target, reduce_support

log = logging.getLogger(__name__)

BOUNDARIES = ("reflect", "reject")
INIT_ATTEMPTS = 100
MAX_STEP_SEARCH = 60


class InitializationError(RuntimeError):
    pass


@dataclass(frozen=True)
class HmcConfig:
    step_size: float = 1e-4
    n_leapfrog: int = 32
    n_warmup: int = 1000
    n_samples: int = 1000
    n_chains: int = 4
    target_accept: float = 0.8
    seed: int = 0
    mass: tuple | None = None
    boundary: str = "reflect"
    max_reflections: int = 100
    adapt_step: bool = True
    adapt_mass: bool = False

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.n_leapfrog < 1:
            raise ValueError("n_leapfrog must be at least 1")
        if self.n_warmup < 0:
            raise ValueError("n_warmup must be nonnegative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.n_chains < 1:
            raise ValueError("n_chains must be at least 1")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if self.max_reflections < 0:
            raise ValueError("max_reflections must be nonnegative")
        if self.mass is not None:
            mass = tuple(float(x) for x in np.ravel(self.mass))
            if not all(x > 0 and math.isfinite(x) for x in mass):
                raise ValueError("mass entries must be positive")
            object.__setattr__(self, "mass", mass)

    def mass_for(self, dim: int) -> np.ndarray:
        if self.mass is None:
            return np.ones(dim)
        mass = np.asarray(self.mass, dtype=float)
        if mass.size == 1:
            return np.full(dim, mass[0])
        if mass.size != dim:
            raise ValueError(f"mass has {mass.size} entries, chart has {dim}")
        return mass.copy()

    def to_dict(self):
        d = asdict(self)
        d["mass"] = None if self.mass is None else list(self.mass)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("mass") is not None:
            d["mass"] = tuple(d["mass"])
        return cls(**d)


# -- per-thread kernel targets ---------------------------------------------

_local = threading.local()


def _target(spec: PosteriorSpec, backend=None):
    cache = getattr(_local, "cache", None)
    if cache is None:
        cache = _local.cache = weakref.WeakKeyDictionary()
    per_spec = cache.setdefault(spec, {})
    if backend not in per_spec:
        per_spec[backend] = compile_target(spec, backend)
    return per_spec[backend]


def _flat(theta, spec):
    k, l = spec.chart_shape
    t = np.array(theta, dtype=float).reshape(-1)
    if t.size != k * l:
        raise ValueError(f"theta has {t.size} entries, chart has {k * l}")
    return t


# -- energies and integrator -------------------------------------------------

def kinetic_energy(momentum, mass=None) -> float:
    p = np.ravel(momentum)
    m = np.ones_like(p) if mass is None else np.broadcast_to(np.ravel(mass), p.shape)
    return 0.5 * float(np.sum(p * p / m))


def hamiltonian(spec: PosteriorSpec, theta, momentum, mass=None, backend=None) -> float:
    """``Q(theta) + 0.5 * sum(p**2 / mass)``; ``+inf`` off the polytope."""
    u = _target(spec, backend).potential(_flat(theta, spec))
    if not math.isfinite(u):
        return math.inf
    return u + kinetic_energy(momentum, mass)


class LeapfrogResult(NamedTuple):
    theta: np.ndarray
    momentum: np.ndarray
    divergent: bool
    potential: float
    reflections: int


def leapfrog(spec: PosteriorSpec, theta, momentum, step_size: float, n_steps: int,
             mass=None, boundary: str = "reflect", max_reflections: int = 100,
             backend=None) -> LeapfrogResult:
    """Integrate ``n_steps`` half-kick/drift/half-kick steps from ``(theta, momentum)``."""
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}")
    target = _target(spec, backend)
    shape = spec.chart_shape
    t = _flat(theta, spec)
    p = np.array(momentum, dtype=float).reshape(-1)
    inv_mass = 1.0 / (np.ones_like(t) if mass is None else
                      np.broadcast_to(np.ravel(mass), t.shape).astype(float))
    grad = np.zeros_like(t)
    u = target.potential_grad(t, grad)
    if not math.isfinite(u):
        return LeapfrogResult(t.reshape(shape), p.reshape(shape), True, math.inf, 0)
    if n_steps > 0:
        u, status, refl = target.trajectory(
            t, p, grad, float(step_size), int(n_steps), np.ascontiguousarray(inv_mass),
            boundary == "reflect", int(max_reflections),
        )
    else:
        status, refl = 0, 0
    return LeapfrogResult(t.reshape(shape), p.reshape(shape), status != 0, u, refl)


def accept_probability(delta_h: float) -> float:
    """Metropolis probability ``min(1, exp(-delta_h))``; zero for NaN or ``+inf``."""
    if math.isnan(delta_h):
        return 0.0
    if delta_h <= 0:
        return 1.0
    return math.exp(-delta_h)


class Transition(NamedTuple):
    theta: np.ndarray
    accepted: bool
    delta_H: float
    accept_prob: float
    divergent: bool
    reflections: int


class _Chain:
    """Sequential HMC state for one chain; not shared between threads."""

    def __init__(self, target, theta, mass, config: HmcConfig, rng):
        self.target = target
        self.theta = np.array(theta, dtype=float)
        self.mass = np.asarray(mass, dtype=float)
        self.inv_mass = 1.0 / self.mass
        self.sqrt_mass = np.sqrt(self.mass)
        self.config = config
        self.rng = rng
        self.grad = np.zeros_like(self.theta)
        self.u = target.potential_grad(self.theta, self.grad)
        if not math.isfinite(self.u):
            raise InitializationError("starting point has no finite energy and gradient")
        self._p = np.empty_like(self.theta)
        self._t = np.empty_like(self.theta)
        self._g = np.empty_like(self.theta)

    def set_mass(self, mass):
        self.mass = np.asarray(mass, dtype=float)
        self.inv_mass = 1.0 / self.mass
        self.sqrt_mass = np.sqrt(self.mass)

    def step(self, step_size: float, n_steps: int | None = None) -> Transition:
        cfg = self.config
        n_steps = cfg.n_leapfrog if n_steps is None else n_steps
        p = self._p
        p[:] = self.rng.standard_normal(self.theta.size) * self.sqrt_mass
        h0 = self.u + 0.5 * float(np.dot(p * self.inv_mass, p))
        t, g = self._t, self._g
        t[:] = self.theta
        g[:] = self.grad
        u, status, refl = self.target.trajectory(
            t, p, g, step_size, n_steps, self.inv_mass,
            cfg.boundary == "reflect", cfg.max_reflections,
        )
        divergent = status != 0 or not math.isfinite(u)
        if divergent:
            dh = math.inf
        else:
            dh = u + 0.5 * float(np.dot(p * self.inv_mass, p)) - h0
        a = accept_probability(dh)
        accepted = a >= 1.0 or (a > 0.0 and self.rng.random() < a)
        if accepted:
            self.theta, self._t = t, self.theta
            self.grad, self._g = g, self.grad
            self.u = u
        return Transition(self.theta, accepted, dh, a, divergent, refl)


def hmc_transition(spec: PosteriorSpec, theta, config: HmcConfig, rng,
                   step_size: float | None = None, backend=None) -> Transition:
    """One HMC transition from ``theta`` using generator ``rng``.

    Returns the next state (``theta`` itself on rejection) with the energy
    error and acceptance probability of the proposal.
    """
    target = _target(spec, backend)
    chain = _Chain(target, _flat(theta, spec), config.mass_for(spec.dim), config, rng)
    tr = chain.step(config.step_size if step_size is None else float(step_size))
    return tr._replace(theta=np.array(tr.theta).reshape(spec.chart_shape))


class DualAveraging:
    """Step-size adaptation toward a target mean acceptance probability."""

    def __init__(self, step_size: float, target: float = 0.8, gamma: float = 0.05,
                 t0: float = 10.0, kappa: float = 0.75):
        self.mu = math.log(10.0 * step_size)
        self.target = target
        self.gamma, self.t0, self.kappa = gamma, t0, kappa
        self.t = 0
        self.h_bar = 0.0
        self.log_step = math.log(step_size)
        self.log_step_bar = 0.0

    @property
    def step_size(self) -> float:
        return math.exp(self.log_step)

    @property
    def final_step_size(self) -> float:
        return math.exp(self.log_step_bar) if self.t else self.step_size

    def update(self, accept_prob: float) -> float:
        self.t += 1
        w = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob)
        self.log_step = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        eta = self.t ** -self.kappa
        self.log_step_bar = eta * self.log_step + (1.0 - eta) * self.log_step_bar
        return self.step_size


def _initial_step(chain: _Chain, step: float) -> float:
    """Double or halve ``step`` until a single leapfrog step accepts near 1/2."""
    theta, grad, u = chain.theta.copy(), chain.grad.copy(), chain.u
    state = chain.rng.bit_generator.state

    def prob(eps):
        p = chain.rng.standard_normal(theta.size) * chain.sqrt_mass
        h0 = u + 0.5 * float(np.dot(p * chain.inv_mass, p))
        t, g = theta.copy(), grad.copy()
        u1, status, _ = chain.target.trajectory(
            t, p, g, eps, 1, chain.inv_mass, chain.config.boundary == "reflect",
            chain.config.max_reflections,
        )
        if status != 0 or not math.isfinite(u1):
            return 0.0
        return accept_probability(u1 + 0.5 * float(np.dot(p * chain.inv_mass, p)) - h0)

    a = prob(step)
    direction = 1 if a > 0.5 else -1
    for _ in range(MAX_STEP_SEARCH):
        if (a > 0.5) != (direction > 0):
            break
        step *= 2.0 ** direction
        a = prob(step)
    chain.rng.bit_generator.state = state
    return step


def _mass_from_draws(draws: np.ndarray) -> np.ndarray:
    n = draws.shape[0]
    var = draws.var(axis=0, ddof=1)
    # shrink toward a small isotropic value, as in common warmup schemes
    var = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0)) * max(float(var.mean()), 1e-12)
    return 1.0 / var


# -- sample container ------------------------------------------------------

@dataclass(eq=False)
class SampleSet:
    """Post-warmup draws of chart coordinates.

    ``draws`` has shape ``(chains, samples, n-1, m-1)`` in the chart of
    ``base``.
    """

    draws: np.ndarray
    accept_rate: np.ndarray
    step_size: np.ndarray
    n_divergent: np.ndarray
    base: TransportPlan
    config: dict = field(default_factory=dict)
    _plans: np.ndarray | None = field(default=None, repr=False)
    _diagnostics: dict | None = field(default=None, repr=False)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_samples(self) -> int:
        return self.draws.shape[1]

    @property
    def plans(self) -> np.ndarray:
        """Draws mapped to plans, shape ``(chains, samples, n, m)``."""
        if self._plans is None:
            c, s = self.draws.shape[:2]
            t = self.draws
            g = np.broadcast_to(self.base.entries, (c, s) + self.base.shape).copy()
            g[..., :-1, :-1] += t
            g[..., :-1, -1] -= t.sum(axis=-1)
            g[..., -1, :-1] -= t.sum(axis=-2)
            g[..., -1, -1] += t.sum(axis=(-2, -1))
            # entries on zero-mass atoms vanish on the polytope; drop rounding residue
            g[..., self.base.mu.weights == 0, :] = 0.0
            g[..., self.base.nu.weights == 0] = 0.0
            g.setflags(write=False)
            self._plans = g
        return self._plans

    @property
    def diagnostics(self) -> dict:
        if self._diagnostics is None:
            self._diagnostics = diagnostics(self)
        return self._diagnostics

    def to_dict(self) -> dict:
        return {
            "format": "bayesot.samples/1",
            "shape": list(self.base.shape),
            "mu": self.base.mu.weights.tolist(),
            "nu": self.base.nu.weights.tolist(),
            "base": self.base.entries.tolist(),
            "draws": self.draws.tolist(),
            "accept_rate": self.accept_rate.tolist(),
            "step_size": self.step_size.tolist(),
            "n_divergent": self.n_divergent.tolist(),
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d) -> "SampleSet":
        mu, nu = as_measure(d["mu"]), as_measure(d["nu"])
        n, m = d["shape"]
        base = TransportPlan(np.asarray(d["base"], dtype=float).reshape(n, m), mu, nu)
        draws = np.asarray(d["draws"], dtype=float)
        if d.get("draw_space", "chart") == "plan":
            plans = draws.reshape(draws.shape[:2] + (n, m))
            draws = (plans - base.entries)[..., :-1, :-1]
        draws = draws.reshape(draws.shape[:2] + (n - 1, m - 1))
        return cls(
            draws=draws,
            accept_rate=np.asarray(d["accept_rate"], dtype=float),
            step_size=np.asarray(d["step_size"], dtype=float),
            n_divergent=np.asarray(d["n_divergent"], dtype=np.int64),
            base=base,
            config=dict(d.get("config", {})),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "SampleSet":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def identical_to(self, other: "SampleSet") -> bool:
        return (
            self.draws.shape == other.draws.shape
            and np.array_equal(self.draws, other.draws)
            and np.array_equal(self.accept_rate, other.accept_rate)
            and np.array_equal(self.step_size, other.step_size)
            and np.array_equal(self.n_divergent, other.n_divergent)
            and np.array_equal(self.base.entries, other.base.entries)
        )


# -- running chains ----------------------------------------------------------

def _thread_cap(n_chains: int) -> int:
    env = os.environ.get("BAYESOT_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"BAYESOT_THREADS must be an integer, got {env!r}") from None
        return max(1, min(cap, n_chains))
    return max(1, min(n_chains, os.cpu_count() or 1))


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    """Independent stream for ``chain``; unaffected by the number of chains."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chain,))))


def _initial_point(target, base, rng, attempts=INIT_ATTEMPTS):
    delta = 0.1 * axis_distances(base).ravel()
    grad = np.zeros(delta.size)
    for _ in range(attempts):
        theta = delta * rng.standard_normal(delta.size)
        if math.isfinite(target.potential_grad(theta, grad)):
            return theta
    raise InitializationError(
        f"no feasible starting point with finite gradient after {attempts} jittered attempts"
    )


def _run_chain(spec, config: HmcConfig, chain_id: int, backend, init, progress):
    rng = chain_rng(config.seed, chain_id)
    target = compile_target(spec, backend)
    if init is None:
        theta0 = _initial_point(target, spec.base, rng)
    else:
        theta0 = _flat(init, spec)
    mass = config.mass_for(spec.dim)
    chain = _Chain(target, theta0, mass, config, rng)

    step = config.step_size
    n_warm = config.n_warmup
    if config.adapt_step and n_warm > 0:
        step = _initial_step(chain, step)
        da = DualAveraging(step, config.target_accept)
        # mass is re-estimated once, from the middle of warmup
        window = (int(0.15 * n_warm), int(0.75 * n_warm)) if config.adapt_mass else None
        collected = []
        for it in range(n_warm):
            tr = chain.step(da.step_size)
            da.update(tr.accept_prob)
            if window and window[0] <= it < window[1]:
                collected.append(chain.theta.copy())
                if it == window[1] - 1 and len(collected) > 10:
                    chain.set_mass(_mass_from_draws(np.array(collected)))
                    step = _initial_step(chain, da.step_size)
                    da = DualAveraging(step, config.target_accept)
            if progress:
                progress(chain_id, it + 1, n_warm + config.n_samples, tr.accepted)
        step = da.final_step_size
    else:
        for it in range(n_warm):
            tr = chain.step(step)
            if progress:
                progress(chain_id, it + 1, n_warm + config.n_samples, tr.accepted)

    draws = np.empty((config.n_samples, spec.dim))
    accepted = 0
    divergent = 0
    for s in range(config.n_samples):
        tr = chain.step(step)
        accepted += tr.accepted
        divergent += tr.divergent
        draws[s] = chain.theta
        if progress:
            progress(chain_id, n_warm + s + 1, n_warm + config.n_samples, tr.accepted)
    return draws, accepted / config.n_samples, step, divergent


def run_chains(spec: PosteriorSpec, config: HmcConfig | None = None, *, backend=None,
               init=None, progress: Callable | None = None) -> SampleSet:
    """Run ``config.n_chains`` independent chains and collect post-warmup draws.

    Atoms of zero mass are removed before sampling and their plan rows and
    columns stay at zero.  Results depend only on ``(spec, config)``, not on
    thread scheduling.  ``progress(chain, iteration, total, accepted)`` is
    called after every transition, possibly from worker threads.
    """
    config = config or HmcConfig()
    reduced, rows, cols = reduce_support(spec)
    c, s = config.n_chains, config.n_samples
    k, l = spec.chart_shape
    meta = config.to_dict()

    if reduced.dim == 0:
        draws_full = np.zeros((c, s, k, l))
        if k * l:
            draws_full[:] = chart_from_plan(_embed(reduced.base.entries, spec, rows, cols), spec.base)
        return SampleSet(draws_full, np.ones(c), np.zeros(c), np.zeros(c, dtype=np.int64),
                         spec.base, meta)

    if init is not None and reduced is not spec:
        raise ValueError("explicit init is not supported for measures with zero-mass atoms")

    def work(i):
        return _run_chain(reduced, config, i, backend, init, progress)

    workers = _thread_cap(c)
    if workers == 1:
        results = [work(i) for i in range(c)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, range(c)))

    kr, lr = reduced.chart_shape
    draws = np.stack([r[0] for r in results]).reshape(c, s, kr, lr)
    if reduced is not spec:
        draws = _lift(draws, reduced, spec, rows, cols)
    return SampleSet(
        draws=draws,
        accept_rate=np.array([r[1] for r in results]),
        step_size=np.array([r[2] for r in results]),
        n_divergent=np.array([r[3] for r in results], dtype=np.int64),
        base=spec.base,
        config=meta,
    )


def _embed(g_red, spec, rows, cols):
    g = np.zeros(g_red.shape[:-2] + spec.shape)
    g[..., rows[:, None], cols[None, :]] = g_red
    return TransportPlan(g, spec.base.mu, spec.base.nu) if g.ndim == 2 else g


def _lift(draws, reduced, spec, rows, cols):
    tmp = SampleSet(draws, np.zeros(1), np.zeros(1), np.zeros(1), reduced.base)
    plans = _embed(tmp.plans, spec, rows, cols)
    return (plans - spec.base.entries)[..., :-1, :-1]


# -- diagnostics -------------------------------------------------------------

def _autocorr(x: np.ndarray) -> np.ndarray:
    """Autocorrelation of each row of ``x`` via FFT."""
    n = x.shape[-1]
    xc = x - x.mean(axis=-1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[..., :n] / n
    return acov


def effective_sample_size(x) -> float:
    """Multi-chain ESS of ``x`` with shape ``(chains, draws)``.

    Autocorrelations are summed in consecutive pairs until the first negative
    pair; the integrated time is floored at ``1 / log10(N)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    c, n = x.shape
    total = c * n
    if n < 4:
        return float(total)
    acov = _autocorr(x)
    var_within = acov[:, 0] * n / (n - 1.0)
    w = var_within.mean()
    if not w > 0:
        return float(total)
    means = x.mean(axis=1)
    var_plus = w * (n - 1.0) / n + (means.var(ddof=1) if c > 1 else 0.0)
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    tau = -1.0
    k = 0
    while k + 1 < n:
        pair = rho[k] + rho[k + 1]
        if pair < 0:
            break
        tau += 2.0 * pair
        k += 2
    tau = max(tau, 1.0 / math.log10(total))
    return float(total / tau)


def split_rhat(x) -> float | None:
    """Split-chain potential scale reduction; ``None`` with fewer than two chains."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    c, n = x.shape
    if c < 2 or n < 4:
        return None
    half = n // 2
    halves = np.concatenate([x[:, :half], x[:, n - half:]], axis=0)
    means = halves.mean(axis=1)
    w = halves.var(axis=1, ddof=1).mean()
    b = half * means.var(ddof=1)
    if not w > 0:
        return 1.0 if not b > 0 else math.inf
    var_plus = (half - 1.0) / half * w + b / half
    return float(math.sqrt(var_plus / w))


def diagnostics(samples: SampleSet) -> dict:
    """ESS and split-R-hat per chart coordinate plus per-chain acceptance."""
    c, s = samples.draws.shape[:2]
    flat = samples.draws.reshape(c, s, -1)
    ess = [effective_sample_size(flat[:, :, d]) for d in range(flat.shape[2])]
    if c >= 2:
        rhat = [split_rhat(flat[:, :, d]) for d in range(flat.shape[2])]
    else:
        rhat = None
    return {
        "ess": ess,
        "potential_scale_reduction": rhat,
        "accept_rate": samples.accept_rate.tolist(),
        "step_size": samples.step_size.tolist(),
        "n_divergent": samples.n_divergent.tolist(),
        "n_chains": c,
        "n_samples": s,
    }


# -- summaries ---------------------------------------------------------------

QUANTILES = (2.5, 25.0, 50.0, 75.0, 97.5)


@dataclass(frozen=True, eq=False)
class Summary:
    mean: np.ndarray
    std: np.ndarray
    quantiles: dict
    edges: np.ndarray
    histograms: np.ndarray
    n_draws: int

    def rows(self):
        n, m = self.mean.shape
        for i in range(n):
            for j in range(m):
                row = {"i": i, "j": j, "mean": float(self.mean[i, j]), "std": float(self.std[i, j])}
                for q in QUANTILES:
                    row[f"q{q:g}"] = float(self.quantiles[q][i, j])
                yield row

    def histogram(self, i, j):
        e = self.edges[i, j]
        return e[:-1], e[1:], self.histograms[i, j]

    def to_dict(self):
        return {
            "n_draws": self.n_draws,
            "entries": list(self.rows()),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        }


def summarize(samples: SampleSet | np.ndarray, base: TransportPlan | None = None,
              bins: int = 50) -> Summary:
    """Per-entry posterior summaries pooled over chains.

    ``samples`` is a :class:`SampleSet` or an array of plans ``(..., n, m)``.
    Histograms of entry ``(i, j)`` span ``[0, min(mu_i, nu_j)]`` and hold bin
    masses that sum to one.
    """
    if bins < 1:
        raise ValueError("bins must be at least 1")
    if isinstance(samples, SampleSet):
        plans = samples.plans
        base = base or samples.base
    else:
        plans = np.asarray(samples, dtype=float)
    if plans.size == 0 or plans.ndim < 2:
        raise ValueError("cannot summarize an empty sample set")
    n, m = plans.shape[-2:]
    g = plans.reshape(-1, n, m)
    count = g.shape[0]
    if count == 0:
        raise ValueError("cannot summarize an empty sample set")
    mean = g.mean(axis=0)
    std = g.std(axis=0, ddof=1) if count > 1 else np.zeros((n, m))
    qs = np.percentile(g, QUANTILES, axis=0)
    if base is not None:
        upper = np.minimum.outer(base.mu.weights, base.nu.weights)
    else:
        upper = g.max(axis=0)
    edges = np.empty((n, m, bins + 1))
    hist = np.empty((n, m, bins))
    for i in range(n):
        for j in range(m):
            hi = upper[i, j] if upper[i, j] > 0 else 1.0
            e = np.linspace(0.0, hi, bins + 1)
            h, _ = np.histogram(np.clip(g[:, i, j], 0.0, hi), bins=e)
            edges[i, j] = e
            hist[i, j] = h / count
    return Summary(mean, std, {q: qs[k] for k, q in enumerate(QUANTILES)}, edges, hist, count)


class ProgressReporter:
    """Draws/second and running acceptance, written to a text stream."""

    def __init__(self, stream, n_chains, every: float = 1.0):
        self.stream = stream
        self.every = every
        self.start = time.monotonic()
        self.last = self.start
        self.done = [0] * n_chains
        self.accepted = [0] * n_chains
        self.lock = threading.Lock()

    def __call__(self, chain, iteration, total, accepted):
        with self.lock:
            self.done[chain] = iteration
            self.accepted[chain] += bool(accepted)
            now = time.monotonic()
            if now - self.last < self.every and iteration < total:
                return
            self.last = now
            n = sum(self.done)
            rate = n / max(now - self.start, 1e-9)
            acc = sum(self.accepted) / max(n, 1)
            self.stream.write(f"[bayesot] {n} transitions, {rate:.0f}/s, accept {acc:.3f}\n")
            self.stream.flush()

"""Two-state toy problem with a closed-form posterior.

Uniform marginals on two atoms and the two cost matrices ``A`` and ``B``
below average to the all-five matrix, under which every coupling is optimal.
The chart has the single coordinate ``theta`` in ``[-1/4, 1/4]`` with
``<A, plan> = 5 - 20 theta`` and ``<B, plan> = 5 + 20 theta``.  Under the
``exists`` condition with a uniform prior the density is proportional to
``cosh(20 theta)``; under ``forall`` it is flat.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .hmc import HmcConfig, run_chains
from .posterior import PosteriorSpec
from .priors import Prior

A = np.array([[0.0, 10.0], [10.0, 0.0]])
B = np.array([[10.0, 0.0], [0.0, 10.0]])
HALF_WIDTH = 0.25
SLOPE = 20.0
GRID_POINTS = 400
BINS = 20


def toy_spec(condition: str = "exists", prior: Prior | None = None,
             cost_scale: float = 1.0) -> PosteriorSpec:
    return PosteriorSpec.build([0.5, 0.5], [0.5, 0.5], [A, B], prior or Prior.uniform(),
                               condition, cost_scale)


def density(theta, condition: str = "exists", cost_scale: float = 1.0) -> np.ndarray:
    """Normalized closed-form posterior density on ``[-1/4, 1/4]``."""
    t = np.asarray(theta, dtype=float)
    inside = np.abs(t) <= HALF_WIDTH
    if condition == "forall":
        return np.where(inside, 1.0 / (2 * HALF_WIDTH), 0.0)
    k = SLOPE * cost_scale
    z = 2.0 * math.sinh(k * HALF_WIDTH) / k
    return np.where(inside, np.cosh(k * t) / z, 0.0)


def cdf(theta, condition: str = "exists", cost_scale: float = 1.0) -> np.ndarray:
    t = np.clip(np.asarray(theta, dtype=float), -HALF_WIDTH, HALF_WIDTH)
    if condition == "forall":
        return (t + HALF_WIDTH) / (2 * HALF_WIDTH)
    k = SLOPE * cost_scale
    s = math.sinh(k * HALF_WIDTH)
    return (np.sinh(k * t) + s) / (2.0 * s)


def grid_bin_masses(edges, condition: str = "exists", cost_scale: float = 1.0,
                    points: int = GRID_POINTS) -> np.ndarray:
    """Bin masses of the closed form by trapezoid quadrature on a uniform grid."""
    grid = np.linspace(-HALF_WIDTH, HALF_WIDTH, points)
    dens = density(grid, condition, cost_scale)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cum /= cum[-1]
    return np.diff(np.interp(edges, grid, cum))


def tv_distance(draws, condition: str = "exists", bins: int = BINS,
                cost_scale: float = 1.0) -> float:
    edges = np.linspace(-HALF_WIDTH, HALF_WIDTH, bins + 1)
    h, _ = np.histogram(np.clip(draws, -HALF_WIDTH, HALF_WIDTH), bins=edges)
    return 0.5 * float(np.abs(h / h.sum() - grid_bin_masses(edges, condition, cost_scale)).sum())


def ks_statistic(draws, condition: str = "exists", cost_scale: float = 1.0) -> float:
    return float(stats.kstest(np.ravel(draws), lambda t: cdf(t, condition, cost_scale)).statistic)


def modes(draws, bins: int = BINS):
    """Centers of the most populated bin on each half of the interval."""
    edges = np.linspace(-HALF_WIDTH, HALF_WIDTH, bins + 1)
    h, _ = np.histogram(np.clip(draws, -HALF_WIDTH, HALF_WIDTH), bins=edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    half = bins // 2
    left = centers[int(np.argmax(h[:half]))]
    right = centers[half + int(np.argmax(h[half:]))]
    return float(left), float(right)


def is_bimodal(draws, bins: int = BINS, outer: float = 0.2) -> bool:
    """Both half-interval maxima lie in the outer ``outer`` fraction of the interval."""
    left, right = modes(draws, bins)
    edge = HALF_WIDTH - outer * 2 * HALF_WIDTH
    return left <= -edge and right >= edge


def run_toy(condition: str = "exists", config: HmcConfig | None = None, bins: int = BINS,
            backend=None, progress=None):
    """Sample the toy and compare against the closed form.

    Returns ``(samples, report)`` where ``report`` is JSON-serializable.
    """
    config = config or HmcConfig(n_samples=2500)
    spec = toy_spec(condition)
    samples = run_chains(spec, config, backend=backend, progress=progress)
    theta = samples.draws.reshape(-1)
    left, right = modes(theta, bins)
    report = {
        "condition": condition,
        "n_draws": int(theta.size),
        "tv_distance": tv_distance(theta, condition, bins),
        "ks_statistic": ks_statistic(theta, condition),
        "modes": [left, right],
        "bimodal": is_bimodal(theta, bins),
        "accept_rate": samples.accept_rate.tolist(),
        "step_size": samples.step_size.tolist(),
        "seed": config.seed,
        "bins": bins,
        "grid_points": GRID_POINTS,
    }
    return samples, report

import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from bayesot import _backend, schemas
from bayesot.ot_solvers import sinkhorn
from bayesot.polytope import TransportPlan, as_measure, chart_from_plan, independent_coupling
from bayesot.priors import Prior

FIXTURES = Path(__file__).parent / "fixtures"
BACKENDS = _backend.available()

A = np.array([[0.0, 10.0], [10.0, 0.0]])
B = np.array([[10.0, 0.0], [0.0, 10.0]])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def fixtures():
    return FIXTURES


def random_marginals(rng, n, m, conc=3.0):
    return as_measure(rng.dirichlet(np.full(n, conc))), as_measure(rng.dirichlet(np.full(m, conc)))


def interior_theta(rng, base: TransportPlan):
    """Chart coordinates of a random strictly positive plan with ``base``'s marginals."""
    n, m = base.shape
    plan, _ = sinkhorn(rng.uniform(size=(n, m)), base.mu, base.nu, 0.3)
    t = rng.uniform(0.2, 0.9)
    mixed = TransportPlan(t * np.asarray(plan) + (1 - t) * base.entries, base.mu, base.nu)
    return chart_from_plan(mixed, base)


def random_base(rng, n, m):
    mu, nu = random_marginals(rng, n, m)
    return independent_coupling(mu, nu)


def fd_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.abs(b).max(), 1e-8)
    return float(np.abs(a - b).max() / scale)


def all_priors(shape):
    n, m = shape
    rng = np.random.default_rng(n * 10 + m)
    a = rng.normal(size=(n * m, n * m))
    return [
        Prior.uniform(),
        Prior.uniform(barrier="simplex"),
        Prior.entropy(0.7),
        Prior.entropy(2.0, barrier="none"),
        Prior.dirichlet(1.0),
        Prior.dirichlet(rng.uniform(0.5, 3.0, shape)),
        Prior.gaussian(),
        Prior.gaussian(mean=rng.uniform(0, 0.2, shape), precision=rng.uniform(0.5, 2, n * m)),
        Prior.gaussian(precision=a @ a.T + np.eye(n * m), barrier="none"),
        Prior.tsallis(0.5, 0.5),
        Prior.tsallis(1.5, 2.0),
    ]


JSON_SCHEMAS = {
    "solution.json": schemas.SOLUTION,
    "map.json": schemas.MAP,
    "report.json": schemas.REPORT,
    "samples.json": schemas.SAMPLES,
    "summary.json": schemas.SUMMARY,
    "diagnostics.json": schemas.DIAGNOSTICS,
    "toy.json": schemas.TOY,
}
CSV_HEADERS = {
    "plan.csv": schemas.PLAN_CSV_HEADER,
    "summary.csv": schemas.SUMMARY_CSV_HEADER,
    "theta_histogram.csv": schemas.HISTOGRAM_HEADER,
    "density.csv": schemas.DENSITY_HEADER,
}


def validate_artifact(path):
    """Check one CLI output file against its documented schema."""
    path = Path(path)
    name = path.name
    if name in JSON_SCHEMAS:
        with open(path) as fh:
            jsonschema.validate(json.load(fh), JSON_SCHEMAS[name])
        return
    header = schemas.HISTOGRAM_HEADER if name.startswith("gamma_") else CSV_HEADERS[name]
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == header, path
    assert len(rows) > 1
    for r in rows[1:]:
        assert len(r) == len(header)
        [float(x) for x in r]


def brute_force_min(cost, mu, nu, k=99):
    """Minimum transport cost over plans whose free entries are multiples of 1/k.

    With marginals that are multiples of ``1/k`` every vertex of the
    polytope lies on this lattice, so the lattice minimum is the LP optimum.
    """
    cost = np.asarray(cost)
    n, m = cost.shape
    grid = np.arange(k + 1) / k
    best = math.inf
    axes = np.meshgrid(*([grid] * ((n - 1) * (m - 1))), indexing="ij")
    free = np.stack([a.ravel() for a in axes], axis=1).reshape(-1, n - 1, m - 1)
    g = np.zeros((free.shape[0], n, m))
    g[:, :-1, :-1] = free
    g[:, :-1, -1] = mu[:-1] - free.sum(axis=2)
    g[:, -1, :-1] = nu[:-1] - free.sum(axis=1)
    g[:, -1, -1] = 1.0 - g[:, :-1, :].sum(axis=(1, 2)) - g[:, -1, :-1].sum(axis=1)
    ok = np.all(g >= -1e-12, axis=(1, 2))
    vals = np.einsum("kij,ij->k", g[ok], cost)
    best = min(best, vals.min())
    return best, int(free.shape[0])


# acceptance criteria outcomes, reported at the end of the session
ACCEPTANCE: dict = {}


def record_acceptance(number: int, title: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        line = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)

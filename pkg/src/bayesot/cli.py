"""``bayesot`` command-line tool.

Subcommands: ``solve``, ``map``, ``sample``, ``summarize`` and ``toy``.
Settings come from ``--config FILE`` (JSON) and are overridden by flags.
Exit status is 0 on success, 1 for usage or input errors and 2 for numerical
failures (non-convergence, no feasible initialization).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import schemas
from .cost_models import EnsembleFormatError, ensemble_from_json, load_ensemble
from .hmc import HmcConfig, InitializationError, ProgressReporter, SampleSet, run_chains, summarize
from .ot_solvers import ConvergenceError, Regularizer, exact_ot, regularized_ot, sinkhorn
from .polytope import as_measure
from .posterior import CostEnsemble, PosteriorSpec, UnsupportedOperation, map_estimate, map_mapping
from .priors import Prior
from .toy import GRID_POINTS, HALF_WIDTH, density, run_toy

log = logging.getLogger("bayesot")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


class InputError(Exception):
    pass


class NumericalError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# built-in defaults; flags default to None so config values can show through
DEFAULTS = {
    "condition": "forall",
    "cost_scale": 1.0,
    "method": "exact",
    "epsilon": None,
    "tol": 1e-9,
    "max_iter": 100_000,
    "out": ".",
    "format": "json",
    "draws": "chart",
    "bins": 50,
    "prior": "uniform",
    "prior_epsilon": 1.0,
    "alpha": None,
    "q": 0.5,
    "barrier": "entropy",
    "barrier_epsilon": 1e-3,
    "progress": False,
}
COMMAND_DEFAULTS = {
    "toy": {"condition": "exists", "bins": 20, "n_samples": 2500},
}
HMC_KEYS = ("step_size", "n_leapfrog", "n_warmup", "n_samples", "n_chains", "target_accept",
            "seed", "mass", "boundary", "max_reflections", "adapt_mass")


def _problem_args(p):
    p.add_argument("--mu", help="row marginal: JSON array file")
    p.add_argument("--nu", help="column marginal: JSON array file")
    p.add_argument("--ensemble", "--cost", dest="ensemble",
                   help="cost matrix or ensemble file (.json or .csv)")


def _prior_args(p):
    p.add_argument("--prior", choices=["uniform", "entropy", "dirichlet", "gaussian", "tsallis"])
    p.add_argument("--prior-epsilon", type=float, dest="prior_epsilon")
    p.add_argument("--alpha", type=float, help="dirichlet concentration")
    p.add_argument("--q", type=float, help="tsallis exponent")
    p.add_argument("--barrier", choices=["none", "entropy", "simplex"])
    p.add_argument("--barrier-epsilon", type=float, dest="barrier_epsilon")
    p.add_argument("--condition", choices=["forall", "exists"])
    p.add_argument("--cost-scale", type=float, dest="cost_scale")


def _hmc_args(p):
    p.add_argument("--step-size", type=float, dest="step_size")
    p.add_argument("--leapfrog", type=int, dest="n_leapfrog")
    p.add_argument("--warmup", type=int, dest="n_warmup")
    p.add_argument("--samples", type=int, dest="n_samples")
    p.add_argument("--chains", type=int, dest="n_chains")
    p.add_argument("--target-accept", type=float, dest="target_accept")
    p.add_argument("--seed", type=int)
    p.add_argument("--boundary", choices=["reflect", "reject"])
    p.add_argument("--max-reflections", type=int, dest="max_reflections")
    p.add_argument("--adapt-mass", action="store_const", const=True, dest="adapt_mass")
    p.add_argument("--progress", action="store_const", const=True,
                   help="report draws/second and acceptance on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bayesot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", "-o", help="output directory")
        p.add_argument("--format", choices=["json", "csv"])

    p = sub.add_parser("solve", help="deterministic OT on a cost or mean ensemble cost")
    common(p)
    _problem_args(p)
    p.add_argument("--method", choices=["exact", "sinkhorn", "quadratic", "tsallis"])
    p.add_argument("--epsilon", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")

    p = sub.add_parser("map", help="MAP plan under the forall condition")
    common(p)
    _problem_args(p)
    _prior_args(p)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")

    p = sub.add_parser("sample", help="posterior sampling by HMC")
    common(p)
    _problem_args(p)
    _prior_args(p)
    _hmc_args(p)
    p.add_argument("--draws", choices=["chart", "plan"],
                   help="store draws as chart coordinates or flattened plans")
    p.add_argument("--bins", type=int)

    p = sub.add_parser("summarize", help="summaries and histograms of a saved sample set")
    common(p)
    p.add_argument("input", nargs="?", help="samples.json written by `sample`")
    p.add_argument("--bins", type=int)

    p = sub.add_parser("toy", help="two-state toy with a closed-form posterior")
    common(p)
    p.add_argument("--condition", choices=["forall", "exists"])
    _hmc_args(p)
    p.add_argument("--bins", type=int)
    return parser


# -- configuration -----------------------------------------------------------

def _load_json(path, what):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{what} file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from None


def resolve(args) -> dict:
    """Merge built-in defaults, the config file and explicit flags, in that order."""
    settings = dict(DEFAULTS)
    settings.update(COMMAND_DEFAULTS.get(args.command, {}))
    root = Path(".")
    if getattr(args, "config", None):
        cfg = _load_json(args.config, "config")
        if not isinstance(cfg, dict):
            raise InputError(f"{args.config}: config must be a JSON object")
        _validate(cfg, schemas.CONFIG, args.config)
        root = Path(args.config).parent
        for key in ("mu", "nu", "ensemble", "input"):
            if isinstance(cfg.get(key), str):
                cfg[key] = str(root / cfg[key])
        settings.update(cfg)
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command", "verbose"):
            settings[key] = value
    return settings


def _validate(obj, schema, where):
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        raise InputError(f"{where}: {loc}: {exc.message}") from None


def _measure(value, what):
    if value is None:
        raise InputError(f"missing --{what}")
    data = value if isinstance(value, list) else _load_json(value, f"{what} marginal")
    if not isinstance(data, list):
        raise InputError(f"{what} marginal must be a JSON array of numbers")
    try:
        return as_measure(np.asarray(data, dtype=float))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{what} marginal: {exc}") from None


def _ensemble(path) -> CostEnsemble:
    if path is None:
        raise InputError("missing --ensemble")
    p = Path(path)
    if not p.is_file():
        raise InputError(f"ensemble file not found: {p}")
    try:
        if p.suffix.lower() == ".csv":
            return load_ensemble(p, "csv")
        data = _load_json(p, "ensemble")
        if isinstance(data, list):
            return CostEnsemble(np.asarray(data, dtype=float)[None])
        return ensemble_from_json(data)
    except (EnsembleFormatError, ValueError) as exc:
        raise InputError(f"{p}: {exc}") from None


def _prior(s) -> Prior:
    spec = s["prior"]
    try:
        if isinstance(spec, dict):
            return Prior.from_dict(spec)
        kw = {"barrier": s["barrier"], "barrier_epsilon": s["barrier_epsilon"]}
        if spec in ("entropy", "tsallis"):
            kw["epsilon"] = s["prior_epsilon"]
        if spec == "tsallis":
            kw["q"] = s["q"]
        if spec == "dirichlet" and s["alpha"] is not None:
            kw["alpha"] = s["alpha"]
        return Prior(spec, **kw)
    except (TypeError, ValueError) as exc:
        raise InputError(f"prior: {exc}") from None


def _problem(s):
    mu, nu = _measure(s.get("mu"), "mu"), _measure(s.get("nu"), "nu")
    ens = _ensemble(s.get("ensemble"))
    if ens.shape != (mu.size, nu.size):
        raise InputError(f"ensemble shape {ens.shape} does not match marginals "
                         f"({mu.size}, {nu.size})")
    return mu, nu, ens


def _hmc_config(s, **overrides) -> HmcConfig:
    kw = {k: s[k] for k in HMC_KEYS if s.get(k) is not None}
    kw.update(overrides)
    try:
        return HmcConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise InputError(f"sampler settings: {exc}") from None


# -- output helpers ------------------------------------------------------------

def _outdir(s) -> Path:
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, allow_nan=False)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])


def _plan_payload(plan, mu, nu, report):
    return {
        "shape": [mu.size, nu.size],
        "mu": mu.weights.tolist(),
        "nu": nu.weights.tolist(),
        "plan": np.asarray(plan).tolist(),
        "objective": report.objective,
        "report": report.to_dict(),
    }


def _emit_plan(s, name, payload):
    out = _outdir(s)
    written = []
    if s["format"] == "csv":
        plan = np.asarray(payload.pop("plan"))
        _write_csv(out / "plan.csv", schemas.PLAN_CSV_HEADER,
                   ([i, j, float(v)] for (i, j), v in np.ndenumerate(plan)))
        _write_json(out / "report.json", payload)
        written += [out / "plan.csv", out / "report.json"]
    else:
        _write_json(out / name, payload)
        written.append(out / name)
    return written


def _write_summary(out: Path, samples: SampleSet, bins: int, fmt: str):
    summ = summarize(samples, bins=bins)
    written = []
    if fmt == "csv":
        _write_csv(out / "summary.csv", schemas.SUMMARY_CSV_HEADER,
                   ([r[k] for k in schemas.SUMMARY_CSV_HEADER] for r in summ.rows()))
        written.append(out / "summary.csv")
    else:
        d = summ.to_dict()
        d["bins"] = bins
        _write_json(out / "summary.json", d)
        written.append(out / "summary.json")
    hist = out / "histograms"
    hist.mkdir(exist_ok=True)
    n, m = samples.base.shape
    for i in range(n):
        for j in range(m):
            lo, hi, mass = summ.histogram(i, j)
            path = hist / f"gamma_{i}_{j}.csv"
            _write_csv(path, schemas.HISTOGRAM_HEADER,
                       ([float(a), float(b), float(c)] for a, b, c in zip(lo, hi, mass)))
            written.append(path)
    return written


# -- commands ----------------------------------------------------------------

def cmd_solve(s):
    mu, nu, ens = _problem(s)
    cost = ens.mean()
    source = "single cost matrix" if ens.size == 1 else f"mean of {ens.size} ensemble samples"
    method = s["method"]
    eps = s["epsilon"]
    if method != "exact" and eps is None:
        raise InputError(f"--epsilon is required for method {method}")
    try:
        if method == "exact":
            plan, report = exact_ot(cost, mu, nu)
        elif method == "sinkhorn":
            plan, report = sinkhorn(cost, mu, nu, eps, tol=s["tol"], max_iter=s["max_iter"])
        else:
            reg = Regularizer.tsallis(s["q"]) if method == "tsallis" else Regularizer.quadratic()
            plan, report = regularized_ot(cost, mu, nu, reg, eps, tol=s["tol"],
                                          max_iter=s["max_iter"])
    except ConvergenceError as exc:
        raise NumericalError(str(exc)) from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    payload = _plan_payload(plan, mu, nu, report)
    payload.update(method=method, cost_source=source,
                   degenerate=None if report.unique is None else not report.unique)
    if report.unique is False:
        log.info("optimal plan is not unique; the returned vertex is one of several")
    written = _emit_plan(s, "solution.json", payload)
    if not report.converged:
        raise NumericalError(f"{method} did not converge (residual {report.residual:.3g})",
                             written)
    return written


def cmd_map(s):
    mu, nu, ens = _problem(s)
    prior = _prior(s)
    if s["condition"] != "forall":
        raise InputError("MAP estimation requires --condition forall; "
                         "the exists posterior is non-convex")
    if prior.kind == "dirichlet":
        raise InputError("MAP unsupported for dirichlet")
    spec = PosteriorSpec.build(mu, nu, ens, prior, "forall", s["cost_scale"])
    try:
        plan, report = map_estimate(spec, tol=s["tol"], max_iter=s["max_iter"])
    except UnsupportedOperation as exc:
        raise InputError(str(exc)) from None
    except ConvergenceError as exc:
        raise NumericalError(str(exc)) from None
    payload = _plan_payload(plan, mu, nu, report)
    payload.update(prior=prior.to_dict(), mapping=map_mapping(prior), condition="forall",
                   cost_scale=spec.cost_scale)
    written = _emit_plan(s, "map.json", payload)
    if not report.converged:
        raise NumericalError("MAP solve did not converge", written)
    return written


def _progress(s, n_chains):
    return ProgressReporter(sys.stderr, n_chains) if s.get("progress") else None


def cmd_sample(s):
    mu, nu, ens = _problem(s)
    prior = _prior(s)
    try:
        spec = PosteriorSpec.build(mu, nu, ens, prior, s["condition"], s["cost_scale"])
    except ValueError as exc:
        raise InputError(str(exc)) from None
    config = _hmc_config(s)
    try:
        samples = run_chains(spec, config, progress=_progress(s, config.n_chains))
    except InitializationError as exc:
        raise NumericalError(str(exc)) from None
    out = _outdir(s)
    d = samples.to_dict()
    d["spec"] = {"prior": prior.to_dict(), "condition": spec.condition,
                 "cost_scale": spec.cost_scale, "n_cost_samples": ens.size}
    if s["draws"] == "plan":
        c, n = samples.draws.shape[:2]
        d["draws"] = samples.plans.reshape(c, n, -1).tolist()
        d["draw_space"] = "plan"
    else:
        d["draw_space"] = "chart"
    _write_json(out / "samples.json", d)
    written = [out / "samples.json"]
    written += _write_summary(out, samples, s["bins"], s["format"])
    _write_json(out / "diagnostics.json", samples.diagnostics)
    written.append(out / "diagnostics.json")
    return written


def cmd_summarize(s):
    path = s.get("input")
    if not path:
        raise InputError("missing samples file")
    data = _load_json(path, "samples")
    _validate(data, schemas.SAMPLES, path)
    try:
        samples = SampleSet.from_dict(data)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None
    out = _outdir(s)
    written = _write_summary(out, samples, s["bins"], s["format"])
    _write_json(out / "diagnostics.json", samples.diagnostics)
    return written + [out / "diagnostics.json"]


def cmd_toy(s):
    condition, bins = s["condition"], s["bins"]
    config = _hmc_config(s)
    try:
        samples, report = run_toy(condition, config, bins, progress=_progress(s, config.n_chains))
    except InitializationError as exc:
        raise NumericalError(str(exc)) from None
    out = _outdir(s)
    _write_json(out / "toy.json", report)
    theta = samples.draws.reshape(-1)
    edges = np.linspace(-HALF_WIDTH, HALF_WIDTH, bins + 1)
    h, _ = np.histogram(np.clip(theta, -HALF_WIDTH, HALF_WIDTH), bins=edges)
    mass = h / h.sum()
    _write_csv(out / "theta_histogram.csv", schemas.HISTOGRAM_HEADER,
               ([float(a), float(b), float(c)] for a, b, c in zip(edges[:-1], edges[1:], mass)))
    grid = np.linspace(-HALF_WIDTH, HALF_WIDTH, GRID_POINTS)
    _write_csv(out / "density.csv", schemas.DENSITY_HEADER,
               ([float(t), float(v)] for t, v in zip(grid, density(grid, condition))))
    return [out / "toy.json", out / "theta_histogram.csv", out / "density.csv"]


COMMANDS = {
    "solve": cmd_solve,
    "map": cmd_map,
    "sample": cmd_sample,
    "summarize": cmd_summarize,
    "toy": cmd_toy,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="bayesot: %(message)s", stream=sys.stderr)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_INPUT
    try:
        settings = resolve(args)
        written = COMMANDS[args.command](settings)
    except InputError as exc:
        print(f"bayesot {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"bayesot {args.command}: numerical failure: {exc.args[0]}", file=sys.stderr)
        if len(exc.args) > 1:
            _print_written(exc.args[1], "partial")
        return EXIT_NUMERICAL
    _print_written(written, "ok")
    return EXIT_OK


def _print_written(paths, status):
    print(json.dumps({"status": status, "outputs": [str(p) for p in paths]}))


if __name__ == "__main__":
    sys.exit(main())

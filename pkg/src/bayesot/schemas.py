"""JSON Schemas for files read and written by the command-line tool."""

_number = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_matrix = {"type": "array", "items": {"type": "array", "items": _number}}
_nonneg_matrix = {"type": "array", "items": {"type": "array", "items": _nonneg}}
_weights = {"type": "array", "items": _nonneg, "minItems": 1}
_nullable_number = {"type": ["number", "null"]}

MARGINALS = _weights

ENSEMBLE = {
    "type": "object",
    "required": ["n", "m", "samples"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 1},
        "samples": {"type": "array", "minItems": 1, "items": _nonneg_matrix},
    },
}

SOLVER_REPORT = {
    "type": "object",
    "required": ["method", "objective", "iterations", "converged", "residual"],
    "properties": {
        "method": {"type": "string"},
        "objective": _number,
        "regularized_objective": _nullable_number,
        "iterations": {"type": "integer", "minimum": 0},
        "converged": {"type": "boolean"},
        "residual": _nonneg,
        "unique": {"type": ["boolean", "null"]},
    },
}

PRIOR = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["uniform", "entropy", "dirichlet", "gaussian", "tsallis"]},
        "epsilon": _number,
        "alpha": {"type": ["number", "array"]},
        "mean": {"type": ["number", "array"]},
        "precision": {"type": ["number", "array", "null"]},
        "q": _number,
        "barrier": {"enum": ["none", "entropy", "simplex"]},
        "barrier_epsilon": _number,
    },
}

_PLAN_FILE = {
    "type": "object",
    "required": ["shape", "mu", "nu", "plan", "objective", "report"],
    "properties": {
        "shape": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "mu": _weights,
        "nu": _weights,
        "plan": _matrix,
        "objective": _number,
        "report": SOLVER_REPORT,
    },
}

SOLUTION = {
    **_PLAN_FILE,
    "required": _PLAN_FILE["required"] + ["method", "cost_source"],
    "properties": {
        **_PLAN_FILE["properties"],
        "method": {"enum": ["exact", "sinkhorn", "quadratic", "tsallis"]},
        "cost_source": {"type": "string"},
        "degenerate": {"type": ["boolean", "null"]},
    },
}

MAP = {
    **_PLAN_FILE,
    "required": _PLAN_FILE["required"] + ["prior", "mapping", "condition"],
    "properties": {
        **_PLAN_FILE["properties"],
        "prior": PRIOR,
        "mapping": {"type": "string"},
        "condition": {"const": "forall"},
        "cost_scale": _number,
    },
}

# plan.csv/report.json variant of solve and map
REPORT = {
    "type": "object",
    "required": ["shape", "mu", "nu", "objective", "report"],
    "properties": {k: v for k, v in _PLAN_FILE["properties"].items() if k != "plan"},
}

SAMPLES = {
    "type": "object",
    "required": ["format", "shape", "mu", "nu", "base", "draws", "accept_rate",
                 "step_size", "n_divergent", "config"],
    "properties": {
        "format": {"const": "bayesot.samples/1"},
        "draw_space": {"enum": ["chart", "plan"]},
        "shape": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "mu": _weights,
        "nu": _weights,
        "base": _matrix,
        "draws": {"type": "array", "items": {"type": "array"}},
        "accept_rate": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "step_size": {"type": "array", "items": _nonneg},
        "n_divergent": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "config": {"type": "object"},
        "spec": {"type": "object"},
    },
}

_entry = {
    "type": "object",
    "required": ["i", "j", "mean", "std", "q2.5", "q25", "q50", "q75", "q97.5"],
    "properties": {
        "i": {"type": "integer", "minimum": 0},
        "j": {"type": "integer", "minimum": 0},
        "mean": _number,
        "std": _nonneg,
        **{k: _number for k in ("q2.5", "q25", "q50", "q75", "q97.5")},
    },
}

SUMMARY = {
    "type": "object",
    "required": ["n_draws", "entries", "mean", "std"],
    "properties": {
        "n_draws": {"type": "integer", "minimum": 1},
        "entries": {"type": "array", "items": _entry},
        "mean": _matrix,
        "std": _nonneg_matrix,
        "bins": {"type": "integer", "minimum": 1},
    },
}

DIAGNOSTICS = {
    "type": "object",
    "required": ["ess", "potential_scale_reduction", "accept_rate", "n_chains", "n_samples"],
    "properties": {
        "ess": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "potential_scale_reduction": {
            "oneOf": [
                {"type": "null"},
                {"type": "array", "items": {"type": ["number", "null"], "exclusiveMinimum": 0}},
            ]
        },
        "accept_rate": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "step_size": {"type": "array", "items": _nonneg},
        "n_divergent": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "n_chains": {"type": "integer", "minimum": 1},
        "n_samples": {"type": "integer", "minimum": 1},
    },
}

TOY = {
    "type": "object",
    "required": ["condition", "n_draws", "tv_distance", "ks_statistic", "modes",
                 "bimodal", "accept_rate", "seed"],
    "properties": {
        "condition": {"enum": ["forall", "exists"]},
        "n_draws": {"type": "integer", "minimum": 1},
        "tv_distance": {"type": "number", "minimum": 0, "maximum": 1},
        "ks_statistic": {"type": "number", "minimum": 0, "maximum": 1},
        "modes": {"type": "array", "items": _number},
        "bimodal": {"type": "boolean"},
        "accept_rate": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "seed": {"type": "integer", "minimum": 0},
        "bins": {"type": "integer", "minimum": 1},
        "grid_points": {"type": "integer", "minimum": 2},
    },
}

CONFIG = {
    "type": "object",
    "properties": {
        "mu": {"type": ["string", "array"]},
        "nu": {"type": ["string", "array"]},
        "ensemble": {"type": "string"},
        "cost": {"type": "string"},
        "prior": {"oneOf": [{"type": "string"}, PRIOR]},
        "prior_epsilon": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "q": {"type": "number", "exclusiveMinimum": 0},
        "barrier": {"enum": ["none", "entropy", "simplex"]},
        "barrier_epsilon": {"type": "number", "exclusiveMinimum": 0},
        "condition": {"enum": ["forall", "exists"]},
        "cost_scale": {"type": "number", "exclusiveMinimum": 0},
        "method": {"enum": ["exact", "sinkhorn", "quadratic", "tsallis"]},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
        "step_size": {"type": "number", "exclusiveMinimum": 0},
        "n_leapfrog": {"type": "integer", "minimum": 1},
        "n_warmup": {"type": "integer", "minimum": 0},
        "n_samples": {"type": "integer", "minimum": 1},
        "n_chains": {"type": "integer", "minimum": 1},
        "target_accept": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "mass": {"type": ["array", "null"], "items": {"type": "number", "exclusiveMinimum": 0}},
        "boundary": {"enum": ["reflect", "reject"]},
        "max_reflections": {"type": "integer", "minimum": 0},
        "adapt_mass": {"type": "boolean"},
        "out": {"type": "string"},
        "format": {"enum": ["json", "csv"]},
        "draws": {"enum": ["chart", "plan"]},
        "bins": {"type": "integer", "minimum": 1},
        "input": {"type": "string"},
        "progress": {"type": "boolean"},
    },
    "additionalProperties": False,
}

HISTOGRAM_HEADER = ["bin_left_edge", "bin_right_edge", "mass"]
DENSITY_HEADER = ["theta", "density"]
PLAN_CSV_HEADER = ["i", "j", "value"]
SUMMARY_CSV_HEADER = ["i", "j", "mean", "std", "q2.5", "q25", "q50", "q75", "q97.5"]

SCHEMAS = {
    "marginals": MARGINALS,
    "ensemble": ENSEMBLE,
    "solution": SOLUTION,
    "map": MAP,
    "report": REPORT,
    "samples": SAMPLES,
    "summary": SUMMARY,
    "diagnostics": DIAGNOSTICS,
    "toy": TOY,
    "config": CONFIG,
}

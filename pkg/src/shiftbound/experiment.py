"""JSON-configured experiment runner and result serialization.

A config describes one dataset and a grid of named experiments (estimand
plus constraint set plus ratio model). For each experiment the runner
solves both bound sides with our method, the naive plug-in, and the
requested DRO benchmarks, on the full sample (replicate 0) and on B
bootstrap resamples, then writes results.csv (flat rows) and results.json
(summaries plus optimizer detail). Everything is seeded, single threaded,
and ordered deterministically so reruns are byte-identical.

In synthetic mode constraint targets, the selection floor, and the true
value come from exact enumeration, never from the target-law sample; csv
mode requires explicit targets and floor and carries no truth.
"""

from __future__ import annotations

import csv as _csv
import json
from dataclasses import asdict, dataclass, field

import jsonschema
import numpy as np

from . import convex, dgp as dgp_mod, dro as dro_mod, ratios, solver
from .data import (
    CONTINUOUS,
    DISCRETE,
    ColumnSpec,
    ConditionalMean,
    Dataset,
    DiscreteATE,
    MCoefficient,
    Mean,
    ProblemSpec,
    build_strata,
    covariance_sign,
    eval_expr,
    load_dataset,
    moment,
    normalization_constraint,
    selection_floor,
)
from .errors import (
    AllReplicatesInfeasible,
    ConfigSchemaError,
    ContinuousSupport,
    NonLinearModel,
    ShiftboundError,
)

CSV_HEADER = (
    "experiment",
    "method",
    "side",
    "replicate",
    "value",
    "sigma2",
    "ci_lo",
    "ci_hi",
    "status",
    "restart_spread",
    "constraint_violation",
)

# constraint sets of the synthetic study, by the names the configs use;
# targets always come from the oracle (or explicitly in csv mode)
NAMED_CONSTRAINT_SETS = {
    "unrestricted-base": ("Y*X2",),
    "partial-race-income": ("(1-Y2)*X2", "(1-Y2)*(1-X2)"),
    "full-race-income": ("Y2*X2", "Y2*(1-X2)", "(1-Y2)*X2", "(1-Y2)*(1-X2)"),
    "race-income-outcome": (
        "Y2*X2",
        "Y2*(1-X2)",
        "(1-Y2)*X2",
        "(1-Y2)*(1-X2)",
        "Y*X2",
        "Y*(1-X2)",
    ),
}

_ESTIMAND_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {
            "enum": ["mean", "conditional_mean", "m_coefficient", "discrete_ate"]
        },
        "h": {"type": "string"},
        "condition": {"type": "string"},
        "family": {"enum": ["linear", "logistic"]},
        "response": {"type": "string"},
        "design": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "coord": {"type": "integer", "minimum": 0},
        "intercept": {"type": "boolean"},
        "y": {"type": "string"},
        "a": {"type": "string"},
        "x": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    },
}

_RATIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["unrestricted", "targeted", "separable", "basis"]},
        "key": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "group_a": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "group_b": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "basis": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    },
}

_CONSTRAINTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "named": {"enum": sorted(NAMED_CONSTRAINT_SETS)},
        "targets": {"type": "array", "items": {"type": "number"}},
        "moments": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["expr"],
                "properties": {
                    "expr": {"type": "string"},
                    "target": {"type": "number"},
                },
            },
        },
        "signs": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["u", "v", "sign"],
                "properties": {
                    "u": {"type": "string"},
                    "v": {"type": "string"},
                    "sign": {"enum": [-1, 1]},
                },
            },
        },
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dataset", "bootstrap", "experiments"],
    "properties": {
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["synthetic", "csv"]},
                "n": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "path": {"type": "string"},
                "columns": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["name", "kind"],
                        "properties": {
                            "name": {"type": "string"},
                            "kind": {"enum": ["discrete", "continuous"]},
                            "levels": {"type": "integer", "minimum": 2},
                        },
                    },
                },
                "strata": {
                    "type": "array",
                    "items": {"type": "string"},
                    "minItems": 1,
                },
                "x1_pmf": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 3,
                    "maxItems": 3,
                },
            },
        },
        "selection": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"floor": {"type": ["number", "string"]}},
        },
        "estimand": _ESTIMAND_SCHEMA,
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "step_size": {"type": "number", "exclusiveMinimum": 0},
                "max_outer": {"type": "integer", "minimum": 1},
                "max_inner": {"type": "integer", "minimum": 1},
                "constraint_tol": {"type": "number", "exclusiveMinimum": 0},
                "restarts": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
        },
        "bootstrap": {
            "type": "object",
            "additionalProperties": False,
            "required": ["b"],
            "properties": {
                "b": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer"},
            },
        },
        "dro": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["omniscient", "observable", "both", "off"]}
            },
        },
        "output": {"type": "string"},
        "experiments": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "constraints", "ratio_model"],
                "properties": {
                    "name": {"type": "string"},
                    "estimand": _ESTIMAND_SCHEMA,
                    "constraints": _CONSTRAINTS_SCHEMA,
                    "ratio_model": _RATIO_SCHEMA,
                },
            },
        },
    },
}


def validate_config(config):
    """Schema plus cross-field checks; raises ConfigSchemaError."""
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigSchemaError(e.message) from None
    ds = config["dataset"]
    synthetic = ds["type"] == "synthetic"
    if synthetic:
        if "path" in ds or "columns" in ds:
            raise ConfigSchemaError("synthetic dataset takes no path/columns")
        if "n" not in ds or "seed" not in ds:
            raise ConfigSchemaError("synthetic dataset needs n and seed")
    else:
        if "path" not in ds or "columns" not in ds:
            raise ConfigSchemaError("csv dataset needs path and columns")
        if "strata" not in ds:
            raise ConfigSchemaError("csv dataset needs explicit strata columns")
        if "x1_pmf" in ds:
            raise ConfigSchemaError("x1_pmf applies to synthetic datasets only")
        floor = config.get("selection", {}).get("floor", "oracle")
        if not isinstance(floor, (int, float)):
            raise ConfigSchemaError("csv mode needs a numeric selection floor")
        mode = config.get("dro", {}).get("mode", "both")
        if mode in ("omniscient", "both"):
            raise ConfigSchemaError(
                "omniscient DRO needs the synthetic oracle; set dro.mode "
                "to 'observable' or 'off'"
            )
    names = [e["name"] for e in config["experiments"]]
    if len(set(names)) != len(names):
        raise ConfigSchemaError("experiment names must be unique")
    for exp in config["experiments"]:
        if "estimand" not in exp and "estimand" not in config:
            raise ConfigSchemaError(
                f"experiment {exp['name']!r} has no estimand (none at top level)"
            )
        _check_constraint_block(exp["constraints"], synthetic, exp["name"])
    return config


def _check_constraint_block(block, synthetic, name):
    if "named" in block and "moments" in block:
        raise ConfigSchemaError(f"{name}: give a named set or moments, not both")
    if "named" not in block and "moments" not in block:
        raise ConfigSchemaError(f"{name}: constraints need a named set or moments")
    if synthetic:
        if "targets" in block:
            raise ConfigSchemaError(
                f"{name}: synthetic targets come from the oracle, not the config"
            )
        for m in block.get("moments", ()):
            if "target" in m:
                raise ConfigSchemaError(
                    f"{name}: synthetic targets come from the oracle"
                )
    else:
        if "named" in block:
            exprs = NAMED_CONSTRAINT_SETS[block["named"]]
            if len(block.get("targets", ())) != len(exprs):
                raise ConfigSchemaError(
                    f"{name}: csv mode needs one explicit target per "
                    f"constraint in {block['named']!r}"
                )
        for m in block.get("moments", ()):
            if "target" not in m:
                raise ConfigSchemaError(f"{name}: csv moments need targets")


def build_estimand(block):
    kind = block["type"]
    if kind == "mean":
        return Mean(block["h"])
    if kind == "conditional_mean":
        return ConditionalMean(block["h"], block["condition"])
    if kind == "m_coefficient":
        return MCoefficient(
            family=block["family"],
            response=block["response"],
            design_columns=tuple(block["design"]),
            intercept=block.get("intercept", True),
            coord_index=block.get("coord", 0),
        )
    return DiscreteATE(
        y_column=block["y"], a_column=block["a"], x_columns=tuple(block["x"])
    )


def build_ratio_model(block, strata_key, floor):
    kind = block["kind"]
    if kind == "unrestricted":
        return ratios.tabular(block.get("key", strata_key), floor=floor)
    if kind == "targeted":
        if "key" not in block:
            raise ConfigSchemaError("targeted ratio model needs key columns")
        return ratios.targeted(block["key"], floor=floor)
    if kind == "separable":
        if "group_a" not in block or "group_b" not in block:
            raise ConfigSchemaError("separable ratio model needs group_a/group_b")
        return ratios.separable(block["group_a"], block["group_b"], floor=floor)
    if "basis" not in block:
        raise ConfigSchemaError("basis ratio model needs basis columns")
    return ratios.linear_basis(block["basis"], floor=floor)


def build_constraints(block, oracle=None):
    """Concrete constraint tuple; targets from the oracle or the config."""
    out = [normalization_constraint()]
    if "named" in block:
        exprs = NAMED_CONSTRAINT_SETS[block["named"]]
        if oracle is not None:
            targets = [oracle.target(e) for e in exprs]
        else:
            targets = block["targets"]
        out.extend(moment(e, t) for e, t in zip(exprs, targets))
    else:
        for m in block["moments"]:
            target = oracle.target(m["expr"]) if oracle is not None else m["target"]
            out.append(moment(m["expr"], target))
    for s in block.get("signs", ()):
        out.append(covariance_sign(s["u"], s["v"], s["sign"]))
    return tuple(out)


def build_solver_settings(block):
    return solver.SolverSettings(**block)


@dataclass
class ResultRow:
    experiment: str
    method: str
    side: str
    replicate: int
    value: float = np.nan
    sigma2: float = None
    ci_lo: float = None
    ci_hi: float = None
    status: str = "Optimal"
    restart_spread: float = None
    constraint_violation: float = None


@dataclass
class ResultBundle:
    rows: list
    summary: dict
    truth: dict
    naive: dict
    rho: dict
    detail: dict
    config: dict
    experiments: list = field(default_factory=list)


def _solve_any(spec, strata, settings):
    """LP path when available, AL path otherwise."""
    try:
        return convex.solve_bound(spec, strata)
    except NonLinearModel:
        return solver.solve_nonconvex_bound(spec, strata, settings)


def naive_estimate(estimand, ds):
    """Plug-in value under the empirical observed law (no reweighting)."""
    if isinstance(estimand, Mean):
        h = eval_expr(estimand.h_expr, ds)
        return float(h.mean()), float(h.var(ddof=1))
    if isinstance(estimand, ConditionalMean):
        h = eval_expr(estimand.h_expr, ds)
        ind = eval_expr(estimand.condition_expr, ds)
        p = float(ind.mean())
        value = float((ind * h).mean()) / p
        infl = ind * (h - value) / p
        return value, float(infl.var(ddof=1))
    if isinstance(estimand, MCoefficient):
        from .mestim import LOGISTIC, estimand_design, weighted_logistic, weighted_ols

        design, resp = estimand_design(estimand, ds)
        ones = np.ones(ds.n)
        if estimand.family == LOGISTIC:
            fit = weighted_logistic(design, resp, ones)
        else:
            fit = weighted_ols(design, resp, ones)
        return float(fit.beta[estimand.coord_index]), None
    from .mestim import ate_value

    strata = build_strata(ds, estimand.x_columns + (estimand.a_column, estimand.y_column))
    value, _ = ate_value(np.ones(len(strata)), strata, estimand)
    return float(value), None


def _error_row(exp_name, method, side, rep, err):
    return ResultRow(
        experiment=exp_name,
        method=method,
        side=side,
        replicate=rep,
        status=type(err).__name__,
    )


def _ours_row(exp_name, rep, est):
    diag = est.diagnostics
    return ResultRow(
        experiment=exp_name,
        method="ours",
        side=est.side,
        replicate=rep,
        value=est.value,
        sigma2=est.sigma2 if diag.get("variance") != "external" else None,
        ci_lo=est.ci[0] if diag.get("variance") != "external" else None,
        ci_hi=est.ci[1] if diag.get("variance") != "external" else None,
        status=diag.get("status", "Optimal"),
        restart_spread=diag.get("restart_spread"),
        constraint_violation=diag.get("constraint_violation"),
    )


class _Task:
    """One experiment of the grid, with its resolved problem objects."""

    def __init__(self, name, estimand, constraints, model, floor, observed):
        self.name = name
        self.estimand = estimand
        self.spec = ProblemSpec(
            dataset=observed,
            constraints=constraints,
            estimand=estimand,
            ratio_model=model,
            side="lower",
            floor=floor,
        )


@dataclass
class _Prepared:
    observed: Dataset
    oracle: object
    strata: object
    strata_key: tuple
    tasks: list
    settings: object
    floor: float


def prepare(config):
    """Validate the config and build its datasets, tasks, and strata."""
    validate_config(config)
    ds_block = config["dataset"]
    oracle = None
    if ds_block["type"] == "synthetic":
        pmf = tuple(ds_block.get("x1_pmf", dgp_mod.X1_PMF))
        oracle = dgp_mod.SyntheticDGP(x1_pmf=pmf)
        _, observed = dgp_mod.simulate_synthetic(
            ds_block["n"], ds_block["seed"], x1_pmf=pmf
        )
        strata_key = tuple(ds_block.get("strata", ("Y", "Y2", "A", "X1", "X2")))
    else:
        schema = tuple(
            ColumnSpec(
                c["name"],
                DISCRETE if c["kind"] == "discrete" else CONTINUOUS,
                c.get("levels", 0),
            )
            for c in ds_block["columns"]
        )
        observed = load_dataset(ds_block["path"], schema)
        strata_key = tuple(ds_block["strata"])

    floor_cfg = config.get("selection", {}).get("floor", "oracle")
    if floor_cfg == "oracle":
        floor = selection_floor(oracle.selection_rate())
    else:
        floor = selection_floor(float(floor_cfg))
    settings = build_solver_settings(config.get("solver", {}))

    tasks = []
    for exp in config["experiments"]:
        est_block = exp.get("estimand", config.get("estimand"))
        estimand = build_estimand(est_block)
        constraints = build_constraints(exp["constraints"], oracle)
        model = build_ratio_model(exp["ratio_model"], strata_key, floor)
        tasks.append(
            _Task(exp["name"], estimand, constraints, model, floor, observed)
        )
    strata = build_strata(observed, strata_key)
    return _Prepared(observed, oracle, strata, strata_key, tasks, settings, floor)


def full_sample_bounds(config):
    """Solve every configured experiment on the full sample only."""
    env = prepare(config)
    out = {}
    for task in env.tasks:
        per = {}
        for side in ("lower", "upper"):
            try:
                est = _solve_any(task.spec.with_side(side), env.strata, env.settings)
                rec = {"status": est.status}
                if est.status == "Optimal":
                    rec["value"] = est.value
                    if est.diagnostics.get("variance") != "external":
                        rec["ci"] = [est.ci[0], est.ci[1]]
                per[side] = rec
            except ShiftboundError as e:
                per[side] = {"status": type(e).__name__}
        out[task.name] = per
    return out


def dro_report(config, mode=None):
    """Calibrated radii and DRO intervals per experiment."""
    env = prepare(config)
    mode = mode or config.get("dro", {}).get("mode", "both")
    out = {}
    for task in env.tasks:
        block = {}
        if mode in ("observable", "both"):
            block["observable"] = _one_dro(
                lambda: dro_mod.rho_observable(task.spec, env.strata, env.settings),
                task.spec,
                env.strata,
            )
        if mode in ("omniscient", "both"):
            block["omniscient"] = _one_dro(
                lambda: dro_mod.rho_omniscient(env.oracle, env.strata),
                task.spec,
                env.strata,
            )
        out[task.name] = block
    return out


def _one_dro(rho_fn, spec, strata):
    try:
        rho = rho_fn()
        weights, values, _ = dro_mod.subsample_nominal(spec, strata)
        lo, hi = dro_mod.dro_interval(weights, values, rho)
        return {"rho": float(rho), "lower": float(lo), "upper": float(hi)}
    except ShiftboundError as e:
        return {"status": type(e).__name__}


def run_experiment(config, out_dir=None):
    """Run the configured grid; returns the bundle, optionally writing it."""
    env = prepare(config)
    observed = env.observed
    oracle = env.oracle
    strata_key = env.strata_key
    floor = env.floor
    settings = env.settings
    tasks = env.tasks
    strata_full = env.strata

    b = config["bootstrap"]["b"]
    boot_seed = config["bootstrap"].get("seed", 0)
    dro_mode = config.get("dro", {}).get("mode", "both")
    want_obs = dro_mode in ("observable", "both")
    want_omn = dro_mode in ("omniscient", "both")
    rows = []
    summary = {}
    truth = {}
    naive_full = {}
    rho_by_exp = {}
    detail = {}

    for exp_idx, task in enumerate(tasks):
        truth[task.name] = None
        if oracle is not None:
            try:
                truth[task.name] = dgp_mod.true_value_exact(oracle, task.estimand)
            except ContinuousSupport:
                pass

        # full-sample solves (replicate 0) feed the radius calibration,
        # the detail record, and the summary point estimates
        full_est = {}
        exp_detail = {}
        for side in ("lower", "upper"):
            spec = task.spec.with_side(side)
            try:
                est = _solve_any(spec, strata_full, settings)
                full_est[side] = est
                rows.append(_ours_row(task.name, 0, est))
                exp_detail[side] = {"diagnostics": _plain(est.diagnostics)}
                if est.theta_star.size:
                    exp_detail[side].update(
                        alpha_star=[float(v) for v in est.alpha_star],
                        duals=[float(v) for v in est.duals],
                        theta_range=[
                            float(est.theta_star.min()),
                            float(est.theta_star.max()),
                        ],
                    )
            except ShiftboundError as e:
                rows.append(_error_row(task.name, "ours", side, 0, e))
                exp_detail[side] = {"error": type(e).__name__}
        detail[task.name] = {"ours": exp_detail}

        value, sigma2 = naive_estimate(task.estimand, observed)
        naive_full[task.name] = value
        rows.extend(
            _naive_rows(task.name, 0, value, sigma2, observed.n)
        )

        rho_obs = rho_omn = None
        if want_obs:
            seeds = [
                full_est[s].alpha_star
                for s in ("lower", "upper")
                if s in full_est and full_est[s].alpha_star.size
            ]
            try:
                rho_obs = dro_mod.rho_observable(
                    task.spec, strata_full, settings, extra_starts=seeds
                )
            except ShiftboundError as e:
                rows.append(_error_row(task.name, "dro-observable", "lower", 0, e))
                rows.append(_error_row(task.name, "dro-observable", "upper", 0, e))
        if want_omn:
            try:
                rho_omn = dro_mod.rho_omniscient(oracle, strata_full)
            except ShiftboundError as e:
                rows.append(_error_row(task.name, "dro-omniscient", "lower", 0, e))
                rows.append(_error_row(task.name, "dro-omniscient", "upper", 0, e))
        rho_by_exp[task.name] = {"observable": rho_obs, "omniscient": rho_omn}
        if rho_obs is not None:
            rows.extend(
                _dro_rows(task.name, "dro-observable", 0, task.spec, strata_full, rho_obs)
            )
        if rho_omn is not None:
            rows.extend(
                _dro_rows(task.name, "dro-omniscient", 0, task.spec, strata_full, rho_omn)
            )

        # bootstrap replicates; the DRO radii stay fixed at their
        # full-sample calibration, only the empirical law is resampled
        for rep in range(1, b + 1):
            rng = np.random.default_rng([boot_seed, exp_idx, rep])
            idx = rng.integers(0, observed.n, observed.n)
            ds_rep = observed.take_rows(idx)
            try:
                strata_rep = build_strata(ds_rep, strata_key)
            except ShiftboundError as e:
                for method in _active_methods(want_obs, want_omn):
                    for side in ("lower", "upper"):
                        rows.append(_error_row(task.name, method, side, rep, e))
                continue
            spec_rep = task.spec.with_dataset(ds_rep)
            for side in ("lower", "upper"):
                try:
                    est = _solve_any(spec_rep.with_side(side), strata_rep, settings)
                    rows.append(_ours_row(task.name, rep, est))
                except ShiftboundError as e:
                    rows.append(_error_row(task.name, "ours", side, rep, e))
            try:
                value, sigma2 = naive_estimate(task.estimand, ds_rep)
                rows.extend(_naive_rows(task.name, rep, value, sigma2, ds_rep.n))
            except ShiftboundError as e:
                for side in ("lower", "upper"):
                    rows.append(_error_row(task.name, "naive", side, rep, e))
            for method, rho in (
                ("dro-observable", rho_obs),
                ("dro-omniscient", rho_omn),
            ):
                if rho is None:
                    continue
                try:
                    rows.extend(
                        _dro_rows(task.name, method, rep, spec_rep, strata_rep, rho)
                    )
                except ShiftboundError as e:
                    for side in ("lower", "upper"):
                        rows.append(_error_row(task.name, method, side, rep, e))

        summary[task.name] = _summarize(rows, task.name)
        ok_lower = any(
            r.status == "Optimal"
            for r in rows
            if r.experiment == task.name and r.method == "ours" and r.side == "lower"
        )
        ok_upper = any(
            r.status == "Optimal"
            for r in rows
            if r.experiment == task.name and r.method == "ours" and r.side == "upper"
        )
        if not (ok_lower and ok_upper):
            raise AllReplicatesInfeasible(
                f"experiment {task.name!r}: no feasible replicate for our bounds"
            )

    bundle = ResultBundle(
        rows=rows,
        summary=summary,
        truth=truth,
        naive=naive_full,
        rho=rho_by_exp,
        detail=detail,
        config=config,
        experiments=[t.name for t in tasks],
    )
    if out_dir is not None:
        write_results(bundle, out_dir)
    return bundle


def _active_methods(want_obs, want_omn):
    methods = ["ours", "naive"]
    if want_obs:
        methods.append("dro-observable")
    if want_omn:
        methods.append("dro-omniscient")
    return methods


def _naive_rows(exp_name, rep, value, sigma2, n):
    if sigma2 is None:
        ci = (None, None)
    else:
        from .inference import normal_ci

        ci = normal_ci(value, sigma2, n, 0.95, mode="two")
    return [
        ResultRow(
            experiment=exp_name,
            method="naive",
            side=side,
            replicate=rep,
            value=value,
            sigma2=sigma2,
            ci_lo=ci[0],
            ci_hi=ci[1],
        )
        for side in ("lower", "upper")
    ]


def _dro_rows(exp_name, method, rep, spec, strata, rho):
    w_sub, h_sub, _ = dro_mod.subsample_nominal(spec, strata)
    lo, hi = dro_mod.dro_interval(w_sub, h_sub, rho)
    return [
        ResultRow(
            experiment=exp_name, method=method, side="lower", replicate=rep, value=lo
        ),
        ResultRow(
            experiment=exp_name, method=method, side="upper", replicate=rep, value=hi
        ),
    ]


def _summarize(rows, exp_name):
    out = {}
    for row in rows:
        if row.experiment != exp_name:
            continue
        slot = out.setdefault(row.method, {}).setdefault(
            row.side,
            {"value": None, "ci": None, "replicates": [], "infeasible": 0},
        )
        if row.status != "Optimal":
            if row.replicate > 0:
                slot["infeasible"] += 1
            continue
        if row.replicate == 0:
            slot["value"] = row.value
            slot["ci"] = (
                None if row.ci_lo is None else [row.ci_lo, row.ci_hi]
            )
        else:
            slot["replicates"].append(row.value)
    for sides in out.values():
        for slot in sides.values():
            reps = slot.pop("replicates")
            slot["boot_mean"] = float(np.mean(reps)) if reps else None
            slot["boot_std"] = (
                float(np.std(reps, ddof=1)) if len(reps) > 1 else None
            )
    return out


def _plain(obj):
    """Recursively convert numpy scalars/arrays for JSON output."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    if np.isnan(x):
        return "nan"
    return f"{x:.12g}"


def bundle_doc(bundle):
    """The bundle as the plain dict written to results.json."""
    return {
        "experiments": bundle.experiments,
        "truth": _plain(bundle.truth),
        "naive": _plain(bundle.naive),
        "rho": _plain(bundle.rho),
        "summary": _plain(bundle.summary),
        "detail": _plain(bundle.detail),
        "rows": [_plain(asdict(r)) for r in bundle.rows],
        "config": bundle.config,
    }


def write_results(bundle, out_dir):
    """results.csv (flat, deterministic) and results.json (full bundle)."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in bundle.rows:
            writer.writerow(
                [
                    r.experiment,
                    r.method,
                    r.side,
                    r.replicate,
                    _fmt(r.value),
                    _fmt(r.sigma2),
                    _fmt(r.ci_lo),
                    _fmt(r.ci_hi),
                    r.status,
                    _fmt(r.restart_spread),
                    _fmt(r.constraint_violation),
                ]
            )
    doc = bundle_doc(bundle)
    json_path = os.path.join(out_dir, "results.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return csv_path, json_path


def grid_config(n=20000, seed=1504, b=5, boot_seed=101, dro_mode="both"):
    """The synthetic study grid: three ratio models on the base constraint
    set, then the separable model across the richer sets."""
    return {
        "dataset": {"type": "synthetic", "n": n, "seed": seed},
        "selection": {"floor": "oracle"},
        "estimand": {"type": "conditional_mean", "h": "Y", "condition": "A"},
        "bootstrap": {"b": b, "seed": boot_seed},
        "dro": {"mode": dro_mode},
        "experiments": [
            {
                "name": "targeted",
                "constraints": {"named": "unrestricted-base"},
                "ratio_model": {"kind": "targeted", "key": ["X1", "X2"]},
            },
            {
                "name": "separable",
                "constraints": {"named": "unrestricted-base"},
                "ratio_model": {
                    "kind": "separable",
                    "group_a": ["A"],
                    "group_b": ["X1", "X2"],
                },
            },
            {
                "name": "unrestricted",
                "constraints": {"named": "unrestricted-base"},
                "ratio_model": {"kind": "unrestricted"},
            },
            {
                "name": "partial-race-income",
                "constraints": {"named": "partial-race-income"},
                "ratio_model": {
                    "kind": "separable",
                    "group_a": ["A"],
                    "group_b": ["X1", "X2"],
                },
            },
            {
                "name": "full-race-income",
                "constraints": {"named": "full-race-income"},
                "ratio_model": {
                    "kind": "separable",
                    "group_a": ["A"],
                    "group_b": ["X1", "X2"],
                },
            },
            {
                "name": "race-income-outcome",
                "constraints": {"named": "race-income-outcome"},
                "ratio_model": {
                    "kind": "separable",
                    "group_a": ["A"],
                    "group_b": ["X1", "X2"],
                },
            },
        ],
    }

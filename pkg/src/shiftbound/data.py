"""Datasets, strata, moment constraints, estimands, and the selection floor.

All microdata comes from the observed (selection-biased) distribution Q.
External knowledge about the target distribution P enters as moment
constraints E_Q[theta g_j] = c_j with known targets c_j, plus the floor
theta >= Pr(R=1) implied by selection sampling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContinuousColumnInKey,
    DatasetError,
    EmptyStratumKey,
    ExpressionError,
    MissingValue,
    NonIntegerDiscrete,
    OutOfRange,
    UnknownColumn,
)

DISCRETE = "discrete"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str  # DISCRETE or CONTINUOUS
    cardinality: int = 0  # discrete only: values live in [0, cardinality)

    def __post_init__(self):
        if self.kind not in (DISCRETE, CONTINUOUS):
            raise DatasetError(f"bad column kind {self.kind!r}")
        if self.kind == DISCRETE and self.cardinality < 2:
            raise DatasetError(
                f"discrete column {self.name!r} needs cardinality >= 2"
            )


class Dataset:
    """Immutable N x C numeric table with named, typed columns."""

    def __init__(self, columns, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise DatasetError("values must be a 2-D matrix")
        if values.shape[0] < 1:
            raise DatasetError("dataset needs at least one row")
        if values.shape[1] != len(columns):
            raise DatasetError("column count does not match value width")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise MissingValue(int(bad[0]), columns[bad[1]].name)
        for j, col in enumerate(columns):
            if col.kind != DISCRETE:
                continue
            v = values[:, j]
            rounded = np.rint(v)
            off = np.nonzero(np.abs(v - rounded) > 1e-9)[0]
            if off.size:
                raise NonIntegerDiscrete(int(off[0]), col.name, v[off[0]])
            out = np.nonzero((rounded < 0) | (rounded >= col.cardinality))[0]
            if out.size:
                raise NonIntegerDiscrete(int(out[0]), col.name, v[out[0]])
            values[:, j] = rounded
        self.columns = tuple(columns)
        self._index = {c.name: j for j, c in enumerate(self.columns)}
        values.setflags(write=False)
        self.values = values

    @property
    def n(self):
        return self.values.shape[0]

    def column_index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise UnknownColumn(name) from None

    def column(self, name):
        return self.values[:, self.column_index(name)]

    def column_spec(self, name):
        return self.columns[self.column_index(name)]

    def take_rows(self, idx):
        return Dataset(self.columns, self.values[np.asarray(idx, dtype=int)])


def load_dataset(path, schema):
    """Read a headered CSV into a Dataset, validating against ``schema``.

    ``schema`` is a sequence of ColumnSpec; the file's header must contain
    every declared name (extra file columns are ignored). Missing cells and
    non-integer values in discrete columns are hard errors.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        positions = []
        for col in schema:
            if col.name not in header:
                raise UnknownColumn(col.name)
            positions.append(header.index(col.name))
        rows = []
        for i, rec in enumerate(reader):
            vals = []
            for col, pos in zip(schema, positions):
                if pos >= len(rec) or rec[pos].strip() == "":
                    raise MissingValue(i, col.name)
                try:
                    vals.append(float(rec[pos]))
                except ValueError:
                    raise DatasetError(
                        f"row {i}, column {col.name!r}: "
                        f"not numeric: {rec[pos]!r}"
                    ) from None
            rows.append(vals)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(tuple(schema), np.array(rows))


@dataclass(frozen=True)
class Stratum:
    profile: tuple
    count: int
    rows: tuple  # row indices into the source dataset


class StratumTable:
    """Unique profiles over key columns, in lexicographic profile order.

    The deterministic ordering fixes the variable order of every downstream
    solver, which is what makes experiment output byte-reproducible.
    """

    def __init__(self, key_columns, strata, n_total):
        self.key_columns = tuple(key_columns)
        self.strata = tuple(strata)
        self.n_total = n_total
        self._profile_index = {s.profile: k for k, s in enumerate(self.strata)}

    def __len__(self):
        return len(self.strata)

    @property
    def weights(self):
        return np.array([s.count for s in self.strata]) / self.n_total

    def profile_index(self, profile):
        return self._profile_index[profile]

    def row_to_stratum(self):
        out = np.empty(self.n_total, dtype=int)
        for k, s in enumerate(self.strata):
            out[list(s.rows)] = k
        return out

    def stratum_means(self, values):
        """Within-stratum means of a per-sample vector."""
        values = np.asarray(values, dtype=float)
        return np.array([values[list(s.rows)].mean() for s in self.strata])


def build_strata(ds, key_columns):
    if not key_columns:
        raise EmptyStratumKey("need at least one key column")
    for name in key_columns:
        if ds.column_spec(name).kind != DISCRETE:
            raise ContinuousColumnInKey(name)
    cols = [ds.column(name).astype(int) for name in key_columns]
    groups = {}
    for i in range(ds.n):
        prof = tuple(int(c[i]) for c in cols)
        groups.setdefault(prof, []).append(i)
    strata = [
        Stratum(profile=p, count=len(rows), rows=tuple(rows))
        for p, rows in sorted(groups.items())
    ]
    return StratumTable(key_columns, strata, ds.n)


# Constraint expressions are products of simple terms. This covers every
# moment used by the experiment configs; anything richer is expected to be
# precomputed into a column.
#   ("const", v)      constant v
#   ("col", c)        column value
#   ("not", c)        1 - column value (binary complement)
#   ("eq", c, k)      indicator column == k

MOMENT_EQUALITY = "moment_equality"
COVARIANCE_SIGN = "covariance_sign"


def parse_expr(text):
    """Parse strings like ``"Y*X2"``, ``"(1-X2)*Y2"``, ``"X1==2"``, ``"1"``."""
    terms = []
    for raw in text.split("*"):
        tok = raw.strip()
        if tok.startswith("(") and tok.endswith(")"):
            tok = tok[1:-1].strip()
        if not tok:
            raise ExpressionError(f"empty term in {text!r}")
        if "==" in tok:
            name, _, level = tok.partition("==")
            try:
                terms.append(("eq", name.strip(), int(level)))
            except ValueError:
                raise ExpressionError(f"bad indicator level in {tok!r}") from None
        elif tok.startswith("1-") or tok.startswith("1 -"):
            terms.append(("not", tok.partition("-")[2].strip()))
        else:
            try:
                terms.append(("const", float(tok)))
            except ValueError:
                terms.append(("col", tok))
    return tuple(terms)


def expr_text(expr):
    parts = []
    for term in expr:
        if term[0] == "const":
            v = term[1]
            parts.append(str(int(v)) if v == int(v) else str(v))
        elif term[0] == "col":
            parts.append(term[1])
        elif term[0] == "not":
            parts.append(f"(1-{term[1]})")
        else:
            parts.append(f"{term[1]}=={term[2]}")
    return "*".join(parts)


def eval_expr(expr, ds):
    """Evaluate a parsed product expression to a length-N vector."""
    if isinstance(expr, str):
        expr = parse_expr(expr)
    out = np.ones(ds.n)
    for term in expr:
        if term[0] == "const":
            out = out * term[1]
        elif term[0] == "col":
            out = out * ds.column(term[1])
        elif term[0] == "not":
            out = out * (1.0 - ds.column(term[1]))
        elif term[0] == "eq":
            out = out * (ds.column(term[1]).astype(int) == term[2])
        else:
            raise ExpressionError(f"unknown term {term!r}")
    return out.astype(float)


@dataclass(frozen=True)
class MomentConstraint:
    """E_Q[theta g(X)] = target, or a covariance sign restriction."""

    expr: tuple
    target: float = 0.0
    kind: str = MOMENT_EQUALITY
    # covariance-sign restrictions carry two columns and a sign instead
    u: str = ""
    v: str = ""
    sign: int = 0
    name: str = ""

    def __post_init__(self):
        if self.kind == MOMENT_EQUALITY:
            if not np.isfinite(self.target):
                raise ExpressionError("moment target must be finite")
        elif self.kind == COVARIANCE_SIGN:
            if self.sign not in (-1, 1):
                raise ExpressionError("covariance sign must be +1 or -1")
        else:
            raise ExpressionError(f"unknown constraint kind {self.kind!r}")

    def label(self):
        if self.name:
            return self.name
        if self.kind == COVARIANCE_SIGN:
            s = "+" if self.sign > 0 else "-"
            return f"cov({self.u},{self.v}){s}"
        return f"E[{expr_text(self.expr)}]={self.target:g}"


def moment(expr, target, name=""):
    if isinstance(expr, str):
        expr = parse_expr(expr)
    return MomentConstraint(expr=expr, target=float(target), name=name)


def covariance_sign(u, v, sign, name=""):
    return MomentConstraint(
        expr=(), kind=COVARIANCE_SIGN, u=u, v=v, sign=int(sign), name=name
    )


def normalization_constraint():
    """E_Q[theta] = 1; always part of a ProblemSpec's constraint list."""
    return moment((("const", 1.0),), 1.0, name="normalization")


def selection_floor(p_r1):
    """Floor theta >= Pr(R=1) for selection-on-observables sampling."""
    if not 0.0 <= p_r1 < 1.0:
        raise OutOfRange(f"Pr(R=1) must lie in [0,1), got {p_r1}")
    return float(p_r1)


# Estimand declarations. The solver dispatch keys off the variant.


@dataclass(frozen=True)
class Mean:
    h_expr: tuple

    def __post_init__(self):
        if isinstance(self.h_expr, str):
            object.__setattr__(self, "h_expr", parse_expr(self.h_expr))


@dataclass(frozen=True)
class ConditionalMean:
    h_expr: tuple
    condition_expr: tuple

    def __post_init__(self):
        if isinstance(self.h_expr, str):
            object.__setattr__(self, "h_expr", parse_expr(self.h_expr))
        if isinstance(self.condition_expr, str):
            object.__setattr__(
                self, "condition_expr", parse_expr(self.condition_expr)
            )


@dataclass(frozen=True)
class MCoefficient:
    family: str  # "linear" or "logistic"
    response: str
    design_columns: tuple
    intercept: bool = True
    coord_index: int = 0

    def __post_init__(self):
        if self.family not in ("linear", "logistic"):
            raise DatasetError(f"unknown M-estimator family {self.family!r}")
        dim = len(self.design_columns) + (1 if self.intercept else 0)
        if not 0 <= self.coord_index < dim:
            raise DatasetError("coord_index outside design dimension")


@dataclass(frozen=True)
class DiscreteATE:
    y_column: str
    a_column: str
    x_columns: tuple


@dataclass(frozen=True)
class ProblemSpec:
    """One side of one bound problem, fully specified."""

    dataset: Dataset
    constraints: tuple  # MomentConstraint list, normalization included
    estimand: object
    ratio_model: object  # ratios.RatioModel
    side: str = "lower"
    floor: float = 0.0

    def __post_init__(self):
        if self.side not in ("lower", "upper"):
            raise DatasetError(f"side must be lower/upper, got {self.side!r}")
        if not 0.0 <= self.floor < 1.0:
            raise OutOfRange("floor must lie in [0, 1)")
        kinds = [c.kind for c in self.constraints]
        if MOMENT_EQUALITY not in kinds or not any(
            c.kind == MOMENT_EQUALITY and all(t[0] == "const" for t in c.expr)
            for c in self.constraints
        ):
            raise DatasetError("constraints must include the normalization")

    def moment_constraints(self):
        return [c for c in self.constraints if c.kind == MOMENT_EQUALITY]

    def sign_constraints(self):
        return [c for c in self.constraints if c.kind == COVARIANCE_SIGN]

    def with_side(self, side):
        return ProblemSpec(
            dataset=self.dataset,
            constraints=self.constraints,
            estimand=self.estimand,
            ratio_model=self.ratio_model,
            side=side,
            floor=self.floor,
        )

    def with_dataset(self, dataset):
        return ProblemSpec(
            dataset=dataset,
            constraints=self.constraints,
            estimand=self.estimand,
            ratio_model=self.ratio_model,
            side=self.side,
            floor=self.floor,
        )

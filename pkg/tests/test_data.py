import numpy as np
import pytest

from shiftbound.data import (
    CONTINUOUS,
    DISCRETE,
    ColumnSpec,
    ConditionalMean,
    Dataset,
    MCoefficient,
    Mean,
    ProblemSpec,
    build_strata,
    eval_expr,
    moment,
    normalization_constraint,
    parse_expr,
)
from shiftbound.errors import (
    ContinuousColumnInKey,
    DatasetError,
    EmptyStratumKey,
    ExpressionError,
    MissingValue,
    NonIntegerDiscrete,
    UnknownColumn,
)
from shiftbound.ratios import tabular


@pytest.fixture
def small():
    cols = [
        ColumnSpec("S", DISCRETE, 3),
        ColumnSpec("B", DISCRETE, 2),
        ColumnSpec("H", CONTINUOUS, 0),
    ]
    rows = np.array(
        [[0, 1, 1.0], [1, 0, 2.0], [1, 1, 3.0], [2, 0, 4.0], [2, 0, 6.0]]
    )
    return Dataset(cols, rows)


def test_dataset_basic(small):
    assert small.n == 5
    assert np.array_equal(small.column("S"), [0, 1, 1, 2, 2])
    assert small.column_spec("H").kind == CONTINUOUS
    with pytest.raises(UnknownColumn):
        small.column("Q")


def test_dataset_validation():
    cols = [ColumnSpec("S", DISCRETE, 2), ColumnSpec("H", CONTINUOUS, 0)]
    with pytest.raises(NonIntegerDiscrete):
        Dataset(cols, np.array([[5, 1.0]]))
    with pytest.raises(NonIntegerDiscrete):
        Dataset(cols, np.array([[0.5, 1.0]]))
    with pytest.raises(MissingValue):
        Dataset(cols, np.array([[0, np.nan]]))
    with pytest.raises(DatasetError):
        ColumnSpec("S", DISCRETE, 1)
    with pytest.raises(DatasetError):
        ColumnSpec("S", "weird")


def test_take_rows(small):
    sub = small.take_rows(np.array([0, 0, 3]))
    assert sub.n == 3
    assert np.array_equal(sub.column("H"), [1.0, 1.0, 4.0])


def test_parse_and_eval(small):
    assert np.array_equal(eval_expr(parse_expr("1"), small), np.ones(5))
    assert np.array_equal(eval_expr(parse_expr("S==1"), small), [0, 1, 1, 0, 0])
    got = eval_expr(parse_expr("(1-B)*H"), small)
    assert np.array_equal(got, [0.0, 2.0, 0.0, 4.0, 6.0])
    got = eval_expr(parse_expr("B*S"), small)
    assert np.array_equal(got, [0.0, 0.0, 1.0, 0.0, 0.0])


def test_parse_rejects_garbage():
    for text in ("", "H*", "H==x", "* H"):
        with pytest.raises(ExpressionError):
            parse_expr(text)


def test_eval_unknown_column(small):
    with pytest.raises(UnknownColumn):
        eval_expr(parse_expr("Q"), small)
    with pytest.raises(UnknownColumn):
        eval_expr("H++", small)


def test_build_strata(small):
    st = build_strata(small, ("S",))
    assert len(st) == 3
    assert [s.profile for s in st.strata] == [(0,), (1,), (2,)]
    assert [s.count for s in st.strata] == [1, 2, 2]
    assert np.allclose(st.weights, [0.2, 0.4, 0.4])
    assert np.array_equal(st.row_to_stratum(), [0, 1, 1, 2, 2])
    assert st.profile_index((2,)) == 2
    assert np.allclose(st.stratum_means(small.column("H")), [1.0, 2.5, 5.0])


def test_build_strata_two_keys(small):
    st = build_strata(small, ("S", "B"))
    assert len(st) == 4
    assert st.profile_index((1, 1)) == 2


def test_build_strata_errors(small):
    with pytest.raises(EmptyStratumKey):
        build_strata(small, ())
    with pytest.raises(ContinuousColumnInKey):
        build_strata(small, ("H",))


def test_moment_labels():
    m = moment("H", 2.5)
    assert m.kind == "moment_equality"
    assert m.target == 2.5
    assert m.label() == "E[H]=2.5"
    named = moment("B*H", 0.1, name="bh")
    assert named.label() == "bh"
    norm = normalization_constraint()
    assert norm.target == 1.0
    assert norm.label() == "normalization"


def test_problem_spec_checks(small):
    model = tabular(("S",), floor=0.5)
    norm = normalization_constraint()
    spec = ProblemSpec(
        small, (norm,), Mean("H"), model, side="lower", floor=0.5
    )
    assert spec.side == "lower"
    with pytest.raises(DatasetError):
        ProblemSpec(small, (moment("H", 1.0),), Mean("H"), model, side="lower", floor=0.5)
    with pytest.raises(DatasetError):
        ProblemSpec(small, (norm,), Mean("H"), model, side="middle", floor=0.5)


def test_with_dataset_swaps_rows(small):
    model = tabular(("S",), floor=0.5)
    spec = ProblemSpec(
        small, (normalization_constraint(),), Mean("H"), model,
        side="upper", floor=0.5,
    )
    other = spec.with_dataset(small.take_rows(np.array([0, 1, 2])))
    assert other.dataset.n == 3
    assert other.side == "upper"
    assert other.constraints == spec.constraints


def test_estimand_kinds():
    m = Mean("H")
    assert m.h_expr == (("col", "H"),)
    c = ConditionalMean("H", "B")
    assert c.h_expr == (("col", "H"),)
    assert c.condition_expr == (("col", "B"),)
    mc = MCoefficient(
        family="linear",
        response="Y",
        design_columns=("X1",),
        intercept=True,
        coord_index=1,
    )
    assert mc.family == "linear"
    assert mc.coord_index == 1

"""Exception hierarchy shared across the package.

Solver outcomes that can occur in normal operation (infeasible bootstrap
replicates, unbounded relaxations, pivot caps) are reported as status values
on results, not exceptions; everything here signals misuse or broken inputs.
"""


class ShiftboundError(Exception):
    """Base class for all package-specific errors."""


class DatasetError(ShiftboundError):
    """Malformed tabular input."""


class MissingValue(DatasetError):
    def __init__(self, row, col):
        super().__init__(f"missing value at row {row}, column {col!r}")
        self.row = row
        self.col = col


class UnknownColumn(DatasetError):
    def __init__(self, name):
        super().__init__(f"unknown column {name!r}")
        self.name = name


class NonIntegerDiscrete(DatasetError):
    def __init__(self, row, col, value):
        super().__init__(
            f"column {col!r} is discrete but row {row} holds {value!r}"
        )
        self.row = row
        self.col = col
        self.value = value


class ContinuousColumnInKey(DatasetError):
    """Stratification keys must be discrete columns."""


class OutOfRange(ShiftboundError):
    """Numeric argument outside its documented domain."""


class ExpressionError(ShiftboundError):
    """Constraint expression references unknown columns or bad terms."""


class DimensionMismatch(ShiftboundError):
    """Parameter vector or matrix shape does not match the model."""


class NoConstantBasis(ShiftboundError):
    """LinearBasis initialization requires a constant basis element."""


class UnsupportedForBasis(ShiftboundError):
    """Operation valid only for box-constrained ratio models."""


class NonLinearModel(ShiftboundError):
    """LP construction requires theta linear in its parameters."""


class EmptyStratumKey(ShiftboundError):
    """LP construction requires a nonempty stratification."""


class EmptyConditionSet(ShiftboundError):
    """Conditional estimand whose condition selects no samples."""


class NotOptimal(ShiftboundError):
    """Dual extraction requested from a non-optimal LP solution."""


class DegenerateT(ShiftboundError):
    """Charnes-Cooper scale variable pinned at its floor."""


class SingularDesign(ShiftboundError):
    """Weighted Gram matrix is rank-deficient."""


class Separation(ShiftboundError):
    """Logistic fit diverged; classes are (weight-)separable."""


class HessianNotPD(ShiftboundError):
    """Inner Hessian is not positive definite; IFT inapplicable."""


class InnerDivergence(ShiftboundError):
    """Inner M-estimation failed to converge within its iteration budget."""


class NoFeasiblePointFound(ShiftboundError):
    """All solver restarts ended with constraint violation above tolerance."""


class EmptyCell(ShiftboundError):
    def __init__(self, x, a):
        super().__init__(f"no samples in treatment cell (x={x}, a={a})")
        self.x = x
        self.a = a


class ZeroMass(ShiftboundError):
    """Reweighted cell mass numerically vanished."""


class SupportViolation(ShiftboundError):
    """Divergence undefined: p puts mass where q has none."""


class NegativeRho(ShiftboundError):
    """DRO radius must be nonnegative."""


class BadLevel(ShiftboundError):
    """Confidence level outside (0, 1)."""


class CrossedBounds(ShiftboundError):
    """Upper bound fell below lower bound beyond tolerance."""


class TooManyFolds(ShiftboundError):
    """More folds requested than samples available."""


class ContinuousSupport(ShiftboundError):
    """Exact enumeration requires a finite discrete support."""


class ConfigSchemaError(ShiftboundError):
    """Experiment configuration failed schema validation."""


class EmptyBundle(ShiftboundError):
    """Plot requested for an empty result bundle."""


class AllReplicatesInfeasible(ShiftboundError):
    """Every bootstrap replicate of an experiment was infeasible."""

"""Finite-dimensional density-ratio parameterizations theta_alpha.

Four kinds, all linear in their parameters:

* ``Tabular``: one free value per stratum of the full key set.
* ``Targeted``: one free value per profile of a covariate subset, tying
  strata that share the subset profile.
* ``Separable``: theta(X) = theta_A(groupA profile) + theta_B(groupB profile).
* ``LinearBasis``: theta(X) = sum_k alpha_k basis_k(X) for fixed expressions.

Linearity means a stratum-level Jacobian J (d x S) fully describes the model:
theta = J^T alpha. The LP path consumes J directly; the gradient path uses it
as the chain-rule factor d theta / d alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import eval_expr, parse_expr
from .errors import (
    DimensionMismatch,
    NoConstantBasis,
    UnsupportedForBasis,
)

TABULAR = "tabular"
SEPARABLE = "separable"
TARGETED = "targeted"
LINEAR_BASIS = "basis"


@dataclass(frozen=True)
class RatioModel:
    kind: str
    key_columns: tuple = ()  # Tabular/Targeted
    group_a: tuple = ()  # Separable
    group_b: tuple = ()
    basis: tuple = ()  # LinearBasis, parsed product expressions
    floor: float = 0.0

    def __post_init__(self):
        if self.kind not in (TABULAR, SEPARABLE, TARGETED, LINEAR_BASIS):
            raise DimensionMismatch(f"unknown ratio model kind {self.kind!r}")
        if self.kind == LINEAR_BASIS:
            parsed = tuple(
                parse_expr(b) if isinstance(b, str) else tuple(b)
                for b in self.basis
            )
            object.__setattr__(self, "basis", parsed)


def tabular(key_columns, floor=0.0):
    return RatioModel(TABULAR, key_columns=tuple(key_columns), floor=floor)


def targeted(key_columns, floor=0.0):
    return RatioModel(TARGETED, key_columns=tuple(key_columns), floor=floor)


def separable(group_a, group_b, floor=0.0):
    return RatioModel(
        SEPARABLE, group_a=tuple(group_a), group_b=tuple(group_b), floor=floor
    )


def linear_basis(basis, floor=0.0):
    return RatioModel(LINEAR_BASIS, basis=tuple(basis), floor=floor)


def _sub_profiles(strata, columns):
    """Distinct sub-profiles over ``columns`` and per-stratum membership."""
    pos = [strata.key_columns.index(c) for c in columns]
    subs = sorted({tuple(s.profile[p] for p in pos) for s in strata.strata})
    index = {sub: k for k, sub in enumerate(subs)}
    member = np.array(
        [index[tuple(s.profile[p] for p in pos)] for s in strata.strata]
    )
    return subs, member


def _profile_column(strata, name):
    pos = strata.key_columns.index(name)
    return np.array([s.profile[pos] for s in strata.strata], dtype=float)


def _basis_matrix(model, strata):
    """Rows are basis_k evaluated on each stratum profile."""
    rows = []
    for expr in model.basis:
        vec = np.ones(len(strata))
        for term in expr:
            if term[0] == "const":
                vec = vec * term[1]
            elif term[0] == "col":
                vec = vec * _profile_column(strata, term[1])
            elif term[0] == "not":
                vec = vec * (1.0 - _profile_column(strata, term[1]))
            elif term[0] == "eq":
                vec = vec * (
                    _profile_column(strata, term[1]).astype(int) == term[2]
                )
        rows.append(vec)
    return np.array(rows, dtype=float)


def param_dim(model, strata):
    if model.kind == TABULAR:
        return len(strata)
    if model.kind == TARGETED:
        subs, _ = _sub_profiles(strata, model.key_columns)
        return len(subs)
    if model.kind == SEPARABLE:
        subs_a, _ = _sub_profiles(strata, model.group_a)
        subs_b, _ = _sub_profiles(strata, model.group_b)
        return len(subs_a) + len(subs_b)
    return len(model.basis)


def theta_jacobian(model, strata):
    """d x S matrix J with J[k, s] = d theta_s / d alpha_k.

    The models are linear, so J does not depend on alpha.
    """
    n_s = len(strata)
    if model.kind == TABULAR:
        return np.eye(n_s)
    if model.kind == TARGETED:
        subs, member = _sub_profiles(strata, model.key_columns)
        jac = np.zeros((len(subs), n_s))
        jac[member, np.arange(n_s)] = 1.0
        return jac
    if model.kind == SEPARABLE:
        subs_a, mem_a = _sub_profiles(strata, model.group_a)
        subs_b, mem_b = _sub_profiles(strata, model.group_b)
        jac = np.zeros((len(subs_a) + len(subs_b), n_s))
        jac[mem_a, np.arange(n_s)] = 1.0
        jac[len(subs_a) + mem_b, np.arange(n_s)] += 1.0
        return jac
    return _basis_matrix(model, strata)


def theta_values(model, alpha, strata):
    """Per-stratum theta vector theta = J^T alpha."""
    alpha = np.asarray(alpha, dtype=float)
    jac = theta_jacobian(model, strata)
    if alpha.shape != (jac.shape[0],):
        raise DimensionMismatch(
            f"alpha has length {alpha.shape}, model needs {jac.shape[0]}"
        )
    return jac.T @ alpha


def init_uniform(model, strata):
    """Parameters reproducing theta == 1 exactly."""
    d = param_dim(model, strata)
    if model.kind in (TABULAR, TARGETED):
        return np.ones(d)
    if model.kind == SEPARABLE:
        return np.full(d, 0.5)
    for k, expr in enumerate(model.basis):
        if all(t[0] == "const" for t in expr):
            scale = 1.0
            for t in expr:
                scale *= t[1]
            if scale != 0:
                alpha = np.zeros(d)
                alpha[k] = 1.0 / scale
                return alpha
    raise NoConstantBasis("LinearBasis needs a constant basis element")


def param_lower_bounds(model, strata):
    """Box lower bounds on alpha that enforce theta >= floor.

    Tabular/Targeted: alpha_k >= floor. Separable: each part >= floor/2, a
    sufficient split of the floor on the sum. LinearBasis has no box
    representation; its floor is enforced by solver penalty.
    """
    d = param_dim(model, strata)
    if model.kind in (TABULAR, TARGETED):
        return np.full(d, model.floor)
    if model.kind == SEPARABLE:
        return np.full(d, model.floor / 2.0)
    raise UnsupportedForBasis(
        "LinearBasis floor is not box-representable; use the penalty path"
    )


def project_floor(model, alpha, strata=None):
    """Clip alpha onto the box that guarantees theta >= floor."""
    alpha = np.asarray(alpha, dtype=float)
    if model.kind in (TABULAR, TARGETED):
        return np.maximum(alpha, model.floor)
    if model.kind == SEPARABLE:
        return np.maximum(alpha, model.floor / 2.0)
    raise UnsupportedForBasis(
        "LinearBasis floor is not box-representable; use the penalty path"
    )

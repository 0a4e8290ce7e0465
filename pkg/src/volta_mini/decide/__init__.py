"""Equality of real-valued terms via exp-polynomial normal forms."""

from .decide import (
    BUDGET_ENV,
    Budgets,
    Case,
    CaseBudgetExceeded,
    Equal,
    NotEqual,
    SideCondition,
    Unknown,
    Verdict,
    Witness,
    eq,
    is_positive,
    refute_random,
    separate,
    side_conditions,
    split_max,
)
from .exppoly import ExpPolySum, ExpPolyTerm, NotExpPolynomial, is_zero, to_exp_poly, to_rational
from .poly import Poly, PolyBudgetExceeded

__all__ = [
    "BUDGET_ENV",
    "Budgets",
    "Case",
    "CaseBudgetExceeded",
    "Equal",
    "ExpPolySum",
    "ExpPolyTerm",
    "NotEqual",
    "NotExpPolynomial",
    "Poly",
    "PolyBudgetExceeded",
    "SideCondition",
    "Unknown",
    "Verdict",
    "Witness",
    "eq",
    "is_positive",
    "is_zero",
    "refute_random",
    "separate",
    "side_conditions",
    "split_max",
    "to_exp_poly",
    "to_rational",
]

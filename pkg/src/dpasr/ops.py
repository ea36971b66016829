"""Protected primitive operators shared by the graph evaluator and SymExpr."""

from __future__ import annotations

import numpy as np

from .grammar import OperatorKind

LOG_EPS = 1e-12
EXP_CLAMP = 30.0


def protected_exp(a):
    return np.exp(np.clip(a, -EXP_CLAMP, EXP_CLAMP))


def protected_log(a):
    return np.log(np.abs(a) + LOG_EPS)


def exp_clamp_active(a) -> bool:
    return bool(np.any(np.abs(a) > EXP_CLAMP))


def apply_unary(op: OperatorKind, a):
    if op is OperatorKind.SIN:
        return np.sin(a)
    if op is OperatorKind.EXP:
        return protected_exp(a)
    if op is OperatorKind.LOG:
        return protected_log(a)
    if op is OperatorKind.POW2:
        return a * a
    if op is OperatorKind.POW3:
        return a * a * a
    raise ValueError(f"{op} is not unary")


def unary_derivative(op: OperatorKind, a, value=None):
    """d op(a) / da.  ``value`` is op(a) when already computed."""
    if op is OperatorKind.SIN:
        return np.cos(a)
    if op is OperatorKind.EXP:
        if value is None:
            value = protected_exp(a)
        # zero slope where the clamp is active
        return np.where(np.abs(a) <= EXP_CLAMP, value, 0.0)
    if op is OperatorKind.LOG:
        return np.sign(a) / (np.abs(a) + LOG_EPS)
    if op is OperatorKind.POW2:
        return 2.0 * a
    if op is OperatorKind.POW3:
        return 3.0 * a * a
    raise ValueError(f"{op} is not unary")


def apply_binary(op: OperatorKind, a, b):
    if op is OperatorKind.ADD:
        return a + b
    if op is OperatorKind.MULTIPLY:
        return a * b
    raise ValueError(f"{op} is not binary")

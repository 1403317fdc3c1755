"""Adaptive Simpson quadrature, batched over independent integrals.

The integrand receives an array of abscissae with the batch shape and
returns values of the same shape, so one adaptive sweep integrates many
integrals at once; a panel is refined while any member of the batch
misses its error budget.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .exprlang import DomainError

__all__ = ["QuadratureError", "simpson", "simpson_nested"]

DEFAULT_TOL = 1e-10
DEFAULT_DEPTH = 40


class QuadratureError(ArithmeticError):
    pass


def _check(values):
    if not np.all(np.isfinite(values)):
        raise DomainError("integrand is not finite on the integration path")
    return values


def simpson(f: Callable, a, b, tol: float = DEFAULT_TOL, max_depth: int = DEFAULT_DEPTH):
    """Integrate f from a to b (a, b scalars or arrays of one shape).

    Uses the Richardson-corrected adaptive Simpson rule with absolute
    tolerance ``tol``.  Raises QuadratureError past ``max_depth``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    width = b - a
    scalar = a.ndim == 0

    def g(tau):
        return _check(np.asarray(f(a + tau * width), dtype=float)) * width

    f0, f1, fm = g(0.0), g(1.0), g(0.5)
    whole = (f0 + 4 * fm + f1) / 6.0
    total = np.zeros_like(whole)
    # stack of panels: (left, right, f_left, f_mid, f_right, estimate, tol, depth)
    stack = [(0.0, 1.0, f0, fm, f1, whole, tol, 0)]
    while stack:
        lo, hi, fl, fm, fr, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        h = hi - lo
        flm = g(0.5 * (lo + mid))
        frm = g(0.5 * (mid + hi))
        left = h / 12.0 * (fl + 4 * flm + fm)
        right = h / 12.0 * (fm + 4 * frm + fr)
        diff = left + right - est
        if depth >= 4 and np.max(np.abs(diff)) <= 15.0 * eps:
            total = total + left + right + diff / 15.0
            continue
        if depth >= max_depth:
            raise QuadratureError(f"adaptive Simpson did not converge within depth {max_depth}")
        stack.append((mid, hi, fm, frm, fr, right, 0.5 * eps, depth + 1))
        stack.append((lo, mid, fl, flm, fm, left, 0.5 * eps, depth + 1))
    return float(total) if scalar else total


def simpson_nested(f: Callable, a, b, inner_lo: Callable, inner_hi: Callable,
                   tol: float = 1e-9, max_depth: int = DEFAULT_DEPTH):
    """Two-level integral of f(x, y) over y in [inner_lo(x), inner_hi(x)], x in [a, b]."""
    def outer(x):
        return simpson(lambda y: f(x, y), inner_lo(x), inner_hi(x), tol, max_depth)
    return simpson(outer, a, b, tol, max_depth)

"""Two-component Hamiltonian systems (u, rho)_t = sigma_1 D_x grad H.

In matrix form (u, rho)_t = H^ (u, rho)_x with H^ = [[H_rho_u, H_rhorho], [H_uu, H_u_rho]].
Densities h commute with H when H_rhorho h_uu = h_rhorho H_uu; the system
is separable when H_uu/H_rhorho = beta^2(u)/alpha^2(rho).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import exprlang as el
from .core import QuasiLinearSystem
from .exprlang import Expr

__all__ = [
    "SeparableModel", "HamiltonianDensity", "hamiltonian_system", "commute_check",
    "manin_hamiltonian", "manin_combination", "hamiltonian_recursion", "RecursionReport",
    "wave_residual", "linearize_separable", "grid_points",
]


def _expr(v) -> Expr:
    return el.parse(v) if isinstance(v, str) else el.as_expr(v)


@dataclass
class HamiltonianDensity:
    H: Expr
    tag: str = "user"

    def __post_init__(self):
        self.H = _expr(self.H)

    def d(self, *names) -> Expr:
        e = self.H
        for n in names:
            e = el.differentiate(e, n)
        return e


def _density(h) -> HamiltonianDensity:
    return h if isinstance(h, HamiltonianDensity) else HamiltonianDensity(h)


@dataclass
class SeparableModel:
    """alpha^2(rho), beta^2(u) and the lower limits of the inverse derivatives (default 0)."""
    alpha2: Expr
    beta2: Expr = el.ONE
    u_lower: float = 0.0
    rho_lower: float = 0.0

    def __post_init__(self):
        self.alpha2 = _expr(self.alpha2)
        self.beta2 = _expr(self.beta2)

    def inv2_u(self, F: Expr) -> Expr:
        """d_u^{-2}(beta^2 F), both integrals from u_lower at fixed rho."""
        g = el.mul(self.beta2, F)
        return el.antiderivative(el.antiderivative(g, "u", self.u_lower), "u", self.u_lower)

    def inv2_rho(self, F: Expr) -> Expr:
        """d_rho^{-2}(alpha^2 F), both integrals from rho_lower at fixed u."""
        g = el.mul(self.alpha2, F)
        return el.antiderivative(el.antiderivative(g, "rho", self.rho_lower), "rho", self.rho_lower)


def hamiltonian_system(H) -> QuasiLinearSystem:
    """(u, rho)_t = H^ (u, rho)_x."""
    h = _density(H)
    return QuasiLinearSystem([[h.d("rho", "u"), h.d("rho", "rho")],
                              [h.d("u", "u"), h.d("u", "rho")]], ("u", "rho"), name="hamiltonian")


def grid_points(u_axis: Sequence[float], rho_axis: Sequence[float]) -> dict:
    U, R = np.meshgrid(np.asarray(u_axis, float), np.asarray(rho_axis, float), indexing="ij")
    return {"u": U.ravel(), "rho": R.ravel()}


def _max_abs(e: Expr, pts) -> float:
    val = el.evaluate(e, pts)
    return float(np.max(np.abs(np.broadcast_to(val, np.shape(pts["u"])))))


def commute_check(H, h, samples) -> float:
    """max |H_rhorho h_uu - h_rhorho H_uu| over ``samples`` ({"u": array, "rho": array})."""
    H, h = _density(H), _density(h)
    r = el.sub(el.mul(H.d("rho", "rho"), h.d("u", "u")), el.mul(h.d("rho", "rho"), H.d("u", "u")))
    return _max_abs(r, samples)


def wave_residual(model: SeparableModel, h, samples) -> float:
    """max |h_uu/beta^2 - h_rhorho/alpha^2|."""
    h = _density(h)
    r = el.sub(el.div(h.d("u", "u"), model.beta2), el.div(h.d("rho", "rho"), model.alpha2))
    return _max_abs(r, samples)


def _apply(model, nu: int, nrho: int, F: Expr) -> Expr:
    # (d_u^-2 beta^2)^nu (d_rho^-2 alpha^2)^nrho F, the rightmost operator acting first
    for _ in range(nrho):
        F = model.inv2_rho(F)
    for _ in range(nu):
        F = model.inv2_u(F)
    return F


def manin_hamiltonian(model: SeparableModel, kind: tuple, N: int) -> HamiltonianDensity:
    """H^(N)(1,0) or H^(N)(0,1) from the two Manin series.

    Even N = 2m: sum_{n=0}^m (d_u^-2 beta^2)^(m-n) (d_rho^-2 alpha^2)^n applied to
    rho (kind (1,0)) or u (kind (0,1)).  Odd N = 2m-1: the same sum applied to
    u rho with exponents m-n-1 (terms with a negative exponent are absent), or
    applied to 1 with exponents m-n.  H^(-1)(1,0) = 0, H^(-1)(0,1) = 1.
    """
    kind = tuple(kind)
    if kind not in ((1, 0), (0, 1)):
        raise ValueError("kind must be (1, 0) or (0, 1)")
    if N < -1:
        raise ValueError("N >= -1")
    if N == -1:
        return HamiltonianDensity(el.ZERO if kind == (1, 0) else el.ONE, f"manin{kind}(-1)")
    u, rho = el.var("u"), el.var("rho")
    total: Expr = el.ZERO
    if N % 2 == 0:
        m = N // 2
        seed = rho if kind == (1, 0) else u
        for n in range(m + 1):
            total = el.add(total, _apply(model, m - n, n, seed))
    else:
        m = (N + 1) // 2
        if kind == (1, 0):
            seed, shift = el.mul(u, rho), 1
        else:
            seed, shift = el.ONE, 0
        for n in range(m + 1):
            if m - n - shift >= 0:
                total = el.add(total, _apply(model, m - n - shift, n, seed))
    return HamiltonianDensity(total, f"manin{kind}({N})")


def manin_combination(model: SeparableModel, N: int, c1: float, c2: float) -> HamiltonianDensity:
    """H^(N)(c1, c2) = c1 H^(N)(1,0) + c2 H^(N)(0,1)."""
    a = manin_hamiltonian(model, (1, 0), N).H
    b = manin_hamiltonian(model, (0, 1), N).H
    return HamiltonianDensity(el.add(el.mul(el.const(c1), a), el.mul(el.const(c2), b)),
                              f"manin({c1},{c2})({N})")


@dataclass
class RecursionReport:
    h: HamiltonianDensity
    mismatch: float
    in_class: bool


def hamiltonian_recursion(model: SeparableModel, h, m: int = 1, samples=None,
                          tol: float = 1e-9) -> RecursionReport:
    """h_m from m steps of h -> h_uu/beta^2, compared against h -> h_rhorho/alpha^2.

    ``mismatch`` is the largest difference of the two branches over ``samples``
    (both branches agree exactly when h solves the separable wave equation).
    """
    a = b = _density(h).H
    for _ in range(m):
        a = el.div(el.differentiate(el.differentiate(a, "u"), "u"), model.beta2)
        b = el.div(el.differentiate(el.differentiate(b, "rho"), "rho"), model.alpha2)
    mismatch = 0.0 if samples is None else _max_abs(el.sub(a, b), samples)
    if mismatch > tol:
        return RecursionReport(HamiltonianDensity(a, "recursion"), mismatch, False)
    return RecursionReport(HamiltonianDensity(a, "recursion"), mismatch, True)


def linearize_separable(H, HN, x_axis, t_axis, seed, x0=None, t0=None, **solver_opts):
    """Solve H_rho_u = x + t HN_rho_u, H_uu = t HN_uu for (u, rho)(x, t).

    The solution satisfies (u, rho)_t = HN^ (u, rho)_x; returns
    (SolutionGrid, QuasiLinearSystem of HN) for residual checks.
    """
    from .hodograph import ImplicitSystem, solve_grid
    H, HN = _density(H), _density(HN)
    x, t = el.var("x"), el.var("t")
    F1 = el.sub(H.d("rho", "u"), el.add(x, el.mul(t, HN.d("rho", "u"))))
    F2 = el.sub(H.d("u", "u"), el.mul(t, HN.d("u", "u")))
    imp = ImplicitSystem([F1, F2], ("u", "rho"), provenance="separable hodograph")
    grid = solve_grid(imp, x_axis, t_axis, seed, x0=x0, t0=t0, **solver_opts)
    return grid, hamiltonian_system(HN)

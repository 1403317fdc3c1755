"""One-dimensional isentropic gas dynamics in Riemann invariants.

    u_t + u u_x + alpha(rho)^2 rho rho_x = 0,   rho_t + rho u_x + u rho_x = 0

with s, r = u -/+ int_{rho0}^rho alpha.  Characteristics of symmetries are
Exprs over the jet variables s, r, rho, s1, r1, s2, r2, ... (s1 = s_x, ...),
where rho is treated as a jet coordinate with rho_x = (r1 - s1)/(2 alpha).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import exprlang as el
from .core import AuxVariable, CoefficientVector, DiagonalSystem, JetPoint, QuasiLinearSystem, ScalarField
from .exprlang import Expr, UnsupportedAntiderivative
from .quadrature import simpson

__all__ = [
    "GasModel", "polytropic", "chaplygin", "riemann_from_physical", "physical_from_riemann",
    "riemann_system", "jet_vars", "total_x", "recursion_expr", "recursion_apply",
    "characteristic_chain", "closed_form", "recursion_ac", "kernel_basis", "k_chain_terms",
    "k_operator", "hamiltonian_coefficients", "jet_bindings", "random_jets", "piston_residuals",
    "physical_system", "model_from_dict", "kernel_characteristic", "k_chain_combination",
]

RHO = el.var("rho")
U = el.var("u")
MAX_ORDER = 6


@dataclass
class GasModel:
    """alpha(rho) as an Expr in ``rho`` plus the reference density of the Riemann transform."""
    alpha: Expr
    rho0: float = 1.0
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.alpha, str):
            self.alpha = el.parse(self.alpha, {"rho"})
        self.alpha = el.as_expr(self.alpha)
        self.rho0 = float(self.rho0)
        try:
            self._alpha_int = el.antiderivative(self.alpha, "rho", self.rho0)
        except UnsupportedAntiderivative:
            self._alpha_int = None

    @property
    def dalpha(self) -> Expr:
        return el.differentiate(self.alpha, "rho")

    def alpha_of(self, rho):
        return el.evaluate(self.alpha, {"rho": rho})

    def alpha_integral(self, rho):
        """int_{rho0}^rho alpha."""
        if self._alpha_int is not None:
            return el.evaluate(self._alpha_int, {"rho": rho})
        return simpson(lambda y: el.evaluate(self.alpha, {"rho": y}), self.rho0, rho, 1e-13)

    def rho_from_half_gap(self, y, tol: float = 1e-12, max_iter: int = 200):
        """Solve int_{rho0}^rho alpha = y for rho > 0 (bracketed Newton, bisection fallback)."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        start = self.rho0 if self.rho0 > 0 else 1.0
        lo = np.full(y.shape, start)
        hi = np.full(y.shape, start)
        f = lambda z: np.atleast_1d(self.alpha_integral(z)) - y
        for _ in range(200):
            m = f(hi) < 0
            if not m.any():
                break
            hi = np.where(m, hi * 2.0, hi)
        for _ in range(1100):
            m = f(lo) > 0
            if not m.any():
                break
            lo = np.where(m, lo * 0.5, lo)
        x = 0.5 * (lo + hi)
        for _ in range(max_iter):
            fx = f(x)
            lo = np.where(fx < 0, x, lo)
            hi = np.where(fx > 0, x, hi)
            step = fx / np.atleast_1d(self.alpha_of(x))
            xn = x - step
            bad = (xn <= lo) | (xn >= hi) | ~np.isfinite(xn)
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            done = np.abs(xn - x) <= tol * np.maximum(1.0, np.abs(x))
            x = xn
            if done.all():
                break
        else:
            raise ArithmeticError("density inversion did not converge")
        return float(x[0]) if scalar else x


def polytropic(a: float = 1.0, gamma: float = 1.4, rho0: float | None = None) -> GasModel:
    """P = a^2 rho^gamma, alpha = a sqrt(gamma) rho^((gamma - 3)/2)."""
    alpha = el.mul(el.const(a * np.sqrt(gamma)), el.power(RHO, (gamma - 3.0) / 2.0))
    return GasModel(alpha, 1.0 if rho0 is None else rho0, "polytropic", {"a": a, "gamma": gamma})


def chaplygin(a: float = 1.0, P0: float = 0.0, rho0: float | None = None) -> GasModel:
    """P = P0 - a^2/rho, alpha = a/rho^2."""
    alpha = el.mul(el.const(a), el.power(RHO, -2.0))
    return GasModel(alpha, 1.0 if rho0 is None else rho0, "chaplygin", {"a": a, "P0": P0})


def model_from_dict(d) -> GasModel:
    kind = d.get("kind", "polytropic")
    if kind == "polytropic":
        return polytropic(d.get("a", 1.0), d.get("gamma", 1.4), d.get("rho0"))
    if kind == "chaplygin":
        return chaplygin(d.get("a", 1.0), d.get("P0", 0.0), d.get("rho0"))
    return GasModel(d["alpha"], d.get("rho0", 1.0))


def riemann_from_physical(model: GasModel, u, rho):
    """(s, r) = (u - I, u + I) with I = int_{rho0}^rho alpha."""
    I = model.alpha_integral(rho)
    return u - I, u + I


def physical_from_riemann(model: GasModel, s, r):
    """(u, rho) with u = (s + r)/2 and int_{rho0}^rho alpha = (r - s)/2."""
    s, r = np.asarray(s, dtype=float), np.asarray(r, dtype=float)
    u = 0.5 * (s + r)
    rho = model.rho_from_half_gap(0.5 * (r - s))
    return (float(u), rho) if u.ndim == 0 else (u, rho)


def _rho_aux(model: GasModel) -> AuxVariable:
    inv2a = el.div(el.const(0.5), model.alpha)
    return AuxVariable("rho", lambda b: model.rho_from_half_gap(0.5 * (np.asarray(b["r"]) - np.asarray(b["s"]))),
                       {"s": el.neg(inv2a), "r": inv2a})


def riemann_system(model: GasModel) -> DiagonalSystem:
    """s_t = phi s_x, r_t = psi r_x with phi, psi = -[(s+r)/2 -/+ rho alpha].

    Log-Lame potentials Phi_1 = Phi_2 = -ln(alpha)/2 with signature (-1, 1),
    i.e. the flat metric -ds^2/(2 alpha) + dr^2/(2 alpha).
    """
    aux = (_rho_aux(model),)
    half_u = el.parse("(s + r)/2")
    ra = el.mul(RHO, model.alpha)
    phi = el.neg(el.sub(half_u, ra))
    psi = el.neg(el.add(half_u, ra))
    lame = el.mul(el.const(-0.5), el.ln(model.alpha))
    ref = 1.0 if model.rho0 <= 0 else model.rho0
    I = model.alpha_integral(ref)
    sys = DiagonalSystem((phi, psi), ("s", "r"), aux=aux, name=f"{model.kind}_gas", lame=(lame, lame),
                         signature=(-1.0, 1.0), base_point=(-I, I), meta={"model": model})
    return sys


# ------------------------------------------------------------------ jets

def jet_vars(order: int = MAX_ORDER):
    return [f"{c}{k}" for k in range(1, order + 1) for c in "sr"]


def total_x(model: GasModel, F: Expr) -> Expr:
    """Total x-derivative on the jet space; rho_x = (r1 - s1)/(2 alpha)."""
    F = el.as_expr(F)
    rho_x = el.div(el.sub(el.var("r1"), el.var("s1")), el.mul(el.const(2.0), model.alpha))
    out = el.ZERO
    free = F.free_vars
    for name, dname in (("s", "s1"), ("r", "r1")):
        if name in free:
            out = el.add(out, el.mul(el.var(dname), el.differentiate(F, name)))
    if "rho" in free:
        out = el.add(out, el.mul(rho_x, el.differentiate(F, "rho")))
    for k in range(1, MAX_ORDER):
        for c in "sr":
            name = f"{c}{k}"
            if name in free:
                out = el.add(out, el.mul(el.var(f"{c}{k + 1}"), el.differentiate(F, name)))
    if any(f"{c}{MAX_ORDER}" in free for c in "sr"):
        raise ValueError(f"jet order above {MAX_ORDER} is not supported")
    return out


def recursion_expr(model: GasModel, fg) -> tuple[Expr, Expr]:
    """R(f, g) = (D_x - (alpha_x/2alpha)[[1,-1],[-1,1]]) (f/s_x, g/r_x)."""
    f, g = (el.parse(v) if isinstance(v, str) else el.as_expr(v) for v in fg)
    p = el.div(f, el.var("s1"))
    q = el.div(g, el.var("r1"))
    rho_x = el.div(el.sub(el.var("r1"), el.var("s1")), el.mul(el.const(2.0), model.alpha))
    k = el.div(el.mul(model.dalpha, rho_x), el.mul(el.const(2.0), model.alpha))
    diff = el.mul(k, el.sub(p, q))
    return el.sub(total_x(model, p), diff), el.add(total_x(model, q), diff)


def _jet_order(e: Expr) -> int:
    order = 0
    for name in e.free_vars:
        if len(name) > 1 and name[0] in "sr" and name[1:].isdigit():
            order = max(order, int(name[1:]))
    return order


def jet_bindings(model: GasModel, jet: JetPoint | Sequence[JetPoint], rho=None) -> dict:
    """Bindings for jet Exprs; ``jet`` may be one JetPoint or a batch (vectorized)."""
    jets = [jet] if isinstance(jet, JetPoint) else list(jet)
    depth = min(j.depth for j in jets)
    b = {"x": np.array([j.x for j in jets]), "t": np.array([j.t for j in jets]),
         "s": np.array([j.u[0] for j in jets]), "r": np.array([j.u[1] for j in jets])}
    for k in range(depth):
        b[f"s{k + 1}"] = np.array([j.derivs[k][0] for j in jets])
        b[f"r{k + 1}"] = np.array([j.derivs[k][1] for j in jets])
    b["rho"] = model.rho_from_half_gap(0.5 * (b["r"] - b["s"])) if rho is None else np.asarray(rho, float)
    b["u"] = 0.5 * (b["s"] + b["r"])
    if isinstance(jet, JetPoint):
        b = {k: v[0] for k, v in b.items()}
    return b


def _eval_pair(model, pair, jet, rho=None):
    need = max(_jet_order(e) for e in pair)
    jets = [jet] if isinstance(jet, JetPoint) else list(jet)
    for j in jets:
        j.require(need)
    b = jet_bindings(model, jet, rho)
    return tuple(el.evaluate(e, b) for e in pair)


def recursion_apply(model: GasModel, fg, point: JetPoint | Sequence[JetPoint], rho=None):
    """Value of R(f, g) at a jet point (or a batch of them).

    ``fg`` holds two jet Exprs or expression strings.  The jet must carry
    derivatives to the highest order appearing in the result.
    """
    return _eval_pair(model, recursion_expr(model, fg), point, rho)


def characteristic_expr(model: GasModel, N: int) -> tuple[Expr, Expr]:
    """R^(N-1)(1, 1) as jet Exprs."""
    if N < 2:
        raise ValueError("N >= 2")
    pair = (el.ONE, el.ONE)
    for _ in range(N - 1):
        pair = recursion_expr(model, pair)
    return pair


def characteristic_chain(model: GasModel, N: int, point, rho=None):
    """(f_N, g_N) = R^(N-1)(1, 1) at the jet (needs derivatives to order N)."""
    return _eval_pair(model, characteristic_expr(model, N), point, rho)


def closed_form(model: GasModel, N: int) -> tuple[Expr, Expr]:
    """Hand-expanded (f_2, g_2) or (f_3, g_3) for generic alpha."""
    a, ap = model.alpha, model.dalpha
    k = el.div(ap, el.mul(el.const(4.0), el.mul(a, a)))
    sx, rx, sxx, rxx = (el.var(n) for n in ("s1", "r1", "s2", "r2"))
    P = el.parse
    if N == 2:
        common = el.mul(k, P("(s1 - r1)^2/(s1*r1)"))
        return (el.sub(P("-s2/s1^2"), common), el.add(P("-r2/r1^2"), common))
    if N == 3:
        q = el.div(ap, el.mul(a, a))
        qp = el.differentiate(q, "rho")
        inv3 = P("1/s1^3 - 1/r1^3")
        cube = P("(s1 - r1)^3/(8*s1*r1)")
        half_q2 = el.mul(el.mul(el.const(0.5), el.mul(q, q)), P("1/s1 + 1/r1"))
        br_f = el.sub(half_q2, el.div(qp, el.mul(a, sx)))
        br_g = el.sub(half_q2, el.div(qp, el.mul(a, rx)))
        three_k = el.mul(el.const(3.0), k)
        f = el.sub(el.sub(el.sub(el.neg(P("s3/s1^3 - 3*s2^2/s1^4")),
                                 el.mul(el.mul(k, inv3), el.mul(sx, rxx))),
                          el.mul(three_k, P("s2/s1^3*(s1 - r1)"))),
                   el.mul(br_f, cube))
        g = el.add(el.sub(el.sub(el.neg(P("r3/r1^3 - 3*r2^2/r1^4")),
                                 el.mul(el.mul(k, inv3), el.mul(rx, sxx))),
                          el.mul(three_k, P("r2/r1^3*(s1 - r1)"))),
                   el.mul(br_g, cube))
        return f, g
    raise ValueError("closed forms exist for N = 2, 3")


# ------------------------------------------------- hydrodynamic coefficients

def recursion_ac(model: GasModel, ac, point) -> np.ndarray:
    """(a_1, c_1) = (a_s + k (a - c), c_r + k (a - c)) with k = alpha'/(4 alpha^2), at (s, r)."""
    sys = _system(model)
    return recursion_ac_fields(model, ac).evaluate(_riemann_point(sys, point))


def recursion_ac_fields(model: GasModel, ac) -> CoefficientVector:
    sys = _system(model)
    a, c = (sys.field(v) for v in ac)
    k = sys.field(el.div(model.dalpha, el.mul(el.const(4.0), el.mul(model.alpha, model.alpha))))
    diff = k * (a - c)
    return CoefficientVector([a.partial("s") + diff, c.partial("r") + diff])


def _system(model):
    sys = getattr(model, "_system", None)
    if sys is None:
        sys = model._system = riemann_system(model)
    return sys


def _riemann_point(sys, point):
    if isinstance(point, dict):
        return sys.point([point["s"], point["r"]]) if "rho" not in point else point
    return sys.point(point)


def hamiltonian_coefficients(model: GasModel, h_rho_u, h_uu) -> CoefficientVector:
    """(a, c) = (h_rho_u - alpha h_uu, h_rho_u + alpha h_uu) over (s, r).

    h_rho_u, h_uu are Exprs in u, rho of a density h solving h_rhorho = alpha^2 h_uu.
    """
    sys = _system(model)
    sub = {"u": el.parse("(s + r)/2")}
    hr, hu = (el.substitute(el.parse(v) if isinstance(v, str) else el.as_expr(v), sub)
              for v in (h_rho_u, h_uu))
    ah = el.mul(model.alpha, hu)
    return sys.coefficients([el.sub(hr, ah), el.add(hr, ah)])


# ----------------------------------------------------------------- kernels

def _rho_integral(model, integrand: Expr) -> Expr:
    """int alpha-type integrand d rho from 0 when convergent, else from rho0."""
    try:
        return el.antiderivative(integrand, "rho", 0.0)
    except UnsupportedAntiderivative:
        if model.rho0 == 0.0:
            raise
        return el.antiderivative(integrand, "rho", model.rho0)


def kernel_basis(model: GasModel, N: int) -> list[tuple[Expr, Expr]]:
    """Characteristic families spanning the kernel of R^N (N = 1, 2), one per free constant.

    N = 1: (s_x, r_x), alpha (-s_x, r_x); N = 2 adds
    ((u - rho alpha) s_x, (u + rho alpha) r_x) and
    ((int alpha^2 - u alpha) s_x, (int alpha^2 + u alpha) r_x), u = (s + r)/2.
    """
    s1, r1 = el.var("s1"), el.var("r1")
    a = model.alpha
    fam = [(s1, r1), (el.neg(el.mul(a, s1)), el.mul(a, r1))]
    if N == 1:
        return fam
    if N != 2:
        raise ValueError("kernel bases are provided for N = 1, 2")
    u = el.parse("(s + r)/2")
    ra = el.mul(RHO, a)
    A2 = _rho_integral(model, el.mul(a, a))
    ua = el.mul(u, a)
    return [(el.mul(el.sub(u, ra), s1), el.mul(el.add(u, ra), r1)),
            (el.mul(el.sub(A2, ua), s1), el.mul(el.add(A2, ua), r1))] + fam


def kernel_characteristic(model: GasModel, N: int, constants: Sequence[float]) -> tuple[Expr, Expr]:
    """Combination of kernel_basis(N) with the free functions frozen to ``constants``."""
    fam = kernel_basis(model, N)
    if len(constants) != len(fam):
        raise ValueError(f"need {len(fam)} constants")
    f, g = el.ZERO, el.ZERO
    for c, (fi, gi) in zip(constants, fam):
        f = el.add(f, el.mul(el.const(c), fi))
        g = el.add(g, el.mul(el.const(c), gi))
    return f, g


def k_operator(model: GasModel, pair) -> tuple[Expr, Expr]:
    """K(A, B): potentials (F1, F2) of dF1 = A du + alpha^2 B drho, dF2 = B du + A drho.

    Integration runs from u = 0 and from rho = 0 (or rho0 when the rho-integral
    diverges at 0).  The input must satisfy the compatibility conditions.
    """
    A, B = (el.parse(v) if isinstance(v, str) else el.as_expr(v) for v in pair)
    a2 = el.mul(model.alpha, model.alpha)
    A0 = el.substitute(A, {"u": 0.0})
    B0 = el.substitute(B, {"u": 0.0})
    F1 = el.add(el.antiderivative(A, "u", 0.0), _rho_integral(model, el.mul(a2, B0)))
    F2 = el.add(el.antiderivative(B, "u", 0.0), _rho_integral(model, A0))
    return F1, F2


def k_chain_terms(model: GasModel, N: int) -> list[tuple[Expr, Expr]]:
    """Vectors multiplying c_{2N-1}, c_{2N}, c_{2N-2}, c_{2N-3}, ..., c_2, c_1.

    The order is (1,0), (0,1), K(0,1), K(1,0), K^2(0,1), K^2(1,0), ...
    so c_{2N-2m} goes with K^m(0,1) and c_{2N-2m-1} with K^m(1,0).
    """
    out = [(el.ONE, el.ZERO), (el.ZERO, el.ONE)]
    e01, e10 = out[1], out[0]
    for _ in range(N - 1):
        e01 = k_operator(model, e01)
        e10 = k_operator(model, e10)
        out += [e01, e10]
    return out


def k_chain_combination(model: GasModel, constants: Sequence[float]) -> tuple[Expr, Expr]:
    """sum_i c_i * (term multiplying c_i) with constants = (c_1, ..., c_2N)."""
    N = len(constants) // 2
    terms = k_chain_terms(model, N)
    F1, F2 = el.ZERO, el.ZERO
    for m in range(N):
        for idx, vec in ((2 * N - 2 * m, terms[2 * m + 1]), (2 * N - 2 * m - 1, terms[2 * m])):
            c = el.const(constants[idx - 1])
            F1 = el.add(F1, el.mul(c, vec[0]))
            F2 = el.add(F2, el.mul(c, vec[1]))
    return F1, F2


# ------------------------------------------------------------------ piston

def piston_residuals(model: GasModel, lam: float = 1.0, u0: float = 0.0, x0: float = 0.0,
                     t0: float = 0.0, rhobar0: float = 1.0) -> tuple[Expr, Expr]:
    """Implicit relations of the piston family in (u, rho; x, t), rhobar = rho/lam:

        u - u0 - rhobar (t - t0) = 0,
        rhobar (t - t0)^2 - int_{rhobar0}^{rhobar} P'(lam y)/y^2 dy - (x - x0 - u0 (t - t0)) = 0,

    with P'(rho) = rho^2 alpha^2.
    """
    y = el.var("y")
    arg = el.mul(el.const(lam), y)
    a2 = el.substitute(el.mul(model.alpha, model.alpha), {"rho": arg})
    integrand = el.div(el.mul(el.mul(arg, arg), a2), el.mul(y, y))
    I = el.substitute(el.antiderivative(integrand, "y", rhobar0), {"y": el.div(RHO, el.const(lam))})
    rb = el.div(RHO, el.const(lam))
    dt = el.sub(el.var("t"), el.const(t0))
    F1 = el.sub(el.sub(U, el.const(u0)), el.mul(rb, dt))
    rhs = el.sub(el.sub(el.var("x"), el.const(x0)), el.mul(el.const(u0), dt))
    F2 = el.sub(el.sub(el.mul(rb, el.mul(dt, dt)), I), rhs)
    return F1, F2


def random_jets(rng: np.random.Generator, model: GasModel, count: int, depth: int = 4,
                rho_range=(0.5, 2.0), u_range=(-1.0, 1.0), deriv_range=(0.5, 2.0)):
    """Random jets with rho in ``rho_range``; returns (jets, rho array).

    Derivative magnitudes are drawn from ``deriv_range`` with random signs
    for orders >= 2 and positive first derivatives.
    """
    rho = rng.uniform(*rho_range, count)
    u = rng.uniform(*u_range, count)
    s, r = riemann_from_physical(model, u, rho)
    jets = []
    for k in range(count):
        derivs = [rng.uniform(*deriv_range, 2)]
        for _ in range(depth - 1):
            derivs.append(rng.uniform(*deriv_range, 2) * rng.choice([-1.0, 1.0], 2))
        jets.append(JetPoint(0.0, 0.0, [s[k], r[k]], tuple(derivs)))
    return jets, rho


def physical_system(model: GasModel) -> QuasiLinearSystem:
    """(u, rho)_t = -[[u, alpha^2 rho], [rho, u]] (u, rho)_x."""
    a2r = el.mul(el.mul(model.alpha, model.alpha), RHO)
    return QuasiLinearSystem([[el.neg(U), el.neg(a2r)], [el.neg(RHO), el.neg(U)]], ("u", "rho"),
                             name=f"{model.kind}_gas_physical")

"""Hydrodynamic symmetries, reduced recursion operators and their existence tests.

Coefficient vectors w solve the linear system

    w_{i,j} = G^i_ij (w_j - w_i)        (i != j)

and reduced recursions map solutions to solutions:

* first order   w^_i = c_i w_{i,i} + d_i w_i + sum_k G^i_ik c_k w_k,
* second order  w^_i = f_i w_{i,ii} + (2 f_i G^i_ii + c_i) w_{i,i}
                       + sum_{k != i} f_k G^i_ik w_{k,k} + sum_k b_ik w_k,

where the k = i terms use the gauge-dependent G^i_ii (see geometry).
Two-component systems (s, r) also get the classical forms written in terms
of Phi, Theta with Phi_r = phi_r/(phi - psi), Theta_s = psi_s/(psi - phi),
i.e. Phi = -Phi_1 and Theta = -Phi_2 in log-Lame terms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import exprlang as el
from .core import CoefficientVector, DiagonalSystem, JetPoint, ScalarField
from .geometry import Connection, _as_point, _hyperbolic
from .quadrature import simpson

__all__ = [
    "symmetry_residual", "RecursionSpecFirst", "RecursionSpecSecond", "apply_first",
    "recursion_first", "existence_first", "apply_second", "recursion_second",
    "existence_second", "squared_spec", "TwoComponentStructure", "commutator2",
    "t_dependence_check", "x_dependence_check", "DependenceReport", "time_integral",
    "symmetry_coefficients_t", "symmetry_coefficients_x", "inhomogeneous_existence_check",
]


def _connection(sys, conn):
    if conn is None:
        conn = sys._cache.get("connection")
        if conn is None:
            conn = sys._cache["connection"] = Connection(sys)
    return conn


def _points(sys, samples):
    return [_as_point(sys, p) for p in samples]


def symmetry_residual(sys: DiagonalSystem, w, samples, conn: Connection | None = None) -> float:
    """max |w_{i,j} - G^i_ij (w_j - w_i)| over samples and pairs i != j."""
    conn = _connection(sys, conn)
    w = _vector(sys, w)
    worst = 0.0
    x = sys.coords
    for p in _points(sys, samples):
        _hyperbolic(sys, p)
        vals = [f.evaluate(p) for f in w]
        for i in range(sys.n):
            for j in range(sys.n):
                if i != j:
                    lhs = w[i].partial(x[j]).evaluate(p)
                    r = lhs - conn.gamma(i, j).evaluate(p) * (vals[j] - vals[i])
                    worst = max(worst, abs(r))
    return worst


def _vector(sys, w) -> CoefficientVector:
    if isinstance(w, CoefficientVector):
        return CoefficientVector(sys.field(f) for f in w)
    return sys.coefficients(w)


# ------------------------------------------------------------ first order

@dataclass
class RecursionSpecFirst:
    """One-variable functions c_i(u^i), d_i(u^i) (expression strings, Exprs or fields)."""
    c: Sequence
    d: Sequence


@dataclass
class RecursionSpecSecond:
    """f_i, c_i, d_i of one variable; optional connection potential V.

    For two components ``Lambda`` may be given instead of V (V = -Lambda).
    """
    f: Sequence
    c: Sequence
    d: Sequence
    potential: object = None
    Lambda: object = None


def _spec_fields(sys, items):
    return [sys.field(v) for v in items]


def apply_first(sys: DiagonalSystem, spec: RecursionSpecFirst, w,
                conn: Connection | None = None) -> CoefficientVector:
    """Field-level first-order reduced recursion."""
    conn = _connection(sys, conn)
    w = _vector(sys, w)
    c, d = _spec_fields(sys, spec.c), _spec_fields(sys, spec.d)
    x = sys.coords
    out = []
    for i in range(sys.n):
        acc = c[i] * w[i].partial(x[i]) + d[i] * w[i]
        for k in range(sys.n):
            if _zero(c[k]):
                continue
            acc = acc + conn.gamma(i, k) * c[k] * w[k]
        out.append(acc)
    return CoefficientVector(out)


def _zero(f: ScalarField) -> bool:
    return isinstance(f.expr, el.Const) and f.expr.value == 0.0


def recursion_first(sys, spec, w, point, conn=None) -> np.ndarray:
    """Values of the first-order reduced recursion of w at ``point``."""
    return apply_first(sys, spec, w, conn).evaluate(_as_point(sys, point))


def existence_first(sys, spec, samples, conn=None) -> float:
    """Residual of the symmetry system for S = (first-order recursion of 1)."""
    S = apply_first(sys, spec, sys.unit(), conn)
    return symmetry_residual(sys, S, samples, conn)


# ----------------------------------------------------------- second order

def _potential_parts(sys, spec, conn):
    """(V_i, V_ii) field lists for the spec (explicit V/Lambda or the connection's)."""
    x = sys.coords
    if spec.potential is not None:
        V = sys.field(spec.potential)
    elif spec.Lambda is not None:
        V = -sys.field(spec.Lambda)
    else:
        return ([conn.potential_grad(i) for i in range(sys.n)],
                [conn.potential_second(i) for i in range(sys.n)])
    Vi = [V.partial(x[i]) for i in range(sys.n)]
    return Vi, [Vi[i].partial(x[i]) for i in range(sys.n)]


def b_coefficients(sys, spec: RecursionSpecSecond, conn: Connection | None = None):
    """Matrix of fields b_ik."""
    conn = _connection(sys, conn)
    x = sys.coords
    f, c, d = _spec_fields(sys, spec.f), _spec_fields(sys, spec.c), _spec_fields(sys, spec.d)
    fp = [f[k].partial(x[k]) for k in range(sys.n)]
    Vi, Vii = _potential_parts(sys, spec, conn)
    n = sys.n
    b = [[None] * n for _ in range(n)]
    for i in range(n):
        G = conn.self_gamma(i)
        for k in range(n):
            if k == i:
                b[i][i] = (f[i] * (G.partial(x[i]) + G * G - 2.0 * Vii[i]) - fp[i] * Vi[i]
                           + c[i] * G + d[i])
            else:
                g = conn.gamma(i, k)
                Gk = conn.self_gamma(k)
                b[i][k] = f[k] * (g * (2.0 * Gk - g) - g.partial(x[k])) + (c[k] - fp[k]) * g
    return b


def apply_second(sys: DiagonalSystem, spec: RecursionSpecSecond, w,
                 conn: Connection | None = None) -> CoefficientVector:
    """Field-level second-order reduced recursion."""
    conn = _connection(sys, conn)
    w = _vector(sys, w)
    x = sys.coords
    f, c = _spec_fields(sys, spec.f), _spec_fields(sys, spec.c)
    b = b_coefficients(sys, spec, conn)
    out = []
    for i in range(sys.n):
        wi_i = w[i].partial(x[i])
        acc = f[i] * wi_i.partial(x[i]) + (2.0 * f[i] * conn.self_gamma(i) + c[i]) * wi_i
        for k in range(sys.n):
            if k != i and not _zero(f[k]):
                acc = acc + f[k] * conn.gamma(i, k) * w[k].partial(x[k])
        for k in range(sys.n):
            acc = acc + b[i][k] * w[k]
        out.append(acc)
    return CoefficientVector(out)


def recursion_second(sys, spec, w, point, conn=None) -> np.ndarray:
    return apply_second(sys, spec, w, conn).evaluate(_as_point(sys, point))


def existence_second(sys, spec, samples, conn=None) -> float:
    """Residual of the symmetry system for B = (second-order recursion of 1)."""
    B = apply_second(sys, spec, sys.unit(), conn)
    return symmetry_residual(sys, B, samples, conn)


def squared_spec(sys: DiagonalSystem, spec: RecursionSpecFirst,
                 conn: Connection | None = None) -> RecursionSpecSecond:
    """Second-order data whose reduced recursion equals the first-order one applied twice.

    f = c^2, c2 = c c' + 2 c d, d2_i = c_i d_i' + d_i^2 + 2 c_i D_i(sum_k c_k V_k)
    with D_i the partial in u^i;
    the equality holds on solutions of the symmetry system.
    """
    conn = _connection(sys, conn)
    x = sys.coords
    c, d = _spec_fields(sys, spec.c), _spec_fields(sys, spec.d)
    Vi = [conn.potential_grad(k) for k in range(sys.n)]
    W = c[0] * Vi[0]
    for k in range(1, sys.n):
        W = W + c[k] * Vi[k]
    f2 = [c[i] * c[i] for i in range(sys.n)]
    c2 = [c[i] * c[i].partial(x[i]) + 2.0 * c[i] * d[i] for i in range(sys.n)]
    d2 = [c[i] * d[i].partial(x[i]) + d[i] * d[i] + 2.0 * c[i] * W.partial(x[i])
          for i in range(sys.n)]
    return RecursionSpecSecond(f2, c2, d2)


# ------------------------------------------------------ two components

class TwoComponentStructure:
    """Phi_r, Theta_s and their integrated potentials for s_t = phi s_x, r_t = psi r_x.

    Phi, Theta are minus the log-Lame potentials of the chosen gauge; in the
    base-point gauge Phi(s, r0) = 0 and Theta(s0, r) = 0.
    Lambda (Lambda_sr = -Phi_r Theta_s) is minus the connection potential.
    """

    def __init__(self, sys: DiagonalSystem, gauge="auto", base_point=None, conn: Connection | None = None):
        if sys.n != 2:
            raise ValueError("two-component structure needs n = 2")
        self.sys = sys
        self.conn = conn or Connection(sys, gauge, base_point)
        s, r = sys.coords
        self.s, self.r = s, r
        phi, psi = sys.speeds
        self.Phi_r = phi.partial(r) / (phi - psi)
        self.Theta_s = psi.partial(s) / (psi - phi)

    @property
    def Phi(self) -> ScalarField:
        return -self.conn.lame(0)

    @property
    def Theta(self) -> ScalarField:
        return -self.conn.lame(1)

    @property
    def Phi_s(self) -> ScalarField:
        return -self.conn.self_gamma(0)

    @property
    def Theta_r(self) -> ScalarField:
        return -self.conn.self_gamma(1)

    def Lambda_grad(self):
        """(Lambda_s, Lambda_r)."""
        return -self.conn.potential_grad(0), -self.conn.potential_grad(1)

    # classical first-order recursion
    def recursion_first(self, A, C, a, c, Phi0=0.0, Theta0=0.0):
        """(a^, c^) = (A(a_s - Phi_s a) - Phi0 a - C Phi_r c, C(c_r - Theta_r c) - Theta0 c - A Theta_s a)."""
        f = self.sys.field
        A, C, a, c, Phi0, Theta0 = map(f, (A, C, a, c, Phi0, Theta0))
        ah = A * (a.partial(self.s) - self.Phi_s * a) - Phi0 * a - C * self.Phi_r * c
        ch = C * (c.partial(self.r) - self.Theta_r * c) - Theta0 * c - A * self.Theta_s * a
        return CoefficientVector([ah, ch])

    def first_ST(self, A, C, Phi0=0.0, Theta0=0.0):
        f = self.sys.field
        A, C, Phi0, Theta0 = map(f, (A, C, Phi0, Theta0))
        S = A * self.Phi_s + C * self.Phi_r + Phi0
        T = A * self.Theta_s + C * self.Theta_r + Theta0
        return S, T

    def existence_first(self, A, C, samples, Phi0=0.0, Theta0=0.0) -> float:
        """max of |S_r - Phi_r (S - T)| and |T_s - Theta_s (T - S)|."""
        S, T = self.first_ST(A, C, Phi0, Theta0)
        return self._pair_residual(S, T, samples)

    def _pair_residual(self, S, T, samples):
        worst = 0.0
        for p in _points(self.sys, samples):
            sv, tv = S.evaluate(p), T.evaluate(p)
            r1 = S.partial(self.r).evaluate(p) - self.Phi_r.evaluate(p) * (sv - tv)
            r2 = T.partial(self.s).evaluate(p) - self.Theta_s.evaluate(p) * (tv - sv)
            worst = max(worst, abs(r1), abs(r2))
        return worst

    # classical second-order recursion
    def _second_terms(self, A, C, b, d, Phi0, Theta0, Lambda):
        f = self.sys.field
        A, C, b, d, Phi0, Theta0 = map(f, (A, C, b, d, Phi0, Theta0))
        s, r = self.s, self.r
        if Lambda is None:
            Ls, Lr = self.Lambda_grad()
        else:
            L = f(Lambda)
            Ls, Lr = L.partial(s), L.partial(r)
        Ps, Pr, Ts, Tr = self.Phi_s, self.Phi_r, self.Theta_s, self.Theta_r
        Ap, Cp = A.partial(s), C.partial(r)
        coef_aa = Ap * Ls + A * (Ps * Ps - Ps.partial(s) + 2.0 * Ls.partial(s)) + b * Ps + Phi0
        coef_ac = Cp * Pr + C * (2.0 * Pr * Tr + Pr.partial(r) - Pr * Pr) + d * Pr
        coef_cc = Cp * Lr + C * (Tr * Tr - Tr.partial(r) + 2.0 * Lr.partial(r)) + d * Tr + Theta0
        coef_ca = Ap * Ts + A * (2.0 * Ts * Ps + Ts.partial(s) - Ts * Ts) + b * Ts
        return A, C, b, d, Ps, Pr, Ts, Tr, coef_aa, coef_ac, coef_cc, coef_ca

    def recursion_second(self, A, C, b, d, a, c, Phi0=0.0, Theta0=0.0, Lambda=None):
        """Classical two-component second-order recursion of (a, c)."""
        A, C, b, d, Ps, Pr, Ts, Tr, caa, cac, ccc, cca = self._second_terms(A, C, b, d, Phi0, Theta0, Lambda)
        a, c = self.sys.field(a), self.sys.field(c)
        s, r = self.s, self.r
        a_s, c_r = a.partial(s), c.partial(r)
        ah = A * a_s.partial(s) - (2.0 * A * Ps + b) * a_s - C * Pr * c_r + caa * a + cac * c
        ch = C * c_r.partial(r) - (2.0 * C * Tr + d) * c_r - A * Ts * a_s + ccc * c + cca * a
        return CoefficientVector([ah, ch])

    def second_ST(self, A, C, b, d, Phi0=0.0, Theta0=0.0, Lambda=None):
        *_, caa, cac, ccc, cca = self._second_terms(A, C, b, d, Phi0, Theta0, Lambda)
        return caa + cac, ccc + cca

    def existence_second(self, A, C, b, d, samples, Phi0=0.0, Theta0=0.0, Lambda=None) -> float:
        """max of |S_r - Phi_r (S - T)| and |T_s - Theta_s (T - S)| for the second-order S, T."""
        S, T = self.second_ST(A, C, b, d, Phi0, Theta0, Lambda)
        return self._pair_residual(S, T, samples)

    def time_integrals(self, point, t: float):
        """(int_0^t phi dt, int_0^t psi dt) at fixed (s, r)."""
        return tuple(time_integral(v, point, t) for v in self.sys.speeds)


def inhomogeneous_existence_check(struct: TwoComponentStructure, b, d, Phi0, Theta0, samples) -> float:
    """Residual of Phi^_r = Phi_r (Phi^ - Theta^), Theta^_s = Theta_s (Theta^ - Phi^).

    Phi^ = b Phi_s + d Phi_r + Phi0, Theta^ = b Theta_s + d Theta_r + Theta0.
    """
    f = struct.sys.field
    b, d, Phi0, Theta0 = map(f, (b, d, Phi0, Theta0))
    Ph = b * struct.Phi_s + d * struct.Phi_r + Phi0
    Th = b * struct.Theta_s + d * struct.Theta_r + Theta0
    return struct._pair_residual(Ph, Th, samples)


# ----------------------------------------------------------- commutator

Characteristic = Callable[[float, float, float, float, float, float], tuple]


def _jet_partial(sigma, args, slot, comp, h):
    a1 = list(args)
    a2 = list(args)
    a1[slot] += h
    a2[slot] -= h
    return (sigma(*a1)[comp] - sigma(*a2)[comp]) / (2 * h)


def commutator2(sigma_bar: Characteristic, sigma: Characteristic, jet: JetPoint,
                step: float = 1e-5) -> tuple[float, float]:
    """Commutator of two first-order characteristics sigma(x, t, s, r, s_x, r_x) -> (f, g).

    Partials in the jet slots are second-order central differences with
    step ``step``; D_x uses the jet's second derivatives.
    """
    jet.require(2)
    args = (jet.x, jet.t, jet.u[0], jet.u[1], jet.u_x[0], jet.u_x[1])
    sx, rx = jet.u_x
    sxx, rxx = jet.u_xx
    X, S, R, SX, RX = 0, 2, 3, 4, 5

    def d(sig, slot, comp):
        return _jet_partial(sig, args, slot, comp, step)

    def Dx(sig, comp):
        return (d(sig, X, comp) + d(sig, S, comp) * sx + d(sig, R, comp) * rx
                + d(sig, SX, comp) * sxx + d(sig, RX, comp) * rxx)

    fb, gb = sigma_bar(*args)
    f, g = sigma(*args)
    ft = (fb * d(sigma, S, 0) - f * d(sigma_bar, S, 0) + gb * d(sigma, R, 0) - g * d(sigma_bar, R, 0)
          + Dx(sigma_bar, 0) * d(sigma, SX, 0) - Dx(sigma, 0) * d(sigma_bar, SX, 0))
    gt = (fb * d(sigma, S, 1) - f * d(sigma_bar, S, 1) + gb * d(sigma, R, 1) - g * d(sigma_bar, R, 1)
          + Dx(sigma_bar, 1) * d(sigma, RX, 1) - Dx(sigma, 1) * d(sigma_bar, RX, 1))
    return float(ft), float(gt)


# ------------------------------------------------- explicit t or x dependence

@dataclass
class DependenceReport:
    beta: float
    residual: float
    degenerate: bool
    passed: bool


def _dependence_check(sys, samples, var, speeds, tol):
    x = sys.coords
    pairs = []
    for i in range(sys.n):
        for j in range(sys.n):
            if i != j:
                vij = speeds[i].partial(x[j])
                q = vij / (speeds[i] - speeds[j])
                pairs.append((q.partial(var), vij))
    lhs, rhs = [], []
    for p in samples:
        for dq, vij in pairs:
            lhs.append(dq.evaluate(p))
            rhs.append(vij.evaluate(p))
    lhs, rhs = np.array(lhs), np.array(rhs)
    denom = float(rhs @ rhs)
    degenerate = denom < 1e-24
    beta = 0.0 if degenerate else float(lhs @ rhs) / denom
    res = float(np.max(np.abs(lhs - beta * rhs))) if lhs.size else 0.0
    return DependenceReport(beta, res, degenerate, res < tol)


def t_dependence_check(sys: DiagonalSystem, samples, tol: float = 1e-6) -> DependenceReport:
    """Least-squares beta in [v_{i,j}/(v_i - v_j)]_t = beta v_{i,j} and the residual under it.

    ``samples`` are binding dicts holding the coordinates and t.
    """
    return _dependence_check(sys, samples, "t", sys.speeds, tol)


def x_dependence_check(sys: DiagonalSystem, samples, tol: float = 1e-6) -> DependenceReport:
    """The same test for x-dependent speeds, applied to 1/v with x in place of t."""
    inv = [1.0 / v for v in sys.speeds]
    return _dependence_check(sys, samples, "x", inv, tol)


def time_integral(f: ScalarField, point: Mapping, upper: float, var: str = "t", tol: float = 1e-10):
    """int_0^upper f dvar at fixed coordinates (adaptive Simpson)."""
    def g(tau):
        p = dict(point)
        p[var] = tau
        return f.evaluate(p)
    if upper == 0.0:
        return 0.0
    return simpson(g, 0.0, float(upper), tol)


def symmetry_coefficients_t(sys: DiagonalSystem, a, beta: float, C: float, point: Mapping) -> np.ndarray:
    """A_i = a_i exp{beta [x + int_0^t v_i dt]} + C (beta != 0) or a_i + C [x + int_0^t v_i dt]."""
    a = _vector(sys, a)
    p0 = dict(point)
    t, x = float(p0["t"]), float(p0["x"])
    base = dict(p0)
    base["t"] = 0.0
    out = []
    for i, v in enumerate(sys.speeds):
        integral = time_integral(v, p0, t) if "t" in v.variables else t * v.evaluate(p0)
        ai = a[i].evaluate(base)
        if beta != 0.0:
            out.append(ai * np.exp(beta * (x + integral)) + C)
        else:
            out.append(ai + C * (x + integral))
    return np.array(out)


def symmetry_coefficients_x(sys: DiagonalSystem, a, beta: float, C: float, point: Mapping) -> np.ndarray:
    """Twin for x-dependent speeds: A_i = v_i {a_i exp[beta (t + int_0^x v_i^-1 dx)] + C} etc."""
    a = _vector(sys, a)
    p0 = dict(point)
    t, x = float(p0["t"]), float(p0["x"])
    base = dict(p0)
    base["x"] = 0.0
    out = []
    for i, v in enumerate(sys.speeds):
        integral = time_integral(1.0 / v, p0, x, var="x")
        ai = a[i].evaluate(base)
        vi = v.evaluate(p0)
        if beta != 0.0:
            out.append(vi * (ai * np.exp(beta * (t + integral)) + C))
        else:
            out.append(vi * (ai + C * (t + integral)))
    return np.array(out)

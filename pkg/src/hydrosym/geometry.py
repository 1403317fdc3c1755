"""Connection coefficients, Tsarev conditions, curvature and Lame data.

For a diagonal system the connection is G^i_ij = v_{i,j} / (v_j - v_i).
The diagonal coefficients G^i_ii and G^j_ii need a metric, i.e. log-Lame
potentials Phi_i with d_j Phi_i = G^i_ij.  Those are fixed only up to a
function of u^i; two gauges are offered:

* the system's own potentials, when it carries them (``sys.lame``);
* the base-point gauge: Phi_i vanishes on the u^i-axis line through a base
  point b, and elsewhere is the axis-aligned line integral of G^i_ij
  starting from (u^i, b^rest).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import exprlang as el
from .core import DiagonalSystem, HyperbolicityError, ScalarField, validate_hyperbolic
from .exprlang import Opaque
from .quadrature import DEFAULT_DEPTH, DEFAULT_TOL, simpson

__all__ = [
    "Connection", "line_potential", "connection", "tsarev_residual", "curvature_check",
    "CurvatureReport", "lame_reconstruct", "LameReport", "hamiltonian_check", "HamiltonianReport",
]


def line_potential(sys: DiagonalSystem, i: int, grads: Mapping[int, ScalarField],
                   base: Sequence[float], order: Sequence[int] | None = None,
                   label: str = "Phi", tol: float = DEFAULT_TOL) -> ScalarField:
    """Field P with d_j P = grads[j] (j != i) and P = 0 on the u^i line through ``base``.

    The value is the sum of one-dimensional quadratures along the axes in
    ``order`` (default: increasing index, skipping i).  d_i P is another line
    potential built from d_i grads[j]; d_j P for j != i is grads[j] itself,
    which is exact when the gradient data are integrable.
    """
    coords = sys.coords
    base = tuple(float(b) for b in base)
    order = tuple(j for j in (order or range(sys.n)) if j != i)
    grads = {j: sys.field(g) for j, g in grads.items()}
    extra = set()
    for g in grads.values():
        extra |= set(g.variables) - set(coords)
    variables = tuple(coords) + tuple(sorted(extra))

    def fn(b):
        cur = {c: b[c] for c in variables if c in b}
        for j in order:
            cur[coords[j]] = base[j]
        total = 0.0
        for j in order:
            g = grads.get(j)
            hi = b[coords[j]]
            if g is not None and not (isinstance(g.expr, el.Const) and g.expr.value == 0.0):
                lo = np.broadcast_to(base[j], np.shape(hi))
                fixed = dict(cur)

                def integrand(y, g=g, fixed=fixed, cj=coords[j]):
                    p = dict(fixed)
                    p[cj] = y
                    return g.evaluate(p)

                total = total + simpson(integrand, lo, hi, tol, DEFAULT_DEPTH)
            cur[coords[j]] = hi
        return total

    def deriv(name):
        if name in coords:
            k = coords.index(name)
            if k != i:
                g = grads.get(k)
                return g.expr if g is not None else el.ZERO
        sub = {j: g.partial(name) for j, g in grads.items()}
        return line_potential(sys, i, sub, base, order, f"{label}_{name}", tol).expr

    return ScalarField(Opaque(f"{label}{i + 1}", fn, variables, deriv), sys.aux)


class Connection:
    """Connection data of a diagonal system in a chosen Lame gauge.

    ``gauge``: "auto" uses the system's potentials when present and the
    base-point gauge otherwise; "base" forces the base-point gauge; a
    sequence of expressions supplies Phi_i directly.
    """

    def __init__(self, sys: DiagonalSystem, gauge="auto", base_point: Sequence[float] | None = None,
                 signature: Sequence[float] | None = None, potential=None, order=None):
        self.sys = sys
        self.n = sys.n
        self.base_point = tuple(base_point) if base_point is not None else sys.base_point
        self.order = order
        self._gamma: dict = {}
        self._lame = None
        self._pgrad = None
        if isinstance(gauge, str):
            if gauge not in ("auto", "base"):
                raise ValueError(f"unknown gauge {gauge!r}")
            if gauge == "auto" and sys.lame is not None:
                self._lame = sys.lame
                self.gauge = "system"
            else:
                self.gauge = "base"
        else:
            self._lame = tuple(sys.field(p) for p in gauge)
            self.gauge = "explicit"
        if potential is not None:
            self.potential = sys.field(potential)
        elif self.gauge == "system":
            self.potential = sys.potential
        else:
            self.potential = None
        self.signature = tuple(signature) if signature is not None else (
            sys.signature if sys.signature is not None else (1.0,) * sys.n)

    # -- off-diagonal coefficients
    def gamma(self, i: int, j: int) -> ScalarField:
        key = (i, j)
        if key not in self._gamma:
            if i == j:
                self._gamma[key] = self.self_gamma(i)
            else:
                self._gamma[key] = self._offdiag(i, j)
        return self._gamma[key]

    def _offdiag(self, i, j):
        v = self.sys.speeds
        xj = self.sys.coords[j]
        dep = self.sys.dependence
        if dep == "explicit-x":
            # frozen at x = 0: c~_ij v_j / v_i with c~ built from 1/v
            w = [1.0 / s for s in v]
            g = w[i].partial(xj) / (w[j] - w[i]) * v[j] / v[i]
            return _freeze(g, "x")
        g = v[i].partial(xj) / (v[j] - v[i])
        return _freeze(g, "t") if dep == "explicit-t" else g

    # -- gauge-dependent data
    def _need_base(self):
        if self.base_point is None:
            raise ValueError("diagonal connection data need a Lame gauge: pass base_point "
                             "or use a system that carries Lame potentials")
        return self.base_point

    def lame(self, i: int) -> ScalarField:
        if self._lame is None:
            base = self._need_base()
            self._lame = tuple(
                line_potential(self.sys, k, {j: self.gamma(k, j) for j in range(self.n) if j != k},
                               base, self.order, "Phi")
                for k in range(self.n))
        return self._lame[i]

    def self_gamma(self, i: int) -> ScalarField:
        """G^i_ii = d_i Phi_i."""
        return self.lame(i).partial(self.sys.coords[i])

    def metric_ratio(self, i: int, j: int) -> ScalarField:
        """g_ii / g_jj."""
        s = self.signature[i] * self.signature[j]
        return s * (2.0 * (self.lame(i) - self.lame(j))).apply("exp")

    def metric_gamma(self, j: int, i: int) -> ScalarField:
        """G^j_ii = -(g_ii/g_jj) G^i_ij for j != i."""
        return -(self.metric_ratio(i, j) * self.gamma(i, j))

    def potential_grad(self, i: int) -> ScalarField:
        """V_i for the connection potential V with V_ij = G^i_ij G^j_ji."""
        if self.potential is not None:
            return self.potential.partial(self.sys.coords[i])
        if self._pgrad is None:
            base = self._need_base()
            self._pgrad = tuple(
                line_potential(self.sys, k,
                               {j: self.gamma(k, j) * self.gamma(j, k) for j in range(self.n) if j != k},
                               base, self.order, "V")
                for k in range(self.n))
        return self._pgrad[i]

    def potential_second(self, i: int) -> ScalarField:
        return self.potential_grad(i).partial(self.sys.coords[i])

    def matrix(self, point, diagonal: bool = False) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            for j in range(self.n):
                if i != j:
                    out[i, j] = self.gamma(i, j).evaluate(point)
                elif diagonal:
                    out[i, i] = self.self_gamma(i).evaluate(point)
        return out


def _freeze(f: ScalarField, name: str) -> ScalarField:
    """f with ``name`` set to 0."""
    return ScalarField(el.substitute(f.expr, {name: el.ZERO}), f.aux, f.mode, f.fd_step)


def _as_point(sys, point):
    return point if isinstance(point, Mapping) else sys.point(point)


def _hyperbolic(sys, point):
    rep = validate_hyperbolic(sys, point)
    if not rep.passed:
        raise HyperbolicityError(f"speeds {rep.pair} coincide (gap {rep.min_gap:.3g})")


def _conn(sys, conn):
    if conn is not None:
        return conn
    c = sys._cache.get("connection")
    if c is None:
        c = sys._cache["connection"] = Connection(sys)
    return c


def connection(sys: DiagonalSystem, point, diagonal: bool = False, conn: Connection | None = None) -> np.ndarray:
    """Matrix of G^i_ij at ``point``; the diagonal holds G^i_ii when requested."""
    point = _as_point(sys, point)
    _hyperbolic(sys, point)
    return _conn(sys, conn).matrix(point, diagonal)


def _triples(n):
    return [(i, j, k) for i, j, k in itertools.permutations(range(n), 3) if j < k]


def tsarev_residual(sys: DiagonalSystem, point, conn: Connection | None = None) -> float:
    """max |d_k G^i_ij - d_j G^i_ik| over distinct (i, j, k); 0 for two components."""
    if sys.n < 3:
        return 0.0
    point = _as_point(sys, point)
    _hyperbolic(sys, point)
    c = _conn(sys, conn)
    x = sys.coords
    worst = 0.0
    for i, j, k in _triples(sys.n):
        r = c.gamma(i, j).partial(x[k]).evaluate(point) - c.gamma(i, k).partial(x[j]).evaluate(point)
        worst = max(worst, abs(r))
    return worst


@dataclass
class CurvatureReport:
    mixed: float          # max |G^i_ij,k - G^i_ik,j|
    closed: float         # max |G^i_ij,k - [G^i_ik G^k_kj + G^i_ij (G^j_jk - G^i_ik)]|
    per_triple: dict = field(default_factory=dict)


def curvature_check(sys: DiagonalSystem, point, conn: Connection | None = None) -> CurvatureReport:
    """Both curvature-component residuals built from the off-diagonal connection."""
    if sys.n < 3:
        return CurvatureReport(0.0, 0.0)
    point = _as_point(sys, point)
    _hyperbolic(sys, point)
    c = _conn(sys, conn)
    x = sys.coords
    rep = CurvatureReport(0.0, 0.0)
    for i, j, k in itertools.permutations(range(sys.n), 3):
        g_ij_k = c.gamma(i, j).partial(x[k]).evaluate(point)
        g_ik_j = c.gamma(i, k).partial(x[j]).evaluate(point)
        g = lambda a, b: c.gamma(a, b).evaluate(point)  # noqa: E731
        closed = g_ij_k - (g(i, k) * g(k, j) + g(i, j) * (g(j, k) - g(i, k)))
        mixed = g_ij_k - g_ik_j
        rep.per_triple[(i, j, k)] = (mixed, closed)
        rep.mixed = max(rep.mixed, abs(mixed))
        rep.closed = max(rep.closed, abs(closed))
    return rep


@dataclass
class LameReport:
    phi: np.ndarray
    H: np.ndarray
    beta: np.ndarray            # beta[j, i] = H_{i,j} / H_j
    diagonal_variation: float   # max |(sum_k d_k) beta_ji|


def lame_reconstruct(sys: DiagonalSystem, base_point: Sequence[float], point: Sequence[float],
                     phi0: Sequence[float] | None = None, order: Sequence[int] | None = None,
                     step: float = 1e-4) -> LameReport:
    """Phi_i at ``point`` by axis-aligned quadrature from ``base_point``.

    H_i = exp(Phi_i); rotation coefficients beta_ji = H_{i,j}/H_j come from
    4th-order central differences of the reconstruction.
    """
    n = sys.n
    phi0 = np.zeros(n) if phi0 is None else np.asarray(phi0, dtype=float)
    conn = Connection(sys, "base", base_point, order=order)
    u = np.asarray(point, dtype=float)

    def phis(uu):
        p = sys.point(uu)
        return np.array([conn.lame(i).evaluate(p) for i in range(n)]) + phi0

    phi = phis(u)
    H = np.exp(phi)

    def betas(uu):
        out = np.zeros((n, n))
        for j in range(n):
            h = step * max(1.0, abs(uu[j]))
            e = np.zeros(n)
            e[j] = h
            dH = (-np.exp(phis(uu + 2 * e)) + 8 * np.exp(phis(uu + e))
                  - 8 * np.exp(phis(uu - e)) + np.exp(phis(uu - 2 * e))) / (12 * h)
            Hu = np.exp(phis(uu))
            for i in range(n):
                if i != j:
                    out[j, i] = dH[i] / Hu[j]
        return out

    beta = betas(u)
    # rotation coefficients analytically, H_{i,j} = H_i G^i_ij, for the diagonal drift
    def beta_exact(uu):
        p = sys.point(uu)
        ph = phis(uu)
        out = np.zeros((n, n))
        for j in range(n):
            for i in range(n):
                if i != j:
                    out[j, i] = np.exp(ph[i] - ph[j]) * conn.gamma(i, j).evaluate(p)
        return out

    h = step * max(1.0, float(np.max(np.abs(u))))
    d = np.ones(n) * h
    drift = (beta_exact(u + d) - beta_exact(u - d)) / (2 * h)
    return LameReport(phi, H, beta, float(np.max(np.abs(drift))))


@dataclass
class HamiltonianReport:
    passed: bool
    max_residual: float
    signature: tuple
    by_signature: dict


def _curvature_fields(conn: Connection):
    """R^i_jji for all ordered pairs i != j as fields."""
    n = conn.n
    x = conn.sys.coords
    out = {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            g_ij = conn.gamma(i, j)
            g_i_jj = conn.metric_gamma(i, j)      # G^i_jj
            g_j_ij = conn.gamma(j, i)             # G^j_ji = G^j_ij
            g_i_ii = conn.self_gamma(i)
            g_j_jj = conn.self_gamma(j)
            r = (g_ij.partial(x[j]) - g_i_jj.partial(x[i]) + g_ij * g_ij + g_i_jj * g_j_ij
                 - g_i_ii * g_i_jj - g_ij * g_j_jj)
            for k in range(n):
                if k not in (i, j):
                    r = r - conn.gamma(i, k) * conn.metric_gamma(k, j)
            out[(i, j)] = r
    return out


def hamiltonian_check(sys: DiagonalSystem, samples, tol: float = 1e-6, gauge="auto",
                      base_point=None, signature: Sequence[float] | None = None) -> HamiltonianReport:
    """Flatness test R^i_jji = 0 of the diagonal metric g_ii = sign_i exp(2 Phi_i).

    The outcome depends on the Lame gauge (functions of one variable) and
    the metric signature.  With ``signature`` None every sign pattern is
    tried (first sign fixed) and the check passes if any is flat.
    """
    n = sys.n
    if signature is not None:
        patterns = [tuple(signature)]
    elif sys.signature is not None and gauge == "auto" and sys.lame is not None:
        patterns = [tuple(sys.signature)] + [
            (1.0,) + p for p in itertools.product((1.0, -1.0), repeat=n - 1)
            if (1.0,) + p != tuple(sys.signature)]
    else:
        patterns = [(1.0,) + p for p in itertools.product((1.0, -1.0), repeat=n - 1)]
    pts = [_as_point(sys, p) for p in samples]
    results = {}
    for sig in patterns:
        conn = Connection(sys, gauge, base_point, signature=sig)
        fields = _curvature_fields(conn)
        worst = 0.0
        for p in pts:
            for f in fields.values():
                worst = max(worst, abs(f.evaluate(p)))
        results[sig] = worst
    best = min(results, key=results.get)
    return HamiltonianReport(results[best] < tol, results[best], best, results)

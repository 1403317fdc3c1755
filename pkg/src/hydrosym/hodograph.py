"""Implicit (generalized hodograph) solutions on (x, t) grids.

An ImplicitSystem holds relations F_i(u; x, t) = 0.  solve_grid finds u at
every grid node by damped Newton, continuing row by row in t from a seed
node; residual_pde then checks the PDE with central differences.
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import exprlang as el
from .core import (AuxVariable, CoefficientVector, DiagonalSystem, QuasiLinearSystem,
                   ScalarField, complete)
from .exprlang import DomainError, ExprError, Opaque
from .quadrature import QuadratureError, simpson

__all__ = [
    "ImplicitSystem", "SolutionGrid", "SolverError", "ResidualReport", "build_implicit",
    "build_implicit_t", "build_implicit_x", "series_coefficients", "solve_grid",
    "residual_pde", "grid_to_csv", "grid_from_csv", "grid_to_json", "grid_from_json",
    "time_integral_field", "STATUS",
]

STATUS = ("converged", "singular", "out-of-domain", "diverged", "unsolved")
CONVERGED, SINGULAR, OUT_OF_DOMAIN, DIVERGED, UNSOLVED = range(5)


class SolverError(RuntimeError):
    pass


class ImplicitSystem:
    """Relations F_i(u; x, t) = 0 in the unknowns ``coords`` (Expr-backed fields)."""

    def __init__(self, F: Sequence, coords: Sequence[str], aux: Sequence[AuxVariable] = (),
                 provenance: str = "hodograph", meta: dict | None = None):
        self.coords = tuple(coords)
        self.aux = tuple(aux)
        self.F = tuple(f if isinstance(f, ScalarField) else ScalarField(el.as_expr(f), self.aux)
                       for f in F)
        if len(self.F) != len(self.coords):
            raise ValueError("need one relation per unknown")
        self.provenance = provenance
        self.meta = dict(meta or {})
        self._jac = None

    @property
    def n(self) -> int:
        return len(self.coords)

    def _bind(self, U, x, t):
        b = {c: U[k] for k, c in enumerate(self.coords)}
        b["x"] = x
        b["t"] = t
        return complete(b, self.aux)

    def _eval(self, fields, U, x, t):
        b = self._bind(U, x, t)
        m = np.shape(x)
        return np.array([np.broadcast_to(el.evaluate_unchecked(f.expr, b), m) for f in fields], dtype=float)

    def residual(self, U, x, t) -> np.ndarray:
        """F at nodes: U has shape (n, m), x and t shape (m,); returns (n, m)."""
        return self._eval(self.F, U, x, t)

    def jacobian(self, U, x, t) -> np.ndarray:
        """dF_i/du^j with shape (n, n, m)."""
        if self._jac is None:
            self._jac = [f.partial(c) for f in self.F for c in self.coords]
        vals = self._eval(self._jac, U, x, t)
        return vals.reshape(self.n, self.n, -1)


# ----------------------------------------------------------- constructors

def build_implicit(sys: DiagonalSystem, w, convention: str = "generalized",
                   certify_samples=None, tol: float = 1e-8) -> ImplicitSystem:
    """Hodograph relations from a symmetry coefficient vector w.

    convention "generalized": F_i = w_i(u) - t v_i(u) - x;
    convention "classical":   F_i = w_i(u) + x + t v_i(u)  (w plays the role of a, c).
    With ``certify_samples`` the symmetry residual of w is recorded in meta
    and a warning issued above ``tol``.
    """
    from .symmetry import _vector, symmetry_residual
    w = _vector(sys, w)
    x, t = ScalarField(el.var("x"), sys.aux), ScalarField(el.var("t"), sys.aux)
    if convention == "generalized":
        F = [w[i] - t * sys.speeds[i] - x for i in range(sys.n)]
    elif convention == "classical":
        F = [w[i] + x + t * sys.speeds[i] for i in range(sys.n)]
    else:
        raise ValueError(f"unknown convention {convention!r}")
    meta = {"convention": convention}
    if certify_samples is not None:
        res = symmetry_residual(sys, w, certify_samples)
        meta["symmetry_residual"] = res
        if res > tol:
            import warnings
            warnings.warn(f"coefficient vector misses the symmetry system by {res:.3g}")
    return ImplicitSystem(F, sys.coords, sys.aux, "hodograph", meta)


def time_integral_field(f: ScalarField, var: str = "t", tol: float = 1e-13,
                        label: str = "T") -> ScalarField:
    """Field G = int_0^{var} f d(var) at fixed other variables (batched Simpson).

    dG/d(var) = f and dG/du = int_0^{var} df/du.
    """
    variables = tuple(sorted(set(f.variables) | {var}))
    cache: dict = {}

    def fn(b):
        upper = np.asarray(b[var], dtype=float)
        others = {k: v for k, v in b.items() if k != var}
        shape = np.broadcast_shapes(upper.shape, *(np.shape(v) for v in others.values()))
        upper = np.broadcast_to(upper, shape)
        others = {k: np.broadcast_to(v, shape) for k, v in others.items()}

        def g(tau):
            p = dict(others)
            p[var] = tau
            return f.evaluate(p)
        lo = np.zeros(shape)
        return simpson(g, lo, upper, tol)

    def deriv(name):
        if name == var:
            return f.expr
        hit = cache.get(name)
        if hit is None:
            hit = cache[name] = time_integral_field(f.partial(name), var, tol, f"{label}_{name}").expr
        return hit

    return ScalarField(Opaque(label, fn, variables, deriv), f.aux)


def _integral(sys, v: ScalarField, var: str, tol: float) -> ScalarField:
    if var not in v.variables:
        return ScalarField(el.var(var), sys.aux) * v
    return time_integral_field(v, var, tol)


def build_implicit_t(sys: DiagonalSystem, a, beta: float, tol: float = 1e-13) -> ImplicitSystem:
    """Linearizing relations for explicitly t-dependent speeds.

    beta != 0: F_i = a_i(u) + exp{-beta [x + int_0^t v_i dt]};
    beta == 0: F_i = a_i(u) + x + int_0^t v_i dt.
    Quadratures run at fixed u.
    """
    from .symmetry import _vector
    a = _vector(sys, a)
    x = ScalarField(el.var("x"), sys.aux)
    F = []
    for i, v in enumerate(sys.speeds):
        phase = x + _integral(sys, v, "t", tol)
        F.append(a[i] + (-beta * phase).apply("exp") if beta != 0.0 else a[i] + phase)
    return ImplicitSystem(F, sys.coords, sys.aux, f"t-dependent({beta})", {"beta": beta})


def build_implicit_x(sys: DiagonalSystem, a, beta: float, tol: float = 1e-13) -> ImplicitSystem:
    """Twin for explicitly x-dependent speeds, with t and int_0^x v_i^{-1} dx in place of x and int v_i dt."""
    from .symmetry import _vector
    a = _vector(sys, a)
    t = ScalarField(el.var("t"), sys.aux)
    F = []
    for i, v in enumerate(sys.speeds):
        phase = t + _integral(sys, 1.0 / v, "x", tol)
        F.append(a[i] + (-beta * phase).apply("exp") if beta != 0.0 else a[i] + phase)
    return ImplicitSystem(F, sys.coords, sys.aux, f"x-dependent({beta})", {"beta": beta})


def series_coefficients(sys: DiagonalSystem, spec, seed: str, N: int, conn=None,
                        samples=None) -> CoefficientVector:
    """N-fold reduced recursion (first- or second-order spec) applied to the seed 1 or v.

    With ``samples`` the symmetry residual is stored as ``.certificate``.
    """
    from .symmetry import RecursionSpecFirst, apply_first, apply_second, symmetry_residual
    if seed in ("1", "unit", 1):
        w = sys.unit()
    elif seed in ("v", "velocity"):
        w = sys.velocity()
    else:
        raise ValueError("seed must be '1' or 'v'")
    step = apply_first if isinstance(spec, RecursionSpecFirst) else apply_second
    for _ in range(N):
        w = step(sys, spec, w, conn)
    w.certificate = symmetry_residual(sys, w, samples, conn) if samples is not None else None
    return w


# ----------------------------------------------------------------- solver

@dataclass
class SolutionGrid:
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray            # (n, nt, nx)
    status: np.ndarray       # (nt, nx) indices into STATUS
    coords: tuple
    meta: dict = field(default_factory=dict)

    @property
    def converged(self) -> np.ndarray:
        return self.status == CONVERGED

    @property
    def converged_fraction(self) -> float:
        return float(self.converged.mean())

    def summary(self) -> dict:
        counts = {name: int((self.status == k).sum()) for k, name in enumerate(STATUS)}
        return {"nodes": int(self.status.size), **counts}


def _safe_eval(fn, U, x, t):
    try:
        return fn(U, x, t)
    except (DomainError, QuadratureError, ExprError, ArithmeticError):
        if np.size(x) == 1:
            return None
        parts = [_safe_eval(fn, U[:, k:k + 1], x[k:k + 1], t[k:k + 1]) for k in range(np.size(x))]
        shape = None
        for p in parts:
            if p is not None:
                shape = p.shape
                break
        if shape is None:
            return None
        return np.concatenate([p if p is not None else np.full(shape, np.nan) for p in parts], axis=-1)


def _newton(imp: ImplicitSystem, U0, x, t, tol, max_iter, det_tol, deadline=None):
    """Batched damped Newton.  Returns (U, status) with status per node.

    Nodes still iterating when ``deadline`` (a time.perf_counter value) passes
    are left "unsolved".
    """
    U = np.array(U0, dtype=float)
    m = U.shape[1]
    status = np.full(m, UNSOLVED)
    active = np.ones(m, dtype=bool)
    F = _safe_eval(imp.residual, U, x, t)
    if F is None:
        return U, np.full(m, OUT_OF_DOMAIN)
    for _ in range(max_iter + 1):
        norm = np.max(np.abs(F), axis=0)
        bad = ~np.isfinite(norm) & active
        status[bad] = OUT_OF_DOMAIN
        active &= ~bad
        done = active & (norm < tol)
        status[done] = CONVERGED
        active &= ~done
        if not active.any():
            break
        if deadline is not None and time.perf_counter() > deadline:
            return U, status
        idx = np.nonzero(active)[0]
        J = _safe_eval(imp.jacobian, U[:, idx], x[idx], t[idx])
        if J is None:
            status[idx] = OUT_OF_DOMAIN
            active[idx] = False
            break
        J = np.moveaxis(J, -1, 0)                                  # (k, n, n)
        finite = np.all(np.isfinite(J), axis=(1, 2))
        scale = np.prod(np.linalg.norm(np.where(np.isfinite(J), J, 0.0), axis=2), axis=1)
        det = np.linalg.det(np.where(np.isfinite(J), J, 0.0))
        sing = finite & (np.abs(det) <= det_tol * np.maximum(scale, 1e-300))
        status[idx[~finite]] = OUT_OF_DOMAIN
        status[idx[sing]] = SINGULAR
        ok = finite & ~sing
        active[idx[~ok]] = False
        idx, J = idx[ok], J[ok]
        if idx.size == 0:
            break
        delta = np.linalg.solve(J, -F[:, idx].T[:, :, None])[:, :, 0].T  # (n, k)
        lam = np.ones(idx.size)
        base = norm[idx]
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(30):
            sel = idx[pending]
            trial = U[:, sel] + lam[pending] * delta[:, pending]
            Ft = _safe_eval(imp.residual, trial, x[sel], t[sel])
            if Ft is None:
                Ft = np.full((imp.n, sel.size), np.nan)
            nt = np.max(np.abs(Ft), axis=0)
            good = np.isfinite(nt) & ((nt < base[pending]) | (nt < tol))
            gi = np.nonzero(pending)[0][good]
            U[:, idx[gi]] = trial[:, good]
            F[:, idx[gi]] = Ft[:, good]
            pending[gi] = False
            if not pending.any():
                break
            lam[pending] *= 0.5
        # nodes whose line search failed cannot improve further
        stuck = idx[pending]
        status[stuck] = DIVERGED
        active[stuck] = False
    status[active] = DIVERGED
    return U, status


def solve_grid(imp: ImplicitSystem, x_axis, t_axis, seed, x0: float | None = None,
               t0: float | None = None, tol: float = 1e-12, max_iter: int = 50,
               det_tol: float = 1e-12, reverse: bool = False,
               time_budget: float | None = None) -> SolutionGrid:
    """Solve F(u; x, t) = 0 at every node of the grid x_axis x t_axis.

    The node nearest (x0, t0) (default: first node) is solved from ``seed``;
    its t-row is swept outward node by node, and further rows are solved as
    batches warm-started by extrapolation from the rows already solved.
    Nodes that fail in a batch are retried from a converged x-neighbour.
    ``reverse`` flips the sweep directions (a continuation consistency check).
    With ``time_budget`` (seconds) the nodes not reached in time stay "unsolved".
    """
    deadline = None if time_budget is None else time.perf_counter() + time_budget
    x = np.asarray(x_axis, dtype=float)
    t = np.asarray(t_axis, dtype=float)
    n, nx, nt = imp.n, x.size, t.size
    U = np.full((n, nt, nx), np.nan)
    status = np.full((nt, nx), UNSOLVED)
    ix0 = int(np.argmin(np.abs(x - (x[0] if x0 is None else x0))))
    it0 = int(np.argmin(np.abs(t - (t[0] if t0 is None else t0))))

    def solve_nodes(k, cols, guess):
        if deadline is not None and time.perf_counter() > deadline:
            return
        Uk, st = _newton(imp, guess, x[cols], np.full(cols.size, t[k]), tol, max_iter, det_tol,
                         deadline)
        U[:, k, cols] = Uk
        status[k, cols] = st

    def sweep_row(k, start, first_guess):
        solve_nodes(k, np.array([start]), np.asarray(first_guess, float).reshape(n, 1))
        if status[k, start] != CONVERGED:
            return False
        for direction in ((1, -1) if not reverse else (-1, 1)):
            j = start + direction
            while 0 <= j < nx:
                retry(k, j, direction)
                j += direction
        return True

    def retry(k, j, direction):
        prev = j - direction
        if not (0 <= prev < nx) or status[k, prev] != CONVERGED:
            return
        guess = U[:, k, prev].copy()
        prev2 = prev - direction
        if 0 <= prev2 < nx and status[k, prev2] == CONVERGED:
            guess = 2 * U[:, k, prev] - U[:, k, prev2]
        solve_nodes(k, np.array([j]), guess.reshape(n, 1))
        if status[k, j] != CONVERGED and not np.array_equal(guess, U[:, k, prev]):
            solve_nodes(k, np.array([j]), U[:, k, prev].reshape(n, 1))

    if not sweep_row(it0, ix0, seed):
        raise SolverError(f"Newton failed at the seed node (x={x[ix0]}, t={t[it0]}): "
                          f"{STATUS[status[it0, ix0]]}")
    order = (1, -1) if not reverse else (-1, 1)
    for direction in order:
        k = it0 + direction
        while 0 <= k < nt:
            prev, prev2 = k - direction, k - 2 * direction
            ok_prev = status[prev] == CONVERGED
            guess = U[:, prev, :].copy()
            if 0 <= prev2 < nt:
                both = ok_prev & (status[prev2] == CONVERGED)
                guess[:, both] = 2 * U[:, prev, both] - U[:, prev2, both]
            cols = np.nonzero(ok_prev)[0]
            if cols.size:
                solve_nodes(k, cols, guess[:, cols])
            # fill failures (and nodes without a warm start) from converged x-neighbours
            for _ in range(2):
                for dirx in (1, -1):
                    js = range(nx) if dirx == 1 else range(nx - 1, -1, -1)
                    for j in js:
                        if status[k, j] != CONVERGED:
                            retry(k, j, dirx)
            k += direction
    return SolutionGrid(x, t, U, status, imp.coords,
                        {"provenance": imp.provenance, "tol": tol, **imp.meta})


# --------------------------------------------------------------- residual

@dataclass
class ResidualReport:
    max_residual: float
    location: tuple          # (t index, x index)
    per_component: list
    nodes: int

    def passed(self, tol: float) -> bool:
        return self.max_residual < tol


def residual_pde(sys, grid: SolutionGrid, min_nodes: int = 1) -> ResidualReport:
    """Max over interior nodes of |u^i_t - (v u_x)_i| / max(1, |(v u_x)_i|).

    Central differences on the uniform grid; a node counts when it and its
    four neighbours converged.  ``sys`` is a DiagonalSystem or a
    QuasiLinearSystem over the grid's coordinates.
    """
    x, t, U, ok = grid.x, grid.t, grid.u, grid.converged
    if x.size < 3 or t.size < 3:
        raise ValueError("residual needs at least 3 nodes per axis")
    dx = np.diff(x)
    dt = np.diff(t)
    if not (np.allclose(dx, dx[0], rtol=1e-9) and np.allclose(dt, dt[0], rtol=1e-9)):
        raise ValueError("residual_pde needs uniform axes")
    inner = ok[1:-1, 1:-1] & ok[:-2, 1:-1] & ok[2:, 1:-1] & ok[1:-1, :-2] & ok[1:-1, 2:]
    ki, ji = np.nonzero(inner)
    if ki.size < min_nodes:
        raise SolverError(f"only {ki.size} interior nodes have converged stencils")
    k, j = ki + 1, ji + 1
    u_t = (U[:, k + 1, j] - U[:, k - 1, j]) / (2 * dt[0])
    u_x = (U[:, k, j + 1] - U[:, k, j - 1]) / (2 * dx[0])
    vals = U[:, k, j]
    point = sys.point([vals[i] for i in range(sys.n)], t=t[k], x=x[j])
    if isinstance(sys, QuasiLinearSystem):
        M = np.array([[np.broadcast_to(m.evaluate(point), k.shape) for m in row] for row in sys.matrix])
        flux = np.einsum("ijm,jm->im", M, u_x)
    else:
        v = np.array([np.broadcast_to(s.evaluate(point), k.shape) for s in sys.speeds])
        flux = v * u_x
    res = np.abs(u_t - flux) / np.maximum(1.0, np.abs(flux))
    per = [float(r.max()) for r in res]
    worst = np.unravel_index(int(np.argmax(res)), res.shape)[1]
    return ResidualReport(float(res.max()), (int(k[worst]), int(j[worst])), per, int(ki.size))


# --------------------------------------------------------------------- io

def _num(v: float) -> str:
    return repr(float(v))


def grid_to_csv(grid: SolutionGrid) -> str:
    """Columns x, t, <coords>, status; rows t-major; shortest round-trip floats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "t", *grid.coords, "status"])
    for k, tk in enumerate(grid.t):
        for j, xj in enumerate(grid.x):
            w.writerow([_num(xj), _num(tk), *(_num(grid.u[i, k, j]) for i in range(len(grid.coords))),
                        STATUS[grid.status[k, j]]])
    return buf.getvalue()


def grid_from_csv(text: str) -> SolutionGrid:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    coords = tuple(header[2:-1])
    xs = sorted({float(r[0]) for r in body})
    ts = sorted({float(r[1]) for r in body})
    xi = {v: i for i, v in enumerate(xs)}
    ti = {v: i for i, v in enumerate(ts)}
    U = np.full((len(coords), len(ts), len(xs)), np.nan)
    st = np.full((len(ts), len(xs)), UNSOLVED)
    for r in body:
        k, j = ti[float(r[1])], xi[float(r[0])]
        U[:, k, j] = [float(v) for v in r[2:-1]]
        st[k, j] = STATUS.index(r[-1])
    return SolutionGrid(np.array(xs), np.array(ts), U, st, coords)


def grid_to_json(grid: SolutionGrid, extra: Mapping | None = None) -> str:
    doc = {
        "coords": list(grid.coords),
        "x": [float(v) for v in grid.x],
        "t": [float(v) for v in grid.t],
        "u": {c: [[None if not np.isfinite(v) else float(v) for v in row] for row in grid.u[i]]
              for i, c in enumerate(grid.coords)},
        "status": [[STATUS[s] for s in row] for row in grid.status],
        "summary": grid.summary(),
        "meta": {k: v for k, v in grid.meta.items() if isinstance(v, (int, float, str, bool))},
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1, sort_keys=True)


def grid_from_json(text: str) -> SolutionGrid:
    doc = json.loads(text)
    coords = tuple(doc["coords"])
    U = np.array([[[np.nan if v is None else v for v in row] for row in doc["u"][c]] for c in coords],
                 dtype=float)
    st = np.array([[STATUS.index(s) for s in row] for row in doc["status"]])
    return SolutionGrid(np.array(doc["x"]), np.array(doc["t"]), U, st, coords, doc.get("meta", {}))

"""Diagonal systems, scalar fields with derivative access, jet points."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import exprlang as el
from .exprlang import DomainError, Expr, Opaque

__all__ = [
    "AuxVariable", "ScalarField", "QuasiLinearSystem", "CoefficientVector", "DiagonalSystem", "JetPoint",
    "HyperbolicityReport", "partial", "validate_hyperbolic", "epsilon_system",
    "system_from_dict", "SYSTEM_SCHEMA", "HyperbolicityError",
]

FD_STEP = 1e-4


class HyperbolicityError(ValueError):
    pass


@dataclass(frozen=True)
class AuxVariable:
    """A dependent coordinate resolved from the primary ones.

    ``resolve`` maps primary bindings to the auxiliary value (arrays OK);
    ``partials[name]`` is d(aux)/d(name) as an Expr, which may itself use
    the auxiliary variable.  Gas dynamics uses this for rho(r - s).
    """
    name: str
    resolve: Callable[[Mapping[str, object]], object]
    partials: Mapping[str, Expr]


def complete(bindings: Mapping[str, object], aux: Sequence[AuxVariable]) -> dict:
    b = dict(bindings)
    for a in aux:
        if a.name not in b:
            b[a.name] = a.resolve(b)
    return b


class ScalarField:
    """A scalar function of named variables with derivative access.

    Backed by an Expr (possibly holding opaque callback leaves).  ``mode``
    is "symbolic" when derivatives are exact, "fd" when they are formed by
    4th-order central differences of the evaluator.
    """

    __slots__ = ("expr", "aux", "mode", "fd_step", "_partials")

    def __init__(self, expr, aux: Sequence[AuxVariable] = (), mode: str = "symbolic",
                 fd_step: float = FD_STEP):
        self.expr = el.as_expr(expr)
        self.aux = tuple(aux)
        self.mode = mode
        self.fd_step = fd_step
        self._partials: dict[str, ScalarField] = {}

    @classmethod
    def from_callback(cls, fn: Callable, variables: Iterable[str],
                      gradient: Mapping[str, Callable] | None = None, label: str = "callback",
                      fd_step: float = FD_STEP) -> "ScalarField":
        """Wrap ``fn(bindings)``.  Without ``gradient`` derivatives use FD."""
        variables = tuple(variables)

        def make(f, lab):
            def deriv(name):
                if gradient is not None and lab == label and name in gradient:
                    return make(gradient[name], f"{label}_{name}")
                return _fd_opaque(f, name, variables, fd_step, f"{lab}_{name}")
            return Opaque(lab, f, variables, deriv)

        return cls(make(fn, label), mode="symbolic" if gradient is not None else "fd", fd_step=fd_step)

    # -- evaluation
    def bind(self, point: Mapping[str, object]) -> dict:
        return complete(point, self.aux)

    def evaluate(self, point: Mapping[str, object]):
        return el.evaluate(self.expr, self.bind(point))

    def __call__(self, point: Mapping[str, object]):
        return self.evaluate(point)

    @property
    def variables(self) -> frozenset:
        names = set(self.expr.free_vars)
        aux_names = {a.name for a in self.aux}
        for a in self.aux:
            if a.name in names:
                names |= set(a.partials)
        return frozenset(names - aux_names)

    # -- derivatives
    def partial(self, name: str) -> "ScalarField":
        hit = self._partials.get(name)
        if hit is not None:
            return hit
        if self.mode == "fd":
            out = ScalarField(_fd_opaque(self._raw_fn(), name, tuple(self.variables), self.fd_step,
                                         f"d{name}"), mode="fd", fd_step=self.fd_step)
        else:
            d = el.differentiate(self.expr, name)
            for a in self.aux:
                if a.name in self.expr.free_vars and name in a.partials:
                    d = el.add(d, el.mul(el.differentiate(self.expr, a.name), a.partials[name]))
            out = ScalarField(d, self.aux, self.mode, self.fd_step)
        self._partials[name] = out
        return out

    def _raw_fn(self):
        expr, aux = self.expr, self.aux
        aux_names = {a.name for a in aux}

        def fn(b):
            b = {k: v for k, v in b.items() if k not in aux_names}
            return expr.compiled()(complete(b, aux))
        return fn

    # -- algebra
    def _lift(self, other) -> "ScalarField":
        return other if isinstance(other, ScalarField) else ScalarField(el.as_expr(other))

    def _combine(self, other, op) -> "ScalarField":
        other = self._lift(other)
        aux = self.aux + tuple(a for a in other.aux if a not in self.aux)
        mode = "fd" if "fd" in (self.mode, other.mode) else "symbolic"
        return ScalarField(op(self.expr, other.expr), aux, mode, self.fd_step)

    def __add__(self, o):
        return self._combine(o, el.add)

    def __radd__(self, o):
        return self._lift(o)._combine(self, el.add)

    def __sub__(self, o):
        return self._combine(o, el.sub)

    def __rsub__(self, o):
        return self._lift(o)._combine(self, el.sub)

    def __mul__(self, o):
        return self._combine(o, el.mul)

    def __rmul__(self, o):
        return self._lift(o)._combine(self, el.mul)

    def __truediv__(self, o):
        return self._combine(o, el.div)

    def __rtruediv__(self, o):
        return self._lift(o)._combine(self, el.div)

    def __neg__(self):
        return ScalarField(el.neg(self.expr), self.aux, self.mode, self.fd_step)

    def __pow__(self, c: float):
        return ScalarField(el.power(self.expr, float(c)), self.aux, self.mode, self.fd_step)

    def apply(self, op: str) -> "ScalarField":
        return ScalarField(el.func(op, self.expr), self.aux, self.mode, self.fd_step)

    def __repr__(self):
        return f"ScalarField({self.expr})"


def _fd_opaque(fn: Callable, name: str, variables, step: float, label: str) -> Opaque:
    """4th-order central difference of fn in ``name`` as an opaque leaf."""
    def dfn(b):
        x = np.asarray(b[name], dtype=float)
        h = step * np.maximum(1.0, np.abs(x))
        vals = []
        for k in (2, 1, -1, -2):
            bb = dict(b)
            bb[name] = x + k * h
            vals.append(np.asarray(fn(bb), dtype=float))
        return (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h)

    def deriv(other):
        return _fd_opaque(dfn, other, variables, step, f"{label}_{other}")

    return Opaque(label, dfn, variables if variables is not None else (name,), deriv)


def as_field(value, aux: Sequence[AuxVariable] = (), variables=None, params=None) -> ScalarField:
    if isinstance(value, ScalarField):
        return value
    if isinstance(value, str):
        value = el.parse(value, variables, params)
    return ScalarField(el.as_expr(value), aux)


def partial(f: ScalarField, name: str, point: Mapping[str, object], mode: str | None = None,
            step: float | None = None, order: int = 4):
    """Value of df/dname at ``point``.

    ``mode`` defaults to the field's own mode.  FD uses a central stencil of
    the given order (2 or 4) with h = step*max(1, |x|), step default 1e-4.
    """
    mode = mode or f.mode
    if mode == "symbolic":
        return f.partial(name).evaluate(point)
    step = FD_STEP if step is None else step
    aux_names = {a.name for a in f.aux}
    base = {k: v for k, v in point.items() if k not in aux_names}
    x = float(base[name])
    h = step * max(1.0, abs(x))

    def at(k):
        b = dict(base)
        b[name] = x + k * h
        return f.evaluate(b)

    if order == 2:
        return (at(1) - at(-1)) / (2 * h)
    return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h)


class CoefficientVector(Sequence):
    """n fields w_i(u); for two components also reachable as (a, c)."""

    def __init__(self, fields: Iterable):
        self.fields = tuple(as_field(f) for f in fields)

    def __getitem__(self, i):
        return self.fields[i]

    def __len__(self):
        return len(self.fields)

    @property
    def a(self):
        return self.fields[0]

    @property
    def c(self):
        return self.fields[1]

    def evaluate(self, point) -> np.ndarray:
        return np.array([f.evaluate(point) for f in self.fields])

    def __repr__(self):
        return f"CoefficientVector({[str(f.expr) for f in self.fields]})"


@dataclass
class DiagonalSystem:
    """u^i_t = v_i u^i_x with speed fields v_i over ``coords``.

    ``lame`` optionally carries log-Lamé potentials Phi_i (H_i = exp Phi_i)
    consistent with the connection; ``potential`` optionally carries a
    connection potential V with V_ij = G^i_ij G^j_ji.  ``signature`` holds the
    signs of the metric entries g_ii = sign_i * H_i^2.
    """
    speeds: tuple
    coords: tuple
    dependence: str = "autonomous"
    aux: tuple = ()
    name: str = "system"
    lame: tuple | None = None
    potential: ScalarField | None = None
    signature: tuple | None = None
    base_point: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.speeds = tuple(as_field(v, self.aux) for v in self.speeds)
        self.speeds = tuple(ScalarField(v.expr, self.aux, v.mode, v.fd_step) for v in self.speeds)
        self.coords = tuple(self.coords)
        if len(self.speeds) != len(self.coords) or len(self.coords) < 2:
            raise ValueError("need n >= 2 speeds, one per coordinate")
        if self.dependence not in ("autonomous", "explicit-t", "explicit-x"):
            raise ValueError(f"unknown dependence {self.dependence!r}")
        if self.lame is not None:
            self.lame = tuple(ScalarField(as_field(p).expr, self.aux) for p in self.lame)
        if self.potential is not None:
            self.potential = ScalarField(as_field(self.potential).expr, self.aux)
        self._cache: dict = {}

    @property
    def n(self) -> int:
        return len(self.coords)

    def field(self, value) -> ScalarField:
        """Lift an expression string or Expr into a field sharing this system's aux data."""
        if isinstance(value, ScalarField):
            if value.aux == self.aux or not value.aux:
                return ScalarField(value.expr, self.aux, value.mode, value.fd_step)
            return value
        if isinstance(value, str):
            value = el.parse(value)
        return ScalarField(el.as_expr(value), self.aux)

    def point(self, u, t: float | None = None, x: float | None = None) -> dict:
        p = {c: u[k] for k, c in enumerate(self.coords)}
        if t is not None:
            p["t"] = t
        if x is not None:
            p["x"] = x
        return complete(p, self.aux)

    def speed_values(self, point) -> np.ndarray:
        return np.array([v.evaluate(point) for v in self.speeds])

    def coefficients(self, fields) -> CoefficientVector:
        return CoefficientVector(self.field(f) for f in fields)

    def unit(self) -> CoefficientVector:
        return CoefficientVector(ScalarField(1.0, self.aux) for _ in self.coords)

    def velocity(self) -> CoefficientVector:
        return CoefficientVector(self.speeds)


class QuasiLinearSystem:
    """u_t = M(u) u_x with a full matrix of fields (non-diagonal coordinates)."""

    def __init__(self, matrix, coords: Sequence[str], aux: Sequence[AuxVariable] = (), name: str = "system"):
        self.coords = tuple(coords)
        self.aux = tuple(aux)
        self.name = name
        self.matrix = tuple(tuple(as_field(m, self.aux) for m in row) for row in matrix)
        n = len(self.coords)
        if len(self.matrix) != n or any(len(row) != n for row in self.matrix):
            raise ValueError("matrix shape does not match coordinates")

    @property
    def n(self) -> int:
        return len(self.coords)

    def point(self, u, t: float | None = None, x: float | None = None) -> dict:
        p = {c: u[k] for k, c in enumerate(self.coords)}
        if t is not None:
            p["t"] = t
        if x is not None:
            p["x"] = x
        return complete(p, self.aux)

    def matrix_values(self, point) -> np.ndarray:
        return np.array([[m.evaluate(point) for m in row] for row in self.matrix])


@dataclass
class JetPoint:
    """x, t, u and the x-derivatives u_x, u_xx, ... (as many as supplied)."""
    x: float
    t: float
    u: np.ndarray
    derivs: tuple = ()

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.derivs = tuple(np.asarray(d, dtype=float) for d in self.derivs)

    @property
    def depth(self) -> int:
        return len(self.derivs)

    def require(self, depth: int):
        if self.depth < depth:
            raise ValueError(f"jet has derivatives to order {self.depth}, {depth} required")

    @property
    def u_x(self):
        self.require(1)
        return self.derivs[0]

    @property
    def u_xx(self):
        self.require(2)
        return self.derivs[1]

    @property
    def u_xxx(self):
        self.require(3)
        return self.derivs[2]


@dataclass
class HyperbolicityReport:
    min_gap: float
    pair: tuple
    passed: bool
    speeds: np.ndarray


def validate_hyperbolic(sys: DiagonalSystem, point, threshold: float = 1e-10) -> HyperbolicityReport:
    if not isinstance(point, Mapping):
        point = sys.point(point)
    v = sys.speed_values(point)
    best, pair = np.inf, (0, 1)
    for i in range(sys.n):
        for j in range(i + 1, sys.n):
            gap = abs(v[i] - v[j])
            if gap < best:
                best, pair = gap, (i, j)
    return HyperbolicityReport(float(best), pair, bool(best > threshold), v)


# ---------------------------------------------------------------- builtins

def epsilon_system(n: int = 3, base_point: Sequence[float] | None = None) -> DiagonalSystem:
    """v_i = sum_k u^k - u^i, with connection G^i_ij = 1/(u^i - u^j).

    Carries the translation-invariant Lame potentials
    Phi_i = -sum_{j != i} ln|u^i - u^j| and the connection potential
    V = -sum_{i<j} ln|u^i - u^j|.
    """
    coords = tuple(f"u{k + 1}" for k in range(n))
    total = " + ".join(coords)
    speeds = [f"{total} - {c}" for c in coords]
    lame = []
    for i, ci in enumerate(coords):
        terms = [f"ln(abs({ci} - {cj}))" for cj in coords if cj != ci]
        lame.append("-(" + " + ".join(terms) + ")")
    pairs = [f"ln(abs({coords[i]} - {coords[j]}))" for i in range(n) for j in range(i + 1, n)]
    potential = "-(" + " + ".join(pairs) + ")"
    return DiagonalSystem(speeds, coords, name=f"epsilon_system({n})", lame=lame,
                          potential=potential, signature=(1.0,) * n,
                          base_point=tuple(base_point) if base_point else None)


SYSTEM_SCHEMA = {
    "type": "object",
    "properties": {
        "builtin": {"enum": ["polytropic_gas", "chaplygin", "epsilon_system"]},
        "n": {"type": "integer", "minimum": 2},
        "speeds": {"type": "array", "items": {"type": "string"}},
        "coords": {"type": "array", "items": {"type": "string"}},
        "dependence": {"enum": ["autonomous", "explicit-t", "explicit-x"]},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "lame": {"type": "array", "items": {"type": "string"}},
        "potential": {"type": "string"},
        "base_point": {"type": "array", "items": {"type": "number"}},
        "a": {"type": "number"},
        "gamma": {"type": "number"},
        "rho0": {"type": "number"},
        "P0": {"type": "number"},
        "name": {"type": "string"},
    },
    "additionalProperties": False,
}


def system_from_dict(d: Mapping) -> DiagonalSystem:
    """Build a system from the config schema (see SYSTEM_SCHEMA)."""
    kind = d.get("builtin")
    base = d.get("base_point")
    if kind == "epsilon_system":
        return epsilon_system(int(d.get("n", 3)), base)
    if kind in ("polytropic_gas", "chaplygin"):
        from . import gasdyn
        if kind == "polytropic_gas":
            model = gasdyn.polytropic(d.get("a", 1.0), d.get("gamma", 1.4), d.get("rho0"))
        else:
            model = gasdyn.chaplygin(d.get("a", 1.0), d.get("P0", 0.0), d.get("rho0"))
        return gasdyn.riemann_system(model)
    speeds = d["speeds"]
    n = int(d.get("n", len(speeds)))
    if len(speeds) != n:
        raise ValueError(f"n = {n} but {len(speeds)} speeds given")
    coords = tuple(d.get("coords") or [f"u{k + 1}" for k in range(n)])
    dependence = d.get("dependence", "autonomous")
    allowed = set(coords) | {"explicit-t": {"t"}, "explicit-x": {"x"}}.get(dependence, set())
    params = d.get("params", {})
    exprs = [el.parse(s, allowed, params) for s in speeds]
    lame = [el.parse(s, set(coords), params) for s in d["lame"]] if "lame" in d else None
    pot = el.parse(d["potential"], set(coords), params) if "potential" in d else None
    return DiagonalSystem(exprs, coords, dependence, name=d.get("name", "system"), lame=lame,
                          potential=pot, base_point=tuple(base) if base else None)


def domain_ok(fn: Callable, *args) -> bool:
    try:
        fn(*args)
        return True
    except (DomainError, ZeroDivisionError):
        return False

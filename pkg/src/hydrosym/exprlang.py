"""Small expression language for coefficient fields.

Grammar (lowest to highest binding)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := primary ('^' exponent)*
    exponent := '-'? primary            # folded to a constant at parse time
    primary  := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

FUNC is one of exp, ln, sqrt, abs, sign.  ``sign`` exists so that the
derivative of ``abs`` can be written in the language; sign(0) = 0, which
makes the derivative of abs at the origin 0.

Trees are immutable.  Evaluation goes through a per-node compiled numpy
function, so scalars and arrays are both accepted.
"""
from __future__ import annotations

import math
import re
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary", "Pow", "Opaque",
    "ExprError", "ExprSyntaxError", "UnknownIdentifier", "NonConstantExponent",
    "UnsupportedAntiderivative", "DomainError",
    "parse", "to_text", "differentiate", "antiderivative", "substitute",
    "evaluate", "as_expr", "const", "var",
]

FUNCTIONS = ("exp", "ln", "sqrt", "abs", "sign")


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExprSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class NonConstantExponent(ExprSyntaxError):
    def __init__(self, offset: int):
        super().__init__("exponent of '^' must be a constant expression", offset)


class UnsupportedAntiderivative(ExprError):
    """The integrand is outside the closed-form class; use quadrature."""


class DomainError(ExprError, ArithmeticError):
    """Evaluation left the real domain (log of a negative, 0/0, ...)."""


# ---------------------------------------------------------------- nodes

class Expr:
    __slots__ = ("_hash", "_fn", "_dcache", "_free")
    prec = 5

    def _init(self, key):
        self._hash = hash(key)
        self._fn = None
        self._dcache = {}
        self._free = None

    def __hash__(self):
        return self._hash

    def children(self) -> tuple["Expr", ...]:
        return ()

    @property
    def free_vars(self) -> frozenset:
        if self._free is None:
            out = set()
            for ch in self.children():
                out |= ch.free_vars
            self._free = frozenset(out)
        return self._free

    # algebra, folding trivial constants
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        if isinstance(exponent, Expr):
            if not isinstance(exponent, Const):
                raise ExprError("exponent must be a constant")
            exponent = exponent.value
        return power(self, float(exponent))

    def __str__(self):
        try:
            return to_text(self)
        except ExprError:
            return repr(self)

    def diff(self, name: str) -> "Expr":
        return differentiate(self, name)

    def evaluate(self, bindings: Mapping[str, object]):
        return evaluate(self, bindings)

    def compiled(self) -> Callable:
        if self._fn is None:
            self._fn = _compile(self)
        return self._fn


class Const(Expr):
    __slots__ = ("value",)
    prec = 5

    def __init__(self, value: float):
        self.value = float(value)
        self._init(("c", self.value))

    def __eq__(self, other):
        return isinstance(other, Const) and (
            self.value == other.value or (self.value != self.value and other.value != other.value))

    __hash__ = Expr.__hash__

    def __repr__(self):
        return f"Const({self.value!r})"

    @property
    def free_vars(self):
        return frozenset()


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._init(("v", name))

    def __eq__(self, other):
        return isinstance(other, Var) and self.name == other.name

    __hash__ = Expr.__hash__

    def __repr__(self):
        return f"Var({self.name!r})"

    @property
    def free_vars(self):
        return frozenset((self.name,))


class Unary(Expr):
    """neg, exp, ln, sqrt, abs or sign applied to one argument."""
    __slots__ = ("op", "arg")

    def __init__(self, op: str, arg: Expr):
        self.op = op
        self.arg = arg
        self._init(("u", op, arg._hash))

    @property
    def prec(self):
        return 3 if self.op == "neg" else 5

    def children(self):
        return (self.arg,)

    def __eq__(self, other):
        return (self is other) or (isinstance(other, Unary) and self._hash == other._hash
                                   and self.op == other.op and self.arg == other.arg)

    __hash__ = Expr.__hash__

    def __repr__(self):
        return f"Unary({self.op!r}, {self.arg!r})"


class Binary(Expr):
    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left: Expr, right: Expr):
        self.op = op
        self.left = left
        self.right = right
        self._init(("b", op, left._hash, right._hash))

    @property
    def prec(self):
        return 1 if self.op in "+-" else 2

    def children(self):
        return (self.left, self.right)

    def __eq__(self, other):
        return (self is other) or (isinstance(other, Binary) and self._hash == other._hash
                                   and self.op == other.op and self.left == other.left
                                   and self.right == other.right)

    __hash__ = Expr.__hash__

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


class Pow(Expr):
    """base ^ exponent with a constant real exponent."""
    __slots__ = ("base", "exponent")
    prec = 4

    def __init__(self, base: Expr, exponent: float):
        self.base = base
        self.exponent = float(exponent)
        self._init(("p", base._hash, self.exponent))

    def children(self):
        return (self.base,)

    def __eq__(self, other):
        return (self is other) or (isinstance(other, Pow) and self._hash == other._hash
                                   and self.exponent == other.exponent and self.base == other.base)

    __hash__ = Expr.__hash__

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent!r})"


class Opaque(Expr):
    """Leaf computed by a Python callback rather than by the grammar.

    ``fn`` receives the full bindings mapping and must accept arrays.
    ``deriv(name)`` returns the partial derivative as another Expr (it may
    itself be opaque).  Opaque leaves have no text form.
    """
    __slots__ = ("label", "fn", "deriv_fn", "variables")

    def __init__(self, label: str, fn: Callable, variables: Iterable[str],
                 deriv: Callable[[str], Expr] | None = None):
        self.label = label
        self.fn = fn
        self.deriv_fn = deriv
        self.variables = frozenset(variables)
        self._init(("o", id(self)))

    def __eq__(self, other):
        return self is other

    __hash__ = Expr.__hash__

    def __repr__(self):
        return f"Opaque({self.label!r})"

    @property
    def free_vars(self):
        return self.variables


ZERO = Const(0.0)
ONE = Const(1.0)


def const(value: float) -> Const:
    return Const(value)


def var(name: str) -> Var:
    return Var(name)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    return Const(float(value))


# ------------------------------------------------ folding constructors

def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Binary("/", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def power(base: Expr, exponent: float) -> Expr:
    if exponent == 1.0:
        return base
    if exponent == 0.0:
        return ONE
    if isinstance(base, Const):
        try:
            value = base.value ** exponent
        except (ZeroDivisionError, OverflowError):
            return Pow(base, exponent)
        if isinstance(value, float) and math.isfinite(value):
            return Const(value)
    return Pow(base, exponent)


_FOLD = {
    "exp": lambda x: math.exp(x),
    "ln": lambda x: math.log(x) if x > 0 else None,
    "sqrt": lambda x: math.sqrt(x) if x >= 0 else None,
    "abs": abs,
    "sign": lambda x: float(np.sign(x)),
}


def func(op: str, arg: Expr) -> Expr:
    if op == "neg":
        return neg(arg)
    if isinstance(arg, Const):
        try:
            value = _FOLD[op](arg.value)
        except OverflowError:
            value = None
        if value is not None and math.isfinite(value):
            return Const(value)
    return Unary(op, arg)


def exp(a) -> Expr:
    return func("exp", as_expr(a))


def ln(a) -> Expr:
    return func("ln", as_expr(a))


def sqrt(a) -> Expr:
    return func("sqrt", as_expr(a))


# -------------------------------------------------------------- parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", _byte(source, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _byte(source, pos)))
        pos = m.end()
    tokens.append(("end", "", _byte(source, len(source))))
    return tokens


def _byte(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source, variables, params):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = None if variables is None else set(variables)
        self.params = dict(params or {})

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, value, offset = self.peek()
        if value != text or kind == "end":
            raise ExprSyntaxError(f"expected {text!r}", offset)
        self.i += 1

    def parse(self):
        e = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {value!r}", offset)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary(op, e, self.unary())
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            arg = self.unary()
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Unary("neg", arg)
        return self.power()

    def power(self):
        e = self.primary()
        while self.peek()[1] == "^":
            self.take()
            offset = self.peek()[2]
            negate = False
            if self.peek()[1] == "-":
                self.take()
                negate = True
            ex = self.primary()
            if ex.free_vars:
                raise NonConstantExponent(offset)
            value = float(evaluate(ex, {}))
            e = Pow(e, -value if negate else value)
        return e

    def primary(self):
        kind, value, offset = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if value in FUNCTIONS and self.peek()[1] == "(":
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(value, arg)
            if value in self.params:
                return Const(float(self.params[value]))
            if self.variables is not None and value not in self.variables:
                raise UnknownIdentifier(value, offset)
            if value in FUNCTIONS:
                raise ExprSyntaxError(f"function {value!r} needs an argument", offset)
            return Var(value)
        if value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", offset)
        raise ExprSyntaxError(f"unexpected {value!r}", offset)


def parse(source: str, variables: Iterable[str] | None = None,
          params: Mapping[str, float] | None = None) -> Expr:
    """Parse text into an Expr.

    ``variables`` restricts the admissible free names (None allows any);
    ``params`` are named constants substituted during parsing.
    """
    return _Parser(source, variables, params).parse()


# ------------------------------------------------------------- printing

def _num(value: float) -> str:
    if math.isnan(value):
        raise ExprError("NaN constant has no text form")
    if math.isinf(value):
        return "1e999" if value > 0 else "-1e999"
    return repr(value)


def to_text(e: Expr) -> str:
    """Parseable text for ``e``; parse(to_text(e)) rebuilds the same tree."""
    if isinstance(e, Const):
        return _num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Opaque):
        raise ExprError(f"opaque node {e.label!r} has no text form")
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_text(e.arg)
            if _prec(e.arg) < 3:
                inner = f"({inner})"
            return "-" + inner
        return f"{e.op}({to_text(e.arg)})"
    if isinstance(e, Pow):
        base = to_text(e.base)
        if _prec(e.base) < 5:
            base = f"({base})"
        ex = _num(e.exponent)
        if e.exponent < 0 or ex.startswith("-"):
            ex = f"({ex})"
        return f"{base}^{ex}"
    if isinstance(e, Binary):
        p = e.prec
        left = to_text(e.left)
        if _prec(e.left) < p:
            left = f"({left})"
        right = to_text(e.right)
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}" if p == 1 else f"{left}*{right}" if e.op == "*" else f"{left}/{right}"
    raise ExprError(f"cannot print {e!r}")


def _prec(e: Expr) -> int:
    if isinstance(e, Const) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 3
    return e.prec


# ------------------------------------------------------------ compiling

_NP = {"exp": "np.exp", "ln": "np.log", "sqrt": "np.sqrt", "abs": "np.abs", "sign": "np.sign"}


def _compile(e: Expr) -> Callable:
    lines = []
    names: dict[Expr, str] = {}
    consts: list[float] = []
    opaques: list[Opaque] = []

    def emit(node: Expr) -> str:
        hit = names.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            consts.append(node.value)
            name = f"_c[{len(consts) - 1}]"
            names[node] = name
            return name
        if isinstance(node, Var):
            code = f"b[{node.name!r}]"
        elif isinstance(node, Opaque):
            opaques.append(node)
            code = f"_o[{len(opaques) - 1}](b)"
        elif isinstance(node, Unary):
            a = emit(node.arg)
            code = f"-{a}" if node.op == "neg" else f"{_NP[node.op]}({a})"
        elif isinstance(node, Pow):
            a = emit(node.base)
            ex = node.exponent
            if ex == 2.0:
                code = f"{a}*{a}"
            elif ex == 0.5:
                code = f"np.sqrt({a})"
            else:
                code = f"np.power({a}, {ex!r})"
        elif isinstance(node, Binary):
            a = emit(node.left)
            c = emit(node.right)
            code = f"{a} {node.op} {c}"
        else:
            raise ExprError(f"cannot compile {node!r}")
        name = f"t{len(lines)}"
        lines.append(f"    {name} = {code}")
        names[node] = name
        return name

    result = emit(e)
    src = "def _f(b):\n" + "\n".join(lines) + f"\n    return {result}\n"
    scope = {"np": np, "_c": [np.float64(c) for c in consts], "_o": [o.fn for o in opaques]}
    exec(compile(src, "<expr>", "exec"), scope)
    return scope["_f"]


def _prepare(bindings: Mapping[str, object]) -> dict:
    out = {}
    for k, v in bindings.items():
        if isinstance(v, np.ndarray):
            out[k] = v.astype(float, copy=False)
        elif isinstance(v, (float, int, np.floating, np.integer)):
            out[k] = np.float64(v)
        else:
            out[k] = v
    return out


def evaluate(e: Expr, bindings: Mapping[str, object]):
    """Evaluate with domain checking; raises DomainError instead of NaN."""
    fn = e.compiled()
    b = _prepare(bindings)
    try:
        with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
            value = fn(b)
    except (FloatingPointError, ZeroDivisionError, ValueError) as exc:
        raise DomainError(f"evaluation of {_short(e)} failed: {exc}") from None
    except KeyError as exc:
        raise ExprError(f"unbound variable {exc.args[0]!r}") from None
    if not np.all(np.isfinite(value)):
        raise DomainError(f"evaluation of {_short(e)} is not finite")
    if isinstance(value, np.ndarray) and value.ndim > 0:
        return value
    return float(value)


def evaluate_unchecked(e: Expr, bindings: Mapping[str, object]):
    """Evaluate without domain checks; invalid entries come back as NaN/inf."""
    with np.errstate(all="ignore"):
        return e.compiled()(_prepare(bindings))


def _short(e: Expr) -> str:
    text = str(e)
    return text if len(text) < 80 else text[:77] + "..."


# ------------------------------------------------------ differentiation

def differentiate(e: Expr, name: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``name``."""
    if name not in e.free_vars:
        return ZERO
    hit = e._dcache.get(name)
    if hit is not None:
        return hit
    out = _diff(e, name)
    e._dcache[name] = out
    return out


def _diff(e: Expr, x: str) -> Expr:
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Opaque):
        if e.deriv_fn is None:
            raise ExprError(f"opaque node {e.label!r} has no derivative")
        return e.deriv_fn(x)
    if isinstance(e, Unary):
        a = e.arg
        da = differentiate(a, x)
        if e.op == "neg":
            return neg(da)
        if e.op == "exp":
            return mul(da, e)
        if e.op == "ln":
            return div(da, a)
        if e.op == "sqrt":
            return div(da, mul(Const(2.0), e))
        if e.op == "abs":
            return mul(da, func("sign", a))
        if e.op == "sign":
            return ZERO
    if isinstance(e, Pow):
        c = e.exponent
        db = differentiate(e.base, x)
        return mul(mul(Const(c), power(e.base, c - 1.0)), db)
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = differentiate(a, x), differentiate(b, x)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        if e.op == "/":
            if isinstance(db, Const) and db.value == 0.0:
                return div(da, b)
            return div(sub(mul(da, b), mul(a, db)), power(b, 2.0))
    raise ExprError(f"cannot differentiate {e!r}")


# ---------------------------------------------------------- substitution

def substitute(e: Expr, mapping: Mapping[str, object]) -> Expr:
    """Replace variables by expressions (or numbers), refolding constants."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict[Expr, Expr] = {}

    def walk(node: Expr) -> Expr:
        if not (node.free_vars & mapping.keys()):
            return node
        hit = memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Var):
            out = mapping[node.name]
        elif isinstance(node, Opaque):
            raise ExprError(f"cannot substitute into opaque node {node.label!r}")
        elif isinstance(node, Unary):
            out = func(node.op, walk(node.arg))
        elif isinstance(node, Pow):
            out = power(walk(node.base), node.exponent)
        else:
            out = _BIN[node.op](walk(node.left), walk(node.right))
        memo[node] = out
        return out

    return walk(e)


_BIN = {"+": add, "-": sub, "*": mul, "/": div}


# ------------------------------------------------------ antiderivatives
#
# Integrands are expanded into terms coef * x^p * exp(k x) with coef free
# of x.  A term is integrable in closed form when k == 0 (p != -1) or p == 0.

def _expand(e: Expr, x: str, max_power: int = 12) -> list[tuple[Expr, float, float]]:
    if x not in e.free_vars:
        return [(e, 0.0, 0.0)]
    if isinstance(e, Var):
        return [(ONE, 1.0, 0.0)]
    if isinstance(e, Binary):
        left = _expand(e.left, x)
        if e.op == "+":
            return left + _expand(e.right, x)
        if e.op == "-":
            return left + [(neg(c), p, k) for c, p, k in _expand(e.right, x)]
        if e.op == "*":
            right = _expand(e.right, x)
            return [(mul(c1, c2), p1 + p2, k1 + k2) for c1, p1, k1 in left for c2, p2, k2 in right]
        if e.op == "/":
            den = _expand(e.right, x)
            den = _collect(den)
            if len(den) != 1:
                raise UnsupportedAntiderivative(f"denominator {_short(e.right)} is not a monomial in {x}")
            cd, pd, kd = den[0]
            return [(div(c, cd), p - pd, k - kd) for c, p, k in left]
    if isinstance(e, Unary):
        if e.op == "neg":
            return [(neg(c), p, k) for c, p, k in _expand(e.arg, x)]
        if e.op == "sqrt":
            return _expand(Pow(e.arg, 0.5), x)
        if e.op == "exp":
            terms = _collect(_expand(e.arg, x))
            shift, slope = ZERO, 0.0
            for c, p, k in terms:
                if p == 0.0 and k == 0.0:
                    shift = add(shift, c)
                elif p == 1.0 and k == 0.0 and isinstance(c, Const):
                    slope += c.value
                else:
                    raise UnsupportedAntiderivative(f"exp argument {_short(e.arg)} is not linear in {x}")
            return [(func("exp", shift), 0.0, slope)]
    if isinstance(e, Pow):
        base = _collect(_expand(e.base, x))
        c = e.exponent
        if len(base) == 1:
            cb, pb, kb = base[0]
            return [(power(cb, c), pb * c, kb * c)]
        if c == int(c) and 0 < c <= max_power:
            out = base
            for _ in range(int(c) - 1):
                out = _collect([(mul(c1, c2), p1 + p2, k1 + k2) for c1, p1, k1 in out for c2, p2, k2 in base])
            return out
    raise UnsupportedAntiderivative(f"{_short(e)} is outside the closed-form class in {x}")


def _collect(terms):
    groups: dict[tuple[float, float], Expr] = {}
    for c, p, k in terms:
        key = (p, k)
        groups[key] = add(groups[key], c) if key in groups else c
    return [(c, p, k) for (p, k), c in groups.items() if not _is(c, 0.0)]


def antiderivative(e: Expr, name: str, lower: float = 0.0) -> Expr:
    """Closed-form F with dF/dname = e and F(lower) = 0.

    Supported integrands are sums of c*x^p (p != -1) and c*exp(k*x) with c
    free of x.  Power terms with p < -1 need a nonzero ``lower``.
    Raises UnsupportedAntiderivative otherwise.
    """
    x = Var(name)
    lo = float(lower)
    total: Expr = ZERO
    for c, p, k in _collect(_expand(e, name)):
        if k == 0.0:
            q = p + 1.0
            if q == 0.0:
                raise UnsupportedAntiderivative(f"term {x.name}^-1 integrates to a logarithm")
            if lo == 0.0 and q < 0:
                raise UnsupportedAntiderivative(
                    f"term {x.name}^{p!r} is singular at 0; supply a nonzero lower limit")
            term = power(x, q)
            if lo != 0.0:
                term = sub(term, Const(lo ** q))
            total = add(total, mul(c, div(term, Const(q))))
        elif p == 0.0:
            term = func("exp", mul(Const(k), x))
            term = sub(term, Const(math.exp(k * lo)))
            total = add(total, mul(c, div(term, Const(k))))
        else:
            raise UnsupportedAntiderivative(f"mixed power-exponential term in {x.name}")
    return total

"""Immutable expression trees.

Nodes are built through the module-level constructors (``add``, ``mul``,
``power``, ...) which perform light simplification: constant folding, 0/1
identities, flattening of sums and products and collection of like terms in
sums. Nothing beyond that is attempted; identity testing is numeric (see
``pesym.symexpr.evaluate.is_zero``).
"""
from __future__ import annotations

import math
from numbers import Real
from typing import Iterable

BUILTINS = ("exp", "ln", "sin", "cos", "tan", "sqrt")

# printing precedence
_P_ADD, _P_MUL, _P_NEG, _P_POW, _P_ATOM = 1, 2, 3, 4, 5


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("_key", "_hash", "_free")

    def _make_key(self):
        raise NotImplementedError

    @property
    def key(self):
        try:
            return self._key
        except AttributeError:
            self._key = self._make_key()
            return self._key

    def __hash__(self):
        try:
            return self._hash
        except AttributeError:
            self._hash = hash(self.key)
            return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return hash(self) == hash(other) and self.key == other.key

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    @property
    def free_vars(self) -> frozenset:
        try:
            return self._free
        except AttributeError:
            self._free = self._compute_free()
            return self._free

    def _compute_free(self) -> frozenset:
        out = frozenset()
        for c in self.children():
            out |= c.free_vars
        return out

    def children(self) -> tuple:
        return ()

    def has(self, name: str) -> bool:
        return name in self.free_vars

    @property
    def precedence(self) -> int:
        return _P_ATOM

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"Expr({self.to_str()!r})"

    def to_str(self) -> str:
        raise NotImplementedError

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, other):
        return power(self, other)

    def __rpow__(self, other):
        return power(other, self)

    def __neg__(self):
        return neg(self)


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)

    def _make_key(self):
        return ("num", self.value)

    def _compute_free(self):
        return frozenset()

    @property
    def precedence(self):
        return _P_ATOM if self.value >= 0 else _P_NEG

    def to_str(self):
        v = self.value
        if v.is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(v)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def _make_key(self):
        return ("var", self.name)

    def _compute_free(self):
        return frozenset((self.name,))

    def to_str(self):
        return self.name


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple):
        self.terms = tuple(terms)

    def _make_key(self):
        return ("add",) + tuple(t.key for t in self.terms)

    def children(self):
        return self.terms

    @property
    def precedence(self):
        return _P_ADD

    def to_str(self):
        parts = []
        for i, t in enumerate(self.terms):
            if isinstance(t, Neg):
                body = _wrap(t.arg, _P_MUL)
                parts.append(("-" if i == 0 else " - ") + body)
            elif isinstance(t, Num) and t.value < 0:
                body = Num(-t.value).to_str()
                parts.append(("-" if i == 0 else " - ") + body)
            else:
                parts.append(("" if i == 0 else " + ") + _wrap(t, _P_ADD))
        return "".join(parts)


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple):
        self.factors = tuple(factors)

    def _make_key(self):
        return ("mul",) + tuple(f.key for f in self.factors)

    def children(self):
        return self.factors

    @property
    def precedence(self):
        return _P_MUL

    def to_str(self):
        return "*".join(_wrap(f, _P_MUL) for f in self.factors)


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr):
        self.num = num
        self.den = den

    def _make_key(self):
        return ("div", self.num.key, self.den.key)

    def children(self):
        return (self.num, self.den)

    @property
    def precedence(self):
        return _P_MUL

    def to_str(self):
        return f"{_wrap(self.num, _P_MUL)}/{_wrap(self.den, _P_POW)}"


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: Expr):
        self.base = base
        self.exp = exp

    def _make_key(self):
        return ("pow", self.base.key, self.exp.key)

    def children(self):
        return (self.base, self.exp)

    @property
    def precedence(self):
        return _P_POW

    def to_str(self):
        return f"{_wrap(self.base, _P_ATOM)}^{_wrap(self.exp, _P_ATOM)}"


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg

    def _make_key(self):
        return ("neg", self.arg.key)

    def children(self):
        return (self.arg,)

    @property
    def precedence(self):
        return _P_NEG

    def to_str(self):
        return "-" + _wrap(self.arg, _P_MUL)


class Call(Expr):
    """Builtin elementary function applied to one argument."""

    __slots__ = ("fn", "arg")

    def __init__(self, fn: str, arg: Expr):
        if fn not in BUILTINS:
            raise ValueError(f"unknown builtin {fn!r}")
        self.fn = fn
        self.arg = arg

    def _make_key(self):
        return ("call", self.fn, self.arg.key)

    def children(self):
        return (self.arg,)

    def to_str(self):
        return f"{self.fn}({self.arg.to_str()})"


class Func(Expr):
    """Uninterpreted unary function ``name`` differentiated ``order`` times."""

    __slots__ = ("name", "order", "arg")

    def __init__(self, name: str, order: int, arg: Expr):
        if order < 0 or int(order) != order:
            raise ValueError("derivative order must be a nonnegative integer")
        self.name = name
        self.order = int(order)
        self.arg = arg

    def _make_key(self):
        return ("func", self.name, self.order, self.arg.key)

    def children(self):
        return (self.arg,)

    def to_str(self):
        return f"{self.name}{chr(39) * self.order}({self.arg.to_str()})"


def _wrap(e: Expr, min_prec: int) -> str:
    s = e.to_str()
    return f"({s})" if e.precedence < min_prec else s


ZERO = Num(0.0)
ONE = Num(1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not an expression")
    if isinstance(x, Real):
        return Num(float(x))
    if isinstance(x, str):
        return Var(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def is_num(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def _split_coeff(t: Expr) -> tuple[float, Expr | None]:
    """Split a term into numeric coefficient and remaining core."""
    if isinstance(t, Num):
        return t.value, None
    if isinstance(t, Neg):
        c, core = _split_coeff(t.arg)
        return -c, core
    if isinstance(t, Mul) and isinstance(t.factors[0], Num):
        rest = t.factors[1:]
        core = rest[0] if len(rest) == 1 else Mul(rest)
        return t.factors[0].value, core
    return 1.0, t


def add(*terms) -> Expr:
    flat: list[Expr] = []
    for t in terms:
        t = as_expr(t)
        if isinstance(t, Add):
            flat.extend(t.terms)
        else:
            flat.append(t)
    const = 0.0
    coeffs: dict = {}
    cores: dict = {}
    for t in flat:
        c, core = _split_coeff(t)
        if core is None:
            const += c
            continue
        k = core.key
        if k in coeffs:
            coeffs[k] += c
        else:
            coeffs[k] = c
            cores[k] = core
    out = []
    for k, core in cores.items():
        c = coeffs[k]
        if c == 0.0:
            continue
        out.append(_scale(c, core))
    if const != 0.0:
        out.append(Num(const))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Add(tuple(out))


def _scale(c: float, core: Expr) -> Expr:
    if c == 1.0:
        return core
    if c == -1.0:
        return Neg(core)
    if c < 0:
        return Neg(_scale(-c, core))
    if isinstance(core, Mul):
        return Mul((Num(c),) + core.factors)
    return Mul((Num(c), core))


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    sign = 1.0
    coeff = 1.0
    stack = [as_expr(f) for f in factors]
    while stack:
        f = stack.pop(0)
        if isinstance(f, Mul):
            stack[0:0] = list(f.factors)
            continue
        if isinstance(f, Neg):
            sign = -sign
            stack.insert(0, f.arg)
            continue
        if isinstance(f, Num):
            coeff *= f.value
            continue
        flat.append(f)
    coeff *= sign
    if coeff == 0.0:
        return ZERO
    if not flat:
        return Num(coeff)
    core = flat[0] if len(flat) == 1 else Mul(tuple(flat))
    return _scale(coeff, core)


def neg(x) -> Expr:
    x = as_expr(x)
    if isinstance(x, Num):
        return Num(-x.value)
    if isinstance(x, Neg):
        return x.arg
    if isinstance(x, Add):
        return add(*(neg(t) for t in x.terms))
    return mul(-1.0, x)


def sub(a, b) -> Expr:
    return add(a, neg(as_expr(b)))


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if isinstance(b, Num):
        if b.value == 0.0:
            raise ZeroDivisionError("division by literal zero")
        return mul(1.0 / b.value, a)
    if is_num(a, 0.0):
        return ZERO
    if a == b:
        return ONE
    if _split_coeff(a)[0] < 0:
        return neg(Div(neg(a), b))
    return Div(a, b)


def power(b, e) -> Expr:
    b, e = as_expr(b), as_expr(e)
    if isinstance(e, Num):
        if e.value == 0.0:
            return ONE
        if e.value == 1.0:
            return b
        if isinstance(b, Num):
            try:
                v = b.value ** e.value
            except (OverflowError, ZeroDivisionError):
                return Pow(b, e)
            if isinstance(v, float) and math.isfinite(v):
                return Num(v)
            return Pow(b, e)
        if isinstance(b, Pow) and isinstance(b.exp, Num) and e.value.is_integer():
            return power(b.base, b.exp.value * e.value)
    if is_num(b, 1.0):
        return ONE
    if is_num(b, 0.0) and isinstance(e, Num) and e.value > 0:
        return ZERO
    return Pow(b, e)


_FOLD = {
    "exp": math.exp,
    "ln": math.log,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sqrt": math.sqrt,
}


def call(fn: str, arg) -> Expr:
    arg = as_expr(arg)
    if isinstance(arg, Num):
        try:
            v = _FOLD[fn](arg.value)
        except (ValueError, OverflowError):
            return Call(fn, arg)
        if v.is_integer():
            return Num(v)
    if fn == "ln" and isinstance(arg, Call) and arg.fn == "exp":
        return arg.arg
    return Call(fn, arg)


def func(name: str, arg, order: int = 0) -> Expr:
    return Func(name, order, as_expr(arg))


def exp(x) -> Expr:
    return call("exp", x)


def ln(x) -> Expr:
    return call("ln", x)


def sin(x) -> Expr:
    return call("sin", x)


def cos(x) -> Expr:
    return call("cos", x)


def tan(x) -> Expr:
    return call("tan", x)


def sqrt(x) -> Expr:
    return call("sqrt", x)


def walk(e: Expr) -> Iterable[Expr]:
    """Pre-order traversal."""
    stack = [e]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.children()))


def function_names(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, Func)}

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Mapping

from .nodes import (
    Add, Call, Div, Expr, Func, Mul, Neg, Num, Pow, Var, ONE, ZERO,
    add, as_expr, call, cos, div, func, mul, neg, power, sin, sqrt, tan,
)


class JetError(ValueError):
    """Raised when a total derivative leaves the jet space of a context."""


def pdiff(e: Expr, v: str) -> Expr:
    """Partial derivative of ``e`` with respect to the variable ``v``.

    Every other variable, jet coordinates included, is held constant.
    """
    if v not in e.free_vars:
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return add(*(pdiff(t, v) for t in e.terms))
    if isinstance(e, Mul):
        fs = e.factors
        terms = []
        for i, f in enumerate(fs):
            df = pdiff(f, v)
            if df == ZERO:
                continue
            terms.append(mul(*fs[:i], df, *fs[i + 1:]))
        return add(*terms)
    if isinstance(e, Neg):
        return neg(pdiff(e.arg, v))
    if isinstance(e, Div):
        da, db = pdiff(e.num, v), pdiff(e.den, v)
        if db == ZERO:
            return div(da, e.den)
        return div(add(mul(da, e.den), neg(mul(e.num, db))), power(e.den, 2))
    if isinstance(e, Pow):
        b, x = e.base, e.exp
        db = pdiff(b, v)
        if v not in x.free_vars:
            return mul(x, power(b, add(x, -1)), db)
        dx = pdiff(x, v)
        return mul(e, add(mul(dx, call("ln", b)), div(mul(x, db), b)))
    if isinstance(e, Call):
        a = e.arg
        da = pdiff(a, v)
        if e.fn == "exp":
            outer = e
        elif e.fn == "ln":
            return div(da, a)
        elif e.fn == "sin":
            outer = cos(a)
        elif e.fn == "cos":
            outer = neg(sin(a))
        elif e.fn == "tan":
            outer = add(1, power(tan(a), 2))
        else:  # sqrt
            return div(da, mul(2, sqrt(a)))
        return mul(outer, da)
    if isinstance(e, Func):
        return mul(Func(e.name, e.order + 1, e.arg), pdiff(e.arg, v))
    raise TypeError(f"unsupported node {type(e).__name__}")


def substitute(e: Expr, bindings: Mapping[str, Expr | float]) -> Expr:
    """Simultaneous replacement of variables by expressions."""
    bindings = {k: as_expr(v) for k, v in bindings.items()}
    keys = frozenset(bindings)
    return _subst(e, bindings, keys, {})


def _subst(e: Expr, b, keys, memo) -> Expr:
    if not (e.free_vars & keys):
        return e
    k = id(e)
    if k in memo:
        return memo[k][1]
    if isinstance(e, Var):
        out = b[e.name]
    elif isinstance(e, Add):
        out = add(*(_subst(t, b, keys, memo) for t in e.terms))
    elif isinstance(e, Mul):
        out = mul(*(_subst(t, b, keys, memo) for t in e.factors))
    elif isinstance(e, Neg):
        out = neg(_subst(e.arg, b, keys, memo))
    elif isinstance(e, Div):
        out = div(_subst(e.num, b, keys, memo), _subst(e.den, b, keys, memo))
    elif isinstance(e, Pow):
        out = power(_subst(e.base, b, keys, memo), _subst(e.exp, b, keys, memo))
    elif isinstance(e, Call):
        out = call(e.fn, _subst(e.arg, b, keys, memo))
    elif isinstance(e, Func):
        out = Func(e.name, e.order, _subst(e.arg, b, keys, memo))
    else:
        raise TypeError(f"unsupported node {type(e).__name__}")
    memo[k] = (e, out)
    return out


PLACEHOLDER = "_s"


def replace_functions(e: Expr, templates: Mapping[str, Expr]) -> Expr:
    """Replace uninterpreted functions by closed forms.

    ``templates`` maps a function name to an expression in the placeholder
    variable ``_s``; ``f''(a)`` becomes the second ``_s``-derivative of the
    template evaluated at ``a``.
    """
    cache: dict = {}

    def deriv(name, order):
        if (name, order) not in cache:
            cache[(name, order)] = (templates[name] if order == 0
                                    else pdiff(deriv(name, order - 1), PLACEHOLDER))
        return cache[(name, order)]

    def rec(n: Expr) -> Expr:
        if isinstance(n, Func):
            arg = rec(n.arg)
            if n.name in templates:
                return substitute(deriv(n.name, n.order), {PLACEHOLDER: arg})
            return Func(n.name, n.order, arg)
        if isinstance(n, (Num, Var)):
            return n
        if isinstance(n, Add):
            return add(*map(rec, n.terms))
        if isinstance(n, Mul):
            return mul(*map(rec, n.factors))
        if isinstance(n, Neg):
            return neg(rec(n.arg))
        if isinstance(n, Div):
            return div(rec(n.num), rec(n.den))
        if isinstance(n, Pow):
            return power(rec(n.base), rec(n.exp))
        if isinstance(n, Call):
            return call(n.fn, rec(n.arg))
        raise TypeError(type(n).__name__)

    return rec(e)


@dataclass(frozen=True)
class JetContext:
    """Coordinates of a jet space plus bindings for uninterpreted functions.

    Jet coordinates are named ``<dep>_<bases>``, e.g. ``U_xx`` or ``V_t``;
    with multi-letter bases the names concatenate (``u_tauy``).
    """

    base: tuple = ("t", "x")
    deps: tuple = ("U", "V")
    order: int = 2
    functions: Mapping[str, Callable] = field(default_factory=dict)
    domains: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        index = {}
        names = {}
        for d in self.deps:
            for k in range(1, self.order + 1):
                for combo in combinations_with_replacement(range(len(self.base)), k):
                    name = f"{d}_" + "".join(self.base[i] for i in combo)
                    index[name] = (d, combo)
                    names[(d, combo)] = name
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_names", names)

    @property
    def jets(self) -> tuple:
        return tuple(self._index)

    def jet(self, dep: str, *wrt: str) -> str:
        if not wrt:
            return dep
        combo = tuple(sorted(self.base.index(w) for w in wrt))
        try:
            return self._names[(dep, combo)]
        except KeyError:
            raise JetError(f"jet {dep} w.r.t. {wrt} is outside the context") from None

    def coordinates(self) -> tuple:
        return self.base + self.deps + self.jets

    def with_functions(self, functions: Mapping[str, Callable]) -> "JetContext":
        return JetContext(self.base, self.deps, self.order, dict(functions), dict(self.domains))

    def with_domains(self, domains: Mapping[str, tuple]) -> "JetContext":
        return JetContext(self.base, self.deps, self.order, dict(self.functions), dict(domains))


def total_derivative(e: Expr, w: str, ctx: JetContext) -> Expr:
    """Total derivative D_w of ``e`` on the jet space of ``ctx``."""
    if w not in ctx.base:
        raise JetError(f"{w!r} is not a base variable of the context")
    wi = ctx.base.index(w)
    terms = [pdiff(e, w)]
    fv = e.free_vars
    for d in ctx.deps:
        if d in fv:
            terms.append(mul(Var(ctx.jet(d, w)), pdiff(e, d)))
    for name in sorted(fv):
        if name not in ctx._index:
            continue
        d, combo = ctx._index[name]
        de = pdiff(e, name)
        if de == ZERO:
            continue
        nxt = tuple(sorted(combo + (wi,)))
        if (d, nxt) not in ctx._names:
            raise JetError(f"D_{w} of {name} needs a jet of order {len(nxt)}")
        terms.append(mul(Var(ctx._names[(d, nxt)]), de))
    return add(*terms)

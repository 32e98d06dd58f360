from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .calculus import JetContext
from .nodes import Add, Call, Div, Expr, Func, Mul, Neg, Num, Pow, Var

DEFAULT_BOX = (0.3, 2.0)

_BUILTIN = {
    "exp": np.exp,
    "ln": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sqrt": np.sqrt,
}


class EvaluationError(ArithmeticError):
    """Domain violation or unbound symbol during numeric evaluation."""


def evaluate(e: Expr, env: Mapping[str, object], functions: Mapping[str, Callable] | None = None,
             *, track: bool = False):
    """Evaluate ``e`` with variables bound in ``env`` (scalars or arrays).

    ``functions`` maps an uninterpreted function name to ``fn(order, x)``.
    With ``track=True`` returns ``(value, scale)`` where ``scale`` is the
    largest magnitude of any summand met during evaluation.
    """
    functions = functions or {}
    scale = [0.0]
    memo: dict = {}
    with np.errstate(all="ignore"):
        val = _ev(e, env, functions, scale if track else None, memo)
    if track:
        return val, scale[0]
    return val


def _ev(e, env, fns, scale, memo):
    k = id(e)
    if k in memo:
        return memo[k]
    if isinstance(e, Num):
        out = e.value
    elif isinstance(e, Var):
        try:
            out = env[e.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {e.name!r}") from None
    elif isinstance(e, Add):
        vals = [_ev(t, env, fns, scale, memo) for t in e.terms]
        if scale is not None:
            for v in vals:
                scale[0] = np.maximum(scale[0], np.abs(v))
        out = vals[0]
        for v in vals[1:]:
            out = out + v
    elif isinstance(e, Mul):
        out = 1.0
        for f in e.factors:
            out = out * _ev(f, env, fns, scale, memo)
    elif isinstance(e, Neg):
        out = -_ev(e.arg, env, fns, scale, memo)
    elif isinstance(e, Div):
        out = _ev(e.num, env, fns, scale, memo) / _ev(e.den, env, fns, scale, memo)
    elif isinstance(e, Pow):
        b = _ev(e.base, env, fns, scale, memo)
        x = _ev(e.exp, env, fns, scale, memo)
        out = np.power(np.asarray(b, dtype=float), x)
    elif isinstance(e, Call):
        out = _BUILTIN[e.fn](_ev(e.arg, env, fns, scale, memo))
    elif isinstance(e, Func):
        try:
            fn = fns[e.name]
        except KeyError:
            raise EvaluationError(f"unbound function {e.name!r}") from None
        out = fn(e.order, np.asarray(_ev(e.arg, env, fns, scale, memo), dtype=float))
    else:
        raise TypeError(type(e).__name__)
    memo[k] = out
    return out


class StandIn:
    """Smooth concrete replacement for an arbitrary function.

    value = poly(x) + a*exp(c*x); ``__call__(order, x)`` returns the
    ``order``-th derivative.
    """

    def __init__(self, poly=(), a: float = 0.0, c: float = 0.0):
        self.poly = np.polynomial.Polynomial(poly if len(poly) else [0.0])
        self.a = float(a)
        self.c = float(c)

    def __call__(self, order: int, x):
        p = self.poly.deriv(order) if order else self.poly
        out = p(x)
        if self.a:
            out = out + self.a * self.c ** order * np.exp(self.c * x)
        return out

    def __repr__(self):
        return f"StandIn(poly={list(self.poly.coef)}, a={self.a}, c={self.c})"

    @classmethod
    def random(cls, rng: np.random.Generator, kind: str | None = None) -> "StandIn":
        """Degree <= 3 polynomial with coefficients in [-2, 2], an
        exponential a*exp(c*x), or the sum of both."""
        kind = kind or rng.choice(["poly", "exp", "mixed"])
        poly, a, c = (), 0.0, 0.0
        if kind in ("poly", "mixed"):
            deg = int(rng.integers(1, 4))
            poly = rng.uniform(-2.0, 2.0, deg + 1)
        if kind in ("exp", "mixed"):
            a = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
            c = rng.uniform(0.3, 1.0) * rng.choice([-1.0, 1.0])
        return cls(poly, a, c)


def standin_family(rng: np.random.Generator, names, count: int = 3) -> list[dict]:
    """``count`` independent bindings for every function name; the first
    binding uses polynomials, the second exponentials, the rest mixed."""
    kinds = ["poly", "exp"] + ["mixed"] * max(0, count - 2)
    return [{n: StandIn.random(rng, kinds[i]) for n in sorted(names)} for i in range(count)]


@dataclass
class ZeroTest:
    ok: bool
    ratio: float
    witness: dict | None = None
    value: float | None = None

    def __bool__(self):
        return self.ok


def sample_points(names, n: int, rng: np.random.Generator, domains: Mapping[str, tuple] | None = None):
    domains = domains or {}
    return {v: rng.uniform(*domains.get(v, DEFAULT_BOX), n) for v in sorted(names)}


def is_zero(e: Expr, ctx: JetContext | None = None, trials: int = 12, tol: float = 1e-9,
            seed: int = 0, max_retries: int = 25) -> ZeroTest:
    """Probabilistic test that ``e`` vanishes identically.

    Points are drawn uniformly from [0.3, 2.0] for every free variable
    (per-variable windows come from ``ctx.domains``). Points where the
    expression cannot be evaluated are resampled. The test passes when
    |value| / (1 + largest summand magnitude) < tol at every point.
    """
    if trials < 8:
        raise ValueError("is_zero needs at least 8 trials")
    ctx = ctx or JetContext()
    rng = np.random.default_rng(seed)
    names = e.free_vars
    pts = sample_points(names, trials, rng, ctx.domains)
    good = np.zeros(trials, dtype=bool)
    val = np.zeros(trials)
    scale = np.zeros(trials)
    for _ in range(max_retries):
        v, s = evaluate(e, pts, ctx.functions, track=True)
        v = np.broadcast_to(np.asarray(v, dtype=float), (trials,))
        s = np.broadcast_to(np.asarray(s, dtype=float), (trials,))
        fin = np.isfinite(v) & np.isfinite(s) & ~good
        val[fin], scale[fin] = v[fin], s[fin]
        good |= fin
        if good.all():
            break
        redo = sample_points(names, trials, rng, ctx.domains)
        pts = {k: np.where(good, pts[k], redo[k]) for k in pts}
    else:
        raise EvaluationError(f"could not find {trials} evaluable points for {e}")
    ratio = np.abs(val) / (1.0 + np.maximum(scale, np.abs(val)))
    worst = int(np.argmax(ratio))
    if ratio[worst] < tol:
        return ZeroTest(True, float(ratio[worst]))
    witness = {k: float(pts[k][worst]) for k in pts}
    return ZeroTest(False, float(ratio[worst]), witness, float(val[worst]))

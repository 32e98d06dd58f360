"""Parabolic-elliptic systems, point-symmetry generators and their prolongation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..symexpr import (
    ZERO, Expr, JetContext, Var, add, as_expr, div, function_names, is_zero, mul, neg,
    parse, pdiff, power, standin_family, substitute, total_derivative,
)

COORDS = ("t", "x", "U", "V")
JETS = ("U_t", "U_x", "V_x", "U_xx", "V_xx")
PLANAR = JetContext()


class GeneratorClassError(ValueError):
    """A vector field outside the class xi0 = xi0(t), eta2 affine in V."""


def _expr(v) -> Expr:
    return parse(v) if isinstance(v, str) else as_expr(v)


@dataclass(frozen=True)
class PESystem:
    """U_t = (D(U) U_x)_x + (n/x) D U_x + F(U, V),  0 = V_xx + (n/x) V_x + G(U, V).

    ``n`` is the radial index; n = 0 is the planar system.
    """

    D: Expr
    F: Expr
    G: Expr
    n: int = 0

    def __post_init__(self):
        for name in ("D", "F", "G"):
            object.__setattr__(self, name, _expr(getattr(self, name)))
        banned = {"t", "x"} | set(JETS) | {"V_t"}
        for name, e, allowed in (("D", self.D, {"U"}), ("F", self.F, None), ("G", self.G, None)):
            bad = e.free_vars & banned
            if bad:
                raise ValueError(f"{name} must not depend on {sorted(bad)}")
            if allowed is not None and "V" in e.free_vars:
                raise ValueError("D must depend on U only")
        if self.D == ZERO:
            raise ValueError("D must not be the zero expression")

    @classmethod
    def from_strings(cls, D: str, F: str, G: str, n: int = 0) -> "PESystem":
        return cls(parse(D), parse(F), parse(G), n)

    @property
    def function_names(self) -> set[str]:
        return function_names(self.D) | function_names(self.F) | function_names(self.G)

    @property
    def constant_diffusivity(self) -> bool:
        return pdiff(self.D, "U") == ZERO

    def equations(self) -> tuple[Expr, Expr]:
        """Left-hand sides S1, S2 of the manifold S1 = S2 = 0."""
        U_t, U_x, U_xx, V_x, V_xx = (Var(n) for n in ("U_t", "U_x", "U_xx", "V_x", "V_xx"))
        D = self.D
        S1 = add(U_t, neg(mul(pdiff(D, "U"), power(U_x, 2))), neg(mul(D, U_xx)), neg(self.F))
        S2 = add(V_xx, self.G)
        if self.n:
            S1 = add(S1, neg(div(mul(self.n, D, U_x), Var("x"))))
            S2 = add(S2, div(mul(self.n, V_x), Var("x")))
        return S1, S2

    def manifold(self) -> dict[str, Expr]:
        """Substitutions for U_t and V_xx that impose the system."""
        U_x, U_xx, V_x = Var("U_x"), Var("U_xx"), Var("V_x")
        ut = add(mul(pdiff(self.D, "U"), power(U_x, 2)), mul(self.D, U_xx), self.F)
        vxx = neg(self.G)
        if self.n:
            ut = add(ut, div(mul(self.n, self.D, U_x), Var("x")))
            vxx = add(vxx, neg(div(mul(self.n, V_x), Var("x"))))
        return {"U_t": ut, "V_xx": vxx}

    def __str__(self):
        return f"D = {self.D}; F = {self.F}; G = {self.G}" + (f"; n = {self.n}" if self.n else "")


@dataclass(frozen=True)
class Generator:
    """X = xi0 d_t + xi1 d_x + eta1 d_U + eta2 d_V."""

    xi0: Expr
    xi1: Expr
    eta1: Expr
    eta2: Expr
    label: str = ""

    def __post_init__(self):
        for name in ("xi0", "xi1", "eta1", "eta2"):
            object.__setattr__(self, name, _expr(getattr(self, name)))

    @classmethod
    def parse(cls, components, label: str = "") -> "Generator":
        xi0, xi1, eta1, eta2 = components
        return cls(_expr(xi0), _expr(xi1), _expr(eta1), _expr(eta2), label)

    @property
    def components(self) -> tuple[Expr, Expr, Expr, Expr]:
        return (self.xi0, self.xi1, self.eta1, self.eta2)

    def violations(self) -> list[str]:
        """Reasons the field lies outside the generator class (empty if none)."""
        out = []
        fv = [c.free_vars for c in self.components]
        if fv[0] & {"x", "U", "V"}:
            out.append("xi0 depends on x, U or V")
        if fv[1] & {"U", "V"}:
            out.append("xi1 depends on U or V")
        if "V" in fv[2]:
            out.append("eta1 depends on V")
        if "U" in fv[3]:
            out.append("eta2 depends on U")
        second = pdiff(pdiff(self.eta2, "V"), "V")
        if second != ZERO:
            names = function_names(second)
            ctx = PLANAR.with_functions(standin_family(np.random.default_rng(7), names, 1)[0])
            if not is_zero(second, ctx):
                out.append("eta2 is not affine in V")
        return out

    @property
    def in_class(self) -> bool:
        return not self.violations()

    def validate(self) -> "Generator":
        bad = self.violations()
        if bad:
            raise GeneratorClassError("; ".join(bad))
        return self

    def apply(self, h: Expr) -> Expr:
        """First-order action X(h)."""
        return add(*(mul(c, pdiff(h, v)) for c, v in zip(self.components, COORDS)))

    def scale(self, c) -> "Generator":
        return Generator(*(mul(c, e) for e in self.components), label=self.label)

    def __add__(self, other: "Generator") -> "Generator":
        return Generator(*(add(a, b) for a, b in zip(self.components, other.components)))

    def is_zero_field(self) -> bool:
        return all(c == ZERO for c in self.components)

    def __str__(self):
        if self.label:
            return self.label
        parts = []
        for c, v in zip(self.components, COORDS):
            if c != ZERO:
                parts.append(f"({c})*d_{v}")
        return " + ".join(parts) or "0"


def prolong2(g: Generator, ctx: JetContext = PLANAR) -> dict[str, Expr]:
    """Second-prolongation coefficients needed on the manifold."""
    g.validate()
    Dx = lambda e: total_derivative(e, "x", ctx)  # noqa: E731
    Dt = lambda e: total_derivative(e, "t", ctx)  # noqa: E731
    U_t, U_x, V_x, U_xx, V_xx = (Var(n) for n in JETS)
    dx_xi1 = Dx(g.xi1)
    rho_x_1 = add(Dx(g.eta1), neg(mul(U_x, dx_xi1)))
    rho_x_2 = add(Dx(g.eta2), neg(mul(V_x, dx_xi1)))
    rho_t_1 = add(Dt(g.eta1), neg(mul(U_t, pdiff(g.xi0, "t"))), neg(mul(U_x, pdiff(g.xi1, "t"))))
    sigma_xx_1 = add(Dx(rho_x_1), neg(mul(U_xx, dx_xi1)))
    sigma_xx_2 = add(Dx(rho_x_2), neg(mul(V_xx, dx_xi1)))
    return {
        "rho_t_1": rho_t_1,
        "rho_x_1": rho_x_1,
        "rho_x_2": rho_x_2,
        "sigma_xx_1": sigma_xx_1,
        "sigma_xx_2": sigma_xx_2,
    }


_JET_COEFF = {"U_t": "rho_t_1", "U_x": "rho_x_1", "V_x": "rho_x_2",
              "U_xx": "sigma_xx_1", "V_xx": "sigma_xx_2"}


def prolonged_action(g: Generator, e: Expr, pro: dict[str, Expr] | None = None) -> Expr:
    pro = pro or prolong2(g)
    terms = [g.apply(e)]
    for jet, key in _JET_COEFF.items():
        if jet in e.free_vars:
            terms.append(mul(pro[key], pdiff(e, jet)))
    return add(*terms)


def invariance_residuals(sys: PESystem, g: Generator) -> tuple[Expr, Expr]:
    """X_2(S1), X_2(S2) restricted to the manifold of ``sys``."""
    pro = prolong2(g)
    S1, S2 = sys.equations()
    man = sys.manifold()
    r1 = substitute(prolonged_action(g, S1, pro), man)
    r2 = substitute(prolonged_action(g, S2, pro), man)
    return r1, r2


class ConstantDiffusivityError(ValueError):
    """Determining equations divide by d(ln D)/dU, undefined for constant D."""


def determining_residuals(sys: PESystem, g: Generator) -> list[Expr]:
    """Residuals (left minus right) of the eight determining equations.

    Lines with several equalities are folded into a sum of squares.
    """
    if sys.constant_diffusivity:
        raise ConstantDiffusivityError("D is constant; use invariance_residuals")
    if sys.n:
        raise ValueError("determining equations are stated for the planar system")
    xi0, xi1, eta1, eta2 = g.components
    D, F, G = sys.D, sys.F, sys.G
    d = lambda e, *vs: _d(e, vs)  # noqa: E731
    Dp = pdiff(D, "U")
    lnD_U = div(Dp, D)
    sq = lambda *es: add(*(power(e, 2) for e in es))  # noqa: E731
    # xi1 may depend on t (the general solution has xi1 = b(t, x))
    r13 = sq(d(xi0, "x"), d(xi0, "U"), d(xi0, "V"), d(xi1, "U"), d(xi1, "V"))
    r14 = sq(d(eta1, "V"), d(eta2, "U"), d(eta2, "V", "V"))
    r15 = add(d(xi0, "t"), mul(-2, d(xi1, "x")), mul(eta1, lnD_U))
    r16 = add(mul(2, d(eta2, "x", "V")), neg(d(xi1, "x", "x")))
    r17 = add(mul(2, d(eta1, "x", "U")), mul(2, d(eta1, "x"), lnD_U),
              neg(d(xi1, "x", "x")), div(d(xi1, "t"), D))
    r18 = add(mul(2, d(xi1, "x")), neg(d(xi0, "t")), neg(d(eta1, "U")),
              neg(div(d(eta1, "U", "U"), lnD_U)), neg(mul(eta1, div(pdiff(Dp, "U"), Dp))))
    r19 = add(mul(eta1, d(F, "U")), mul(eta2, d(F, "V")), neg(d(eta1, "t")),
              mul(D, d(eta1, "x", "x")), neg(mul(F, add(d(eta1, "U"), neg(d(xi0, "t"))))))
    r20 = add(mul(eta1, d(G, "U")), mul(eta2, d(G, "V")), d(eta2, "x", "x"),
              neg(mul(G, add(d(eta2, "V"), mul(-2, d(xi1, "x"))))))
    return [r13, r14, r15, r16, r17, r18, r19, r20]


def _d(e: Expr, vs) -> Expr:
    for v in vs:
        e = pdiff(e, v)
    return e


def commutator(g1: Generator, g2: Generator) -> Generator:
    """[X1, X2]; the result is not validated (check ``in_class``)."""
    comps = [add(g1.apply(b), neg(g2.apply(a))) for a, b in zip(g1.components, g2.components)]
    return Generator(*comps)

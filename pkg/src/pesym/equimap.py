"""Equivalence transformations, form-preserving maps and reductions between
parabolic-elliptic systems.

A form-preserving map sends (t, x, U, V) to

    tau = alpha(t),  y = beta(t, x),  W = K U + P,  Z = L V + Q

and carries one system of the class onto another. Reduction entries (YAML
under ``pesym/data/reductions``) record a printed change of variables from a
source system in (tau, y, u, v) onto a canonical catalog entry in (t, x, U, V).
"""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .liealg import ConstraintError, Generator, PESystem, find_entry, invariance_residuals
from .symexpr import (
    ONE, ZERO, Expr, JetContext, Var, add, as_expr, div, evaluate, is_zero, mul, neg, parse,
    pdiff, power, standin_family, substitute, total_derivative,
)

PARAM_POOL = (-1.0, -0.5, 0.5, 1.0, 2.0)
G_SCALINGS = ("derived", "printed")


@dataclass(frozen=True)
class EquivalenceParams:
    """tau = a1 t + a2, y = a3 x + a4, w = a5 u + a6, z = a7 v + a8."""

    a1: float = 1.0
    a2: float = 0.0
    a3: float = 1.0
    a4: float = 0.0
    a5: float = 1.0
    a6: float = 0.0
    a7: float = 1.0
    a8: float = 0.0

    def __post_init__(self):
        for name in ("a1", "a3", "a5", "a7"):
            if getattr(self, name) == 0:
                raise ValueError(f"{name} must be nonzero")

    def then(self, q: "EquivalenceParams") -> "EquivalenceParams":
        """Composition: apply ``self`` first, then ``q``."""
        return EquivalenceParams(
            q.a1 * self.a1, q.a1 * self.a2 + q.a2,
            q.a3 * self.a3, q.a3 * self.a4 + q.a4,
            q.a5 * self.a5, q.a5 * self.a6 + q.a6,
            q.a7 * self.a7, q.a7 * self.a8 + q.a8,
        )

    @classmethod
    def random(cls, rng: np.random.Generator) -> "EquivalenceParams":
        scales = rng.choice(PARAM_POOL, 4)
        shifts = rng.uniform(-1.0, 1.0, 4)
        return cls(scales[0], shifts[0], scales[1], shifts[1], scales[2], shifts[2],
                   scales[3], shifts[3])

    def g_factor(self, scaling: str = "derived") -> float:
        if scaling == "derived":
            return self.a7 / self.a3 ** 2
        if scaling == "printed":
            return self.a7 / self.a3
        raise ValueError(f"unknown G scaling {scaling!r}")


def apply_equivalence(sys: PESystem, p: EquivalenceParams, scaling: str = "derived") -> PESystem:
    """Image of ``sys`` under an equivalence transformation.

    The result is written in (U, V) standing for the new (w, z).
    ``scaling="printed"`` uses the alternative factor a7/a3 for G.
    """
    sigma = {"U": div(add(Var("U"), -p.a6), p.a5), "V": div(add(Var("V"), -p.a8), p.a7)}
    D = mul(p.a3 ** 2 / p.a1, substitute(sys.D, sigma))
    F = mul(p.a5 / p.a1, substitute(sys.F, sigma))
    G = mul(p.g_factor(scaling), substitute(sys.G, sigma))
    return PESystem(D, F, G, sys.n)


@dataclass(frozen=True)
class FormPreservingMap:
    """alpha(t), beta(t, x), K, P, L, Q (t, x)."""

    alpha: Expr
    beta: Expr
    K: Expr
    P: Expr = ZERO
    L: Expr = ONE
    Q: Expr = ZERO

    def __post_init__(self):
        for name in ("alpha", "beta", "K", "P", "L", "Q"):
            v = getattr(self, name)
            object.__setattr__(self, name, parse(v) if isinstance(v, str) else as_expr(v))
        if self.alpha.free_vars - {"t"}:
            raise ValueError("alpha must depend on t only")
        for name in ("beta", "K", "P", "L", "Q"):
            if getattr(self, name).free_vars - {"t", "x"}:
                raise ValueError(f"{name} must depend on (t, x) only")

    @classmethod
    def from_equivalence(cls, p: EquivalenceParams) -> "FormPreservingMap":
        t, x = Var("t"), Var("x")
        return cls(add(mul(p.a1, t), p.a2), add(mul(p.a3, x), p.a4), as_expr(p.a5),
                   as_expr(p.a6), as_expr(p.a7), as_expr(p.a8))

    def nondegenerate(self, domains=None, seed: int = 0, points: int = 16) -> bool:
        """alpha' * beta_x, K and L nonzero at sample points."""
        rng = np.random.default_rng(seed)
        domains = domains or {}
        pts = {v: rng.uniform(*domains.get(v, (0.3, 2.0)), points) for v in ("t", "x")}
        jac = mul(pdiff(self.alpha, "t"), pdiff(self.beta, "x"))
        for e in (jac, self.K, self.L):
            val = np.asarray(evaluate(e, pts), dtype=float)
            if np.any(np.abs(val) < 1e-12) or not np.all(np.isfinite(val)):
                return False
        return True


def fp_constraint_residuals(m: FormPreservingMap, source: PESystem, target: PESystem) -> list[Expr]:
    """Residuals of the five conditions for ``m`` to carry ``source`` to ``target``.

    Source functions are evaluated at (U, V), target functions at the new
    variables W = K U + P, Z = L V + Q.
    """
    U, V = Var("U"), Var("V")
    new = {"U": add(mul(m.K, U), m.P), "V": add(mul(m.L, V), m.Q)}
    lam, Ft, Gt = (substitute(e, new) for e in (target.D, target.F, target.G))
    D, F, G = source.D, source.F, source.G
    DU = pdiff(D, "U")
    adot = pdiff(m.alpha, "t")
    bx, bt = pdiff(m.beta, "x"), pdiff(m.beta, "t")
    bxx = pdiff(bx, "x")
    Kx, Kt, Kxx = pdiff(m.K, "x"), pdiff(m.K, "t"), pdiff(pdiff(m.K, "x"), "x")
    Px, Pt, Pxx = pdiff(m.P, "x"), pdiff(m.P, "t"), pdiff(pdiff(m.P, "x"), "x")
    Lx, Lxx = pdiff(m.L, "x"), pdiff(pdiff(m.L, "x"), "x")
    Qx, Qxx = pdiff(m.Q, "x"), pdiff(pdiff(m.Q, "x"), "x")
    grad = add(mul(Kx, U), Px)
    r1 = add(mul(adot, lam), neg(mul(power(bx, 2), D)))
    rhs2 = add(
        mul(m.K, F), mul(div(power(grad, 2), m.K), DU), mul(Kt, U), Pt,
        neg(mul(D, add(mul(Kxx, U), Pxx, neg(mul(2, div(grad, m.K), Kx))))),
    )
    r2 = add(mul(adot, Ft), neg(rhs2))
    rhs3 = add(mul(m.L, G), mul(2, div(add(mul(Lx, V), Qx), m.L), Lx), neg(mul(Lxx, V)), neg(Qxx))
    r3 = add(mul(power(bx, 2), Gt), neg(rhs3))
    r4 = add(mul(2, bx, grad, DU), mul(add(mul(2, bx, Kx), neg(mul(bxx, m.K))), D), mul(bt, m.K))
    r5 = add(mul(2, bx, Lx), neg(mul(bxx, m.L)))
    return [r1, r2, r3, r4, r5]


def check_residuals(residuals, functions_names=(), *, domains=None, standins: int = 3, seed: int = 0,
                    trials: int = 12, tol: float = 1e-9) -> tuple[float, dict | None]:
    """Worst ratio over stand-in bindings; witness of the first failure."""
    rng = np.random.default_rng(seed)
    worst, witness = 0.0, None
    for j, funcs in enumerate(standin_family(rng, functions_names, standins)):
        ctx = JetContext(functions=funcs, domains=dict(domains or {}))
        for k, r in enumerate(residuals):
            z = is_zero(r, ctx, trials=trials, tol=tol, seed=seed + 17 * j + k)
            if z.ratio > worst:
                worst = z.ratio
                if not z.ok and witness is None:
                    witness = dict(z.witness or {}, equation=k + 1, value=z.value)
    return worst, witness


def g_scaling_report(sys: PESystem, p: EquivalenceParams, **kw) -> dict[str, float]:
    """Worst form-preserving residual ratio for each candidate G scaling."""
    m = FormPreservingMap.from_equivalence(p)
    out = {}
    for scaling in G_SCALINGS:
        target = apply_equivalence(sys, p, scaling)
        res = fp_constraint_residuals(m, sys, target)
        out[scaling] = check_residuals(res, sys.function_names, **kw)[0]
    return out


# --- reduction entries ------------------------------------------------------

SOURCE_CTX = JetContext(base=("tau", "y"), deps=("u", "v"))
_RENAME = {"tau": Var("t"), "y": Var("x"), "u": Var("U"), "v": Var("V")}
_IDENTITY_MAP = {"t": "tau", "x": "y", "U": "u", "V": "v"}


@dataclass
class ReductionEntry:
    table: int
    case: int
    D: str
    F: str
    G: str
    params: dict
    map: dict
    target: dict
    branch: str = ""
    constraints: list = field(default_factory=list)
    window: dict = field(default_factory=dict)
    note: str = ""
    path: str = ""

    @property
    def id(self) -> str:
        return f"T{self.table}.{self.case}" + (f" [{self.branch}]" if self.branch else "")

    @property
    def target_id(self) -> str:
        return f"T{self.target['table']}.{self.target['case']}"

    @classmethod
    def from_dict(cls, doc: dict, path: str = "") -> list["ReductionEntry"]:
        """One entry per printed branch (a single entry if unbranched)."""
        branches = doc.get("branches") or [{}]
        out = []
        for b in branches:
            params = dict(doc.get("params") or {}, **(b.get("params") or {}))
            mp = dict(_IDENTITY_MAP, **(doc.get("map") or {}), **(b.get("map") or {}))
            target = copy.deepcopy(b.get("target") or doc.get("target"))
            src = doc["source"]
            out.append(cls(int(doc["table"]), int(doc["case"]), str(src["D"]), str(src["F"]),
                           str(src["G"]), params, {k: str(v) for k, v in mp.items()}, target,
                           b.get("label", ""), [str(c) for c in doc.get("constraints") or []],
                           dict(doc.get("window") or {}), doc.get("note", ""), path))
        return out

    # parameters
    def sample_params(self, rng: np.random.Generator, fixed: dict | None = None) -> dict:
        fixed = dict(fixed or {})
        for _ in range(200):
            vals = dict(fixed)
            for name, kind in self.params.items():
                if name not in vals:
                    vals[name] = 0.0 if kind == "zero" else float(rng.choice(PARAM_POOL))
            try:
                self.check_params(vals)
                return vals
            except ConstraintError:
                if set(fixed) >= set(self.params):
                    raise
        raise ConstraintError(f"{self.id}: could not sample admissible parameters")

    def check_params(self, vals: dict) -> None:
        for name, kind in self.params.items():
            if name not in vals:
                raise ConstraintError(f"{self.id}: missing parameter {name}")
            if kind == "nonzero" and vals[name] == 0:
                raise ConstraintError(f"{self.id}: {name} must be nonzero")
            if kind == "zero" and vals[name] != 0:
                raise ConstraintError(f"{self.id}: {name} must be zero")
        for c in self.constraints:
            if float(evaluate(parse(c), vals)) == 0.0:
                raise ConstraintError(f"{self.id}: constraint {c} != 0 violated")
        self.target_entry().check_params(self.target_params(vals))

    # systems and maps
    def source_system(self, vals: dict) -> PESystem:
        """Source system renamed to (t, x, U, V)."""
        es = [substitute(substitute(parse(s), vals), _RENAME) for s in (self.D, self.F, self.G)]
        return PESystem(*es)

    def target_entry(self):
        return find_entry(self.target["table"], self.target["case"])

    def target_params(self, vals: dict) -> dict:
        return {k: float(evaluate(parse(str(v)), vals)) for k, v in (self.target.get("params") or {}).items()}

    def target_system(self, vals: dict) -> PESystem:
        return self.target_entry().system(self.target_params(vals))

    def map_exprs(self, vals: dict) -> dict[str, Expr]:
        """Target variables (t, x, U, V) in terms of (tau, y, u, v)."""
        out = {k: substitute(parse(v), vals) for k, v in self.map.items()}
        if out["t"].free_vars - {"tau"}:
            raise ValueError(f"{self.id}: t must depend on tau only")
        if out["x"].free_vars - {"y"}:
            raise ValueError(f"{self.id}: x must depend on y only")
        if "v" in out["U"].free_vars or "u" in out["V"].free_vars:
            raise ValueError(f"{self.id}: U must not involve v and V must not involve u")
        return out

    def domains(self, renamed: bool = False) -> dict:
        w = {k: tuple(v) for k, v in self.window.items()}
        if renamed:
            return {_RENAME[k].name: v for k, v in w.items()}
        return w

    def form_preserving_map(self, vals: dict) -> FormPreservingMap:
        """The printed change of variables as a form-preserving map in (t, x, U, V)."""
        m = self.map_exprs(vals)
        K, L = pdiff(m["U"], "u"), pdiff(m["V"], "v")
        if pdiff(K, "u") != ZERO or pdiff(L, "v") != ZERO:
            raise ValueError(f"{self.id}: map is not affine in the dependent variables")
        P, Q = substitute(m["U"], {"u": 0}), substitute(m["V"], {"v": 0})
        ren = lambda e: substitute(e, _RENAME)  # noqa: E731
        return FormPreservingMap(ren(m["t"]), ren(m["x"]), ren(K), ren(P), ren(L), ren(Q))


def load_reductions(directory=None) -> list[ReductionEntry]:
    directory = Path(directory) if directory else Path(str(resources.files("pesym") / "data" / "reductions"))
    out = []
    for p in sorted(directory.glob("*.yaml")):
        with open(p, encoding="utf-8") as fh:
            out.extend(ReductionEntry.from_dict(yaml.safe_load(fh), str(p)))
    return sorted(out, key=lambda e: (e.table, e.case, e.branch))


def find_reductions(table: int, case: int, directory=None) -> list[ReductionEntry]:
    found = [e for e in load_reductions(directory) if e.table == table and e.case == case]
    if not found:
        raise KeyError(f"no reduction entry for table {table}, case {case}")
    return found


def pushed_residuals(entry: ReductionEntry, vals: dict) -> tuple[Expr, Expr]:
    """Target equations written through the map, on the source manifold."""
    ctx = SOURCE_CTX
    m = entry.map_exprs(vals)
    src = entry.source_system(vals)
    back = {"U": Var("u"), "V": Var("v")}
    sD, sF, sG = (substitute(e, back) for e in (src.D, src.F, src.G))
    u_y, u_yy = Var(ctx.jet("u", "y")), Var(ctx.jet("u", "y", "y"))
    manifold = {
        ctx.jet("u", "tau"): add(mul(pdiff(sD, "u"), power(u_y, 2)), mul(sD, u_yy), sF),
        ctx.jet("v", "y", "y"): neg(sG),
    }
    Tp, Xp = pdiff(m["t"], "tau"), pdiff(m["x"], "y")
    Dy = lambda e: total_derivative(e, "y", ctx)  # noqa: E731
    Dtau = lambda e: total_derivative(e, "tau", ctx)  # noqa: E731
    U, V = m["U"], m["V"]
    Ux = div(Dy(U), Xp)
    Uxx = div(Dy(Ux), Xp)
    Ut = div(Dtau(U), Tp)
    Vxx = div(Dy(div(Dy(V), Xp)), Xp)
    tgt = entry.target_system(vals)
    on = {"U": U, "V": V}
    D, F, G = (substitute(e, on) for e in (tgt.D, tgt.F, tgt.G))
    Dp = substitute(pdiff(tgt.D, "U"), on)
    r1 = add(Ut, neg(mul(Dp, power(Ux, 2))), neg(mul(D, Uxx)), neg(F))
    r2 = add(Vxx, G)
    return substitute(r1, manifold), substitute(r2, manifold)


@dataclass
class PushReport:
    entry: str
    target: str
    params: dict
    route: str           # push | theorem1
    max_ratio: float
    passed: bool
    witness: dict | None = None

    def as_record(self) -> dict:
        return {"entry": self.entry, "target": self.target, "params": self.params,
                "route": self.route, "max_ratio": self.max_ratio, "pass": self.passed,
                "witness": self.witness}


def push_system(entry: ReductionEntry, vals: dict | None = None, *, seed: int = 0, standins: int = 3,
                trials: int = 12, tol: float = 1e-9) -> PushReport:
    """Verify that the printed map carries the source onto the declared target."""
    vals = vals if vals is not None else entry.sample_params(np.random.default_rng(seed))
    r = pushed_residuals(entry, vals)
    names = entry.source_system(vals).function_names | entry.target_system(vals).function_names
    worst, wit = check_residuals(r, names, domains=entry.domains(), standins=standins, seed=seed,
                                 trials=trials, tol=tol)
    return PushReport(entry.id, entry.target_id, vals, "push", worst, worst < tol, wit)


def theorem1_check(entry: ReductionEntry, vals: dict | None = None, *, seed: int = 0,
                   standins: int = 3, trials: int = 12, tol: float = 1e-9) -> PushReport:
    """Same question answered through the five form-preserving conditions."""
    vals = vals if vals is not None else entry.sample_params(np.random.default_rng(seed))
    m = entry.form_preserving_map(vals)
    src, tgt = entry.source_system(vals), entry.target_system(vals)
    res = fp_constraint_residuals(m, src, tgt)
    worst, wit = check_residuals(res, src.function_names | tgt.function_names,
                                 domains=entry.domains(renamed=True), standins=standins, seed=seed,
                                 trials=trials, tol=tol)
    return PushReport(entry.id, entry.target_id, vals, "theorem1", worst, worst < tol, wit)


def pull_back_generator(entry: ReductionEntry, vals: dict, g: Generator) -> Generator:
    """Generator of the target system expressed on the source, in (t, x, U, V) names."""
    m = entry.map_exprs(vals)
    on = {"t": m["t"], "x": m["x"], "U": m["U"], "V": m["V"]}
    xi0, xi1, eta1, eta2 = (substitute(c, on) for c in g.components)
    y_tau = div(xi0, pdiff(m["t"], "tau"))
    y_y = div(xi1, pdiff(m["x"], "y"))
    y_u = div(add(eta1, neg(mul(pdiff(m["U"], "tau"), y_tau)), neg(mul(pdiff(m["U"], "y"), y_y))),
              pdiff(m["U"], "u"))
    y_v = div(add(eta2, neg(mul(pdiff(m["V"], "tau"), y_tau)), neg(mul(pdiff(m["V"], "y"), y_y))),
              pdiff(m["V"], "v"))
    comps = [substitute(c, _RENAME) for c in (y_tau, y_y, y_u, y_v)]
    return Generator(*comps, label=f"pull-back of {g.label or g}")


def transported_symmetry_ratios(entry: ReductionEntry, vals: dict, generators, *, seed: int = 0,
                                standins: int = 3, trials: int = 12, tol: float = 1e-9) -> list[float]:
    """Invariance ratio on the source of each pulled-back generator."""
    src = entry.source_system(vals)
    out = []
    for g in generators:
        pg = pull_back_generator(entry, vals, g)
        r = invariance_residuals(src, pg)
        out.append(check_residuals(r, src.function_names, domains=entry.domains(renamed=True),
                                   standins=standins, seed=seed, trials=trials, tol=tol)[0])
    return out


GENERIC_SYSTEM = ("d(U)", "f(U)*exp(V) + h(U)*V", "g(U) + k(U)*V^2")


def equivalence_sweep(count: int = 6, seed: int = 0, **kw) -> list[dict]:
    """Form-preserving ratios of random equivalence maps on a generic system, per G scaling.

    The first map always has a3 = 2 so the two scalings are distinguished.
    """
    sys = PESystem.from_strings(*GENERIC_SYSTEM)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        p = EquivalenceParams.random(rng)
        if i == 0:
            p = replace(p, a3=2.0)
        rep = g_scaling_report(sys, p, seed=seed + i, **kw)
        out.append({"params": asdict(p), "a3": p.a3, **{f"ratio_{k}": v for k, v in rep.items()}})
    return out

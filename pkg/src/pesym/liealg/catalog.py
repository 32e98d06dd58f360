"""Symmetry catalog: data entries, instantiation and verification.

Each entry lives in its own YAML file under ``pesym/data/catalog``::

    table: 1
    case: 7
    system: {D: ..., F: ..., G: ...}      # grammar expressions
    params: {k: nonzero, alpha1: any}      # symbolic constants
    constraints: [alpha1^2+alpha2^2]       # must evaluate nonzero
    families:                              # arbitrary functions in generators
      phi: {kind: time}                    # phi(t) -> t, t^2, exp(t)
      h: {kind: helmholtz, coeff: alpha2, rhs: 0}   # h_xx + alpha2*h + rhs = 0
    generators:                            # [xi0, xi1, eta1, eta2]
      - ['1', '0', '0', '0']
      - {printed: [...], corrected: [...], note: ...}
    negative: [...]                        # perturbed generator that must fail
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..symexpr import (
    PLACEHOLDER, Expr, JetContext, Var, add, cos, evaluate, exp, function_names, is_zero, mul, parse, power,
    replace_functions, sin, standin_family, substitute,
)
from .core import (
    COORDS, ConstantDiffusivityError, Generator, PESystem, commutator, determining_residuals,
    invariance_residuals,
)

NONZERO_POOL = (-1.5, -1.0, -0.5, 0.5, 1.0, 2.0)
ANY_POOL = NONZERO_POOL + (0.0,)
TIME_SAMPLES = ("_s", "_s^2", "exp(_s)")
NEGATIVE_THRESHOLD = 1e-3


class ConstraintError(ValueError):
    """Parameters violate the entry's constraints."""


@dataclass(frozen=True)
class GeneratorTemplate:
    components: tuple
    corrected: tuple | None = None
    note: str = ""

    @property
    def effective(self) -> tuple:
        return self.corrected or self.components

    def label(self, which: str = "effective") -> str:
        comps = self.components if which == "printed" else self.effective
        return "[" + ", ".join(comps) + "]"


@dataclass
class CatalogEntry:
    table: int
    case: int
    D: str
    F: str
    G: str
    params: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    families: dict = field(default_factory=dict)
    generators: list = field(default_factory=list)
    negative: tuple | None = None
    path: str = ""

    @property
    def id(self) -> str:
        return f"T{self.table}.{self.case}"

    @classmethod
    def from_dict(cls, doc: dict, path: str = "") -> "CatalogEntry":
        gens = []
        for g in doc["generators"]:
            if isinstance(g, dict):
                gens.append(GeneratorTemplate(tuple(map(str, g["printed"])),
                                              tuple(map(str, g["corrected"])), g.get("note", "")))
            else:
                gens.append(GeneratorTemplate(tuple(map(str, g))))
        sysd = doc["system"]
        neg = doc.get("negative")
        return cls(
            table=int(doc["table"]), case=int(doc["case"]),
            D=str(sysd["D"]), F=str(sysd["F"]), G=str(sysd["G"]),
            params=dict(doc.get("params") or {}),
            constraints=[str(c) for c in doc.get("constraints") or []],
            families=dict(doc.get("families") or {}),
            generators=gens,
            negative=tuple(map(str, neg)) if neg else None,
            path=path,
        )

    def system_template(self) -> PESystem:
        return PESystem.from_strings(self.D, self.F, self.G)

    def system(self, values: dict) -> PESystem:
        t = self.system_template()
        return PESystem(*(substitute(e, values) for e in (t.D, t.F, t.G)))

    def check_params(self, values: dict) -> None:
        missing = set(self.params) - set(values)
        if missing:
            raise ConstraintError(f"{self.id}: missing parameters {sorted(missing)}")
        for name, kind in self.params.items():
            if kind == "nonzero" and values[name] == 0:
                raise ConstraintError(f"{self.id}: {name} must be nonzero")
        for c in self.constraints:
            e = parse(c)
            v = float(evaluate(e, values)) if e.free_vars <= set(values) else None
            if v is None or v == 0.0:
                raise ConstraintError(f"{self.id}: constraint {c} != 0 violated")

    def sample_params(self, rng: np.random.Generator, fixed: dict | None = None) -> dict:
        fixed = dict(fixed or {})
        for _ in range(200):
            vals = dict(fixed)
            for name, kind in self.params.items():
                if name not in vals:
                    pool = NONZERO_POOL if kind == "nonzero" else ANY_POOL
                    vals[name] = float(rng.choice(pool))
            try:
                self.check_params(vals)
                return vals
            except ConstraintError:
                if set(fixed) >= set(self.params):
                    raise
        raise ConstraintError(f"{self.id}: could not sample admissible parameters")

    def expand(self, template: tuple, values: dict) -> list[Generator]:
        """Concrete generators from one template: constants bound, families sampled."""
        comps = [substitute(parse(c), values) for c in template]
        used = set()
        for c in comps:
            used |= function_names(c) | c.free_vars
        fams = [f for f in self.families if f in used]
        samples = [dict()]
        for f in fams:
            opts = family_samples(self.families[f], values)
            samples = [dict(s, **{f: o}) for s in samples for o in opts]
        out = []
        for s in samples:
            funcs = {k: v for k, v in s.items() if self.families[k]["kind"] == "time"}
            fields = {k: v for k, v in s.items() if self.families[k]["kind"] != "time"}
            cs = []
            for c in comps:
                c = replace_functions(c, funcs) if funcs else c
                cs.append(substitute(c, fields) if fields else c)
            tag = ", ".join(f"{k}={_show(v)}" for k, v in s.items())
            out.append(Generator(*cs, label="[" + ", ".join(map(str, cs)) + "]"
                                 + (f" ({tag})" if tag else "")))
        return out


def _show(e: Expr) -> str:
    return str(substitute(e, {PLACEHOLDER: Var("t")}))


def family_samples(spec: dict, values: dict) -> list[Expr]:
    """Concrete members of an arbitrary-function family.

    ``time``: phi(t) in {t, t^2, exp(t)} as templates in the placeholder.
    ``helmholtz``: closed-form solutions of h_xx + a*h + rhs = 0 with
    time-dependent coefficients.
    """
    kind = spec["kind"]
    if kind == "time":
        return [parse(s) for s in TIME_SAMPLES]
    if kind != "helmholtz":
        raise ValueError(f"unknown family kind {kind!r}")
    a = float(values[spec["coeff"]])
    rhs = float(spec.get("rhs", 0))
    t, x = Var("t"), Var("x")
    if a > 0:
        w = math.sqrt(a)
        b1, b2 = cos(mul(w, x)), sin(mul(w, x))
    elif a < 0:
        w = math.sqrt(-a)
        b1, b2 = exp(mul(w, x)), exp(mul(-w, x))
    else:
        b1, b2 = x, parse("1")
    if rhs == 0:
        particular = parse("0")
    elif a != 0:
        particular = parse(str(-rhs / a))
    else:
        particular = mul(-rhs / 2, power(x, 2))
    coeffs = [(t, parse("1")), (exp(t), power(t, 2)), (parse("1"), parse("0"))]
    return [add(particular, mul(c1, b1), mul(c2, b2)) for c1, c2 in coeffs]


def catalog_dir() -> Path:
    return Path(str(resources.files("pesym") / "data" / "catalog"))


def load_entry(path) -> CatalogEntry:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return CatalogEntry.from_dict(yaml.safe_load(fh), str(path))


def load_catalog(directory=None) -> list[CatalogEntry]:
    directory = Path(directory) if directory else catalog_dir()
    entries = [load_entry(p) for p in sorted(directory.glob("*.yaml"))]
    return sorted(entries, key=lambda e: (e.table, e.case))


def find_entry(table: int, case: int, directory=None) -> CatalogEntry:
    for e in load_catalog(directory):
        if e.table == table and e.case == case:
            return e
    raise KeyError(f"no catalog entry for table {table}, case {case}")


@dataclass
class GeneratorCheck:
    entry: str
    instantiation: int
    params: dict
    generator: str
    role: str           # listed | negative | printed
    max_ratio: float
    passed: bool        # symmetry holds (listed/printed) or control fails (negative)
    witness: dict | None = None
    note: str = ""

    def as_record(self) -> dict:
        return {
            "entry": self.entry, "instantiation": self.instantiation, "params": self.params,
            "generator": self.generator, "role": self.role, "max_ratio": self.max_ratio,
            "pass": self.passed, "witness": self.witness, "note": self.note,
        }


@dataclass
class EntryReport:
    entry: CatalogEntry
    checks: list = field(default_factory=list)

    @property
    def listed_ok(self) -> bool:
        return all(c.passed for c in self.checks if c.role == "listed")

    @property
    def negative_ok(self) -> bool:
        negs = [c for c in self.checks if c.role == "negative"]
        return bool(negs) and all(c.passed for c in negs)

    @property
    def ok(self) -> bool:
        return self.listed_ok and self.negative_ok

    @property
    def errata(self) -> list:
        return [c for c in self.checks if c.role == "printed"]


def residual_ratio(sys: PESystem, g: Generator, bindings: list[dict], trials: int, tol: float,
                   seed: int) -> tuple[float, dict | None]:
    """Worst normalized invariance residual over all stand-in bindings."""
    r1, r2 = invariance_residuals(sys, g)
    worst, witness = 0.0, None
    for j, funcs in enumerate(bindings):
        ctx = JetContext(functions=funcs)
        for k, r in enumerate((r1, r2)):
            z = is_zero(r, ctx, trials=trials, tol=tol, seed=seed + 31 * j + k)
            if z.ratio > worst:
                worst = z.ratio
                if not z.ok:
                    witness = dict(z.witness or {}, residual=k + 1, value=z.value)
    return worst, witness


def verify_catalog_entry(entry: CatalogEntry, instantiations: int = 2, seed: int = 0, *,
                         standins: int = 3, trials: int = 12, tol: float = 1e-9,
                         params: dict | None = None, system_override: dict | None = None,
                         negative: bool = True) -> EntryReport:
    """Check every listed generator of ``entry`` on random instantiations.

    ``params`` pins some constants; ``system_override`` replaces D/F/G
    strings (used for negative controls on the system side).
    """
    if instantiations < 2:
        raise ValueError("at least two instantiations are required")
    if standins < 3 or trials < 12:
        raise ValueError("need >= 3 stand-ins and >= 12 sample points")
    rng = np.random.default_rng(seed)
    report = EntryReport(entry)
    for i in range(instantiations):
        vals = entry.sample_params(rng, params)
        if system_override:
            d = {"D": entry.D, "F": entry.F, "G": entry.G, **system_override}
            tmpl = PESystem.from_strings(d["D"], d["F"], d["G"])
            sys = PESystem(*(substitute(e, vals) for e in (tmpl.D, tmpl.F, tmpl.G)))
        else:
            sys = entry.system(vals)
        bindings = standin_family(rng, sys.function_names, standins)
        s = int(rng.integers(0, 2**31))
        for tmpl in entry.generators:
            for g in entry.expand(tmpl.effective, vals):
                worst, wit = residual_ratio(sys, g, bindings, trials, tol, s)
                report.checks.append(GeneratorCheck(entry.id, i, vals, g.label, "listed", worst,
                                                    worst < tol, wit, tmpl.note))
            if tmpl.corrected:
                for g in entry.expand(tmpl.components, vals):
                    worst, wit = residual_ratio(sys, g, bindings, trials, tol, s)
                    report.checks.append(GeneratorCheck(entry.id, i, vals, g.label, "printed", worst,
                                                        worst < tol, wit, tmpl.note))
        if negative and entry.negative:
            for g in entry.expand(entry.negative, vals):
                worst, wit = residual_ratio(sys, g, bindings, trials, tol, s)
                report.checks.append(GeneratorCheck(entry.id, i, vals, g.label, "negative", worst,
                                                    worst > NEGATIVE_THRESHOLD, wit))
    return report


def determining_check(entry: CatalogEntry, values: dict, bindings: list[dict], *, trials: int = 12,
                      tol: float = 1e-9, seed: int = 0) -> list[tuple[str, int, float]]:
    """Cross-check listed generators against the eight determining equations.

    Returns (generator, equation index, ratio) for every failure; empty when
    all pass. Only meaningful for non-constant diffusivity.
    """
    sys = entry.system(values)
    if sys.constant_diffusivity:
        raise ConstantDiffusivityError(f"{entry.id}: constant D")
    fails = []
    for tmpl in entry.generators:
        for g in entry.expand(tmpl.effective, values):
            for i, r in enumerate(determining_residuals(sys, g)):
                for j, funcs in enumerate(bindings):
                    z = is_zero(r, JetContext(functions=funcs), trials=trials, tol=tol, seed=seed + j)
                    if not z.ok:
                        fails.append((g.label, i, z.ratio))
                        break
    return fails


TIME_DICTIONARY = ("1", "_s", "_s^2", "_s^3", "exp(_s)", "_s*exp(_s)", "_s^2*exp(_s)",
                   "exp(2*_s)")


def _basis(entry: CatalogEntry, values: dict, dictionary=TIME_DICTIONARY) -> list[Generator]:
    """Listed generators with every family replaced by dictionary functions."""
    out = []
    for tmpl in entry.generators:
        comps = [substitute(parse(c), values) for c in tmpl.effective]
        fams = set()
        for c in comps:
            fams |= function_names(c) & set(entry.families)
        if not fams:
            out.append(Generator(*comps))
            continue
        if any(entry.families[f]["kind"] != "time" for f in fams):
            raise ValueError(f"{entry.id}: closure supports time families only")
        for f in sorted(fams):
            for d in dictionary:
                out.append(Generator(*(replace_functions(c, {f: parse(d)}) for c in comps)))
    return out


def _field_values(g: Generator, pts: dict) -> np.ndarray:
    cols = []
    for c in g.components:
        v = evaluate(c, pts)
        cols.append(np.broadcast_to(np.asarray(v, dtype=float), pts["t"].shape))
    return np.concatenate(cols)


def closure_check(entry: CatalogEntry, values: dict, *, points: int = 40, seed: int = 0,
                  tol: float = 1e-8) -> list[tuple[str, str, float]]:
    """Commutators of sampled generators must lie in the span of the basis.

    Coefficients are fitted by least squares on random points; returns
    (X1, X2, relative residual) for each pair whose residual exceeds ``tol``.
    """
    rng = np.random.default_rng(seed)
    pts = {v: rng.uniform(0.3, 1.5, points) for v in COORDS}
    basis = _basis(entry, values)
    A = np.column_stack([_field_values(b, pts) for b in basis])
    sampled = [g for tmpl in entry.generators for g in entry.expand(tmpl.effective, values)]
    fails = []
    for i, g1 in enumerate(sampled):
        for g2 in sampled[i + 1:]:
            c = commutator(g1, g2)
            if c.is_zero_field():
                continue
            b = _field_values(c, pts)
            coef, *_ = np.linalg.lstsq(A, b, rcond=None)
            res = np.linalg.norm(A @ coef - b) / (1.0 + np.linalg.norm(b))
            if res > tol:
                fails.append((g1.label, g2.label, float(res)))
    return fails

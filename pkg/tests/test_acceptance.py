"""Acceptance suite: one test per criterion, each printing a single verdict line."""
import time

import numpy as np

from pesym.cli import main
from pesym.equimap import equivalence_sweep, load_reductions, push_system, theorem1_check
from pesym.fbsolve import convergence_ladder
from pesym.liealg import (
    Generator, PESystem, determining_check, determining_residuals, find_entry, flow_check,
    invariance_residuals, load_catalog, verify_catalog_entry,
)
from pesym.simred import (
    FIG1, cubic_f, exact_dphi, exact_phi, exact_psi, exact_residuals, f_of_phi, g_of_phi,
    shoot_reduced,
)
from pesym.symexpr import JetContext, is_zero, parse, replace_functions, standin_family


def verdict(capsys, k: int, title: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[acceptance {k}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
    assert ok, detail


def test_1_catalog_verification(capsys):
    t0 = time.perf_counter()
    cat = load_catalog()
    bad_listed, bad_negative, worst_listed, weakest_negative = [], [], 0.0, np.inf
    for i, e in enumerate(cat):
        rep = verify_catalog_entry(e, instantiations=2, seed=100 + i, standins=3, trials=12,
                                   tol=1e-9)
        listed = [c for c in rep.checks if c.role == "listed"]
        negs = [c for c in rep.checks if c.role == "negative"]
        worst_listed = max([worst_listed] + [c.max_ratio for c in listed])
        weakest_negative = min([weakest_negative] + [c.max_ratio for c in negs])
        if not rep.listed_ok:
            bad_listed.append(e.id)
        if not rep.negative_ok:
            bad_negative.append(e.id)
    dt = time.perf_counter() - t0
    ok = len(cat) == 35 and not bad_listed and not bad_negative and weakest_negative > 1e-3 \
        and dt < 60
    verdict(capsys, 1, "catalog verification", ok,
            f"{len(cat)} entries, worst listed ratio {worst_listed:.1e}, weakest negative "
            f"{weakest_negative:.1e}, failures {bad_listed + bad_negative}, {dt:.1f} s")


def test_2_determining_equations_cross_check(capsys):
    rng = np.random.default_rng(2)
    checked, disagreements, fails = 0, [], []
    for e in load_catalog():
        vals = e.sample_params(rng)
        sys = e.system(vals)
        if sys.constant_diffusivity:
            continue
        binds = standin_family(rng, sys.function_names, 3)
        fails += [(e.id, *f) for f in determining_check(e, vals, binds, tol=1e-9)]
        gens = [(g, True) for t in e.generators for g in e.expand(t.effective, vals)]
        gens += [(g, False) for g in e.expand(e.negative, vals)]
        for g, expected in gens:
            direct = all(is_zero(r, JetContext(functions=b), tol=1e-9)
                         for b in binds for r in invariance_residuals(sys, g))
            if not g.in_class:
                det = False
            else:
                det = all(is_zero(r, JetContext(functions=b), tol=1e-9)
                          for b in binds for r in determining_residuals(sys, g))
            if direct != det or direct != expected:
                disagreements.append((e.id, g.label, direct, det))
            checked += 1
    ok = checked > 0 and not fails and not disagreements
    verdict(capsys, 2, "determining-equation cross-check", ok,
            f"{checked} (system, generator) pairs incl. negatives, determining failures {fails}, "
            f"route disagreements {disagreements}")


def test_3_transformation_verification(capsys):
    rows = load_reductions()
    keys = {(r.table, r.case) for r in rows}
    t3 = sum(1 for k in keys if k[0] == 3)
    t4 = sum(1 for k in keys if k[0] == 4)
    failures, worst = [], 0.0
    rng = np.random.default_rng(3)
    for r in rows:
        for i in range(2):
            vals = r.sample_params(rng)
            for rep in (push_system(r, vals, seed=i, tol=1e-9),
                        theorem1_check(r, vals, seed=i, tol=1e-9)):
                worst = max(worst, rep.max_ratio)
                if not rep.passed:
                    failures.append((r.id, rep.route))
    sweep = equivalence_sweep(count=8, seed=3)
    eq_worst = max(s["ratio_derived"] for s in sweep)
    off_unit = [s for s in sweep if s["a3"] != 1]
    printed_fail = sum(s["ratio_printed"] > 1e-3 for s in off_unit)
    ok = (t3, t4) == (8, 14) and not failures and eq_worst < 1e-10 and off_unit \
        and printed_fail == len(off_unit)
    verdict(capsys, 3, "transformation verification", ok,
            f"{t3} + {t4} rows ({len(rows)} branch entries), worst map ratio {worst:.1e}, "
            f"failures {failures}; equivalence maps worst {eq_worst:.1e} with G scaled by "
            f"a7/a3^2, the alternative a7/a3 fails on {printed_fail}/{len(off_unit)} maps with "
            f"a3 != 1")


def test_4_exact_solution_residuals(capsys):
    worst_res, worst_bc = 0.0, 0.0
    for n in (0, 1, 2):
        for m in (0.0, 0.5, 1.0):
            p = FIG1.with_(n=n, m=m)
            w = np.linspace(0, p.omega0, 200)
            r1, r2 = exact_residuals(w, p)
            worst_res = max(worst_res, np.max(np.abs(r1)), np.max(np.abs(r2)))
            bc = (abs(exact_phi(p.omega0, p)), abs(exact_psi(p.omega0, p)),
                  abs(exact_dphi(p.omega0, p) + p.amp * p.omega0 / 2))
            worst_bc = max(worst_bc, *bc)
    ok = worst_res < 1e-11 and worst_bc < 1e-12
    verdict(capsys, 4, "exact-solution residuals", ok,
            f"n in {{0,1,2}}, m in {{0,0.5,1}}, 200-point grids incl. the front: max residual "
            f"{worst_res:.1e}, boundary defect {worst_bc:.1e}")


def test_5_shooting_recovery(capsys):
    lines, ok = [], True
    for n in (0, 2):
        for m in (0.0, 1.0):
            p = FIG1.with_(n=n, m=m)
            f = (lambda x, p=p: cubic_f(x, p)) if (m == 0 and n == 0) else \
                (lambda x, p=p: f_of_phi(x, p))
            guess = (0.9 * float(exact_phi(0, p)), 0.9 * float(exact_psi(0, p)), 0.9)
            t0 = time.perf_counter()
            prof = shoot_reduced(p, f, lambda x, p=p: g_of_phi(x, p), guess)
            dt = time.perf_counter() - t0
            w = np.minimum(prof.omega, p.omega0)
            err = max(np.max(np.abs(prof.phi - exact_phi(w, p))),
                      np.max(np.abs(prof.psi - exact_psi(w, p))))
            dw = abs(prof.omega0 - 1.0)
            ok &= dw < 1e-6 and err < 1e-6 and dt < 5
            lines.append(f"n={n} m={m:g}: |dw0| {dw:.0e}, profile {err:.0e}, {dt:.1f} s")
    verdict(capsys, 5, "shooting recovery", ok, "; ".join(lines))


def test_6_pde_solver_convergence(capsys):
    lines, ok = [], True
    for n in (0, 2):
        t0 = time.perf_counter()
        lad = convergence_ladder(FIG1.with_(n=n), (100, 200, 400), t0=1.0, t_end=2.0)
        dt = time.perf_counter() - t0
        top = lad["rows"][-1]
        front = abs(top["err_front"])
        order = lad["observed_order"]
        ok &= front < 1e-3 and top["err_alpha_sup"] < 1e-3 and 1.8 <= order <= 2.2 and dt < 120
        lines.append(f"n={n}: |s(2)-sqrt2| {front:.1e}, alpha err {top['err_alpha_sup']:.1e} "
                     f"at N=400, order {order:.3f}, {dt:.0f} s")
    verdict(capsys, 6, "PDE solver convergence", ok, "; ".join(lines))


def _grid(path):
    rows = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return np.loadtxt(rows[1:], delimiter=",")


def test_7_figure_reproduction(capsys, tmp_path):
    assert main(["figures", "all", "--out", str(tmp_path)]) == 0
    problems = []
    for w, m in ((1, 1.0), (2, 0.5), (3, 0.0)):
        p = FIG1.with_(m=m)
        a = _grid(tmp_path / f"fig{w}_alpha.csv")
        c = _grid(tmp_path / f"fig{w}_c.csv")
        front = _grid(tmp_path / f"fig{w}_front.csv")
        peak = p.alpha_s + p.amp * p.omega0 ** 2 / 4
        for t in np.unique(a[:, 0]):
            at, ct = a[a[:, 0] == t], c[c[:, 0] == t]
            R = p.omega0 * np.sqrt(t)
            if not np.isclose(at[np.argmax(at[:, 2]), 1], 0) or not np.isclose(at[0, 2], peak):
                problems.append(f"fig{w} alpha peak t={t:g}")
            if not np.isclose(ct[np.argmin(ct[:, 2]), 1], 0):
                problems.append(f"fig{w} c minimum t={t:g}")
            beyond = ct[ct[:, 1] >= R]
            if len(beyond) and not np.allclose(beyond[:, 2], p.c_inf):
                problems.append(f"fig{w} c at front t={t:g}")
        if not np.allclose(front[:, 1], p.omega0 * np.sqrt(front[:, 0])):
            problems.append(f"fig{w} front")
        lo, hi = a[:, 2].min(), a[:, 2].max()
        if not (np.isclose(lo, p.alpha_s) and np.isclose(hi, peak)):
            problems.append(f"fig{w} alpha range")
    f5 = _grid(tmp_path / "fig5_f.csv")
    for m in (0.0, 0.5, 1.0):
        cur = f5[f5[:, 0] == m]
        if not (cur[0, 2] == 0 and np.all(np.diff(cur[:, 2]) > 0)):
            problems.append(f"fig5 m={m:g}")
    p3 = FIG1.with_(m=0.0)
    a1, a2 = p3.alpha_s * (1 - p3.omega0 ** 2), p3.alpha_s * (6 + p3.omega0 ** 2) / 4
    roots = cubic_f(np.array([a1, a2]) - p3.alpha_s, p3)
    if not (a1 == 0 and np.isclose(a2, 0.875) and np.allclose(roots, 0)):
        problems.append("cubic roots")
    verdict(capsys, 7, "figure reproduction", not problems,
            f"figs 1-3 alpha max at r=0, c min at r=0 and c_inf at the front, R = w0 sqrt(t); "
            f"fig 5 increasing from f(0)=0; alpha1={a1:g}, alpha2={a2:g}; problems {problems}")


def test_8_symmetry_flow_oracle(capsys):
    e = find_entry(1, 1)
    inst = {"D": parse("_s"), "f": parse("_s^2"), "g": parse("_s")}
    tmpl = e.system_template()
    sys = PESystem(*(replace_functions(x, inst) for x in (tmpl.D, tmpl.F, tmpl.G)))
    scaling = Generator.parse(e.generators[2].effective, label="scaling")
    rep = flow_check(sys, scaling, eps=(0.01, 0.005))
    verdict(capsys, 8, "symmetry-flow oracle", rep.passed,
            f"D=U, F=exp(V)U^2, G=exp(V)U along 2t d_t + x d_x - 2 d_V: residuals "
            f"{rep.residuals[0]:.2e}, {rep.residuals[1]:.2e} (floor {rep.baseline:.0e}), "
            f"exponent {rep.exponent:.3f}")

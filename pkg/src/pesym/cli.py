"""Command-line entry point: ``pesym <subcommand> [options]``.

Exit codes: 0 all checks pass, 1 verification failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

MODEL_KEYS = ("m", "alpha_s", "c_inf", "omega0", "q0", "n", "beta")
SOLVER_KEYS = ("N", "sigma", "t0", "t_end", "cadence", "sources", "S", "Q", "ladder")
REDUCE_KEYS = ("mode", "points", "guess", "f", "g")


class UsageError(Exception):
    """Bad flags, config or selection."""


# --- manifest and output -----------------------------------------------------

def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def _digest(paths) -> dict:
    out = {}
    for p in sorted(paths, key=str):
        out[Path(p).name] = hashlib.sha256(Path(p).read_bytes()).hexdigest()[:16]
    return out


def make_manifest(command: str, params: dict, seed=None, inputs=()) -> dict:
    return {"command": command, "params": params, "seed": seed, "version": __version__,
            "inputs": _digest(inputs), "timestamp": _timestamp()}


def manifest_lines(man: dict) -> list[str]:
    return [f"{k}: {json.dumps(v, sort_keys=True)}" for k, v in man.items()]


def write_json(path: Path, man: dict, body: dict) -> None:
    path.write_text(json.dumps({"manifest": man, **body}, indent=2, sort_keys=True,
                               default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


def write_csv(path: Path, man: dict, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in manifest_lines(man):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.15g}" if isinstance(v, float) else v for v in r])


# --- config ------------------------------------------------------------------

def read_config(path) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def _coerce(v):
    if not isinstance(v, str):
        return v
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def resolve(args, keys, defaults: dict) -> dict:
    """flags > config file > defaults."""
    conf = read_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(conf) - set(keys)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = dict(defaults)
    out.update({k: _coerce(v) for k, v in conf.items()})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _model(cfg: dict):
    from .simred import ModelParams
    try:
        return ModelParams(**{k: cfg[k] for k in MODEL_KEYS})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _model_defaults() -> dict:
    from .simred import FIG1
    return FIG1.as_dict()


def _add_model_flags(p):
    p.add_argument("--m", type=float)
    p.add_argument("--alpha-s", dest="alpha_s", type=float)
    p.add_argument("--c-inf", dest="c_inf", type=float)
    p.add_argument("--omega0", type=float)
    p.add_argument("--q0", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--config", help="key = value parameter file")


def _out_dir(args) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


# --- catalog -----------------------------------------------------------------

def cmd_catalog(args) -> int:
    from .equimap import load_reductions
    from .liealg import load_catalog
    for e in load_catalog():
        print(f"{e.id:7s} Table {e.table} case {e.case:2d}  D={e.D}  F={e.F}  G={e.G}  "
              f"[{len(e.generators)} generators]")
    if args.reductions:
        for r in load_reductions():
            print(f"{r.id:22s} -> {r.target_id}")
    return EXIT_OK


def _select_entries(args):
    from .liealg import find_entry, load_catalog
    if args.all:
        return load_catalog()
    if args.table is None or args.case is None:
        raise UsageError("give --table and --case, or --all")
    try:
        return [find_entry(args.table, args.case)]
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None


def cmd_verify_symmetries(args) -> int:
    from .liealg import catalog_dir, verify_catalog_entry
    entries = _select_entries(args)
    records, summary, ok = [], [], True
    for e in entries:
        rep = verify_catalog_entry(e, args.instantiations, args.seed, standins=args.standins,
                                   trials=args.trials, tol=args.tol)
        checks = [c for c in rep.checks if not args.negative or c.role == "negative"]
        records += [c.as_record() for c in checks]
        entry_ok = rep.negative_ok if args.negative else rep.ok
        ok &= entry_ok
        summary.append({"entry": e.id, "pass": entry_ok, "listed": rep.listed_ok,
                        "negative_fails": rep.negative_ok,
                        "errata": sorted({c.generator for c in rep.errata})})
        n_listed = sum(c.role == "listed" for c in rep.checks)
        print(f"{e.id:7s} {'PASS' if entry_ok else 'FAIL'}  listed {n_listed} checks, "
              f"negative control {'fails as expected' if rep.negative_ok else 'PASSES (bad)'}")
    params = {"instantiations": args.instantiations, "standins": args.standins,
              "trials": args.trials, "tol": args.tol, "negative_only": args.negative,
              "selection": [e.id for e in entries]}
    man = make_manifest("verify-symmetries", params, args.seed,
                        [e.path for e in entries if e.path] or list(catalog_dir().glob("*.yaml")))
    write_json(_out_dir(args) / "verify-symmetries.json", man,
               {"pass": ok, "entries": summary, "checks": records})
    return EXIT_OK if ok else EXIT_FAIL


def _norm_branch(s: str) -> str:
    return "".join(s.split())


def cmd_verify_transforms(args) -> int:
    from .equimap import equivalence_sweep, find_reductions, load_reductions, push_system, \
        theorem1_check
    if args.all:
        entries = load_reductions()
    elif args.table is not None and args.case is not None:
        try:
            entries = find_reductions(args.table, args.case)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
    else:
        raise UsageError("give --table and --case, or --all")
    if args.branch:
        entries = [e for e in entries if _norm_branch(e.branch) == _norm_branch(args.branch)]
        if not entries:
            raise UsageError(f"no branch {args.branch!r} for this row")
    rng = np.random.default_rng(args.seed)
    records, ok = [], True
    for e in entries:
        for i in range(args.instantiations):
            vals = e.sample_params(rng)
            s = args.seed + i
            for rep in (push_system(e, vals, seed=s, tol=args.tol),
                        theorem1_check(e, vals, seed=s, tol=args.tol)):
                records.append(rep.as_record())
                ok &= rep.passed
        passed = all(r["pass"] for r in records if r["entry"] == e.id)
        print(f"{e.id:22s} -> {e.target_id:6s} {'PASS' if passed else 'FAIL'}")
    sweep = equivalence_sweep(seed=args.seed)
    eq_ok = all(r["ratio_derived"] < 1e-10 for r in sweep)
    printed_fails = [r for r in sweep if r["a3"] != 1 and r["ratio_printed"] > 1e-3]
    ok &= eq_ok
    print(f"equivalence maps: G scaling a7/a3^2 {'PASS' if eq_ok else 'FAIL'}; "
          f"a7/a3 fails on {len(printed_fails)} of {sum(r['a3'] != 1 for r in sweep)} maps with a3 != 1")
    man = make_manifest("verify-transforms", {"instantiations": args.instantiations,
                                              "tol": args.tol, "branch": args.branch,
                                              "selection": sorted({e.id for e in entries})},
                        args.seed, [e.path for e in entries if e.path])
    write_json(_out_dir(args) / "verify-transforms.json", man,
               {"pass": ok, "reductions": records, "equivalence": sweep,
                "g_scaling": {"adopted": "a7/a3^2", "alternative": "a7/a3",
                              "alternative_fails_when_a3_ne_1": len(printed_fails) > 0}})
    return EXIT_OK if ok else EXIT_FAIL


# --- reduce ------------------------------------------------------------------

def cmd_reduce(args) -> int:
    from .simred import (ShootingError, exact_dphi, exact_phi, exact_profile, exact_psi,
                         exact_residuals, f_of_phi, g_of_phi, shoot_reduced)
    from .symexpr import evaluate, parse
    cfg = resolve(args, MODEL_KEYS + REDUCE_KEYS,
                  {**_model_defaults(), "mode": "exact", "points": 200, "guess": None,
                   "f": None, "g": None})
    p = _model(cfg)
    out = _out_dir(args)
    ok = True
    report: dict = {}
    if cfg["mode"] == "exact":
        if p.beta != 1:
            raise UsageError("exact profiles need beta = 1")
        prof = exact_profile(p, int(cfg["points"]))
        r1, r2 = exact_residuals(prof.omega, p)
        res = float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))
        bc = float(max(abs(exact_phi(p.omega0, p)), abs(exact_psi(p.omega0, p)),
                       abs(exact_dphi(p.omega0, p) + p.amp * p.omega0 / 2)))
        ok = res < 1e-11 and bc < 1e-12
        report = {"max_residual": res, "boundary_defect": bc}
        print(f"exact profile: max residual {res:.2e}, boundary defect {bc:.2e}")
    elif cfg["mode"] == "shoot":
        if cfg["f"]:
            fe = parse(str(cfg["f"]))
            f = lambda ph: evaluate(fe, {"phi": ph})  # noqa: E731
        else:
            f = lambda ph: f_of_phi(ph, p)  # noqa: E731
        if cfg["g"]:
            ge = parse(str(cfg["g"]))
            g = lambda ph: evaluate(ge, {"phi": ph})  # noqa: E731
        else:
            g = lambda ph: g_of_phi(ph, p)  # noqa: E731
        if cfg["guess"]:
            guess = [float(v) for v in str(cfg["guess"]).split(",")]
            if len(guess) != 3:
                raise UsageError("--guess takes phi0,psi0,omega0")
        elif p.beta == 1:
            guess = [0.9 * float(exact_phi(0.0, p)), 0.9 * float(exact_psi(0.0, p)),
                     0.9 * p.omega0]
        else:
            raise UsageError("give --guess when beta != 1")
        try:
            prof = shoot_reduced(p, f, g, guess, points=int(cfg["points"]))
        except ShootingError as exc:
            print(f"shooting failed: {exc}", file=sys.stderr)
            return EXIT_FAIL
        report = {"omega0": prof.omega0, "phi0": prof.phi0, "psi0": prof.psi0,
                  "iterations": prof.iterations, "defect": prof.defect, "history": prof.history}
        if p.beta == 1 and not (cfg["f"] or cfg["g"]):
            w = np.minimum(prof.omega, p.omega0)
            err = float(max(np.max(np.abs(prof.phi - exact_phi(w, p))),
                            np.max(np.abs(prof.psi - exact_psi(w, p)))))
            report.update(omega0_error=abs(prof.omega0 - p.omega0), profile_error=err)
            ok = report["omega0_error"] < 1e-6 and err < 1e-6
        print(f"shooting: omega0 = {prof.omega0:.12f} after {prof.iterations} Newton steps")
    else:
        raise UsageError("mode must be exact or shoot")
    man = make_manifest("reduce", cfg)
    prof.to_csv(out / f"profile_{cfg['mode']}.csv", manifest_lines(man))
    write_json(out / f"reduce_{cfg['mode']}.json", man, {"pass": ok, **report})
    return EXIT_OK if ok else EXIT_FAIL


# --- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .fbsolve import SolverConfig, SolverError, convergence_ladder, run
    cfg = resolve(args, MODEL_KEYS + SOLVER_KEYS,
                  {**_model_defaults(), "N": 200, "sigma": 0.15, "t0": 1.0, "t_end": 2.0,
                   "cadence": None, "sources": "exact", "S": None, "Q": None, "ladder": None})
    p = _model(cfg)
    out = _out_dir(args)
    man = make_manifest("simulate", cfg)
    kw = dict(sigma=float(cfg["sigma"]), t0=float(cfg["t0"]), t_end=float(cfg["t_end"]),
              sources=cfg["sources"], S_expr=cfg["S"], Q_expr=cfg["Q"])
    try:
        if cfg["ladder"]:
            Ns = tuple(int(v) for v in str(cfg["ladder"]).split(","))
            lad = convergence_ladder(p, Ns, **kw)
            write_json(out / "convergence.json", man, lad)
            print(f"observed order {lad['observed_order']:.3f} over N = {Ns}")
            return EXIT_OK if 1.8 <= lad["observed_order"] <= 2.2 else EXIT_FAIL
        outputs = ()
        if cfg["cadence"]:
            outputs = tuple(np.arange(kw["t0"], kw["t_end"], float(cfg["cadence"]))[1:])
        sc = SolverConfig(N=int(cfg["N"]), outputs=outputs, **kw)
        res = run(p, sc)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    except SolverError as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    res.to_csv(out / "snapshots.csv", manifest_lines(man))
    st = res.final
    body = {"t_final": st.t, "s_final": st.s, "steps": st.steps, "clipped": st.clipped}
    if res.report:
        body.update(res.report)
        body["observed_order"] = None
        print(f"t = {st.t:g}: s = {st.s:.8f}, err_alpha = {res.report['err_alpha_sup']:.3e}, "
              f"err_front = {res.report['err_front']:.3e}")
    else:
        print(f"t = {st.t:g}: s = {st.s:.8f}")
    write_json(out / "simulate.json", man, body)
    return EXIT_OK


# --- figures -----------------------------------------------------------------

def figure_data(which: int, nt: int = 56, nx: int = 81) -> dict:
    """Plot-ready arrays for one figure."""
    from .simred import FIG1, exact_fields, f_of_phi, sources_on_solution
    t = np.linspace(0.25, 3.0, nt)
    x = np.linspace(0.0, 2.0, nx)
    T, X = np.meshgrid(t, x, indexing="ij")
    if which in (1, 2, 3):
        p = FIG1.with_(m={1: 1.0, 2: 0.5, 3: 0.0}[which])
        a, c, R = exact_fields(T, X, p, extend=True)
        return {"kind": "surface", "params": p, "t": T, "x": X, "left": ("alpha", a),
                "right": ("c", c), "R": p.omega0 * np.sqrt(t), "tvec": t}
    if which == 4:
        p = FIG1.with_(m=0.0)
        inside = X < p.omega0 * np.sqrt(T)
        S = np.full(T.shape, np.nan)
        Q = np.full(T.shape, np.nan)
        Si, Qi = sources_on_solution(T[inside], X[inside], p)
        S[inside], Q[inside] = Si, Qi
        return {"kind": "surface", "params": p, "t": T, "x": X, "left": ("S", S),
                "right": ("Q", Q), "R": p.omega0 * np.sqrt(t), "tvec": t}
    if which == 5:
        curves = []
        for m in (0.0, 0.5, 1.0):
            p = FIG1.with_(m=m)
            phi = np.linspace(0.0, p.amp * p.omega0 ** 2 / 4, 101)
            curves.append((m, phi, f_of_phi(phi, p)))
        return {"kind": "curves", "params": FIG1, "curves": curves}
    raise UsageError(f"no figure {which}")


def _render(which: int, data: dict, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    if data["kind"] == "curves":
        fig, ax = plt.subplots(figsize=(5, 4))
        for (m, phi, f), col in zip(data["curves"], ("green", "red", "blue")):
            ax.plot(phi, f, color=col, label=f"m = {m:g}")
        ax.set_xlabel("phi")
        ax.set_ylabel("f(phi)")
        ax.legend()
    else:
        fig = plt.figure(figsize=(10, 4))
        for k, side in enumerate(("left", "right")):
            name, Z = data[side]
            ax = fig.add_subplot(1, 2, k + 1, projection="3d")
            ax.plot_surface(data["t"], data["x"], np.ma.masked_invalid(Z), cmap="viridis",
                            linewidth=0)
            ax.set_xlabel("t")
            ax.set_ylabel("x")
            ax.set_title(name)
    fig.suptitle(f"Figure {which}")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def cmd_figures(args) -> int:
    out = _out_dir(args)
    which = [1, 2, 3, 4, 5] if args.which == "all" else [int(args.which)]
    for w in which:
        data = figure_data(w)
        man = make_manifest("figures", {"figure": w, **data["params"].as_dict()})
        if data["kind"] == "curves":
            rows = [(m, float(ph), float(f)) for m, phi, fv in data["curves"]
                    for ph, f in zip(phi, fv)]
            write_csv(out / f"fig{w}_f.csv", man, ["m", "phi", "f"], rows)
        else:
            for side in ("left", "right"):
                name, Z = data[side]
                rows = [(float(a), float(b), float(z)) for a, b, z in
                        zip(data["t"].ravel(), data["x"].ravel(), Z.ravel())]
                write_csv(out / f"fig{w}_{name}.csv", man, ["t", "x", name], rows)
            write_csv(out / f"fig{w}_front.csv", man, ["t", "R"],
                      [(float(a), float(b)) for a, b in zip(data["tvec"], data["R"])])
        if not args.no_png:
            _render(w, data, out / f"fig{w}.png")
        print(f"figure {w} written to {out}")
    return EXIT_OK


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pesym", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"pesym {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalog", help="list catalog entries")
    c.add_argument("--reductions", action="store_true", help="also list reduction rows")
    c.set_defaults(func=cmd_catalog)

    v = sub.add_parser("verify-symmetries", help="check catalog generators")
    v.add_argument("--table", type=int)
    v.add_argument("--case", type=int)
    v.add_argument("--all", action="store_true")
    v.add_argument("--negative", action="store_true", help="report only the negative controls")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=12)
    v.add_argument("--standins", type=int, default=3)
    v.add_argument("--instantiations", type=int, default=2)
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--out", default=".")
    v.set_defaults(func=cmd_verify_symmetries)

    t = sub.add_parser("verify-transforms", help="check reduction maps and equivalence maps")
    t.add_argument("--table", type=int)
    t.add_argument("--case", type=int)
    t.add_argument("--branch")
    t.add_argument("--all", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--instantiations", type=int, default=2)
    t.add_argument("--tol", type=float, default=1e-9)
    t.add_argument("--out", default=".")
    t.set_defaults(func=cmd_verify_transforms)

    r = sub.add_parser("reduce", help="similarity profiles, exact or by shooting")
    _add_model_flags(r)
    r.add_argument("--mode", choices=("exact", "shoot"))
    r.add_argument("--points", type=int)
    r.add_argument("--guess", help="phi0,psi0,omega0")
    r.add_argument("--f", help="source f in phi (default: exact-compatible)")
    r.add_argument("--g", help="source g in phi (default: q0*phi)")
    r.add_argument("--out", default=".")
    r.set_defaults(func=cmd_reduce)

    s = sub.add_parser("simulate", help="front-fixing PDE solver")
    _add_model_flags(s)
    s.add_argument("--N", type=int)
    s.add_argument("--sigma", type=float)
    s.add_argument("--t0", type=float)
    s.add_argument("--t-end", dest="t_end", type=float)
    s.add_argument("--cadence", type=float, help="snapshot spacing in t")
    s.add_argument("--sources", choices=("exact", "zero", "expr"))
    s.add_argument("--S", help="S(alpha, c) when --sources expr")
    s.add_argument("--Q", help="Q(alpha, c) when --sources expr")
    s.add_argument("--ladder", help="comma-separated N values for a convergence study")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("figures", help="write figure CSVs and PNGs")
    f.add_argument("which", choices=("1", "2", "3", "4", "5", "all"))
    f.add_argument("--out", default=".")
    f.add_argument("--no-png", action="store_true")
    f.set_defaults(func=cmd_figures)
    return ap


def main(argv=None) -> int:
    from .symexpr import ParseError
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except (UsageError, ParseError) as exc:
        print(f"pesym: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if os.environ.get("PESYM_TIMING"):
        print(f"elapsed {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pesym.fbsolve import (
    FrontFixedState, SolverConfig, SolverError, advance, elliptic_solve, error_report,
    init_from_exact, run, step,
)
from pesym.simred import FIG1, exact_psi, sources_on_solution


def test_init_from_exact_values():
    st1 = init_from_exact(1.0, FIG1, SolverConfig(N=32))
    assert st1.s == 1.0 and st1.U[0] == pytest.approx(0.25) and st1.V[0] == pytest.approx(5 / 96)
    st4 = init_from_exact(4.0, FIG1, SolverConfig(N=32))
    assert st4.s == pytest.approx(2.0)
    assert st4.U[-1] == 0 and st4.V[-1] == 0
    with pytest.raises(ValueError):
        init_from_exact(0.0, FIG1, SolverConfig())


def test_config_validation():
    for bad in ({"N": 8}, {"sigma": 0.6}, {"sigma": 0}, {"t0": 2, "t_end": 1}, {"sources": "x"},
                {"sources": "expr", "S_expr": "0"}):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_homogeneous_elliptic_problem():
    cfg = SolverConfig(N=32, sources="zero")
    st0 = init_from_exact(1.0, FIG1, cfg)
    assert np.all(elliptic_solve(st0, FIG1, cfg) == 0)


@pytest.mark.parametrize("n", [0, 2])
def test_elliptic_recovers_exact_nutrient_at_second_order(n):
    p = FIG1.with_(n=n)
    errs = []
    for N in (32, 64, 128):
        cfg = SolverConfig(N=N)
        st0 = init_from_exact(1.0, p, cfg)
        V = elliptic_solve(st0, p, cfg)
        errs.append(np.max(np.abs(V - exact_psi(st0.y * p.omega0, p))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((rates > 1.9) & (rates < 2.1))


def test_equilibrium_is_preserved():
    N = 32
    cfg = SolverConfig(N=N, sources="zero")
    zero = FrontFixedState(1.0, 1.0, np.zeros(N + 1), np.zeros(N + 1))
    out = advance(zero, FIG1, cfg, 1.2)
    assert np.all(out.U == 0) and out.s == 1.0 and out.sdot == 0.0


@settings(max_examples=10, deadline=None)
@given(st.integers(16, 40), st.floats(0.5, 3.0), st.sampled_from([0.0, 0.5, 1.0]))
def test_flat_data_without_sources_is_time_invariant(N, s0, m):
    # U_N = 0 makes U = 0 the only flat state compatible with the front condition
    cfg = SolverConfig(N=N, sources="zero")
    out = advance(FrontFixedState(1.0, s0, np.zeros(N + 1), np.zeros(N + 1)),
                  FIG1.with_(m=m), cfg, 1.05)
    assert np.all(out.U == 0) and np.all(out.V == 0) and out.s == s0 and out.steps > 0


def test_front_grows_and_nutrient_increases_outward():
    res = run(FIG1, SolverConfig(N=48, t_end=1.5, outputs=(1.1, 1.2, 1.3, 1.4)))
    s = [snap.s for snap in res.snapshots]
    assert np.all(np.diff(s) > 0)
    for snap in res.snapshots[1:]:
        c = FIG1.c_inf - snap.V
        assert np.all(np.diff(c) >= -1e-14)
        assert snap.U.min() >= 0 and snap.U[-1] == 0 and snap.V[-1] == 0


def test_reported_front_speed_matches_profile_flux():
    res = run(FIG1.with_(m=0), SolverConfig(N=40, t_end=1.2))
    st = res.final
    dy = 1 / st.N
    uy = (3 * st.U[-1] - 4 * st.U[-2] + st.U[-3]) / (2 * dy)
    a = FIG1.alpha_s
    assert st.sdot == pytest.approx(-a ** (0 - 1) * uy / st.s, abs=1e-12)


def test_source_next_to_front_stays_bounded():
    limits = []
    for N in (32, 64, 128):
        st0 = init_from_exact(1.0, FIG1, SolverConfig(N=N))
        y = st0.y[-2]
        S, _ = sources_on_solution(1.0, y, FIG1)
        limits.append(float(S))
    assert np.ptp(limits) < 0.05 * max(limits) and np.all(np.isfinite(limits))


def test_short_run_converges_under_refinement():
    errs = [run(FIG1, SolverConfig(N=N, t_end=1.2)).report["err_alpha_sup"] for N in (32, 64)]
    assert errs[0] / errs[1] >= 3.4
    rep = run(FIG1, SolverConfig(N=64, t_end=1.2)).report
    assert set(rep) == {"N", "t_final", "err_alpha_sup", "err_c_sup", "err_front"}
    assert rep["t_final"] == 1.2


def test_expression_sources_match_builtin():
    p = FIG1
    a = run(p, SolverConfig(N=24, t_end=1.05, sources="zero")).final
    b = run(p, SolverConfig(N=24, t_end=1.05, sources="expr", S_expr="0", Q_expr="0*c")).final
    assert np.max(np.abs(a.U - b.U)) < 1e-15 and a.s == b.s
    # Q depending on c goes through the Picard loop
    c = run(p, SolverConfig(N=24, t_end=1.05, sources="expr", S_expr="0",
                            Q_expr="0.5*(alpha - 0.5) + 0.01*(c - 2)")).final
    assert np.all(np.isfinite(c.V)) and c.V[0] > 0


def test_strong_sink_aborts_on_negative_density():
    cfg = SolverConfig(N=24, t_end=1.5, sources="expr", S_expr="-50", Q_expr="0")
    with pytest.raises(SolverError, match="negative U"):
        run(FIG1, cfg)


def test_vanishing_nutrient_deficit_trips_guard():
    N = 24
    zero = FrontFixedState(1.0, 1.0, np.zeros(N + 1), np.zeros(N + 1))
    with pytest.raises(SolverError, match="V not positive"):
        advance(zero, FIG1, SolverConfig(N=N), 1.1)


def test_snapshot_csv_layout(tmp_path):
    res = run(FIG1, SolverConfig(N=16, t_end=1.1, outputs=(1.05,)))
    path = tmp_path / "snap.csv"
    res.to_csv(path, ["command: test"])
    rows = path.read_text().splitlines()
    assert rows[1] == "t,s,y,r,U,V,alpha,c"
    assert len(rows) == 2 + 3 * 17
    assert error_report(res.final, FIG1)["N"] == 16

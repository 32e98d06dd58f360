"""Front-fixing finite differences for the radial tumour free-boundary problem.

With y = r / s(t), s = R(t), the problem on 0 <= y <= 1 reads

    U_t = (1/s^2) y^-n (y^n D(U) U_y)_y + y (s'/s) U_y + S,
    V_yy + (n/y) V_y = -s^2 Q,
    s' = -alpha_*^(m-1) U_y(1) / s,

with U_y = V_y = 0 at y = 0 and U = V = 0 at y = 1, D(U) = (U + alpha_*)^m,
S = S(alpha, c), Q = Q(alpha, c), alpha = alpha_* + U, c = c_inf - V.
Time stepping is explicit Heun; the elliptic equation is re-solved at each
stage by a tridiagonal sweep.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .simred import ModelParams, exact_fields, exact_phi, exact_psi
from .symexpr import evaluate, parse

V_GUARD = 1e-12
NEG_ABORT = -1e-10

SOURCE_ZERO = 0
SOURCE_EXACT = 1


class SolverError(RuntimeError):
    """The scheme left its admissible region or the step size underflowed."""


@dataclass
class SolverConfig:
    N: int = 200
    sigma: float = 0.15
    t0: float = 1.0
    t_end: float = 2.0
    outputs: tuple = ()
    sources: str = "exact"          # exact | zero | expr
    S_expr: str | None = None       # in alpha, c (sources == "expr")
    Q_expr: str | None = None

    def __post_init__(self):
        if self.N < 16:
            raise ValueError("N must be at least 16")
        if not 0 < self.sigma <= 0.5:
            raise ValueError("sigma must lie in (0, 0.5]")
        if self.t0 <= 0 or self.t_end < self.t0:
            raise ValueError("need 0 < t0 <= t_end")
        if self.sources not in ("exact", "zero", "expr"):
            raise ValueError(f"unknown source kind {self.sources!r}")
        if self.sources == "expr" and not (self.S_expr and self.Q_expr):
            raise ValueError("expr sources need S_expr and Q_expr")


@dataclass
class FrontFixedState:
    t: float
    s: float
    U: np.ndarray
    V: np.ndarray
    sdot: float = 0.0
    steps: int = 0
    clipped: int = 0

    @property
    def N(self) -> int:
        return len(self.U) - 1

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    def copy(self) -> "FrontFixedState":
        return FrontFixedState(self.t, self.s, self.U.copy(), self.V.copy(), self.sdot, self.steps,
                               self.clipped)


def init_from_exact(t0: float, p: ModelParams, cfg: SolverConfig) -> FrontFixedState:
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    y = np.linspace(0.0, 1.0, cfg.N + 1)
    w = y * p.omega0
    U = np.asarray(exact_phi(w, p), dtype=float)
    V = t0 * np.asarray(exact_psi(w, p), dtype=float)
    U[-1] = V[-1] = 0.0
    return FrontFixedState(t0, p.omega0 * math.sqrt(t0), U, V)


# --- kernels -----------------------------------------------------------------

@numba.njit(cache=True)
def _thomas(lower, diag, upper, rhs):
    n = diag.size
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - lower[i] * c[i - 1]
        if den == 0.0:
            raise ZeroDivisionError("singular tridiagonal system")
        c[i] = upper[i] / den if i < n - 1 else 0.0
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / den
    x = np.empty(n)
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


@numba.njit(cache=True)
def _weights(i, dy, n):
    """Face areas over the cell volume (finite-volume radial operator), both times dy."""
    yp, ym = (i + 0.5) * dy, (i - 0.5) * dy
    vol = (yp ** (n + 1) - ym ** (n + 1)) / ((n + 1) * dy)
    return yp ** n / vol, ym ** n / vol


@numba.njit(cache=True)
def _elliptic(Q, s, n, dy):
    """Solve y^-n (y^n V_y)_y = -s^2 Q, V_y(0) = 0, V(1) = 0; returns V on all nodes."""
    N = Q.size - 1
    lower = np.zeros(N)
    diag = np.zeros(N)
    upper = np.zeros(N)
    rhs = np.empty(N)
    h2 = dy * dy
    # origin: (n+1) V_yy with mirror ghost
    diag[0] = -2.0 * (n + 1) / h2
    upper[0] = 2.0 * (n + 1) / h2
    rhs[0] = -s * s * Q[0]
    for i in range(1, N):
        wp, wm = _weights(i, dy, n)
        lower[i] = wm / h2
        diag[i] = -(wp + wm) / h2
        upper[i] = wp / h2
        rhs[i] = -s * s * Q[i]
    V = np.zeros(N + 1)
    V[:N] = _thomas(lower, diag, upper, rhs)
    return V


@numba.njit(cache=True)
def _front_speed(U, s, m, a, dy):
    N = U.size - 1
    uy = (3.0 * U[N] - 4.0 * U[N - 1] + U[N - 2]) / (2.0 * dy)
    return -a ** (m - 1.0) * uy / s


@numba.njit(cache=True)
def _parabolic_rhs(U, S, s, sdot, m, a, n, dy):
    N = U.size - 1
    h2 = dy * dy
    out = np.zeros(N + 1)
    D = np.empty(N + 1)
    for i in range(N + 1):
        D[i] = (U[i] + a) ** m
    inv = 1.0 / (s * s)
    vel = sdot / s
    out[0] = inv * (n + 1) * 2.0 * 0.5 * (D[0] + D[1]) * (U[1] - U[0]) / h2 + S[0]
    for i in range(1, N):
        y = i * dy
        wp, wm = _weights(i, dy, n)
        fp = wp * 0.5 * (D[i] + D[i + 1]) * (U[i + 1] - U[i])
        fm = wm * 0.5 * (D[i] + D[i - 1]) * (U[i] - U[i - 1])
        adv = y * vel
        if adv >= 0.0:
            if i < N - 1:
                uy = (-3.0 * U[i] + 4.0 * U[i + 1] - U[i + 2]) / (2.0 * dy)
            else:
                uy = (U[i + 1] - U[i - 1]) / (2.0 * dy)
        else:
            if i > 1:
                uy = (3.0 * U[i] - 4.0 * U[i - 1] + U[i - 2]) / (2.0 * dy)
            else:
                uy = (U[i + 1] - U[i - 1]) / (2.0 * dy)
        out[i] = inv * (fp - fm) / h2 + adv * uy + S[i]
    return out


@numba.njit(cache=True)
def _builtin_sources(U, V, kind, m, a, n, q0, w0):
    """Exact-compatible S = f(U)/V, Q = q0 U (kind 1) or zero sources (kind 0)."""
    N = U.size - 1
    S = np.zeros(N + 1)
    Q = np.zeros(N + 1)
    if kind == 0:
        return S, Q, 0
    A = a ** (1.0 - m)
    bad = 0
    for i in range(N + 1):
        Q[i] = q0 * U[i]
    for i in range(N):
        if V[i] <= V_GUARD:
            bad += 1
            continue
        u = U[i]
        br = ((m + (n + 1) / 2.0) * A * (u + a) ** m
              - m * a ** (2.0 - m) / 4.0 * (a ** (-m) * w0 * w0 + 4.0) * (u + a) ** (m - 1.0)
              - u + A / 4.0 * w0 * w0)
        f = q0 * a ** (m - 1.0) / (n + 3.0) * u * (u + A * w0 * w0 / (n + 1.0)) * br
        S[i] = f / V[i]
    return S, Q, bad


@numba.njit(cache=True)
def _stage(U, s, kind, m, a, n, q0, w0, dy):
    N = U.size - 1
    Q = np.zeros(N + 1)
    if kind == 1:
        for i in range(N + 1):
            Q[i] = q0 * U[i]
    V = _elliptic(Q, s, n, dy)
    S, Q2, bad = _builtin_sources(U, V, kind, m, a, n, q0, w0)
    sdot = _front_speed(U, s, m, a, dy)
    dU = _parabolic_rhs(U, S, s, sdot, m, a, n, dy)
    dU[N] = 0.0
    return dU, sdot, V, bad


@numba.njit(cache=True)
def _advance(U, s, t, t_end, sigma, kind, m, a, n, q0, w0):
    """Heun steps from t to t_end; status 0 ok, 1 dt underflow, 2 negative U, 3 V guard."""
    N = U.size - 1
    dy = 1.0 / N
    steps = 0
    clipped = 0
    V = np.zeros(N + 1)
    sdot = 0.0
    while t < t_end:
        k1, sd1, V, bad = _stage(U, s, kind, m, a, n, q0, w0, dy)
        if bad > 0:
            return U, V, s, t, sd1, steps, clipped, 3
        maxD = 0.0
        for i in range(N + 1):
            d = (U[i] + a) ** m
            if d > maxD:
                maxD = d
        dt = sigma * dy * dy * s * s / maxD
        if sd1 != 0.0:
            dt = min(dt, sigma * dy * s / abs(sd1))
        if t + dt > t_end:
            dt = t_end - t
        if dt < 1e-14 and t_end - t > 1e-14:
            return U, V, s, t, sd1, steps, clipped, 1
        U1 = U + dt * k1
        s1 = s + dt * sd1
        k2, sd2, V1, bad = _stage(U1, s1, kind, m, a, n, q0, w0, dy)
        if bad > 0:
            return U, V, s, t, sd1, steps, clipped, 3
        Unew = U + 0.5 * dt * (k1 + k2)
        s = s + 0.5 * dt * (sd1 + sd2)
        for i in range(N + 1):
            if Unew[i] < 0.0:
                if Unew[i] < NEG_ABORT:
                    return U, V, s, t, sd1, steps, clipped, 2
                Unew[i] = 0.0
                clipped += 1
        Unew[N] = 0.0
        U = Unew
        t = t + dt
        steps += 1
        if t_end - t < 1e-15:
            t = t_end
    _, sdot, V, bad = _stage(U, s, kind, m, a, n, q0, w0, dy)
    return U, V, s, t, sdot, steps, clipped, 0


# --- Python-level API --------------------------------------------------------

def elliptic_solve(state: FrontFixedState, p: ModelParams, cfg: SolverConfig,
                   tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Recompute V from the current U; Picard iteration when Q depends on c."""
    dy = 1.0 / state.N
    if cfg.sources == "zero":
        Q = np.zeros_like(state.U)
        return _elliptic(Q, state.s, p.n, dy)
    if cfg.sources == "exact":
        return _elliptic(p.q0 * state.U, state.s, p.n, dy)
    Qe = parse(cfg.Q_expr)
    V = state.V.copy()
    for _ in range(max_iter):
        Q = _eval_source(Qe, state.U, V, p)
        Vn = _elliptic(Q, state.s, p.n, dy)
        if "c" not in Qe.free_vars or np.max(np.abs(Vn - V)) < tol:
            return Vn
        V = Vn
    raise SolverError("Picard iteration for the elliptic equation did not converge")


def _eval_source(e, U, V, p: ModelParams) -> np.ndarray:
    env = {"alpha": p.alpha_s + U, "c": p.c_inf - V}
    return np.broadcast_to(np.asarray(evaluate(e, env), dtype=float), U.shape).copy()


_STATUS = {1: "time step underflow", 2: "negative U beyond tolerance",
           3: "V not positive at an interior node"}


def _kind(cfg: SolverConfig) -> int:
    return SOURCE_EXACT if cfg.sources == "exact" else SOURCE_ZERO


def advance(state: FrontFixedState, p: ModelParams, cfg: SolverConfig, t_end: float) -> FrontFixedState:
    """Evolve ``state`` to ``t_end``."""
    if cfg.sources == "expr":
        return _advance_expr(state, p, cfg, t_end)
    if cfg.sources == "exact" and p.beta != 1:
        raise ValueError("built-in exact sources need beta = 1")
    U, V, s, t, sdot, steps, clipped, status = _advance(
        state.U.copy(), state.s, state.t, t_end, cfg.sigma, _kind(cfg), p.m, p.alpha_s, p.n,
        p.q0, p.omega0)
    if status:
        raise SolverError(f"{_STATUS[status]} at t = {t:.6g} (s = {s:.6g})")
    return FrontFixedState(t, s, U, V, sdot, state.steps + steps, state.clipped + clipped)


def step(state: FrontFixedState, p: ModelParams, cfg: SolverConfig) -> FrontFixedState:
    """One Heun step of the admissible size."""
    dy = 1.0 / state.N
    maxD = float(np.max((state.U + p.alpha_s) ** p.m))
    dt = cfg.sigma * dy * dy * state.s ** 2 / maxD
    sd = float(_front_speed(state.U, state.s, p.m, p.alpha_s, dy))
    if sd:
        dt = min(dt, cfg.sigma * dy * state.s / abs(sd))
    out = advance(state, p, cfg, state.t + dt)
    return out


def _advance_expr(state, p, cfg, t_end):
    Se, Qe = parse(cfg.S_expr), parse(cfg.Q_expr)
    st = state.copy()
    N = st.N
    dy = 1.0 / N

    def stage(U, s, Vguess):
        tmp = FrontFixedState(st.t, s, U, Vguess)
        V = elliptic_solve(tmp, p, cfg)
        S = _eval_source(Se, U, V, p)
        S[N] = 0.0
        sd = float(_front_speed(U, s, p.m, p.alpha_s, dy))
        k = _parabolic_rhs(U, S, s, sd, p.m, p.alpha_s, p.n, dy)
        k[N] = 0.0
        return k, sd, V

    while st.t < t_end:
        k1, sd1, V = stage(st.U, st.s, st.V)
        maxD = float(np.max((st.U + p.alpha_s) ** p.m))
        dt = cfg.sigma * dy * dy * st.s ** 2 / maxD
        if sd1:
            dt = min(dt, cfg.sigma * dy * st.s / abs(sd1))
        dt = min(dt, t_end - st.t)
        if dt < 1e-14 and t_end - st.t > 1e-14:
            raise SolverError(f"time step underflow at t = {st.t:.6g}")
        k2, sd2, _ = stage(st.U + dt * k1, st.s + dt * sd1, V)
        U = st.U + 0.5 * dt * (k1 + k2)
        neg = U < 0
        if np.any(U < NEG_ABORT):
            raise SolverError(f"negative U beyond tolerance at t = {st.t:.6g}")
        st.clipped += int(neg.sum())
        U[neg] = 0.0
        U[N] = 0.0
        st = FrontFixedState(st.t + dt, st.s + 0.5 * dt * (sd1 + sd2), U, V, sd1, st.steps + 1,
                             st.clipped)
        if t_end - st.t < 1e-15:
            st.t = t_end
    _, st.sdot, st.V = stage(st.U, st.s, st.V)
    return st


@dataclass
class RunResult:
    config: SolverConfig
    params: ModelParams
    snapshots: list = field(default_factory=list)
    report: dict | None = None

    @property
    def final(self) -> FrontFixedState:
        return self.snapshots[-1]

    def to_csv(self, path, header_lines=()) -> None:
        p = self.params
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["t", "s", "y", "r", "U", "V", "alpha", "c"])
            for st in self.snapshots:
                for y, u, v in zip(st.y, st.U, st.V):
                    w.writerow([f"{x:.15g}" for x in (st.t, st.s, y, y * st.s, u, v,
                                                        p.alpha_s + u, p.c_inf - v)])


def error_report(state: FrontFixedState, p: ModelParams) -> dict:
    """Sup-norm errors against the closed-form solution at the state's time."""
    r = state.y * state.s
    alpha, c, R = exact_fields(state.t, r, p, extend=True)
    return {
        "N": state.N,
        "t_final": state.t,
        "err_alpha_sup": float(np.max(np.abs(p.alpha_s + state.U - alpha))),
        "err_c_sup": float(np.max(np.abs(p.c_inf - state.V - c))),
        "err_front": float(abs(state.s - R)),
    }


def run(p: ModelParams, cfg: SolverConfig, state: FrontFixedState | None = None) -> RunResult:
    """Evolve from exact data at cfg.t0 (or ``state``) to cfg.t_end with snapshots."""
    st = state or init_from_exact(cfg.t0, p, cfg)
    st.V = elliptic_solve(st, p, cfg)
    times = sorted({float(t) for t in cfg.outputs if st.t < t < cfg.t_end} | {cfg.t_end})
    res = RunResult(cfg, p, [st.copy()])
    for t in times:
        st = advance(st, p, cfg, t)
        res.snapshots.append(st.copy())
    if cfg.sources == "exact" and p.beta == 1:
        res.report = error_report(st, p)
    return res


def convergence_ladder(p: ModelParams, Ns=(100, 200, 400), **cfg_kw) -> dict:
    """Errors for each N and the least-squares observed order of err_alpha_sup."""
    rows = []
    for N in Ns:
        cfg = SolverConfig(N=N, **cfg_kw)
        rows.append(run(p, cfg).report)
    errs = np.array([r["err_alpha_sup"] for r in rows])
    slope = -np.polyfit(np.log(np.asarray(Ns, float)), np.log(errs), 1)[0]
    pair = [float(np.log(errs[i] / errs[i + 1]) / np.log(Ns[i + 1] / Ns[i]))
            for i in range(len(Ns) - 1)]
    for r in rows:
        r["observed_order"] = float(slope)
    return {"rows": rows, "observed_order": float(slope), "pairwise_orders": pair}

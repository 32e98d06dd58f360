"""Similarity reduction of the tumour-growth free-boundary problem.

With U = alpha - alpha_*, V = c_inf - c and the scaling ansatz
U = phi(w), V = t^(1/beta) psi(w), w = r / sqrt(t), the moving-boundary
problem in n + 1 radial dimensions reduces to

    (phi+a)^m phi'' + m (phi+a)^(m-1) phi'^2 + (n/w)(phi+a)^m phi' + (w/2) phi'
        + f(phi) psi^(-beta) = 0,
    psi'' + (n/w) psi' + g(phi) psi^(1-beta) = 0,

with phi' = psi' = 0 at w = 0 and phi = psi = 0, phi' = -a^(1-m) w0 / 2 at
the front w = w0 (a = alpha_*). For beta = 1 a closed-form solution exists
when g = q0 phi and f is the matching polynomial-like source below.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

START = 1e-6        # shooting starts here; the origin is a removable singularity
FRONT_GAP = 1e-5    # relative gap before the front, bridged by a Taylor step


@dataclass(frozen=True)
class ModelParams:
    m: float = 1.0
    alpha_s: float = 0.5
    c_inf: float = 2.0
    omega0: float = 1.0
    q0: float = 0.5
    n: int = 0
    beta: float = 1.0

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        if not 0 < self.alpha_s < 1:
            raise ValueError("alpha_s must lie in (0, 1)")
        if self.c_inf <= 0 or self.omega0 <= 0 or self.q0 <= 0:
            raise ValueError("c_inf, omega0 and q0 must be positive")
        if self.n not in (0, 1, 2):
            raise ValueError("n must be 0, 1 or 2")
        if self.beta == 0:
            raise ValueError("beta must be nonzero")

    @property
    def amp(self) -> float:
        """alpha_*^(1-m), the recurring amplitude."""
        return self.alpha_s ** (1.0 - self.m)

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)


FIG1 = ModelParams()


def _require_beta1(p: ModelParams) -> None:
    if p.beta != 1:
        raise ValueError("closed-form profiles need beta = 1")


def _check_omega(omega, p: ModelParams):
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0) or np.any(w > p.omega0 * (1 + 1e-12)):
        raise ValueError(f"omega must lie in [0, {p.omega0}]")
    return w


def exact_phi(omega, p: ModelParams):
    w = _check_omega(omega, p)
    return p.amp / 4 * (p.omega0 ** 2 - w ** 2)


def exact_dphi(omega, p: ModelParams):
    w = _check_omega(omega, p)
    return -p.amp / 2 * w


def exact_psi(omega, p: ModelParams):
    _require_beta1(p)
    w = _check_omega(omega, p)
    w0s, n = p.omega0 ** 2, p.n
    return p.amp * p.q0 / (16 * (n + 3)) * (w0s - w ** 2) * ((n + 5) / (n + 1) * w0s - w ** 2)


def exact_dpsi(omega, p: ModelParams):
    _require_beta1(p)
    w = _check_omega(omega, p)
    w0s, n = p.omega0 ** 2, p.n
    c = p.amp * p.q0 / (16 * (n + 3))
    return c * (-2 * ((n + 5) / (n + 1) + 1) * w0s * w + 4 * w ** 3)


def exact_d2psi(omega, p: ModelParams):
    _require_beta1(p)
    w = _check_omega(omega, p)
    w0s, n = p.omega0 ** 2, p.n
    c = p.amp * p.q0 / (16 * (n + 3))
    return c * (-2 * ((n + 5) / (n + 1) + 1) * w0s + 12 * w ** 2)


def g_of_phi(phi, p: ModelParams):
    return p.q0 * np.asarray(phi, dtype=float)


def f_of_phi(phi, p: ModelParams):
    """Source f(phi) for which the quadratic profiles solve the reduced system."""
    _require_beta1(p)
    ph = np.asarray(phi, dtype=float)
    if np.any(ph < 0):
        raise ValueError("phi must be nonnegative")
    a, m, n, w0s, A = p.alpha_s, p.m, p.n, p.omega0 ** 2, p.amp
    bracket = ((m + (n + 1) / 2) * A * (ph + a) ** m
               - m * a ** (2 - m) / 4 * (a ** (-m) * w0s + 4) * (ph + a) ** (m - 1)
               - ph + A / 4 * w0s)
    return p.q0 * a ** (m - 1) / (n + 3) * ph * (ph + A * w0s / (n + 1)) * bracket


def cubic_f(phi, p: ModelParams):
    """m = 0 source written through the roots alpha_1, alpha_2 (n = 0)."""
    a, w0s = p.alpha_s, p.omega0 ** 2
    alpha = a + np.asarray(phi, dtype=float)
    a1, a2 = a * (1 - w0s), a * (6 + w0s) / 4
    return p.q0 / (3 * a) * (alpha - a) * (alpha - a1) * (a2 - alpha)


def exact_fields(t, r, p: ModelParams, *, extend: bool = False):
    """Cell density alpha, nutrient c and front R at time t, radius r.

    Outside the front the solution is continued by its boundary values when
    ``extend`` is set; otherwise r beyond R is an error.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    R = p.omega0 * np.sqrt(t)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    inside = r <= R * (1 + 1e-12)
    if not extend and not np.all(inside):
        raise ValueError("r lies beyond the front R(t)")
    w = np.where(inside, r / np.sqrt(t), p.omega0)
    w = np.minimum(w, p.omega0)
    alpha = p.alpha_s + exact_phi(w, p)
    c = p.c_inf - t * exact_psi(w, p)
    return alpha, c, R


def sources_on_solution(t, r, p: ModelParams):
    """S = f(U)/V and Q = g(U) evaluated on the exact solution (inside the front)."""
    t = np.asarray(t, dtype=float)
    w = np.asarray(r, dtype=float) / np.sqrt(t)
    phi, psi = exact_phi(w, p), exact_psi(w, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        S = f_of_phi(phi, p) / (t * psi)
    return S, g_of_phi(phi, p)


def reduced_residuals(point, p: ModelParams, f: Callable, g: Callable):
    """Residuals of the reduced system at one profile point.

    ``point`` = (w, phi, dphi, d2phi, psi, dpsi, d2psi). At w = 0 the
    (n/w) u' terms take their limit n u''.
    """
    w, ph, dph, d2ph, ps, dps, d2ps = (np.asarray(v, dtype=float) for v in point)
    a, m, n, b = p.alpha_s, p.m, p.n, p.beta
    with np.errstate(divide="ignore", invalid="ignore"):
        rad1 = np.where(w == 0, n * d2ph, n / np.where(w == 0, 1, w) * dph)
        rad2 = np.where(w == 0, n * d2ps, n / np.where(w == 0, 1, w) * dps)
        r1 = ((ph + a) ** m * d2ph + m * (ph + a) ** (m - 1) * dph ** 2 + (ph + a) ** m * rad1
              + w / 2 * dph + f(ph) * ps ** (-b))
        r2 = d2ps + rad2 + g(ph) * ps ** (1 - b)
    return r1, r2


def _f_slope_at_zero(p: ModelParams) -> float:
    """f'(0); f(phi) = phi h(phi) and this is h(0)."""
    a, m, n, w0s, A = p.alpha_s, p.m, p.n, p.omega0 ** 2, p.amp
    bracket = ((m + (n + 1) / 2) * A * a ** m - m * a ** (2 - m) / 4 * (a ** (-m) * w0s + 4)
               * a ** (m - 1) + A / 4 * w0s)
    return p.q0 * a ** (m - 1) / (n + 3) * A * w0s / (n + 1) * bracket


def exact_residuals(omega, p: ModelParams):
    """reduced_residuals along the closed-form profiles.

    At the front f(phi)/psi is 0/0; it takes its limit f'(0) phi'(w0) / psi'(w0).
    """
    w = np.asarray(omega, dtype=float)
    d2phi = np.full_like(w, -p.amp / 2)
    point = (w, exact_phi(w, p), exact_dphi(w, p), d2phi, exact_psi(w, p), exact_dpsi(w, p),
             exact_d2psi(w, p))
    r1, r2 = reduced_residuals(point, p, lambda x: f_of_phi(x, p), lambda x: g_of_phi(x, p))
    front = point[4] == 0
    if np.any(front):
        w0 = p.omega0
        a, m, n = p.alpha_s, p.m, p.n
        dph = float(exact_dphi(w0, p))
        limit = _f_slope_at_zero(p) * dph / float(exact_dpsi(w0, p))
        r1 = np.where(front, a ** m * (-p.amp / 2) + m * a ** (m - 1) * dph ** 2
                      + n / w0 * a ** m * dph + w0 / 2 * dph + limit, r1)
    return r1, r2


# --- shooting ----------------------------------------------------------------

@dataclass
class SimilarityProfile:
    omega: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    dphi: np.ndarray
    dpsi: np.ndarray
    omega0: float
    phi0: float
    psi0: float
    iterations: int = 0
    defect: float = float("nan")
    history: list = field(default_factory=list)

    def to_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["omega", "phi", "psi", "dphi", "dpsi"])
            for row in zip(self.omega, self.phi, self.psi, self.dphi, self.dpsi):
                w.writerow([f"{v:.15g}" for v in row])


class ShootingError(RuntimeError):
    """Newton failed or the trajectory left the admissible region."""


def _second_derivs(w, y, p: ModelParams, f, g, origin=False):
    ph, dph, ps, dps = y
    a, m, n, b = p.alpha_s, p.m, p.n, p.beta
    fp = f(ph) * ps ** (-b)
    gp = g(ph) * ps ** (1 - b)
    if origin:
        d2ph = -fp / ((n + 1) * (ph + a) ** m)
        d2ps = -gp / (n + 1)
        return d2ph, d2ps
    d2ph = -(m * (ph + a) ** (m - 1) * dph ** 2 + n / w * (ph + a) ** m * dph + w / 2 * dph + fp) \
        / (ph + a) ** m
    d2ps = -(n / w * dps + gp)
    return d2ph, d2ps


def _integrate(z, p: ModelParams, f, g, rtol: float, dense: bool = False):
    phi0, psi0, w0 = z
    if psi0 <= 0 or w0 <= 0 or phi0 + p.alpha_s <= 0:
        raise ShootingError("inadmissible initial data")
    d2ph0, d2ps0 = _second_derivs(0.0, (phi0, 0.0, psi0, 0.0), p, f, g, origin=True)
    e = START * w0
    y0 = [phi0 + d2ph0 * e * e / 2, d2ph0 * e, psi0 + d2ps0 * e * e / 2, d2ps0 * e]
    end = w0 * (1 - FRONT_GAP)

    def rhs(w, y):
        d2ph, d2ps = _second_derivs(w, y, p, f, g)
        return [y[1], d2ph, y[3], d2ps]

    def hit(w, y):
        return y[2]
    hit.terminal = True
    hit.direction = -1

    try:
        with np.errstate(all="ignore"):
            sol = solve_ivp(rhs, (e, end), y0, method="DOP853", rtol=rtol, atol=rtol * 1e-2,
                            events=hit, dense_output=dense)
    except ValueError as exc:   # sources undefined along the trial trajectory
        raise ShootingError(f"source evaluation failed: {exc}") from None
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise ShootingError("trajectory hit psi = 0 before the front" if sol.status == 1
                            else f"integration failed: {sol.message}")
    return sol, end


def _terminal(sol, end, z, p, f, g):
    """Taylor bridge from w0 (1 - gap) to w0; third derivative by differencing."""
    w0 = z[2]
    h = w0 - end
    y1 = sol.y[:, -1]
    y2 = sol.sol(end - h) if sol.sol is not None else None
    d2ph1, d2ps1 = _second_derivs(end, y1, p, f, g)
    if y2 is not None:
        d2ph2, d2ps2 = _second_derivs(end - h, y2, p, f, g)
        d3ph, d3ps = (d2ph1 - d2ph2) / h, (d2ps1 - d2ps2) / h
    else:
        d3ph = d3ps = 0.0
    ph = y1[0] + y1[1] * h + d2ph1 * h * h / 2 + d3ph * h ** 3 / 6
    dph = y1[1] + d2ph1 * h + d3ph * h * h / 2
    ps = y1[2] + y1[3] * h + d2ps1 * h * h / 2 + d3ps * h ** 3 / 6
    dps = y1[3] + d2ps1 * h + d3ps * h * h / 2
    return ph, dph, ps, dps


def _defect(z, p, f, g, rtol):
    sol, end = _integrate(z, p, f, g, rtol, dense=True)
    ph, dph, ps, _ = _terminal(sol, end, z, p, f, g)
    return np.array([ph, ps, dph + p.amp * z[2] / 2])


def shoot_reduced(p: ModelParams, f: Callable, g: Callable, guess, *, tol: float = 1e-10,
                  max_iter: int = 50, rtol: float = 1e-12, points: int = 201) -> SimilarityProfile:
    """Newton shooting on (phi(0), psi(0), w0) for the reduced free-boundary problem.

    Terminal conditions: phi(w0) = psi(w0) = 0, phi'(w0) = -a^(1-m) w0 / 2.
    Trial steps that drive the trajectory out of the admissible region are
    halved. Guesses within about 10% of the solution converge reliably; from
    20% off the damped iteration may stall.
    """
    z = np.asarray(guess, dtype=float)
    try:
        d = _defect(z, p, f, g, rtol)
    except ShootingError as exc:
        raise ShootingError(f"initial guess inadmissible: {exc}") from None
    history = [float(np.max(np.abs(d)))]
    it = 0
    while history[-1] > tol:
        if it >= max_iter:
            raise ShootingError(f"Newton did not converge in {max_iter} iterations "
                                f"(defect {history[-1]:.3e})")
        it += 1
        J = np.empty((3, 3))
        for j in range(3):
            h = 1e-7 * max(1.0, abs(z[j]))
            zp = z.copy()
            # one-sided step towards the interior keeps psi(0) and w0 admissible
            zp[j] -= h if j == 2 else -h
            try:
                dp = _defect(zp, p, f, g, rtol)
            except ShootingError:
                zp[j] = 2 * z[j] - zp[j]
                dp = _defect(zp, p, f, g, rtol)
            J[:, j] = (dp - d) / (zp[j] - z[j])
        step = np.linalg.solve(J, -d)
        lam = 1.0
        while True:
            trial = z + lam * step
            try:
                dt = _defect(trial, p, f, g, rtol)
                if np.max(np.abs(dt)) < (1 - 1e-4 * lam) * history[-1] or lam < 1e-3:
                    break
            except ShootingError:
                pass
            lam /= 2
            if lam < 1e-6:
                raise ShootingError("line search failed")
        z, d = trial, dt
        history.append(float(np.max(np.abs(d))))
    sol, end = _integrate(z, p, f, g, rtol, dense=True)
    w = np.linspace(START * z[2], end, points)
    y = sol.sol(w)
    ph, dph, ps, dps = _terminal(sol, end, z, p, f, g)
    omega = np.concatenate([[0.0], w[1:], [z[2]]])
    phi = np.concatenate([[z[0]], y[0, 1:], [ph]])
    psi = np.concatenate([[z[1]], y[2, 1:], [ps]])
    dphi = np.concatenate([[0.0], y[1, 1:], [dph]])
    dpsi = np.concatenate([[0.0], y[3, 1:], [dps]])
    return SimilarityProfile(omega, phi, psi, dphi, dpsi, float(z[2]), float(z[0]), float(z[1]),
                             it, history[-1], history)


def exact_profile(p: ModelParams, points: int = 201) -> SimilarityProfile:
    w = np.linspace(0.0, p.omega0, points)
    return SimilarityProfile(w, exact_phi(w, p), exact_psi(w, p), exact_dphi(w, p),
                             exact_dpsi(w, p), p.omega0, float(exact_phi(0.0, p)),
                             float(exact_psi(0.0, p)), 0, 0.0)

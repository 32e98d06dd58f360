"""Flow oracle: transport a numerical solution along a symmetry generator.

The test solution is a travelling wave U = u(x - c t), V = v(x - c t) of

    U_t = (D(U) U_x)_x + F(U, V),   0 = V_xx + G(U, V),

obtained by integrating the wave ODE with DOP853. The transported field is
the first-order Lie-series image U + eps*Q1, V + eps*Q2, where
Q = eta - xi0*(.)_t - xi1*(.)_x is the characteristic of the generator. On
a genuine symmetry Q solves the linearized system, so the residual of the
transported field is O(eps^2); on a non-symmetry it is O(eps).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ..symexpr import evaluate, pdiff
from .core import Generator, PESystem


@dataclass
class WaveSolution:
    sys: PESystem
    speed: float
    sol: object

    def fields(self, t, x):
        """U, V, U_t, V_t, U_x, V_x on the given points."""
        xi = np.asarray(x) - self.speed * np.asarray(t)
        u, up, v, vp = (c.reshape(xi.shape) for c in self.sol.sol(xi.ravel()))
        c = self.speed
        return u, v, -c * up, -c * vp, up, vp


def travelling_wave(sys: PESystem, speed: float = 0.5, state0=(3.0, 0.0, -2.0, 0.0),
                    span=(-0.5, 2.0)) -> WaveSolution:
    """Integrate -c u' = (D(u) u')' + F(u, v), v'' = -G(u, v) on ``span``."""
    D, Dp = sys.D, pdiff(sys.D, "U")

    def rhs(_, y):
        u, up, v, vp = y
        env = {"U": u, "V": v}
        d = float(evaluate(D, env))
        dp = float(evaluate(Dp, env))
        f = float(evaluate(sys.F, env))
        g = float(evaluate(sys.G, env))
        upp = (-speed * up - dp * up * up - f) / d
        return [up, upp, vp, -g]

    out = []
    for end in span:
        out.append(solve_ivp(rhs, (0.0, end), state0, method="DOP853", rtol=1e-13,
                             atol=1e-14, dense_output=True))
        if out[-1].status != 0:
            raise RuntimeError(f"wave integration failed: {out[-1].message}")
    back, fwd = out

    class _Joined:
        @staticmethod
        def sol(xi):
            return np.where(xi < 0, back.sol(xi), fwd.sol(xi))

    return WaveSolution(sys, speed, _Joined)


def _fd_derivatives(field, h):
    """Fourth-order central differences on a 2-D (t, x) grid, interior only."""
    f = field
    ft = (-f[4:, 2:-2] + 8 * f[3:-1, 2:-2] - 8 * f[1:-3, 2:-2] + f[:-4, 2:-2]) / (12 * h)
    fx = (-f[2:-2, 4:] + 8 * f[2:-2, 3:-1] - 8 * f[2:-2, 1:-3] + f[2:-2, :-4]) / (12 * h)
    fxx = (-f[2:-2, 4:] + 16 * f[2:-2, 3:-1] - 30 * f[2:-2, 2:-2] + 16 * f[2:-2, 1:-3]
           - f[2:-2, :-4]) / (12 * h * h)
    return f[2:-2, 2:-2], ft, fx, fxx


def transported_residual(wave: WaveSolution, g: Generator, eps: float, *,
                         t_range=(0.2, 0.6), x_range=(0.6, 1.4), h: float = 0.01) -> float:
    """Max PDE residual of the first-order transported field on a grid."""
    t = np.arange(t_range[0] - 2 * h, t_range[1] + 2.5 * h, h)
    x = np.arange(x_range[0] - 2 * h, x_range[1] + 2.5 * h, h)
    T, X = np.meshgrid(t, x, indexing="ij")
    U, V, Ut, Vt, Ux, Vx = wave.fields(T, X)
    env = {"t": T, "x": X, "U": U, "V": V}

    def comp(e):
        return np.broadcast_to(np.asarray(evaluate(e, env), dtype=float), T.shape)

    xi0, xi1, eta1, eta2 = (comp(c) for c in g.components)
    Q1 = eta1 - xi0 * Ut - xi1 * Ux
    Q2 = eta2 - xi0 * Vt - xi1 * Vx
    u, ut, ux, uxx = _fd_derivatives(U + eps * Q1, h)
    v, _, vx, vxx = _fd_derivatives(V + eps * Q2, h)
    e2 = {"U": u, "V": v}
    D = np.asarray(evaluate(wave.sys.D, e2), dtype=float)
    Dp = np.asarray(evaluate(pdiff(wave.sys.D, "U"), e2), dtype=float)
    r1 = ut - Dp * ux * ux - D * uxx - evaluate(wave.sys.F, e2)
    r2 = vxx + evaluate(wave.sys.G, e2)
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


@dataclass
class FlowReport:
    eps: tuple
    residuals: tuple
    baseline: float
    exponent: float

    @property
    def passed(self) -> bool:
        return self.exponent >= 1.9


def flow_check(sys: PESystem, g: Generator, eps=(0.01, 0.005), **kw) -> FlowReport:
    """Residual exponent of the transported field between two eps values.

    ``baseline`` is the eps = 0 residual, i.e. the discretization floor.
    """
    wave = travelling_wave(sys)
    base = transported_residual(wave, g, 0.0, **kw)
    res = tuple(transported_residual(wave, g, e, **kw) for e in eps)
    expo = float(np.log(res[0] / res[1]) / np.log(eps[0] / eps[1]))
    return FlowReport(tuple(eps), res, base, expo)

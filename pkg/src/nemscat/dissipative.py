"""Damped branch amplitudes and the decoherence function f(t).

With zero-temperature damping each qubit branch keeps the modes in coherent
states whose amplitudes obey a linear ODE; the off-diagonal qubit block picks
up a scalar factor f(t) with d(log f)/dt = G(t). The closed form sums the
eigenmode exponentials of the minus-branch generator; the quadrature form
integrates the amplitude ODEs and G numerically.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .coherent import Branch, InitialAmplitudes, coherent_overlap
from .errors import DomainError, QuadratureError
from .params import EffectiveModel

DEGENERATE_W = 1e-14
QUAD_RTOL = 1e-10
QUAD_ATOL = 1e-12


class DegenerateGeneratorWarning(RuntimeWarning):
    """|w| vanished; the closed form was replaced by a matrix exponential."""


@dataclass(frozen=True)
class DampingParams:
    gamma_a: float = 0.0
    gamma_b: float = 0.0
    gamma_qubit: float = 0.0

    def __post_init__(self):
        for name in ("gamma_a", "gamma_b", "gamma_qubit"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be finite and >= 0, got {v!r}")

    @property
    def gamma_plus(self) -> float:
        return 0.25 * (self.gamma_a + self.gamma_b)

    def w(self, model: EffectiveModel) -> complex:
        """Principal root of 4 kappa^2 - (gamma_a - gamma_b + 2i Delta)^2 / 4."""
        s = self.gamma_a - self.gamma_b + 2j * model.Delta
        return cmath.sqrt(4 * model.kappa**2 - s * s / 4)


@dataclass(frozen=True)
class ModeCoefficients:
    U: complex
    V: complex
    X: complex
    Y: complex
    w: complex


@dataclass(frozen=True)
class DecoherenceRecord:
    t: np.ndarray
    f: np.ndarray
    log_f: np.ndarray
    f_short_time: np.ndarray | None = None


def mode_coefficients(
    init: InitialAmplitudes, model: EffectiveModel, damping: DampingParams, w: complex | None = None
) -> ModeCoefficients:
    """Eigenmode weights of the minus-branch solution; ``w`` may pick the other root."""
    if w is None:
        w = damping.w(model)
    if abs(w) < DEGENERATE_W:
        raise DomainError("w vanishes: generator is defective, no eigenmode decomposition")
    a0, b0 = init.alpha0, init.beta0
    D, k = model.Delta, model.kappa
    dg = 0.25j * (damping.gamma_b - damping.gamma_a)
    U = a0 / w * ((w + D) / 2 + dg) - k * b0 / w
    V = a0 / w * ((w - D) / 2 - dg) + k * b0 / w
    X = b0 / w * ((w - D) / 2 - dg) - k * a0 / w
    Y = b0 / w * ((w + D) / 2 + dg) + k * a0 / w
    return ModeCoefficients(U, V, X, Y, w)


def _rates(model: EffectiveModel, damping: DampingParams, w: complex):
    """Decay constants c such that the eigenmodes go as exp(-c t)."""
    gp, om = damping.gamma_plus, model.omega_bar
    return gp - 1j * (om - w / 2), gp - 1j * (om + w / 2)


def _generator(model: EffectiveModel, damping: DampingParams, branch: Branch) -> np.ndarray:
    sign = 1.0 if branch == "plus" else -1.0
    M = np.array(model.generator, dtype=complex)
    return -1j * sign * M - 0.5 * np.diag([damping.gamma_a, damping.gamma_b])


def damped_ode_rhs(alpha, beta, branch: Branch, model: EffectiveModel, damping: DampingParams):
    sign = 1.0 if branch == "plus" else -1.0
    dalpha = -1j * sign * (model.chi * alpha + model.kappa * beta) - 0.5 * damping.gamma_a * alpha
    dbeta = -1j * sign * (model.kappa * alpha + model.Omega * beta) - 0.5 * damping.gamma_b * beta
    return dalpha, dbeta


def _minus_closed(init, model, damping, t):
    w = damping.w(model)
    if abs(w) < DEGENERATE_W:
        warnings.warn(
            "w ~ 0: defective generator, using matrix exponential", DegenerateGeneratorWarning, stacklevel=3
        )
        A = _generator(model, damping, "minus")
        x0 = np.array([init.alpha0, init.beta0])
        out = np.array([expm(A * ti) @ x0 for ti in np.atleast_1d(t).ravel()])
        shape = np.shape(t)
        return out[:, 0].reshape(shape), out[:, 1].reshape(shape)
    c = mode_coefficients(init, model, damping, w)
    c1, c2 = _rates(model, damping, w)
    e1 = np.exp(-c1 * t)
    e2 = np.exp(-c2 * t)
    return c.U * e1 + c.V * e2, c.X * e1 + c.Y * e2


def _conj_init(init: InitialAmplitudes) -> InitialAmplitudes:
    return InitialAmplitudes(init.alpha0.conjugate(), init.beta0.conjugate())


def damped_amplitudes_closed(
    init: InitialAmplitudes, model: EffectiveModel, damping: DampingParams, t, branch: Branch = "minus"
):
    """Closed-form damped amplitudes on either branch.

    The plus-branch ODE is the complex conjugate of the minus-branch ODE, so
    the plus solution is conj(minus solution started from conj(alpha0, beta0)).
    """
    t = np.asarray(t, dtype=float)
    if branch == "minus":
        return _minus_closed(init, model, damping, t)
    if branch == "plus":
        a, b = _minus_closed(_conj_init(init), model, damping, t)
        return np.conj(a), np.conj(b)
    raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")


def integrate_amplitudes(
    init: InitialAmplitudes,
    model: EffectiveModel,
    damping: DampingParams,
    t,
    branch: Branch = "minus",
    rtol: float = 1e-12,
    atol: float = 1e-14,
):
    """Adaptive (DOP853) integration of the damped amplitude ODEs on grid ``t``."""
    shape = np.shape(t)
    t = np.atleast_1d(np.asarray(t, dtype=float))

    def rhs(_t, y):
        da, db = damped_ode_rhs(y[0], y[1], branch, model, damping)
        return np.array([da, db])

    y0 = np.array([init.alpha0, init.beta0], dtype=complex)
    if t[-1] == 0.0:
        return np.full(shape, y0[0]), np.full(shape, y0[1])
    sol = solve_ivp(rhs, (0.0, t[-1]), y0, method="DOP853", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise QuadratureError(f"amplitude integration failed: {sol.message}")
    return sol.y[0].reshape(shape), sol.y[1].reshape(shape)


def energy_decay_check(t, alpha, beta, damping: DampingParams) -> float:
    """Max residual of d/dt(|a|^2+|b|^2) = -(gamma_a |a|^2 + gamma_b |b|^2) on a uniform grid."""
    t = np.asarray(t, dtype=float)
    if t.size < 3:
        raise DomainError("energy check needs at least 3 grid points")
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise DomainError("energy check needs a uniform grid")
    na = np.abs(alpha) ** 2
    nb = np.abs(beta) ** 2
    rate = np.gradient(na + nb, steps[0], edge_order=2)
    return float(np.max(np.abs(rate + damping.gamma_a * na + damping.gamma_b * nb)))


def g_from_amplitudes(am, bm, ap, bp, damping: DampingParams):
    """Rate G = d(log f)/dt from both branches' amplitudes.

    Uses the symmetric split of the norm terms, which equals
    gamma_a (am conj(ap) - |am|^2) + gamma_b (bm conj(bp) - |bm|^2)
    whenever |ap| = |am| and |bp| = |bm| (real initial amplitudes).
    """
    ga, gb = damping.gamma_a, damping.gamma_b
    return ga * (am * np.conj(ap) - 0.5 * (np.abs(am) ** 2 + np.abs(ap) ** 2)) + gb * (
        bm * np.conj(bp) - 0.5 * (np.abs(bm) ** 2 + np.abs(bp) ** 2)
    ) - damping.gamma_qubit


def g_minus_only(am, bm, d_norm_dt, damping: DampingParams):
    """G written with the minus branch alone; valid for real initial amplitudes."""
    return damping.gamma_a * am**2 + damping.gamma_b * bm**2 + d_norm_dt - damping.gamma_qubit


def decoherence_G(t, init: InitialAmplitudes, model: EffectiveModel, damping: DampingParams):
    am, bm = damped_amplitudes_closed(init, model, damping, t, "minus")
    ap, bp = damped_amplitudes_closed(init, model, damping, t, "plus")
    return g_from_amplitudes(am, bm, ap, bp, damping)


def _phi(c: complex, t: np.ndarray) -> np.ndarray:
    """Integral of exp(-2 c s) ds from 0 to t, stable for small |c t|."""
    z = 2 * c
    zt = z * t
    small = np.abs(zt) < 1e-4
    series = t * (1 - zt / 2 + zt**2 / 6 - zt**3 / 24)
    if np.all(small):
        return series.astype(complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        exact = -np.expm1(-zt) / z
    return np.where(small, series, exact)


def log_f_closed(
    init: InitialAmplitudes, model: EffectiveModel, damping: DampingParams, t, w: complex | None = None
):
    """Closed-form log f(t) from the eigenmode coefficients.

    ``w`` selects the square-root branch; the result does not depend on it.
    """
    t = np.asarray(t, dtype=float)
    if w is None:
        w = damping.w(model)
    cm = mode_coefficients(init, model, damping, w)
    cp = mode_coefficients(_conj_init(init), model, damping, w)  # conj of plus branch
    c1, c2 = _rates(model, damping, w)
    x_p = _phi(c1, t)
    x_m = _phi(c2, t)
    y = _phi(damping.gamma_plus - 1j * model.omega_bar, t)
    int_a = cm.U * cp.U * x_p + cm.V * cp.V * x_m + (cm.U * cp.V + cm.V * cp.U) * y
    int_b = cm.X * cp.X * x_p + cm.Y * cp.Y * x_m + (cm.X * cp.Y + cm.Y * cp.X) * y

    am, bm = damped_amplitudes_closed(init, model, damping, t, "minus")
    ap, bp = damped_amplitudes_closed(init, model, damping, t, "plus")
    norms = 0.5 * (np.abs(am) ** 2 + np.abs(bm) ** 2 + np.abs(ap) ** 2 + np.abs(bp) ** 2)
    log_f = damping.gamma_a * int_a + damping.gamma_b * int_b + norms - init.energy - damping.gamma_qubit * t
    # f(0) = 1 by construction; drop the roundoff of the norm difference there
    return np.where(t == 0.0, 0.0, log_f)


def log_f_quadrature(
    init: InitialAmplitudes,
    model: EffectiveModel,
    damping: DampingParams,
    t,
    rtol: float = QUAD_RTOL,
    atol: float = QUAD_ATOL,
):
    """Integrate both branches' amplitude ODEs together with d(log f)/dt = G."""
    shape = np.shape(t)
    t = np.atleast_1d(np.asarray(t, dtype=float))

    def rhs(_t, y):
        ap, bp, am, bm = y[0], y[1], y[2], y[3]
        dap, dbp = damped_ode_rhs(ap, bp, "plus", model, damping)
        dam, dbm = damped_ode_rhs(am, bm, "minus", model, damping)
        g = g_from_amplitudes(am, bm, ap, bp, damping)
        return np.array([dap, dbp, dam, dbm, g])

    a0, b0 = init.alpha0, init.beta0
    y0 = np.array([a0, b0, a0, b0, 0.0], dtype=complex)
    if t[-1] == 0.0:
        return np.zeros(shape, dtype=complex)
    sol = solve_ivp(rhs, (0.0, t[-1]), y0, method="DOP853", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise QuadratureError(
            f"decoherence quadrature failed at t={sol.t[-1]:.6g} of {t[-1]:.6g}: {sol.message}"
        )
    return sol.y[4].reshape(shape)


def decoherence_f(
    t,
    init: InitialAmplitudes,
    model: EffectiveModel,
    damping: DampingParams,
    method: str = "closed",
) -> DecoherenceRecord:
    t = np.asarray(t, dtype=float)
    if method == "closed":
        if abs(damping.w(model)) < DEGENERATE_W:
            warnings.warn("w ~ 0: using quadrature for f(t)", DegenerateGeneratorWarning, stacklevel=2)
            log_f = log_f_quadrature(init, model, damping, t)
        else:
            log_f = log_f_closed(init, model, damping, t)
    elif method == "quadrature":
        log_f = log_f_quadrature(init, model, damping, t)
    else:
        raise ValueError(f"method must be 'closed' or 'quadrature', got {method!r}")
    return DecoherenceRecord(t=t, f=np.exp(log_f), log_f=log_f)


def symmetric_damped_amplitudes(B: float, kappa: float, gamma: float, t):
    """Minus-branch amplitudes for chi = Omega = kappa, gamma_a = gamma_b = gamma, alpha0 = 0, beta0 = B.

    The amplitudes decay at gamma/2, as the amplitude ODE prescribes.
    """
    t = np.asarray(t, dtype=float)
    env = B * np.exp(-(0.5 * gamma - 1j * kappa) * t)
    return 1j * env * np.sin(kappa * t), env * np.cos(kappa * t)


def symmetric_log_f(B: float, kappa: float, gamma: float, t):
    t = np.asarray(t, dtype=float)
    z = gamma - 4j * kappa
    return -0.5 * B**2 * (-np.expm1(-gamma * t)) + 0.5 * gamma * B**2 * (-np.expm1(-z * t)) / z


def short_time_f(t, B: float, kappa: float, gamma: float):
    """Leading short-time behaviour of f in the symmetric case (gamma t << 1)."""
    t = np.asarray(t, dtype=float)
    return np.exp(-(4 * B**2 / 3) * gamma * kappa**2 * t**3 + 1j * B**2 * kappa * gamma * t**2)


def short_time_visibility(t, B: float, kappa: float, gamma: float):
    t = np.asarray(t, dtype=float)
    return np.exp(-(8 * B**2 / 3) * gamma * kappa**2 * t**3)


def p_minus_dissipative(
    t, init: InitialAmplitudes, model: EffectiveModel, damping: DampingParams, method: str = "closed"
):
    t = np.asarray(t, dtype=float)
    rec = decoherence_f(t, init, model, damping, method)
    am, bm = damped_amplitudes_closed(init, model, damping, t, "minus")
    ap, bp = damped_amplitudes_closed(init, model, damping, t, "plus")
    overlap = coherent_overlap(ap, am) * coherent_overlap(bp, bm)
    return 0.5 * (1.0 + np.real(rec.f * overlap))


def sigma_x_expectation(t, init: InitialAmplitudes, model: EffectiveModel, damping: DampingParams):
    """CPB coherence factor Re f(t)."""
    return np.real(decoherence_f(t, init, model, damping).f)

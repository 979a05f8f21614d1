"""Device parameters, CPB gap and mixing angle, and dispersive couplings.

All rates are angular frequencies (rad/s), energies are in joules. In
dimensionless mode the effective couplings are supplied directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import e as ELEMENTARY_CHARGE
from scipy.constants import hbar as HBAR

from .errors import ConfigError, DomainError

__all__ = [
    "HBAR",
    "DeviceParams",
    "RawCouplings",
    "EffectiveModel",
    "x_rms",
    "cpb_gap",
    "mixing_angle",
    "raw_couplings",
    "effective_model",
]


def _positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class DeviceParams:
    """Raw physical quantities of the CPB / cavity / resonator device.

    ``g`` may be given directly (rad/s), in which case the lumped circuit
    values ``C_g``, ``C_Sigma``, ``L`` and ``c`` are not needed.
    """

    E_C: float
    E_J: float
    n_g0: float
    m: float
    nu: float
    d: float
    delta: float
    omega_r: float | None = None
    C_g: float | None = None
    C_Sigma: float | None = None
    L: float | None = None
    c: float | None = None
    g: float | None = None

    def __post_init__(self):
        for name in ("E_C", "E_J", "m", "nu", "d"):
            _positive(name, getattr(self, name))
        if not 0.0 <= self.n_g0 <= 1.0:
            raise DomainError(f"n_g0 must lie in [0, 1], got {self.n_g0!r}")
        if self.delta == 0 or not math.isfinite(self.delta):
            raise DomainError("delta must be finite and non-zero (dispersive regime)")
        if self.g is None:
            for name in ("omega_r", "C_g", "C_Sigma", "L", "c"):
                value = getattr(self, name)
                if value is None:
                    raise DomainError(f"{name} is required when g is not given")
                _positive(name, value)
        else:
            _positive("g", self.g)


@dataclass(frozen=True)
class RawCouplings:
    g: float
    lam: float
    chi_cross: float
    x_rms: float
    epsilon: float
    theta: float


@dataclass(frozen=True)
class EffectiveModel:
    """Dispersive constants chi, Omega, kappa and derived spectral quantities."""

    chi: float
    Omega: float
    kappa: float

    @property
    def omega_bar(self) -> float:
        return 0.5 * (self.Omega + self.chi)

    @property
    def Delta(self) -> float:
        return self.Omega - self.chi

    @property
    def R(self) -> float:
        return math.hypot(self.Delta, 2.0 * self.kappa)

    @property
    def generator(self):
        """The 2x2 mode-coupling matrix [[chi, kappa], [kappa, Omega]]."""
        return ((self.chi, self.kappa), (self.kappa, self.Omega))


def x_rms(m: float, nu: float) -> float:
    """Ground-state position spread sqrt(hbar / (2 m nu)) of the resonator."""
    _positive("m", m)
    _positive("nu", nu)
    return math.sqrt(HBAR / (2.0 * m * nu))


def cpb_gap(E_C: float, E_J: float, n_g0: float) -> float:
    if E_C < 0 or E_J < 0:
        raise DomainError("E_C and E_J must be non-negative")
    return math.hypot(E_J, 4.0 * E_C * (1.0 - 2.0 * n_g0))


def mixing_angle(E_C: float, E_J: float, n_g0: float) -> float:
    """Qubit mixing angle in (0, pi); pi/2 at the charge degeneracy point."""
    if E_C < 0 or E_J < 0:
        raise DomainError("E_C and E_J must be non-negative")
    charging = 4.0 * E_C * (1.0 - 2.0 * n_g0)
    if E_J == 0 and charging == 0:
        raise DomainError("mixing angle undefined when E_J and 4E_C(1-2n_g0) both vanish")
    return math.atan2(E_J, charging)


def raw_couplings(p: DeviceParams) -> RawCouplings:
    xr = x_rms(p.m, p.nu)
    if p.g is not None:
        g = p.g
    else:
        lc = p.L * p.c
        hbar_g = ELEMENTARY_CHARGE * (p.C_g / p.C_Sigma) * math.sqrt(HBAR * p.omega_r / lc)
        g = hbar_g / HBAR
    lam = 2.0 * (p.E_C / HBAR) * xr / p.d
    chi_cross = g * xr / p.d
    return RawCouplings(
        g=g,
        lam=lam,
        chi_cross=chi_cross,
        x_rms=xr,
        epsilon=cpb_gap(p.E_C, p.E_J, p.n_g0),
        theta=mixing_angle(p.E_C, p.E_J, p.n_g0),
    )


def effective_model(
    g: float | None = None,
    lam: float | None = None,
    delta: float | None = None,
    *,
    chi: float | None = None,
    Omega: float | None = None,
    kappa: float | None = None,
) -> EffectiveModel:
    """Build the dispersive model from (g, lambda, delta) or from direct overrides.

    chi = g**2/delta, Omega = lambda**2/delta, kappa = g*lambda/delta. Supplying
    all three of ``chi``, ``Omega``, ``kappa`` bypasses the derivation.
    """
    overrides = (chi, Omega, kappa)
    n_set = sum(v is not None for v in overrides)
    if n_set == 3:
        for name, v in zip(("chi", "Omega", "kappa"), overrides):
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite")
        return EffectiveModel(float(chi), float(Omega), float(kappa))
    if n_set:
        raise ConfigError("chi, Omega and kappa overrides must be given together")
    if g is None or lam is None or delta is None:
        raise ConfigError("need g, lambda and delta when no overrides are given")
    if delta == 0:
        raise DomainError("delta must be non-zero")
    return EffectiveModel(g * g / delta, lam * lam / delta, g * lam / delta)

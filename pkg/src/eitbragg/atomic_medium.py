"""Steady-state susceptibilities of the five-level EIT atom.

Level scheme: probe on 1-3 (and 2-4), coupling on 2-3, standing-wave control
on 2-5. All rates, detunings and Rabi frequencies are angular quantities
expressed in units of the reference rate ``gamma_a``; susceptibilities are
returned dimensionless (``chi3_self`` in (V/m)^-2).

Every function broadcasts over numpy arrays stored in the detuning fields of
:class:`FieldParams`, so a whole spectrum is one call.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.constants import epsilon_0 as EPS0
from scipy.constants import hbar as HBAR

from .errors import DenominatorUnderflow, NonPositiveLength

GAMMA_A_DEFAULT = 2 * np.pi * 6e6  # rad/s
DENOMINATOR_FLOOR = 1e-30  # gamma_a^n units
WEAK_PROBE_RATIO = 0.1


@dataclass(frozen=True)
class AtomicParams:
    """Atomic constants. Decay rates are multiples of ``gamma_a``."""

    gamma_a: float = GAMMA_A_DEFAULT
    Gamma2: float = 0.01
    Gamma3: float = 1.0
    Gamma4: float = 1.0
    Gamma5: float = 1.0
    mu13: float = 2.5e-29  # C m
    mu24: float = 2.5e-29  # C m
    rho: float = 1e18  # m^-3
    lambda_p: float = 780.241e-9  # m
    k0_scale: float = 1.0

    def __post_init__(self):
        if not self.gamma_a > 0:
            raise ValueError(f"gamma_a must be positive, got {self.gamma_a}")
        if self.Gamma2 < 0:
            raise ValueError(f"Gamma2 must be >= 0, got {self.Gamma2}")
        for name in ("Gamma3", "Gamma4", "Gamma5"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("mu13", "rho", "lambda_p", "k0_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.mu24 < 0:
            raise ValueError(f"mu24 must be >= 0, got {self.mu24}")

    @property
    def K0(self) -> float:
        """rho |mu13|^2 / (hbar eps0), rad/s."""
        return self.k0_scale * self.rho * self.mu13**2 / (HBAR * EPS0)

    @property
    def K1(self) -> float:
        """rho |mu13|^2 |mu24|^2 / (eps0 hbar^3), in s^-3 (V/m)^-2."""
        return self.k0_scale * self.rho * self.mu13**2 * self.mu24**2 / (EPS0 * HBAR**3)

    @property
    def K0_reduced(self) -> float:
        return self.K0 / self.gamma_a

    @property
    def omega31(self) -> float:
        """Probe transition angular frequency (rad/s), anchored on ``lambda_p``."""
        return 2 * np.pi * C_LIGHT / self.lambda_p

    @property
    def cross_section(self) -> float:
        """Resonant absorption cross section 3 lambda^2 / 2 pi (m^2)."""
        return 3 * self.lambda_p**2 / (2 * np.pi)

    def probe_omega(self, Delta1) -> np.ndarray | float:
        return self.omega31 + np.asarray(Delta1) * self.gamma_a

    def with_k0_scale(self, k0_scale: float) -> "AtomicParams":
        return replace(self, k0_scale=k0_scale)


@dataclass(frozen=True)
class FieldParams:
    """Laser detunings and Rabi frequencies, all in units of ``gamma_a``.

    ``Omega_s_sq`` is the local control intensity |Omega_s|^2 used by point
    evaluations; ``Omega_1`` is the standing-wave peak used by the grating.
    """

    Delta1: float = 0.0
    Delta2: float = 0.0
    Delta4: float = 5.0
    Delta5: float = 20.0
    Omega_c: float = 10.0
    Omega_1: float = 10.0
    Omega_p_prime: float = 0.0
    Omega_s_sq: float = 0.0

    def __post_init__(self):
        if not self.Omega_c > 0:
            raise ValueError(f"Omega_c must be positive, got {self.Omega_c}")
        if self.Omega_1 < 0:
            raise ValueError(f"Omega_1 must be >= 0, got {self.Omega_1}")
        if self.Omega_p_prime < 0:
            raise ValueError(f"Omega_p_prime must be >= 0, got {self.Omega_p_prime}")
        if np.any(np.asarray(self.Omega_s_sq) < 0):
            raise ValueError("Omega_s_sq must be >= 0")

    def weak_probe(self, atomic: AtomicParams) -> bool:
        return self.Omega_p_prime < WEAK_PROBE_RATIO * min(atomic.Gamma3, self.Omega_c)

    def replace(self, **changes) -> "FieldParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ComplexChi:
    value: complex | np.ndarray
    kind: str  # "full" | "chi_a" | "chi3_self"

    def __complex__(self):
        return complex(self.value)

    @property
    def real(self):
        return np.real(self.value)

    @property
    def imag(self):
        return np.imag(self.value)


class Detunings(NamedTuple):
    delta: np.ndarray  # two-photon, 1-2
    Delta: np.ndarray  # one-photon, 1-3
    Delta42: np.ndarray
    Delta52: np.ndarray


def complex_detunings(atomic: AtomicParams, fields: FieldParams) -> Detunings:
    """The tilded detunings, each carrying +i Gamma/2."""
    d1 = np.asarray(fields.Delta1, dtype=float)
    two_photon = d1 - fields.Delta2
    return Detunings(
        delta=two_photon + 0.5j * atomic.Gamma2,
        Delta=d1 + 0.5j * atomic.Gamma3,
        Delta42=two_photon + fields.Delta4 + 0.5j * atomic.Gamma4,
        Delta52=two_photon + fields.Delta5 + 0.5j * atomic.Gamma5,
    )


def _check_denominator(den, what: str):
    if np.any(np.abs(den) < DENOMINATOR_FLOOR):
        raise DenominatorUnderflow(
            f"{what}: |denominator| below {DENOMINATOR_FLOOR:g}; parameter set is unphysical"
        )


def _maybe_scalar(x):
    x = np.asarray(x)
    return complex(x) if x.ndim == 0 else x


def susceptibility_full(atomic: AtomicParams, fields: FieldParams) -> ComplexChi:
    """Full weak-probe susceptibility at the probe frequency."""
    d, D, D42, D52 = complex_detunings(atomic, fields)
    s2 = np.asarray(fields.Omega_s_sq, dtype=float)
    pp2 = fields.Omega_p_prime**2
    c2 = fields.Omega_c**2
    num = -4 * d * D42 * D52 + D42 * s2 + D52 * pp2
    den = 4 * d * D * D42 * D52 - D * D52 * pp2 - D * D42 * s2 - D42 * D52 * c2
    _check_denominator(den, "susceptibility_full")
    return ComplexChi(_maybe_scalar(0.5 * atomic.K0_reduced * num / den), "full")


def chi_a(atomic: AtomicParams, fields: FieldParams) -> ComplexChi:
    """Linear plus control-induced cross-Kerr susceptibility at local |Omega_s|^2.

    Valid only for |Omega_p'|^2 << |Omega_c|^2 and one/two-photon detunings
    small compared with Delta42, Delta52.
    """
    d, D, _, D52 = complex_detunings(atomic, fields)
    s2 = np.asarray(fields.Omega_s_sq, dtype=float)
    den = 4 * d * D * D52 - D52 * fields.Omega_c**2
    _check_denominator(den, "chi_a")
    num = -4 * d * D52 + s2
    return ComplexChi(_maybe_scalar(0.5 * atomic.K0_reduced * num / den), "chi_a")


def chi3_self(atomic: AtomicParams, fields: FieldParams) -> ComplexChi:
    """Self-Kerr chi3(w_p; w_p, -w_p, w_p) in (V/m)^-2.

    The field convention is |Omega_p'|^2 = |mu24 E / hbar|^2 with E the
    complex probe amplitude.
    """
    d, D, D42, _ = complex_detunings(atomic, fields)
    den = 4 * d * D * D42 - D42 * fields.Omega_c**2
    _check_denominator(den, "chi3_self")
    # K1 / gamma_a^3 carries the (V/m)^-2 unit; den is in gamma_a^3
    scale = atomic.K1 / atomic.gamma_a**3
    return ComplexChi(_maybe_scalar(0.5 * scale / den), "chi3_self")


def transparency_window(atomic: AtomicParams, Omega_c: float, L: float) -> float:
    """EIT window width |Omega_c|^2 / (Gamma3^2 sqrt(rho sigma L)) in rad/s."""
    if not L > 0:
        raise NonPositiveLength(f"sample length must be positive, got {L}")
    optical_depth = atomic.rho * atomic.cross_section * L
    width = Omega_c**2 / (atomic.Gamma3**2 * np.sqrt(optical_depth))
    return float(width * atomic.gamma_a)


def eit_condition(atomic: AtomicParams, fields: FieldParams) -> bool:
    """|Omega_c|^2 > Gamma2 Gamma3: a transparency window exists."""
    return fields.Omega_c**2 > atomic.Gamma2 * atomic.Gamma3

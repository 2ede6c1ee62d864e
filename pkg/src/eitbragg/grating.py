"""Standing-wave-induced Bragg grating with a uniform Kerr term."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as C_LIGHT

from .atomic_medium import (
    AtomicParams,
    FieldParams,
    _check_denominator,
    chi3_self,
    chi_a,
    complex_detunings,
)
from .errors import GeometryInfeasible, NonPositiveLength

DEFAULT_SLABS = 64


@dataclass(frozen=True)
class GratingSpec:
    """Cosine grating n^2(z) = 1 + chi_bar + delta_chi cos(2 k_B z) + chi3 |E|^2.

    ``chi_bar``, ``delta_chi`` and ``chi3`` are the values at the reference
    detuning ``Delta1_ref``. When ``atomic`` and ``fields`` are attached the
    medium is dispersive and :meth:`evaluate` recomputes all three at any
    detuning; otherwise the grating is frequency independent (synthetic).
    Probe angular frequency is ``omega_31 + Delta1 * gamma_a``.
    """

    chi_bar: complex
    delta_chi: complex
    chi3: complex
    k_B: float
    L: float
    omega_31: float
    gamma_a: float
    Delta1_ref: float = 0.0
    slabs_per_period: int = DEFAULT_SLABS
    atomic: AtomicParams | None = field(default=None, repr=False)
    fields: FieldParams | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.k_B > 0:
            raise GeometryInfeasible(f"k_B must be positive, got {self.k_B}")
        if not self.L > 0:
            raise NonPositiveLength(f"grating length must be positive, got {self.L}")
        if self.slabs_per_period < 8:
            raise ValueError("slabs_per_period must be >= 8")
        if self.L / self.period < 10:
            warnings.warn(
                f"grating holds only {self.L / self.period:.1f} periods (< 10)", stacklevel=2
            )

    @property
    def period(self) -> float:
        return np.pi / self.k_B

    @property
    def n_periods(self) -> int:
        return max(1, int(round(self.L / self.period)))

    @property
    def n_bar(self) -> float:
        return float(np.sqrt(1 + self.chi_bar).real)

    @property
    def dispersive(self) -> bool:
        return self.atomic is not None

    def omega(self, Delta1):
        return self.omega_31 + np.asarray(Delta1, dtype=float) * self.gamma_a

    def evaluate(self, Delta1):
        """(chi_bar, delta_chi, chi3) arrays at the given detunings."""
        Delta1 = np.asarray(Delta1, dtype=float)
        if not self.dispersive:
            ones = np.ones_like(Delta1, dtype=complex)
            return self.chi_bar * ones, self.delta_chi * ones, self.chi3 * ones
        return grating_susceptibilities(self.atomic, self.fields.replace(Delta1=Delta1))

    def replace(self, **changes) -> "GratingSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "chi_bar": [self.chi_bar.real, self.chi_bar.imag],
            "delta_chi": [self.delta_chi.real, self.delta_chi.imag],
            "chi3_m2_per_V2": [self.chi3.real, self.chi3.imag],
            "k_B_per_m": self.k_B,
            "period_m": self.period,
            "L_m": self.L,
            "n_periods": self.n_periods,
            "n_bar": self.n_bar,
            "slabs_per_period": self.slabs_per_period,
            "Delta1_ref_gamma_a": self.Delta1_ref,
            "dispersive": self.dispersive,
        }

    @classmethod
    def synthetic(cls, chi_bar, delta_chi, L, omega_31, gamma_a, k_B=None,
                  slabs_per_period=DEFAULT_SLABS, chi3=0.0):
        """Frequency-independent grating, Bragg matched at ``omega_31`` by default."""
        chi_bar = complex(chi_bar)
        if k_B is None:
            k_B = np.sqrt(1 + chi_bar).real * omega_31 / C_LIGHT
        return cls(chi_bar=chi_bar, delta_chi=complex(delta_chi), chi3=complex(chi3),
                   k_B=float(k_B), L=L, omega_31=omega_31, gamma_a=gamma_a,
                   slabs_per_period=slabs_per_period)


def modulation_depth(atomic: AtomicParams, fields: FieldParams):
    """delta_chi = (K0/4) Omega_1^2 / (4 d D D52 - D52 |Omega_c|^2)."""
    d, D, _, D52 = complex_detunings(atomic, fields)
    den = 4 * d * D * D52 - D52 * fields.Omega_c**2
    _check_denominator(den, "modulation_depth")
    out = 0.25 * atomic.K0_reduced * fields.Omega_1**2 / den
    return complex(out) if np.ndim(out) == 0 else out


def grating_susceptibilities(atomic: AtomicParams, fields: FieldParams):
    mean = fields.replace(Omega_s_sq=0.5 * fields.Omega_1**2)
    return (
        chi_a(atomic, mean).value,
        modulation_depth(atomic, fields),
        chi3_self(atomic, fields).value,
    )


def build_grating(atomic: AtomicParams, fields: FieldParams, L: float, k_B: float | None = None,
                  slabs_per_period: int = DEFAULT_SLABS) -> GratingSpec:
    """Grating at the detuning ``fields.Delta1``.

    ``k_B=None`` Bragg-matches the grating to the probe, k_B = n_bar w_p / c.
    """
    chi_bar, delta_chi, chi3 = grating_susceptibilities(atomic, fields)
    if k_B is None:
        k_B = np.sqrt(1 + chi_bar).real * atomic.probe_omega(fields.Delta1) / C_LIGHT
    return GratingSpec(
        chi_bar=complex(chi_bar),
        delta_chi=complex(delta_chi),
        chi3=complex(chi3),
        k_B=float(k_B),
        L=L,
        omega_31=atomic.omega31,
        gamma_a=atomic.gamma_a,
        Delta1_ref=float(fields.Delta1),
        slabs_per_period=slabs_per_period,
        atomic=atomic,
        fields=fields,
    )


def bragg_angle(k_s: float, k_B: float) -> float:
    """Angle between control standing wave and probe with k_s cos(phi) = k_B."""
    if k_s < k_B:
        raise GeometryInfeasible(
            f"control wavevector k_s={k_s:.6g} m^-1 is shorter than k_B={k_B:.6g} m^-1; "
            "no angle Bragg-matches"
        )
    return float(np.arccos(k_B / k_s))


def index_profile(grating: GratingSpec, z, Delta1=None, probe_intensity: float = 0.0):
    """Complex n^2(z) at one detuning (defaults to the reference detuning)."""
    Delta1 = grating.Delta1_ref if Delta1 is None else Delta1
    chi_bar, delta_chi, chi3 = (np.asarray(v).reshape(()) for v in grating.evaluate(Delta1))
    z = np.asarray(z, dtype=float)
    return 1 + chi_bar + delta_chi * np.cos(2 * grating.k_B * z) + chi3 * probe_intensity

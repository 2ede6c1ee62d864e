"""Bragg-soliton design formulas and the workable region of the velocity parameter.

All formulas take the coupled-mode coefficients (power-convention gamma) and
depend on nu only through |nu|, so regions are symmetric about nu = 0.

``variant`` selects the soliton-order factor: "corrected" uses (3 - nu^2),
"printed" uses (3 - nu)^2. The input power is P0 * |nu| with P0 the peak
power of the fundamental (N_s = 1) soliton, which under "corrected" is exactly
P_in = 2 (1 - nu^2)^{3/2} / (|nu| (3 - nu^2) v_g^2 T0^2 kappa gamma).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .cme import VARIANTS, CmeCoefficients, gap_width_cme
from .errors import InvalidSolitonRegime

FWHM_PER_T0 = 1.76


@dataclass(frozen=True)
class Constraints:
    P_c: float  # W
    L: float = 5e-3  # m
    power_margin: float = 10.0
    min_T_factor: float = 10.0

    def __post_init__(self):
        for name in ("P_c", "L", "power_margin", "min_T_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class DesignPoint:
    T0: float
    nu: float
    N_s: float
    z0: float
    P_in: float
    feasible: bool

    @property
    def T_fwhm(self) -> float:
        return FWHM_PER_T0 * self.T0


@dataclass
class Region:
    intervals: list[tuple[float, float]]
    binding: list[tuple[str, str]]  # (lower, upper) binding constraint per interval
    T0: float
    constraints: Constraints
    floor_ok: bool
    details: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.intervals


def _check(coeffs: CmeCoefficients, T0, nu, variant="corrected"):
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if np.any(np.asarray(T0) <= 0):
        raise ValueError("T0 must be positive")
    nu = np.abs(np.asarray(nu, dtype=float))
    if np.any(nu <= 0) or np.any(nu >= 1):
        raise ValueError("|nu| must lie in (0, 1)")
    kg = coeffs.kappa.real * coeffs.gamma_nl.real
    if not kg > 0:
        raise InvalidSolitonRegime(
            f"kappa*gamma = {kg:.3g} <= 0: no bright Bragg soliton under these formulas"
        )
    return nu, kg


def _order_factor(nu, variant):
    return (3 - nu**2) if variant == "corrected" else (3 - nu) ** 2


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def soliton_order(coeffs: CmeCoefficients, T0, nu, P0, variant: str = "corrected"):
    """N_s for peak power ``P0`` (W) inside the grating."""
    nu, kg = _check(coeffs, T0, nu, variant)
    if np.any(np.asarray(P0) <= 0):
        raise ValueError("P0 must be positive")
    n2 = (_order_factor(nu, variant) * kg * T0**2 * coeffs.v_g**2 * nu**2 * P0
          / (2 * (1 - nu**2) ** 1.5))
    return _scalar(np.sqrt(n2))


def soliton_period(coeffs: CmeCoefficients, T0, nu, variant: str = "corrected"):
    """z0 = pi nu^2 v_g^2 T0^2 |kappa| / (2 (1 - nu^2)^{3/2}), metres."""
    nu, _ = _check(coeffs, T0, nu, variant)
    return _scalar(np.pi * nu**2 * coeffs.v_g**2 * T0**2 * abs(coeffs.kappa.real)
                   / (2 * (1 - nu**2) ** 1.5))


def input_power(coeffs: CmeCoefficients, T0, nu, variant: str = "corrected"):
    """Input peak power exciting the fundamental soliton, P_in = P0 |nu| at N_s = 1 (W)."""
    nu, kg = _check(coeffs, T0, nu, variant)
    return _scalar(2 * (1 - nu**2) ** 1.5
                   / (nu * _order_factor(nu, variant) * coeffs.v_g**2 * T0**2 * kg))


def min_pulse_width(coeffs: CmeCoefficients) -> float:
    """1/Delta_nu with Delta_nu = 2 |v_g kappa| / 2 pi, seconds."""
    return 2 * np.pi / gap_width_cme(coeffs)


def design_point(coeffs, T0, nu, constraints: Constraints, variant="corrected") -> DesignPoint:
    P_in = input_power(coeffs, T0, nu, variant)
    z0 = soliton_period(coeffs, T0, nu, variant)
    N_s = soliton_order(coeffs, T0, nu, P_in / abs(nu), variant)
    return DesignPoint(T0=T0, nu=nu, N_s=N_s, z0=z0, P_in=P_in,
                       feasible=bool(_feasible(coeffs, T0, np.array([abs(nu)]), constraints,
                                               variant)[0]))


def _margins(coeffs, T0, nu, constraints, variant):
    """Constraint values divided by their bounds; <= 1 means satisfied."""
    return {
        "power": input_power(coeffs, T0, nu, variant) * constraints.power_margin / constraints.P_c,
        "length": soliton_period(coeffs, T0, nu, variant) / constraints.L,
    }


def _floor_ok(coeffs, T0, constraints) -> bool:
    return FWHM_PER_T0 * T0 >= constraints.min_T_factor * min_pulse_width(coeffs)


def _feasible(coeffs, T0, nu, constraints, variant):
    if not _floor_ok(coeffs, T0, constraints):
        return np.zeros_like(nu, dtype=bool)
    m = _margins(coeffs, T0, nu, constraints, variant)
    return (m["power"] <= 1) & (m["length"] <= 1)


def nu_scan(nu_min=1e-5, nu_max=0.99, points_per_decade=2000) -> np.ndarray:
    decades = np.log10(nu_max / nu_min)
    n = int(np.ceil(decades * points_per_decade)) + 1
    nus = np.logspace(np.log10(nu_min), np.log10(nu_max), n)
    nus[0], nus[-1] = nu_min, nu_max  # logspace rounds the end points
    return nus


def _refine(coeffs, T0, constraints, variant, lo, hi, rtol):
    """Endpoint between grid points lo (one side) and hi and the constraint that flips there."""
    m_lo = _margins(coeffs, T0, lo, constraints, variant)
    m_hi = _margins(coeffs, T0, hi, constraints, variant)
    for name in ("power", "length"):
        if (m_lo[name] <= 1) != (m_hi[name] <= 1):
            def g(x, name=name):
                return np.log(_margins(coeffs, T0, x, constraints, variant)[name])
            root = brentq(g, lo, hi, rtol=rtol * 1e-3, xtol=1e-300)
            return root, name
    raise RuntimeError("no constraint changes sign between grid points")


def workable_region(coeffs: CmeCoefficients, T0: float, constraints: Constraints,
                    variant: str = "corrected", nu_min: float = 1e-5, nu_max: float = 0.99,
                    points_per_decade: int = 2000, rtol: float = 1e-3) -> Region:
    """Maximal |nu| intervals satisfying P_in <= P_c/margin, z0 <= L and the pulse-width floor.

    An empty region is a valid result (``Region.empty``), not an error.
    """
    _check(coeffs, T0, 0.5, variant)
    nus = nu_scan(nu_min, nu_max, points_per_decade)
    ok = _feasible(coeffs, T0, nus, constraints, variant)
    floor = _floor_ok(coeffs, T0, constraints)
    intervals, binding = [], []
    i = 0
    while i < len(nus):
        if not ok[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(nus) and ok[j + 1]:
            j += 1
        if i == 0:
            lo, lo_name = nus[0], "scan_limit"
        else:
            lo, lo_name = _refine(coeffs, T0, constraints, variant, nus[i - 1], nus[i], rtol)
        if j == len(nus) - 1:
            hi, hi_name = nus[-1], "scan_limit"
        else:
            hi, hi_name = _refine(coeffs, T0, constraints, variant, nus[j], nus[j + 1], rtol)
        intervals.append((float(lo), float(hi)))
        binding.append((lo_name, hi_name))
        i = j + 1
    return Region(
        intervals=intervals, binding=binding, T0=T0, constraints=constraints, floor_ok=floor,
        details={"min_T_fwhm": constraints.min_T_factor * min_pulse_width(coeffs),
                 "T_fwhm": FWHM_PER_T0 * T0, "variant": variant},
    )


def power_for_lower_endpoint(coeffs, T0, nu_low, power_margin=10.0, variant="corrected") -> float:
    """P_c that makes the power bound bind exactly at ``nu_low``."""
    return power_margin * input_power(coeffs, T0, nu_low, variant)


def length_for_upper_endpoint(coeffs, T0, nu_high, variant="corrected") -> float:
    """Sample length that makes z0 <= L bind exactly at ``nu_high``."""
    return soliton_period(coeffs, T0, nu_high, variant)


def design_table(coeffs, T0, constraints, nus, variant="corrected") -> dict[str, np.ndarray]:
    nus = np.asarray(nus, dtype=float)
    return {
        "nu [1]": nus,
        "P_in [W]": input_power(coeffs, T0, nus, variant),
        "z0 [m]": soliton_period(coeffs, T0, nus, variant),
        "feasible [0/1]": _feasible(coeffs, T0, np.abs(nus), constraints, variant).astype(int),
    }

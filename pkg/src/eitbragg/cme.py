"""Coupled-mode coefficients, the moving gap-soliton family and linear dispersion.

Envelope equations (forward A+, backward A-):

    +dz A+ + (1/v_g) dt A+ = i kappa A- + i gamma (|A+|^2 + 2|A-|^2) A+ - alpha A+
    -dz A- + (1/v_g) dt A- = i kappa A+ + i gamma (|A-|^2 + 2|A+|^2) A- - alpha A-

``alpha`` is the background amplitude attenuation from Im(n_bar); it is zero
for a lossless medium and is not part of the soliton solution.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.constants import epsilon_0 as EPS0

from .atomic_medium import AtomicParams, FieldParams
from .errors import DerivativeNonConvergent, InsideGap, InvalidSolitonRegime
from .grating import GratingSpec, build_grating, grating_susceptibilities

A_EFF_DEFAULT = 7.85e-9  # m^2, 50 um beam radius
VARIANTS = ("printed", "corrected")
PHASES = ("moving", "printed")


@dataclass(frozen=True)
class CmeCoefficients:
    v_g: float  # m/s
    kappa: complex  # m^-1
    gamma_nl: complex  # 1/(W m), power convention
    gamma_field: complex  # m/V^2, |A|^2 in (V/m)^2
    delta_k: float = 0.0  # m^-1
    n_bar: float = 1.0
    A_eff: float = A_EFF_DEFAULT
    alpha: float = 0.0  # m^-1 amplitude attenuation
    omega_p: float = 0.0
    validity: dict = field(default_factory=dict, compare=False)

    @property
    def gamma_intensity(self) -> complex:
        """Nonlinear coefficient with |A|^2 read as intensity, m/W."""
        return self.gamma_field * 2 / (self.n_bar * EPS0 * C_LIGHT)

    @property
    def regime_sign(self) -> int:
        return int(np.sign(self.kappa.real) * np.sign(self.gamma_nl.real))

    def lossless(self) -> "CmeCoefficients":
        return replace(self, kappa=complex(self.kappa.real), gamma_nl=complex(self.gamma_nl.real),
                       gamma_field=complex(self.gamma_field.real), alpha=0.0)

    def replace(self, **changes) -> "CmeCoefficients":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("kappa", "gamma_nl", "gamma_field"):
            d[k] = [d[k].real, d[k].imag]
        d["gamma_intensity"] = [self.gamma_intensity.real, self.gamma_intensity.imag]
        d["units"] = {
            "v_g": "m/s", "kappa": "1/m", "gamma_nl": "1/(W m)", "gamma_field": "m/V^2",
            "gamma_intensity": "m/W", "delta_k": "1/m", "A_eff": "m^2", "alpha": "1/m",
            "omega_p": "rad/s",
        }
        return d


@dataclass(frozen=True)
class SolitonParams:
    nu: float
    psi: float

    def __post_init__(self):
        if not -1 < self.nu < 1:
            raise ValueError(f"nu must lie in (-1, 1), got {self.nu}")
        if not 0 < self.psi < np.pi:
            raise ValueError(f"psi must lie in (0, pi), got {self.psi}")


@dataclass
class EnvelopeState:
    z_grid: np.ndarray
    A_plus: np.ndarray
    A_minus: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.z_grid = np.asarray(self.z_grid, dtype=float)
        self.A_plus = np.asarray(self.A_plus, dtype=complex)
        self.A_minus = np.asarray(self.A_minus, dtype=complex)
        if not (self.z_grid.shape == self.A_plus.shape == self.A_minus.shape):
            raise ValueError("z_grid, A_plus and A_minus must have equal lengths")
        dz = np.diff(self.z_grid)
        if len(dz) and not np.allclose(dz, dz[0], rtol=1e-9, atol=0):
            raise ValueError("z_grid must be uniform")

    @property
    def dz(self) -> float:
        return float(self.z_grid[1] - self.z_grid[0])

    def intensity(self) -> np.ndarray:
        return np.abs(self.A_plus) ** 2 + np.abs(self.A_minus) ** 2

    def energy(self) -> float:
        return float(np.sum(self.intensity()) * self.dz)


def richardson_derivative(f, x0: float, h: float = 0.01, levels: int = 4, rtol: float = 1e-3):
    """Central difference of ``f`` at ``x0`` with Richardson extrapolation.

    Returns the most extrapolated estimate; raises when the two best estimates
    disagree by more than ``rtol`` (relative).
    """
    table = []
    for i in range(levels):
        hi = h / 2**i
        row = [(f(x0 + hi) - f(x0 - hi)) / (2 * hi)]
        for j in range(1, i + 1):
            row.append(row[j - 1] + (row[j - 1] - table[i - 1][j - 1]) / (4**j - 1))
        table.append(row)
    best, prev = table[-1][-1], table[-2][-2]
    scale = max(abs(best), 1e-300)
    if abs(best - prev) / scale > rtol:
        raise DerivativeNonConvergent(
            f"Richardson levels disagree: {best!r} vs {prev!r} (rel {abs(best - prev) / scale:.2e})"
        )
    return best


def derive_coefficients(atomic: AtomicParams, fields: FieldParams,
                        grating: GratingSpec | None = None, A_eff: float = A_EFF_DEFAULT,
                        delta_k: float = 0.0) -> CmeCoefficients:
    """Envelope coefficients at the carrier detuning ``fields.Delta1``."""
    if not A_eff > 0:
        raise ValueError("A_eff must be positive")
    if grating is None:
        grating = build_grating(atomic, fields, L=1e-2)
    omega = float(atomic.probe_omega(fields.Delta1))
    chi_bar, delta_chi, chi3 = (complex(v) for v in grating.evaluate(fields.Delta1))
    n_complex = np.sqrt(1 + chi_bar)
    n_bar = float(n_complex.real)

    def mean_chi(D1):
        return grating_susceptibilities(atomic, fields.replace(Delta1=D1))[0]

    def mod_chi(D1):
        return grating_susceptibilities(atomic, fields.replace(Delta1=D1))[1]

    # derivatives per gamma_a, then per rad/s
    dchi_dD = richardson_derivative(mean_chi, float(fields.Delta1))
    dmod_dD = richardson_derivative(mod_chi, float(fields.Delta1))
    dchi_domega = dchi_dD / atomic.gamma_a

    v_g = 1.0 / (n_bar / C_LIGHT + omega / (2 * n_bar * C_LIGHT) * dchi_domega.real)
    kappa = delta_chi * omega / (4 * n_bar * C_LIGHT)
    gamma_field = omega / (2 * n_bar * C_LIGHT) * chi3
    gamma_nl = gamma_field * 2 / (n_bar * EPS0 * C_LIGHT * A_eff)
    alpha = float(n_complex.imag * omega / C_LIGHT)

    validity = {
        "abs_delta_chi": abs(delta_chi),
        "abs_dchi_bar_per_gamma_a": abs(dchi_dD),
        "abs_ddelta_chi_per_gamma_a": abs(dmod_dD),
        "modulation_dominates_dispersion": bool(abs(delta_chi) > abs(dchi_dD)),
        "dispersion_dominates_modulation_slope": bool(abs(dchi_dD) > abs(dmod_dD)),
        "weak_probe": fields.weak_probe(atomic),
        "eit_window_open": bool(fields.Omega_c**2 > atomic.Gamma2 * atomic.Gamma3),
        "slow_light": bool(0 < v_g < C_LIGHT),
    }
    return CmeCoefficients(
        v_g=float(v_g), kappa=complex(kappa), gamma_nl=complex(gamma_nl),
        gamma_field=complex(gamma_field), delta_k=float(delta_k), n_bar=n_bar, A_eff=A_eff,
        alpha=alpha, omega_p=omega, validity=validity,
    )


def _canonical(nu, psi, zeta_arg, t_arg, variant, phase):
    """Soliton for kappa = gamma = v_g = 1 in the moving coordinates.

    ``zeta_arg`` is z and ``t_arg`` is v_g t, both in units of 1/kappa.
    """
    root = np.sqrt(1 - nu**2)
    denom = (2 - nu**2) if variant == "printed" else (3 - nu**2)
    amp = np.sqrt((1 - nu**2) / denom) * np.sin(psi)
    a_plus = ((1 + nu) / (1 - nu)) ** 0.25 * amp
    a_minus = -((1 - nu) / (1 + nu)) ** 0.25 * amp
    zeta = np.sin(psi) * (zeta_arg - nu * t_arg) / root
    if phase == "moving":
        carrier = np.cos(psi) * (nu * zeta_arg - t_arg) / root
    else:
        carrier = nu * (zeta_arg - nu * t_arg) * np.cos(psi) / root
    # arctan(cot(psi/2) coth(zeta)) continued through zeta = 0
    twist = np.arctan2(np.cos(psi / 2) * np.cosh(zeta), np.sin(psi / 2) * np.sinh(zeta))
    theta = carrier - 4 * nu / (3 - nu**2) * twist
    ephase = np.exp(1j * theta)
    return (a_plus / np.cosh(zeta - 0.5j * psi) * ephase,
            a_minus / np.cosh(zeta + 0.5j * psi) * ephase)


def analytic_soliton(coeffs: CmeCoefficients, sp: SolitonParams, z, t=0.0,
                     variant: str = "corrected", phase: str = "moving", z0: float = 0.0):
    """Moving Bragg soliton (A+, A-) in sqrt(W) on positions ``z`` at time ``t``.

    ``variant="corrected"`` uses the (3 - nu^2) amplitude denominator,
    ``"printed"`` the (2 - nu^2) one. ``phase="moving"`` carries the
    kappa cos(psi) (nu z - v_g t)/sqrt(1 - nu^2) phase; ``"printed"`` uses
    nu (z - V t) in its place, which only solves the equations at psi = pi/2.
    Losses are ignored (real parts of kappa and gamma).

    Signs: a solution for (kappa, gamma) conjugated solves (-kappa, -gamma),
    and A- -> -A- flips kappa alone, so every sign pair maps onto the
    canonical kappa, gamma > 0 form.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if phase not in PHASES:
        raise ValueError(f"phase must be one of {PHASES}")
    kappa, gamma = coeffs.kappa.real, coeffs.gamma_nl.real
    if kappa == 0 or gamma == 0:
        raise InvalidSolitonRegime("soliton family needs nonzero kappa and gamma")
    k, g = abs(kappa), abs(gamma)
    z = np.asarray(z, dtype=float)
    ap, am = _canonical(sp.nu, sp.psi, k * (z - z0), k * coeffs.v_g * t, variant, phase)
    scale = np.sqrt(k / g)
    ap, am = scale * ap, scale * am
    if gamma < 0:
        ap, am = np.conj(ap), np.conj(am)
        kappa = -kappa
    if kappa < 0:
        am = -am
    return ap, am


def soliton_velocity(coeffs: CmeCoefficients, sp: SolitonParams) -> float:
    return sp.nu * coeffs.v_g


def soliton_width_time(coeffs: CmeCoefficients, sp: SolitonParams) -> float:
    """Temporal sech width T0 of the soliton seen at a fixed position."""
    return np.sqrt(1 - sp.nu**2) / (abs(coeffs.kappa.real) * np.sin(sp.psi) * abs(sp.nu) * coeffs.v_g)


# 8th-order central first-derivative stencil
_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])


def _d1(f: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    out = np.zeros_like(f)
    n = f.shape[axis]
    f = np.moveaxis(f, axis, -1)
    o = np.moveaxis(out, axis, -1)
    for j, w in enumerate(_D1):
        if w:
            o[..., 4:n - 4] += w * f[..., j:n - 8 + j]
    return np.moveaxis(o, -1, axis) / h


def cme_residual(coeffs: CmeCoefficients, sp: SolitonParams, variant: str = "corrected",
                 phase: str = "moving", span: float = 30.0, n: int = 6001,
                 t: float = 0.0) -> float:
    """max |CME residual| / (|kappa| max|A|) for the analytic soliton.

    Derivatives are 8th-order finite differences on a grid spanning
    ``span``/|kappa| in z and a matching small stencil in t. Lossless
    coefficients are used.
    """
    c = coeffs.lossless()
    k, g, v = c.kappa.real, c.gamma_nl.real, c.v_g
    width = span / abs(k)
    z = np.linspace(-width / 2, width / 2, n)
    h = z[1] - z[0]
    ht = h / v
    times = t + ht * np.arange(-4, 5)
    fields = [analytic_soliton(c, sp, z, tt, variant, phase) for tt in times]
    Ap = np.array([f[0] for f in fields])
    Am = np.array([f[1] for f in fields])
    dtAp = np.tensordot(_D1, Ap, axes=1) / ht
    dtAm = np.tensordot(_D1, Am, axes=1) / ht
    ap, am = Ap[4], Am[4]
    dzAp, dzAm = _d1(ap, h), _d1(am, h)
    Ip, Im = np.abs(ap) ** 2, np.abs(am) ** 2
    r1 = dzAp + dtAp / v - 1j * k * am - 1j * g * (Ip + 2 * Im) * ap
    r2 = -dzAm + dtAm / v - 1j * k * ap - 1j * g * (Im + 2 * Ip) * am
    inner = slice(4, n - 4)
    peak = max(np.abs(ap).max(), np.abs(am).max())
    return float(max(np.abs(r1[inner]).max(), np.abs(r2[inner]).max()) / (abs(k) * peak))


def select_variant(coeffs: CmeCoefficients, nus=None, psis=None, tol: float = 1e-3,
                   phase: str = "moving") -> dict:
    """Evaluate both amplitude variants on a (nu, psi) grid; pick the one that solves the CME.

    Returns ``{"winner": name or None, "max_residual": {...}, "passing": [...]}``;
    ``winner`` is None unless exactly one variant stays under ``tol``.
    """
    nus = np.linspace(-0.9, 0.9, 5) if nus is None else nus
    psis = np.linspace(0.2, np.pi - 0.2, 5) if psis is None else psis
    worst = {}
    for variant in VARIANTS:
        worst[variant] = max(
            cme_residual(coeffs, SolitonParams(float(nu), float(psi)), variant, phase)
            for nu in nus for psi in psis
        )
    passing = [v for v in VARIANTS if worst[v] < tol]
    return {
        "winner": passing[0] if len(passing) == 1 else None,
        "max_residual": worst,
        "passing": passing,
        "tolerance": tol,
    }


def linear_dispersion(coeffs: CmeCoefficients, delta_omega):
    """(V_g, beta2) of the linear grating at angular offset ``delta_omega`` from the carrier.

    beta2 is in s^2/m. Raises InsideGap when |delta_omega / v_g| <= |kappa|.
    """
    d = np.asarray(delta_omega, dtype=float) / coeffs.v_g
    k2 = coeffs.kappa.real**2
    if k2 == 0:
        V, beta2 = coeffs.v_g * np.ones_like(d), np.zeros_like(d)
    else:
        if np.any(d**2 <= k2):
            raise InsideGap("detuning lies inside the stop band")
        V = coeffs.v_g * np.sqrt(1 - k2 / d**2)
        beta2 = -np.sign(d) * (k2 / coeffs.v_g**2) / (d**2 - k2) ** 1.5
    if np.ndim(V) == 0:
        return float(V), float(beta2)
    return V, beta2


def gap_width_cme(coeffs: CmeCoefficients) -> float:
    """Stop-band width 2 |v_g Re kappa| in rad/s."""
    return 2 * abs(coeffs.v_g * coeffs.kappa.real)


def calibrate_k0_scale(atomic: AtomicParams, fields: FieldParams, target_kappa: float,
                       **kwargs) -> float:
    """The k0_scale giving Re(kappa) = ``target_kappa`` (m^-1)."""
    from scipy.optimize import brentq

    def mismatch(log_s):
        c = derive_coefficients(atomic.with_k0_scale(np.exp(log_s)), fields, **kwargs)
        return c.kappa.real / target_kappa - 1

    return float(np.exp(brentq(mismatch, np.log(1e-3), np.log(1e3), xtol=1e-14, rtol=1e-13)))

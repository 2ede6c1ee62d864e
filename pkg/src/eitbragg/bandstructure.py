"""Transfer-matrix reflectivity and complex Bloch dispersion of the grating.

Each grating period is cut into ``slabs_per_period`` uniform layers sampled at
their midpoints; the sampled modulation is divided by sinc(pi/N) so the
staircase keeps the exact cos(2 k_B z) Fourier component. Layers use the unimodular (E, H) characteristic matrix

    [[cos(d), -i sin(d)/n], [-i n sin(d), cos(d)]],   d = n k0 h,

(time dependence exp(-i w t), Im n > 0 absorbing), so Tr(M_period)/2 = cos(K d)
holds for lossy layers too. The period matrix is
raised to the number of periods by repeated squaring, falling back to a rescaled
Chebyshev form where the plain power overflows.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT

from .errors import BranchAmbiguity, MatrixOverflow, NoGapDetected, NonConvergent
from .grating import GratingSpec

CONVERGENCE_TOL = 1e-3
# Layer products run in extended precision: near |Tr/2| = 1 arccos turns a
# rounding error e in the trace into sqrt(e) in K d.
EXT = np.clongdouble


@dataclass
class BandStructure:
    omega_grid: np.ndarray  # Delta1 / gamma_a
    reflectivity: np.ndarray
    transmissivity: np.ndarray
    bloch_K: np.ndarray  # K d, complex
    include_absorption: bool
    boundary: str = "index_matched"
    reflectivity_right: np.ndarray | None = None
    transmissivity_right: np.ndarray | None = None
    convergence_delta: float | None = None  # max |R(2N slabs) - R(N slabs)|

    def csv_columns(self) -> dict[str, np.ndarray]:
        return {
            "Delta1 [gamma_a]": self.omega_grid,
            "R [1]": self.reflectivity,
            "T [1]": self.transmissivity,
            "Re(Kd)/pi [1]": self.bloch_K.real / np.pi,
            "Im(Kd) [1]": self.bloch_K.imag,
        }


def layer_matrices(eps: np.ndarray, k0: np.ndarray, h: float) -> np.ndarray:
    """Characteristic matrices, shape (..., 2, 2), for permittivities ``eps``."""
    n = np.sqrt(np.asarray(eps).astype(EXT))
    phase = n * np.asarray(k0, dtype=np.longdouble) * np.longdouble(h)
    cs, sn = np.cos(phase), np.sin(phase)
    m = np.empty(n.shape + (2, 2), dtype=EXT)
    m[..., 0, 0] = cs
    m[..., 0, 1] = -1j * sn / n
    m[..., 1, 0] = -1j * n * sn
    m[..., 1, 1] = cs
    return m


def stack_matrix(eps_layers: np.ndarray, k0: np.ndarray, h: float) -> np.ndarray:
    """Product over layers (last axis of ``eps_layers``), first layer leftmost."""
    k0 = np.asarray(k0, dtype=float)
    mats = layer_matrices(eps_layers, k0[..., None], h)
    total = mats[..., 0, :, :]
    for j in range(1, eps_layers.shape[-1]):
        total = total @ mats[..., j, :, :]
    return total


def _period_permittivity(grating: GratingSpec, Delta1: np.ndarray, include_absorption: bool,
                         probe_intensity: float, slabs: int):
    chi_bar, delta_chi, chi3 = grating.evaluate(Delta1)
    if not include_absorption:
        chi_bar, delta_chi, chi3 = chi_bar.real, delta_chi.real, chi3.real
    z = (np.arange(slabs) + 0.5) * grating.period / slabs
    boost = 1.0 / np.sinc(1.0 / slabs)  # np.sinc(x) = sin(pi x)/(pi x)
    eps = (1 + chi_bar + chi3 * probe_intensity)[:, None] + boost * delta_chi[:, None] * np.cos(
        2 * grating.k_B * z
    )[None, :]
    ambient = np.sqrt(1 + chi_bar + chi3 * probe_intensity + 0j).real
    return eps, ambient


def period_matrix(grating: GratingSpec, omega_grid, include_absorption: bool = True,
                  probe_intensity: float = 0.0, slabs: int | None = None,
                  reverse: bool = False):
    """(M_period, ambient index, k0) on the detuning grid."""
    Delta1 = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    slabs = slabs or grating.slabs_per_period
    eps, ambient = _period_permittivity(grating, Delta1, include_absorption, probe_intensity, slabs)
    if reverse:
        eps = eps[:, ::-1]
    k0 = grating.omega(Delta1) / C_LIGHT
    return stack_matrix(eps, k0, grating.period / slabs), ambient, k0


def _rt(m: np.ndarray, n_a: np.ndarray):
    m11, m12, m21, m22 = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    den = n_a * m11 + n_a * n_a * m12 + m21 + n_a * m22
    r = (n_a * m11 + n_a * n_a * m12 - m21 - n_a * m22) / den
    t = 2 * n_a / den
    return r, t


def _total_matrix(mp: np.ndarray, n_periods: int) -> np.ndarray:
    # binary powering with matmul: np.linalg rejects extended precision
    result = np.broadcast_to(np.eye(2, dtype=mp.dtype), mp.shape).copy()
    base = mp.copy()
    n = n_periods
    with np.errstate(over="ignore", invalid="ignore"):
        while n:
            if n & 1:
                result = result @ base
            n >>= 1
            if n:
                base = base @ base
    return result


def _scaled_power(mp: np.ndarray, n_periods: int):
    """M^N / U_{N-1} and 1 / U_{N-1} for unimodular M (Chebyshev identity).

    M^N = U_{N-1}(a) M - U_{N-2}(a) I with a = Tr(M)/2 and
    U_{n-1} = sin(n x) / sin(x), cos x = a. Written with exp(2 i N x), which
    is small when Im x > 0, so nothing overflows deep in a stop band.
    """
    x = bloch_phase(mp)
    e2 = np.exp(2j * n_periods * x)
    cot_nx = 1j * (e2 + 1) / (e2 - 1)
    ratio = np.cos(x) - cot_nx * np.sin(x)  # U_{N-2} / U_{N-1}
    inv_u = np.sin(x) * 2j * np.exp(1j * n_periods * x) / (e2 - 1)
    scaled = mp - ratio[..., None, None] * np.eye(2)
    return scaled, inv_u


def _spectrum_arrays(grating, grid, include_absorption, probe_intensity, boundary, slabs,
                     reverse=False):
    mp, ambient, _ = period_matrix(grating, grid, include_absorption, probe_intensity, slabs,
                                   reverse=reverse)
    if boundary == "index_matched":
        n_a = ambient
    elif boundary == "vacuum":
        n_a = np.ones_like(ambient)
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    total = _total_matrix(mp, grating.n_periods)
    with np.errstate(over="ignore", invalid="ignore"):
        r, t = _rt(total, n_a)
    bad = ~(np.isfinite(r) & np.isfinite(t))
    if np.any(bad):
        scaled, inv_u = _scaled_power(mp[bad], grating.n_periods)
        r_s, t_s = _rt(scaled, n_a[bad])
        r[bad], t[bad] = r_s, t_s * inv_u
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise MatrixOverflow("transfer matrix overflowed even after rescaling")
    return (np.abs(r) ** 2).astype(float), (np.abs(t) ** 2).astype(float), mp


def transfer_matrix_spectrum(grating: GratingSpec, omega_grid, include_absorption: bool = True,
                             probe_intensity: float = 0.0, boundary: str = "index_matched",
                             check_convergence: bool = False,
                             both_sides: bool = False, threads: int = 1) -> BandStructure:
    """Reflectivity, transmissivity and Bloch wavevector on a detuning grid.

    ``omega_grid`` holds Delta1 in units of gamma_a and must be strictly
    increasing. Both boundary embeddings use the same ambient index on the
    two sides, so T = |t|^2 with no index factor.

    ``threads > 1`` splits the grid into contiguous chunks evaluated
    concurrently; branch tracking runs afterwards over the assembled grid, so
    the output does not depend on the partition.
    """
    grid = np.asarray(omega_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("omega_grid must be a strictly increasing 1-D array")
    if probe_intensity < 0:
        raise ValueError("probe_intensity must be >= 0")
    slabs = grating.slabs_per_period

    def chunk(part):
        R, T, mp = _spectrum_arrays(grating, part, include_absorption, probe_intensity, boundary,
                                    slabs)
        out = {"R": R, "T": T, "kd": bloch_phase(mp)}
        if check_convergence:
            out["R2"] = _spectrum_arrays(grating, part, include_absorption, probe_intensity,
                                         boundary, 2 * slabs)[0]
        if both_sides:
            out["Rr"], out["Tr"], _ = _spectrum_arrays(grating, part, include_absorption,
                                                       probe_intensity, boundary, slabs,
                                                       reverse=True)
        return out

    parts = np.array_split(grid, max(1, min(threads, len(grid))))
    if len(parts) == 1:
        results = [chunk(parts[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as pool:
            results = list(pool.map(chunk, parts))
    joined = {k: np.concatenate([r[k] for r in results]) for k in results[0]}
    worst = None
    if check_convergence:
        worst = float(np.max(np.abs(joined["R2"] - joined["R"])))
        if worst > CONVERGENCE_TOL:
            raise NonConvergent(f"doubling slabs_per_period changed R by {worst:.3g}")
    return BandStructure(
        omega_grid=grid,
        reflectivity=joined["R"],
        transmissivity=joined["T"],
        bloch_K=track_branch(joined["kd"]),
        include_absorption=include_absorption,
        boundary=boundary,
        reflectivity_right=joined.get("Rr"),
        transmissivity_right=joined.get("Tr"),
        convergence_delta=worst,
    )


def bloch_phase(mp: np.ndarray) -> np.ndarray:
    """Principal K d = arccos(Tr/2), sign chosen so Im(K d) >= 0."""
    half_trace = 0.5 * (mp[..., 0, 0] + mp[..., 1, 1])
    kd = np.arccos(half_trace.astype(EXT))
    return np.where(kd.imag < 0, -kd, kd).astype(complex)


def track_branch(kd: np.ndarray, tie_tol: float = 1e-12) -> np.ndarray:
    """Unwrap K d along the grid by slope continuity.

    Candidates are s * kd + 2 pi m with s = +1 (and s = -1 where Im K is zero,
    the lossless pass band). The candidate nearest a linear extrapolation of
    the previous two points is kept; on a tie the larger (forward-propagating)
    candidate wins.
    """
    kd = np.atleast_1d(kd).astype(complex)
    out = np.empty_like(kd)
    for i, x in enumerate(kd):
        signs = (1, -1) if abs(x.imag) <= tie_tol else (1,)
        if i == 0:
            out[i] = complex(x.real % (2 * np.pi), x.imag)
            if out[i].real > np.pi and abs(x.imag) <= tie_tol:
                out[i] = complex(2 * np.pi - out[i].real, x.imag)
            continue
        guess = out[i - 1].real if i == 1 else 2 * out[i - 1].real - out[i - 2].real
        best = None
        for s in signs:
            y = s * x.real
            y += 2 * np.pi * np.round((guess - y) / (2 * np.pi))
            # ties (flat Re K inside a lossless gap) go to the forward, increasing branch
            if best is None or abs(y - guess) < abs(best - guess) - 1e-9 or (
                abs(abs(y - guess) - abs(best - guess)) <= 1e-9 and y > best
            ):
                best = y
        if abs(best - out[i - 1].real) > np.pi / 2:
            raise BranchAmbiguity(
                f"Re(Kd) jumps by {abs(best - out[i - 1].real):.3g} between grid points {i - 1} "
                f"and {i}; refine the grid"
            )
        out[i] = complex(best, x.imag)
    return out


def bloch_dispersion(grating: GratingSpec, omega_grid, include_absorption: bool = True) -> np.ndarray:
    """Complex Bloch wavevector K (m^-1) with Im K >= 0 and continuous Re K."""
    grid = np.asarray(omega_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("omega_grid must be a strictly increasing 1-D array")
    mp, _, _ = period_matrix(grating, grid, include_absorption)
    return track_branch(bloch_phase(mp)) / grating.period


def _interval_around(x: np.ndarray, metric: np.ndarray, start: int, threshold: float):
    if metric[start] <= threshold:
        raise NoGapDetected("metric below threshold at the gap peak")
    lo = start
    while lo > 0 and metric[lo - 1] > threshold:
        lo -= 1
    hi = start
    while hi < len(x) - 1 and metric[hi + 1] > threshold:
        hi += 1
    if lo == 0 or hi == len(x) - 1:
        raise NoGapDetected("high-metric region touches the grid edge; widen the grid")

    def cross(i, j):
        # linear interpolation between an outside point i and inside point j
        f = (threshold - metric[i]) / (metric[j] - metric[i])
        return x[i] + f * (x[j] - x[i])

    return cross(lo - 1, lo), cross(hi + 1, hi)


def _climb(metric: np.ndarray, i: int) -> int:
    while True:
        left = metric[i - 1] if i > 0 else -np.inf
        right = metric[i + 1] if i < len(metric) - 1 else -np.inf
        if left > metric[i] and left >= right:
            i -= 1
        elif right > metric[i]:
            i += 1
        else:
            return i


def gap_interval(band: BandStructure, criterion: str = "imK_half_max", level: float = 0.5,
                 center: float | None = None) -> tuple[float, float]:
    """Edges (gamma_a units) of the stop band under one detection criterion.

    ``imK_half_max``: Im K above half its in-gap maximum.
    ``imK_positive``: Im K above ``level`` times its maximum (band edges of a
    lossless grating for small ``level``).
    ``reflectivity_threshold``: R above ``level``.
    The in-gap maximum is found by climbing from the grid point nearest
    ``center`` (global maximum when None).
    """
    x = band.omega_grid
    if criterion in ("imK_half_max", "imK_positive"):
        metric = band.bloch_K.imag
    elif criterion == "reflectivity_threshold":
        metric = band.reflectivity
    else:
        raise ValueError(f"unknown gap criterion {criterion!r}")
    if center is None:
        peak = int(np.argmax(metric))
    else:
        peak = _climb(metric, int(np.argmin(np.abs(x - center))))
    peak_value = metric[peak]
    floor = 1e-9 * np.max(np.abs(band.bloch_K.real)) if criterion != "reflectivity_threshold" else 0
    if not peak_value > floor:
        raise NoGapDetected("no stop band on this grid")
    if criterion == "imK_half_max":
        threshold = 0.5 * peak_value
    elif criterion == "imK_positive":
        threshold = level * peak_value
    else:
        threshold = level
    return _interval_around(x, metric, peak, threshold)


def gap_width(band: BandStructure, criterion: str = "imK_half_max", level: float = 0.5,
              center: float | None = None) -> float:
    lo, hi = gap_interval(band, criterion, level, center)
    return float(hi - lo)

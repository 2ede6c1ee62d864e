"""Command-line scenario runner.

    eitbragg <subcommand> (--config PATH | --preset NAME) [--out DIR] [--threads N]

Subcommands: susceptibility, bandstructure, coefficients, soliton, propagate,
design-map (one per scenario kind), ``run`` (the kind named in the config)
and ``validate``. Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.constants import c as C_LIGHT

from . import __version__
from .atomic_medium import AtomicParams, FieldParams, chi3_self, chi_a, susceptibility_full
from .bandstructure import gap_interval, transfer_matrix_spectrum
from .cme import (CmeCoefficients, EnvelopeState, SolitonParams, analytic_soliton,
                  calibrate_k0_scale, cme_residual, derive_coefficients, gap_width_cme,
                  select_variant, soliton_velocity, soliton_width_time)
from .config import (PRESETS, SCENARIOS, ScenarioConfig, load_config, load_preset)
from .design import (Constraints, design_table, length_for_upper_endpoint, min_pulse_width,
                     nu_scan, power_for_lower_endpoint, soliton_period, workable_region)
from .errors import ConfigInvalid, EitBraggError, NoGapDetected, NumericalError
from .grating import GratingSpec, bragg_angle, build_grating
from .output import write_csv, write_manifest
from .propagator import (InjectedPulse, PropagationGrid, centroid_velocity, diagnostics,
                         propagate, shape_error, write_binary)

logger = logging.getLogger("eitbragg")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


@dataclass
class Context:
    """Everything derived from a config before any scenario-specific work."""

    config: ScenarioConfig
    atomic: AtomicParams
    fields: FieldParams
    grating: GratingSpec
    coeffs: CmeCoefficients
    bragg_angle: float | None

    def derived(self) -> dict:
        a, c = self.atomic, self.coeffs
        out = {
            "k0_scale": a.k0_scale,
            "K0_rad_per_s": a.K0,
            "K0_gamma_a": a.K0_reduced,
            "K1_per_s3_V2_per_m2": a.K1,
            "omega31_rad_per_s": a.omega31,
            "grating": self.grating.to_dict(),
            "coefficients": c.to_dict(),
            "validity": c.validity,
            "gap_width_cme_gamma_a": gap_width_cme(c) / a.gamma_a,
            "kappa_L": abs(c.kappa.real) * self.grating.L,
            "min_pulse_width_s": min_pulse_width(c) if c.kappa.real != 0 else None,
        }
        if self.bragg_angle is not None:
            out["bragg_angle_rad"] = self.bragg_angle
        return out


def build_context(cfg: ScenarioConfig) -> Context:
    fields = cfg.field_params()
    k0 = cfg.calibration.k0_scale
    if cfg.calibration.target_kappa_per_m is not None:
        k0 = calibrate_k0_scale(cfg.atomic_params(1.0), fields,
                                cfg.calibration.target_kappa_per_m)
    atomic = cfg.atomic_params(k0)
    geo = cfg.geometry
    grating = build_grating(atomic, fields, geo.L_m, k_B=geo.k_B_per_m,
                            slabs_per_period=geo.slabs_per_period)
    angle = bragg_angle(geo.k_s_per_m, grating.k_B) if geo.k_s_per_m is not None else None
    coeffs = derive_coefficients(atomic, fields, grating, A_eff=geo.A_eff_m2,
                                 delta_k=geo.delta_k_per_m)
    return Context(cfg, atomic, fields, grating, coeffs, angle)


def _grid(block) -> np.ndarray:
    return np.linspace(block.detuning_min_gamma_a, block.detuning_max_gamma_a, block.points)


# ---------------------------------------------------------------- scenarios

def _susceptibility(ctx: Context, out: Path, threads: int):
    cfg = ctx.config
    x = _grid(cfg.susceptibility)
    s2 = cfg.susceptibility.Omega_s_sq_gamma_a2
    s2 = 0.5 * ctx.fields.Omega_1**2 if s2 is None else s2
    f = ctx.fields.replace(Delta1=x, Omega_s_sq=s2)
    ca, cf, c3 = chi_a(ctx.atomic, f).value, susceptibility_full(ctx.atomic, f).value, \
        chi3_self(ctx.atomic, f).value
    h = cfg.config_hash()
    files = [
        write_csv(out / "chi_a.csv", {"Delta1 [gamma_a]": x, "Re chi_a [1]": ca.real,
                                      "Im chi_a [1]": ca.imag}, h,
                  [f"Omega_s^2 = {s2:g} gamma_a^2"]),
        write_csv(out / "chi_full.csv", {"Delta1 [gamma_a]": x, "Re chi [1]": cf.real,
                                         "Im chi [1]": cf.imag}, h,
                  [f"Omega_s^2 = {s2:g} gamma_a^2"]),
        write_csv(out / "chi3.csv", {"Delta1 [gamma_a]": x, "Re chi3 [m^2/V^2]": c3.real,
                                     "Im chi3 [m^2/V^2]": c3.imag}, h),
    ]
    # transparency dip: smallest absorption on the grid
    return files, {"Omega_s_sq_gamma_a2": s2,
                   "transparency_dip_gamma_a": float(x[np.argmin(np.abs(ca.imag))])}


def _gap_widths(band, center) -> dict:
    out = {}
    specs = [("imK_half_max", 0.5), ("reflectivity_threshold", 0.5)]
    if not band.include_absorption:
        specs.append(("imK_positive", 1e-3))
    for criterion, level in specs:
        try:
            lo, hi = gap_interval(band, criterion, level, center)
            out[criterion] = {"level": level, "edges_gamma_a": [lo, hi], "width_gamma_a": hi - lo}
        except NoGapDetected as err:
            out[criterion] = {"level": level, "error": str(err)}
    return out


def _bandstructure(ctx: Context, out: Path, threads: int):
    cfg = ctx.config
    b = cfg.bandstructure
    x = _grid(b)
    h = cfg.config_hash()
    files, report = [], {}
    for absorb in b.absorption:
        band = transfer_matrix_spectrum(ctx.grating, x, include_absorption=absorb,
                                        probe_intensity=b.probe_intensity_V2_per_m2,
                                        boundary=cfg.geometry.boundary,
                                        check_convergence=b.check_convergence, threads=threads)
        tag = "absorption" if absorb else "lossless"
        cols = band.csv_columns()
        cols["Re K [1/m]"] = band.bloch_K.real / ctx.grating.period
        cols["Im K [1/m]"] = band.bloch_K.imag / ctx.grating.period
        files.append(write_csv(out / f"bandstructure_{tag}.csv", cols, h,
                               [f"include_absorption = {absorb}",
                                f"boundary = {cfg.geometry.boundary}"]))
        report[tag] = {
            "gap": _gap_widths(band, center=ctx.fields.Delta1),
            "max_R": float(band.reflectivity.max()),
            "max_R_plus_T": float(np.max(band.reflectivity + band.transmissivity)),
            "slab_doubling_max_abs_dR": band.convergence_delta,
        }
    report["gap_width_cme_gamma_a"] = gap_width_cme(ctx.coeffs) / ctx.atomic.gamma_a
    return files, report


def _coefficients(ctx: Context, out: Path, threads: int):
    c = ctx.coeffs
    cols = {
        "Delta1 [gamma_a]": [ctx.fields.Delta1],
        "v_g [m/s]": [c.v_g],
        "Re kappa [1/m]": [c.kappa.real], "Im kappa [1/m]": [c.kappa.imag],
        "Re gamma_nl [1/(W m)]": [c.gamma_nl.real], "Im gamma_nl [1/(W m)]": [c.gamma_nl.imag],
        "Re gamma_field [m/V^2]": [c.gamma_field.real],
        "Im gamma_field [m/V^2]": [c.gamma_field.imag],
        "alpha [1/m]": [c.alpha],
        "n_bar [1]": [c.n_bar],
        "gap width [gamma_a]": [gap_width_cme(c) / ctx.atomic.gamma_a],
    }
    return [write_csv(out / "coefficients.csv", cols, ctx.config.config_hash())], {}


def _resolve_variant(ctx: Context) -> tuple[str, dict]:
    s = ctx.config.soliton
    if s.variant != "auto":
        return s.variant, {"variant": s.variant, "selection": "configured"}
    sel = select_variant(ctx.coeffs, phase=s.phase)
    if sel["winner"] is None:
        raise NumericalError(
            f"residual oracle could not single out a soliton variant: {sel['max_residual']}"
        )
    return sel["winner"], {"variant": sel["winner"], "selection": "residual_oracle",
                           "oracle": sel}


def _soliton(ctx: Context, out: Path, threads: int):
    s = ctx.config.soliton
    variant, report = _resolve_variant(ctx)
    sp = SolitonParams(s.nu, s.psi_rad)
    k = abs(ctx.coeffs.kappa.real)
    half = 0.5 * s.z_span_per_kappa / k
    z = np.linspace(-half, half, s.points)
    ap, am = analytic_soliton(ctx.coeffs, sp, z, 0.0, variant, s.phase)
    f = write_csv(out / "soliton_profile.csv", {
        "z [m]": z, "Re A+ [sqrt(W)]": ap.real, "Im A+ [sqrt(W)]": ap.imag,
        "Re A- [sqrt(W)]": am.real, "Im A- [sqrt(W)]": am.imag,
    }, ctx.config.config_hash(), [f"variant = {variant}", f"phase = {s.phase}",
                                  f"nu = {s.nu:g}", f"psi = {s.psi_rad:.15g} rad"])
    report.update({
        "nu": s.nu, "psi_rad": s.psi_rad, "phase": s.phase,
        "velocity_m_per_s": soliton_velocity(ctx.coeffs, sp),
        "T0_s": soliton_width_time(ctx.coeffs, sp) if s.nu != 0 else None,
        "residual": cme_residual(ctx.coeffs, sp, variant, s.phase),
    })
    return [f], report


def _run_propagation(ctx: Context, n_z: int, variant: str | None):
    cfg = ctx.config
    p, s = cfg.propagation, cfg.soliton
    c = ctx.coeffs
    k = abs(c.kappa.real)
    if k == 0:
        raise ConfigInvalid("propagation needs a grating with nonzero kappa (Omega_1 > 0)")
    sp = SolitonParams(s.nu, s.psi_rad)
    lossless = c.lossless()
    if p.t_end_s is not None:
        t_end = p.t_end_s
    elif p.initial == "soliton" and s.nu != 0:
        T0 = soliton_width_time(lossless, sp)
        z0 = soliton_period(lossless, T0, s.nu)
        t_end = p.distance_soliton_periods * z0 / abs(soliton_velocity(c, sp))
    else:
        raise ConfigInvalid("propagation.t_end_s is required unless a moving soliton is launched")
    stride = max(1, round(p.snapshot_stride * (n_z - 1) / (p.n_z - 1)))
    grid = PropagationGrid(p.z_min_per_kappa / k, p.z_max_per_kappa / k, n_z, t_end,
                           snapshot_stride=stride)
    if p.initial == "soliton":
        ap, am = analytic_soliton(c, sp, grid.z, 0.0, variant, s.phase)
    else:
        ap = am = np.zeros(n_z, complex)
    init = EnvelopeState(grid.z, ap, am, 0.0)
    boundary = "open"
    if p.injected is not None:
        j = p.injected
        boundary = InjectedPulse(j.shape, j.T0_s, j.P0_W, j.t_center_s, j.detuning_rad_per_s)
    traj = propagate(c, init, grid, boundary=boundary, include_loss=p.include_loss)
    return grid, init, traj, sp


def _propagate(ctx: Context, out: Path, threads: int):
    cfg = ctx.config
    p = cfg.propagation
    variant, report = (_resolve_variant(ctx) if p.initial == "soliton" else (None, {}))
    grid, init, traj, sp = _run_propagation(ctx, p.n_z, variant)
    h = cfg.config_hash()
    dt = grid.time_step(ctx.coeffs.v_g)
    n_snap = len(traj.states)
    t = np.repeat(traj.times, grid.n_z)
    zz = np.tile(grid.z, n_snap)
    Ap = np.concatenate([st.A_plus for st in traj.states])
    Am = np.concatenate([st.A_minus for st in traj.states])
    files = [write_csv(out / "trajectory.csv", {
        "t [s]": t, "z [m]": zz, "Re A+ [sqrt(W)]": Ap.real, "Im A+ [sqrt(W)]": Ap.imag,
        "Re A- [sqrt(W)]": Am.real, "Im A- [sqrt(W)]": Am.imag}, h,
        [f"scheme = {traj.scheme}", f"n_z = {grid.n_z}", f"dz = {grid.dz:.15g} m",
         f"dt = {dt:.15g} s"])]
    recs = diagnostics(traj)
    files.append(write_csv(out / "diagnostics.csv", {
        "t [s]": [r["t"] for r in recs], "energy [J]": [r["energy"] / ctx.coeffs.v_g
                                                        for r in recs],
        "centroid [m]": [r["centroid"] for r in recs],
        "peak amplitude [sqrt(W)]": [r["peak"] for r in recs]}, h))
    if p.binary:
        write_binary(out / "trajectory.bin", traj, dt)
        files.append(out / "trajectory.bin")
    e0, e1 = recs[0]["energy"], recs[-1]["energy"]
    report.update({
        "scheme": traj.scheme,
        "grid": {"z_min_m": grid.z_min, "z_max_m": grid.z_max, "n_z": grid.n_z,
                 "dz_m": grid.dz, "dt_s": dt, "t_end_s": grid.t_end,
                 "snapshots": n_snap},
        "include_loss": p.include_loss,
        "failed": traj.failed,
        "message": traj.message,
        "energy_relative_change": (e1 / e0 - 1) if e0 > 0 else None,
    })
    if p.initial == "soliton" and len(recs) > 2 and not traj.failed:
        report["centroid_velocity_m_per_s"] = centroid_velocity(recs)
        report["expected_velocity_m_per_s"] = soliton_velocity(ctx.coeffs, sp)
    if p.convergence_check and not traj.failed:
        report["convergence"] = _convergence(ctx, traj, init, variant)
    if traj.failed:
        write_manifest(out / "manifest_propagate.json", cfg, {**ctx.derived(), **report})
        raise NumericalError(traj.message)
    return files, report


def _convergence(ctx, traj, init, variant) -> dict:
    """Rerun with half the step; compare final states (and the launched shape for solitons)."""
    p = ctx.config.propagation
    fine_n = 2 * p.n_z - 1
    _, fine_init, fine, _ = _run_propagation(ctx, fine_n, variant)
    coarse_last, fine_last = traj.states[-1], fine.states[-1]
    diff = np.sqrt(np.sum(np.abs(fine_last.A_plus[::2] - coarse_last.A_plus) ** 2
                          + np.abs(fine_last.A_minus[::2] - coarse_last.A_minus) ** 2)
                   / max(np.sum(fine_last.intensity()[::2]), 1e-300))
    out = {"fine_n_z": fine_n, "coarse_vs_fine_relative_l2": float(diff),
           "final_times_s": [coarse_last.t, fine_last.t]}
    if p.initial == "soliton" and p.t_end_s is None and p.injected is None:
        V = soliton_velocity(ctx.coeffs, SolitonParams(ctx.config.soliton.nu,
                                                       ctx.config.soliton.psi_rad))
        ec, _ = shape_error(coarse_last, init, V * coarse_last.t)
        ef, _ = shape_error(fine_last, fine_init, V * fine_last.t)
        out.update({"shape_error_coarse": ec, "shape_error_fine": ef,
                    "shape_error_ratio": ec / ef if ef > 0 else None})
    return out


def _design_map(ctx: Context, out: Path, threads: int):
    d = ctx.config.design
    c = ctx.coeffs
    L = ctx.config.geometry.L_m
    calibration = {}
    if d.calibrate_length:
        if d.calibrate_interval is None:
            raise ConfigInvalid("design.calibrate_length needs design.calibrate_interval")
        L = length_for_upper_endpoint(c, d.calibrate_T0_s, d.calibrate_interval[1], d.variant)
        calibration["L_m"] = L
    P_c = d.P_c_W
    if P_c is None:
        if d.calibrate_interval is None:
            raise ConfigInvalid("design needs P_c_W or calibrate_interval")
        P_c = power_for_lower_endpoint(c, d.calibrate_T0_s, d.calibrate_interval[0],
                                       d.power_margin, d.variant)
        calibration["P_c_W"] = P_c
    cons = Constraints(P_c=P_c, L=L, power_margin=d.power_margin, min_T_factor=d.min_T_factor)
    h = ctx.config.config_hash()
    nus = nu_scan(d.nu_min, d.nu_max, d.csv_points_per_decade)
    files, regions = [], []
    for T0 in d.T0_s:
        table = design_table(c, T0, cons, nus, d.variant)
        files.append(write_csv(out / f"design_T0_{T0 * 1e6:g}us.csv", table, h,
                               [f"T0 = {T0:.15g} s", f"P_c = {P_c:.15g} W", f"L = {L:.15g} m",
                                f"variant = {d.variant}"]))
        reg = workable_region(c, T0, cons, d.variant, d.nu_min, d.nu_max, d.points_per_decade)
        regions.append({"T0_s": T0, "intervals": reg.intervals, "binding": reg.binding,
                        "empty": reg.empty, "pulse_width_floor_ok": reg.floor_ok,
                        **reg.details})
    return files, {"constraints": {"P_c_W": P_c, "L_m": L, "power_margin": d.power_margin,
                                   "min_T_factor": d.min_T_factor},
                   "calibration": calibration, "variant": d.variant, "regions": regions}


SCENARIO_RUNNERS = {
    "susceptibility": _susceptibility,
    "bandstructure": _bandstructure,
    "coefficients": _coefficients,
    "soliton": _soliton,
    "propagate": _propagate,
    "design-map": _design_map,
}


def run_scenario(cfg: ScenarioConfig, scenario: str | None = None, out: str | Path | None = None,
                 threads: int = 1) -> tuple[list[Path], Path]:
    """Run one scenario; returns (CSV paths, manifest path). Raises package errors."""
    scenario = scenario or cfg.scenario
    if scenario not in SCENARIO_RUNNERS:
        raise ConfigInvalid(f"scenario must be one of {', '.join(SCENARIOS)}, got {scenario!r}")
    out = Path(out if out is not None else cfg.output_dir)
    ctx = build_context(cfg)
    files, report = SCENARIO_RUNNERS[scenario](ctx, out, threads)
    manifest = write_manifest(out / f"manifest_{scenario.replace('-', '_')}.json", cfg, {
        "scenario": scenario,
        "outputs": sorted(Path(f).name for f in files),
        **ctx.derived(),
        "results": report,
    })
    return [Path(f) for f in files], manifest


def validate_config(path: str | Path) -> str:
    """Schema and physics check plus a preview of K0, n_bar, kappa and v_g. Writes nothing."""
    cfg = load_config(path)
    return _preview(cfg, str(path))


def _preview(cfg: ScenarioConfig, source: str) -> str:
    ctx = build_context(cfg)
    c = ctx.coeffs
    lines = [
        f"{source}: valid (scenario: {cfg.scenario or 'none'})",
        f"  k0_scale    = {ctx.atomic.k0_scale:.6g}",
        f"  K0          = {ctx.atomic.K0:.6g} rad/s ({ctx.atomic.K0_reduced:.6g} gamma_a)",
        f"  n_bar       = {c.n_bar:.12g}",
        f"  kappa       = {c.kappa.real:.6g} {c.kappa.imag:+.6g}i 1/m",
        f"  v_g         = {c.v_g:.6g} m/s ({c.v_g / C_LIGHT:.3g} c)",
        f"  gap width   = {gap_width_cme(c) / ctx.atomic.gamma_a:.4g} gamma_a",
        f"  |kappa| L   = {abs(c.kappa.real) * ctx.grating.L:.4g}",
    ]
    if ctx.bragg_angle is not None:
        lines.append(f"  Bragg angle = {ctx.bragg_angle:.6g} rad")
    return "\n".join(lines)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eitbragg", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*SCENARIOS, "run", "validate"):
        sp = sub.add_parser(name, help="check a config without writing outputs"
                            if name == "validate" else f"run the {name} scenario")
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="YAML scenario file")
        src.add_argument("--preset", choices=PRESETS, help="shipped scenario file")
        if name != "validate":
            sp.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
            sp.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_preset(args.preset) if args.preset else load_config(args.config)
        source = f"preset {args.preset}" if args.preset else str(args.config)
        if args.command == "validate":
            print(_preview(cfg, source))
            return EXIT_OK
        if args.threads < 1:
            raise ConfigInvalid("--threads must be >= 1")
        scenario = cfg.scenario if args.command == "run" else args.command
        if scenario is None:
            raise ConfigInvalid(f"{source}: 'run' needs a scenario key in the config")
        files, manifest = run_scenario(cfg, scenario, args.out, args.threads)
        for f in files:
            print(f)
        print(manifest)
        return EXIT_OK
    except NumericalError as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigInvalid, EitBraggError) as err:
        print(f"configuration error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

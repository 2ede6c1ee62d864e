"""YAML scenario configuration.

Every physical key carries its unit as a suffix (``_m``, ``_gamma_a``,
``_rad_per_s`` ...). Unknown keys are rejected at every nesting level.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .atomic_medium import GAMMA_A_DEFAULT, AtomicParams, FieldParams
from .errors import ConfigInvalid

SCENARIOS = ("susceptibility", "bandstructure", "coefficients", "soliton", "propagate",
             "design-map")
PRESETS = ("fig2", "fig3", "fig4", "soliton-demo", "default")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class AtomicBlock(_Strict):
    gamma_a_rad_per_s: float = Field(GAMMA_A_DEFAULT, gt=0)
    Gamma2_gamma_a: float = Field(0.01, ge=0)
    Gamma3_gamma_a: float = Field(1.0, gt=0)
    Gamma4_gamma_a: float = Field(1.0, gt=0)
    Gamma5_gamma_a: float = Field(1.0, gt=0)
    mu13_C_m: float = Field(2.5e-29, gt=0)
    mu24_C_m: float = Field(2.5e-29, ge=0)
    rho_per_m3: float = Field(1e18, gt=0)
    lambda_p_m: float = Field(780.241e-9, gt=0)


class CalibrationBlock(_Strict):
    k0_scale: float = Field(1.0, gt=0)
    target_kappa_per_m: Optional[float] = None


class FieldsBlock(_Strict):
    Delta1_gamma_a: float = 0.0
    Delta2_gamma_a: float = 0.0
    Delta4_gamma_a: float = 5.0
    Delta5_gamma_a: float = 20.0
    Omega_c_gamma_a: float = Field(10.0, ge=0)
    Omega_1_gamma_a: float = Field(10.0, ge=0)
    Omega_p_prime_gamma_a: float = Field(0.0, ge=0)


class GeometryBlock(_Strict):
    L_m: float = Field(5e-3, gt=0)
    A_eff_m2: float = Field(7.85e-9, gt=0)
    boundary: Literal["index_matched", "vacuum"] = "index_matched"
    k_B_per_m: Optional[float] = Field(None, gt=0)
    k_s_per_m: Optional[float] = Field(None, gt=0)
    slabs_per_period: int = Field(64, ge=8)
    delta_k_per_m: float = 0.0


class _Grid(_Strict):
    detuning_min_gamma_a: float = -3.0
    detuning_max_gamma_a: float = 3.0
    points: int = Field(601, ge=2)


class SusceptibilityBlock(_Grid):
    Omega_s_sq_gamma_a2: Optional[float] = Field(None, ge=0)


class BandstructureBlock(_Grid):
    detuning_min_gamma_a: float = -1.0
    detuning_max_gamma_a: float = 1.0
    points: int = Field(2001, ge=3)
    absorption: list[bool] = [True, False]
    probe_intensity_V2_per_m2: float = Field(0.0, ge=0)
    check_convergence: bool = True


class SolitonBlock(_Strict):
    nu: float = Field(0.3, gt=-1, lt=1)
    psi_rad: float = Field(1.5707963267948966, gt=0, lt=3.141592653589793)
    variant: Literal["auto", "printed", "corrected"] = "auto"
    phase: Literal["moving", "printed"] = "moving"
    z_span_per_kappa: float = Field(30.0, gt=0)
    points: int = Field(2001, ge=16)


class InjectionBlock(_Strict):
    shape: Literal["sech", "gaussian", "cw"] = "sech"
    T0_s: float = Field(gt=0)
    P0_W: float = Field(gt=0)
    t_center_s: float = 0.0
    detuning_rad_per_s: float = 0.0


class PropagationBlock(_Strict):
    initial: Literal["soliton", "zero"] = "soliton"
    n_z: int = Field(1024, ge=256)
    z_min_per_kappa: float = -15.0
    z_max_per_kappa: float = 25.0
    distance_soliton_periods: float = Field(1.0, gt=0)
    t_end_s: Optional[float] = Field(None, gt=0)
    snapshot_stride: int = Field(16, ge=1)
    include_loss: bool = False
    binary: bool = False
    convergence_check: bool = True
    injected: Optional[InjectionBlock] = None


class DesignBlock(_Strict):
    T0_s: list[float] = [2e-6, 1e-5]
    P_c_W: Optional[float] = Field(None, gt=0)
    calibrate_interval: Optional[tuple[float, float]] = (0.05, 0.25)
    calibrate_T0_s: float = Field(2e-6, gt=0)
    calibrate_length: bool = False
    power_margin: float = Field(10.0, gt=0)
    min_T_factor: float = Field(10.0, gt=0)
    nu_min: float = Field(1e-5, gt=0, lt=1)
    nu_max: float = Field(0.99, gt=0, lt=1)
    points_per_decade: int = Field(2000, ge=10)
    csv_points_per_decade: int = Field(200, ge=10)
    variant: Literal["printed", "corrected"] = "corrected"

    @field_validator("T0_s")
    @classmethod
    def _positive(cls, v):
        if not v or any(x <= 0 for x in v):
            raise ValueError("T0_s must be a non-empty list of positive durations")
        return v


class ScenarioConfig(_Strict):
    scenario: Optional[Literal[SCENARIOS]] = None  # type: ignore[valid-type]
    output_dir: str = "out"
    atomic: AtomicBlock = AtomicBlock()
    calibration: CalibrationBlock = CalibrationBlock()
    fields: FieldsBlock = FieldsBlock()
    geometry: GeometryBlock = GeometryBlock()
    susceptibility: SusceptibilityBlock = SusceptibilityBlock()
    bandstructure: BandstructureBlock = BandstructureBlock()
    soliton: SolitonBlock = SolitonBlock()
    propagation: PropagationBlock = PropagationBlock()
    design: DesignBlock = DesignBlock()

    def atomic_params(self, k0_scale: float | None = None) -> AtomicParams:
        a = self.atomic
        return AtomicParams(
            gamma_a=a.gamma_a_rad_per_s, Gamma2=a.Gamma2_gamma_a, Gamma3=a.Gamma3_gamma_a,
            Gamma4=a.Gamma4_gamma_a, Gamma5=a.Gamma5_gamma_a, mu13=a.mu13_C_m, mu24=a.mu24_C_m,
            rho=a.rho_per_m3, lambda_p=a.lambda_p_m,
            k0_scale=self.calibration.k0_scale if k0_scale is None else k0_scale,
        )

    def field_params(self) -> FieldParams:
        f = self.fields
        return FieldParams(
            Delta1=f.Delta1_gamma_a, Delta2=f.Delta2_gamma_a, Delta4=f.Delta4_gamma_a,
            Delta5=f.Delta5_gamma_a, Omega_c=f.Omega_c_gamma_a, Omega_1=f.Omega_1_gamma_a,
            Omega_p_prime=f.Omega_p_prime_gamma_a,
        )

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _format_validation(err: ValidationError, source: str) -> str:
    lines = [f"{source}: configuration invalid"]
    for e in err.errors():
        where = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  {where}: {e['msg']}")
    return "\n".join(lines)


def parse_config(data: dict | None, source: str = "<config>") -> ScenarioConfig:
    try:
        cfg = ScenarioConfig.model_validate(data or {})
    except ValidationError as err:
        raise ConfigInvalid(_format_validation(err, source)) from None
    check_physics(cfg, source)
    return cfg


def check_physics(cfg: ScenarioConfig, source: str = "<config>") -> None:
    a, f = cfg.atomic, cfg.fields
    if not f.Omega_c_gamma_a**2 > a.Gamma2_gamma_a * a.Gamma3_gamma_a:
        raise ConfigInvalid(
            f"{source}: fields.Omega_c_gamma_a={f.Omega_c_gamma_a} violates the EIT condition "
            f"|Omega_c|^2 > Gamma2*Gamma3 = {a.Gamma2_gamma_a * a.Gamma3_gamma_a:g}; "
            "no transparency window"
        )
    if cfg.design.nu_min >= cfg.design.nu_max:
        raise ConfigInvalid(f"{source}: design.nu_min must be below design.nu_max")
    for name in ("susceptibility", "bandstructure"):
        g = getattr(cfg, name)
        if g.detuning_max_gamma_a <= g.detuning_min_gamma_a:
            raise ConfigInvalid(f"{source}: {name}.detuning_max_gamma_a must exceed detuning_min")


def load_yaml(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigInvalid(f"{path}: cannot read ({err.strerror})") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigInvalid(f"{path}: YAML syntax error: {err}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigInvalid(f"{path}: top level must be a mapping")
    return data or {}


def load_config(path: str | Path) -> ScenarioConfig:
    return parse_config(load_yaml(path), str(path))


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigInvalid(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return Path(str(resources.files("eitbragg") / "presets" / f"{name}.yaml"))


def load_preset(name: str) -> ScenarioConfig:
    return load_config(preset_path(name))

import numpy as np
import pytest
from scipy.constants import c

from eitbragg.bandstructure import bloch_dispersion
from eitbragg.cme import (CmeCoefficients, EnvelopeState, SolitonParams, analytic_soliton,
                          linear_dispersion, soliton_velocity, soliton_width_time)
from eitbragg.design import soliton_period
from eitbragg.errors import CflViolation
from eitbragg.grating import GratingSpec
from eitbragg.propagator import (InjectedPulse, PropagationGrid, Trajectory, centroid_velocity,
                                 diagnostics, l2_distance, propagate, read_binary, shape_error,
                                 write_binary)

SP = SolitonParams(0.3, np.pi / 2)


def unit_coeffs(kappa=1.0, gamma=1.0, v_g=1.0, alpha=0.0):
    return CmeCoefficients(v_g=v_g, kappa=complex(kappa), gamma_nl=complex(gamma),
                           gamma_field=complex(gamma), alpha=alpha)


def soliton_run(coeffs, n_z, include_loss=False, stride=None):
    """Analytic soliton launched on [-15, 25]/|kappa| and run for one soliton period."""
    k = abs(coeffs.kappa.real)
    V = soliton_velocity(coeffs, SP)
    z0 = soliton_period(coeffs, soliton_width_time(coeffs, SP), SP.nu)
    grid = PropagationGrid(-15 / k, 25 / k, n_z, t_end=z0 / V,
                           snapshot_stride=stride or max(1, n_z // 64))
    init = EnvelopeState(grid.z, *analytic_soliton(coeffs, SP, grid.z))
    return init, propagate(coeffs, init, grid, include_loss=include_loss), V


@pytest.fixture(scope="module")
def soliton_runs(coeffs_cal):
    lossless = coeffs_cal.lossless()
    return {n: soliton_run(lossless, n) for n in (1024, 2048)}


def test_zero_field_stays_zero(coeffs_cal):
    grid = PropagationGrid(0, 1e-2, 256, t_end=1e-6, snapshot_stride=10)
    init = EnvelopeState(grid.z, np.zeros(256), np.zeros(256))
    traj = propagate(coeffs_cal, init, grid)
    assert len(traj.states) > 2 and not traj.failed
    for s in traj.states:
        assert not np.any(s.A_plus) and not np.any(s.A_minus)


def test_snapshot_times_increase(soliton_runs):
    _, traj, _ = soliton_runs[1024]
    assert np.all(np.diff(traj.times) > 0)


def test_soliton_keeps_its_shape(soliton_runs):
    init, traj, V = soliton_runs[1024]
    last = traj.states[-1]
    err, shift = shape_error(last, init, guess_shift=V * last.t)
    assert err < 0.02
    assert shift == pytest.approx(V * last.t, rel=0.02)


def test_soliton_conserves_energy(soliton_runs):
    _, traj, _ = soliton_runs[1024]
    e = np.array([r["energy"] for r in diagnostics(traj)])
    assert np.max(np.abs(e / e[0] - 1)) < 1e-3


def test_soliton_centroid_moves_at_nu_vg(soliton_runs, coeffs_cal):
    _, traj, V = soliton_runs[1024]
    assert centroid_velocity(diagnostics(traj)) == pytest.approx(SP.nu * coeffs_cal.v_g, rel=0.02)


def test_halving_step_reduces_shape_error(soliton_runs):
    errors = []
    for n in (1024, 2048):
        init, traj, V = soliton_runs[n]
        errors.append(shape_error(traj.states[-1], init, V * traj.states[-1].t)[0])
    assert errors[0] / errors[1] >= 3


def test_lossy_energy_never_increases(coeffs_cal):
    _, traj, _ = soliton_run(coeffs_cal, 512, include_loss=True, stride=1)
    e = np.array([r["energy"] for r in diagnostics(traj)])
    assert np.all(np.diff(e) <= 1e-12 * e[0])
    assert e[-1] < 0.999 * e[0]


def test_in_gap_injection_decays_at_bloch_rate():
    omega = 2 * np.pi * c / 780e-9
    gamma_unit = 1e10
    g = GratingSpec.synthetic(1e-4, 2e-5, L=0.3, omega_31=omega, gamma_a=gamma_unit)
    n = g.n_bar
    kappa = g.delta_chi.real * omega / (4 * n * c)
    coeffs = CmeCoefficients(v_g=c / n, kappa=complex(kappa), gamma_nl=0j, gamma_field=0j,
                             n_bar=n)
    k, T = abs(kappa), 1 / (abs(kappa) * c / n)
    detuning = 0.5 * k * coeffs.v_g
    K = bloch_dispersion(g, detuning / gamma_unit + np.array([-1e-3, 0.0, 1e-3]), False)[1]

    grid = PropagationGrid(0, 10 / k, 256, t_end=100 * T, snapshot_stride=10**6)
    init = EnvelopeState(grid.z, np.zeros(256), np.zeros(256))
    source = InjectedPulse("cw", T0=8 * T, P0=1e-6, t_center=30 * T, detuning=detuning)
    last = propagate(coeffs, init, grid, boundary=source).states[-1]
    window = (grid.z > 1 / k) & (grid.z < 5 / k)
    rate = -np.polyfit(grid.z[window], np.log(np.abs(last.A_plus[window])), 1)[0]
    assert rate == pytest.approx(K.imag, rel=0.03)


def test_linear_pulse_travels_at_grating_group_velocity():
    coeffs = unit_coeffs(gamma=0.0)
    delta = 2.0  # out of gap, in units of kappa
    q = np.sqrt(delta**2 - 1)
    grid = PropagationGrid(-100, 300, 2001, t_end=150.0, snapshot_stride=50)
    z = grid.z
    # Bloch eigenmode of the linear equations under a wide Gaussian window
    env = np.exp(-0.5 * (z / 20) ** 2) * np.exp(1j * q * z)
    init = EnvelopeState(z, env, (q - delta) * env)
    traj = propagate(coeffs, init, grid)
    V, _ = linear_dispersion(coeffs, delta)
    assert centroid_velocity(diagnostics(traj)) == pytest.approx(V, rel=0.03)


def test_lossless_linear_energy_exact():
    coeffs = unit_coeffs(gamma=0.0)
    grid = PropagationGrid(-50, 50, 501, t_end=10.0)
    z = grid.z
    init = EnvelopeState(z, np.exp(-z**2 / 8), 0.5j * np.exp(-z**2 / 8))
    traj = propagate(coeffs, init, grid)
    assert traj.states[-1].energy() == pytest.approx(init.energy(), rel=1e-13)


def test_blow_up_returns_partial_trajectory():
    coeffs = unit_coeffs(alpha=-1.0)  # gain
    grid = PropagationGrid(-20, 20, 401, t_end=30.0, snapshot_stride=5)
    z = grid.z
    init = EnvelopeState(z, 1e-2 / np.cosh(z), np.zeros_like(z))
    traj = propagate(coeffs, init, grid, include_loss=True)
    assert traj.failed and "blow-up" in traj.message
    assert traj.states[-1].t < 30.0
    assert np.all(np.isfinite(traj.states[-1].A_plus))


def test_misaligned_time_step_rejected():
    grid = PropagationGrid(0, 1, 256, t_end=1.0, dt=1.01 / 255)
    init = EnvelopeState(grid.z, np.zeros(256), np.zeros(256))
    with pytest.raises(CflViolation):
        propagate(unit_coeffs(), init, grid)


def test_grid_validation():
    with pytest.raises(ValueError):
        PropagationGrid(0, 1, 255, t_end=1.0)
    with pytest.raises(ValueError):
        PropagationGrid(1, 0, 256, t_end=1.0)
    with pytest.raises(ValueError):
        PropagationGrid(0, 1, 256, t_end=0.0)


def test_initial_state_must_match_grid():
    grid = PropagationGrid(0, 1, 256, t_end=1.0)
    wrong = EnvelopeState(np.linspace(0, 2, 256), np.zeros(256), np.zeros(256))
    with pytest.raises(ValueError):
        propagate(unit_coeffs(), wrong, grid)
    with pytest.raises(ValueError):
        propagate(unit_coeffs(), EnvelopeState(grid.z, np.zeros(256), np.zeros(256)), grid,
                  boundary="periodic")


def test_single_snapshot_diagnostics():
    z = np.linspace(-5, 5, 256)
    s = EnvelopeState(z, 1 / np.cosh(z), 0.5 / np.cosh(z))
    recs = diagnostics(Trajectory(states=[s]), reference=lambda t: s)
    assert len(recs) == 1
    assert recs[0]["l2_to_reference"] == 0
    assert recs[0]["centroid"] == pytest.approx(0, abs=1e-12)
    assert recs[0]["peak"] == pytest.approx(np.sqrt(1.25), rel=1e-3)
    assert l2_distance(s, s) == 0


@pytest.mark.parametrize("shape", ["sech", "gaussian", "cw"])
def test_injected_pulse_shapes(shape):
    p = InjectedPulse(shape, T0=1.0, P0=4.0, t_center=0.0)
    assert abs(p(0.0)) == pytest.approx(2.0 if shape != "cw" else 1.0)
    assert abs(p(50.0)) == pytest.approx(0.0 if shape != "cw" else 2.0, abs=1e-12)


def test_injected_pulse_rejects_unknown_shape():
    with pytest.raises(ValueError):
        InjectedPulse("square", T0=1.0, P0=1.0)(0.0)


def test_injected_pulse_enters_domain():
    coeffs = unit_coeffs(kappa=0.0, gamma=0.0)
    grid = PropagationGrid(0, 100, 1001, t_end=60.0, snapshot_stride=10**6)
    init = EnvelopeState(grid.z, np.zeros(1001), np.zeros(1001))
    traj = propagate(coeffs, init, grid, boundary=InjectedPulse("sech", T0=2.0, P0=1.0,
                                                               t_center=20.0))
    last = traj.states[-1]
    # a free pulse arrives intact at z = v_g (t - t_center)
    assert grid.z[np.argmax(np.abs(last.A_plus))] == pytest.approx(40.0, abs=0.2)
    assert last.energy() == pytest.approx(2 * 2.0, rel=1e-3)


def test_binary_round_trip(tmp_path, soliton_runs):
    _, traj, _ = soliton_runs[1024]
    path = tmp_path / "traj.bin"
    write_binary(path, traj, dt=1.5e-9)
    back, dt = read_binary(path)
    assert dt == 1.5e-9 and len(back.states) == len(traj.states)
    for a, b in zip(traj.states, back.states):
        assert a.t == b.t
        np.testing.assert_array_equal(a.A_plus, b.A_plus)
        np.testing.assert_array_equal(a.A_minus, b.A_minus)
        np.testing.assert_allclose(a.z_grid, b.z_grid, rtol=0, atol=1e-12 * a.dz * len(a.z_grid))


def test_binary_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"NOTATRAJ" + bytes(40))
    with pytest.raises(ValueError):
        read_binary(path)

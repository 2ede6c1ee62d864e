import json
import subprocess
import sys

import pytest
import yaml

from eitbragg.cli import main, run_scenario, validate_config
from eitbragg.config import PRESETS, load_preset, load_yaml, parse_config, preset_path
from eitbragg.errors import ConfigInvalid, GeometryInfeasible
from eitbragg.output import csv_body, read_csv

FIGURE_PRESETS = ("fig2", "fig3", "fig4", "soliton-demo")


def write_config(tmp_path, edit=None, name="cfg.yaml"):
    data = load_yaml(preset_path("default"))
    if edit:
        edit(data)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def preset_runs(tmp_path_factory):
    runs = {}
    for name in (*FIGURE_PRESETS, "default"):
        out = tmp_path_factory.mktemp(name)
        code = main(["run", "--preset", name, "--out", str(out)])
        runs[name] = (code, out)
    return runs


@pytest.mark.parametrize("name", (*FIGURE_PRESETS, "default"))
def test_presets_run(preset_runs, name):
    code, out = preset_runs[name]
    assert code == 0
    manifests = list(out.glob("manifest_*.json"))
    assert len(manifests) == 1
    doc = json.loads(manifests[0].read_text())
    assert doc["config_sha256"] == load_preset(name).config_hash()
    for f in doc["outputs"]:
        assert (out / f).exists()


def test_fig2_outputs(preset_runs):
    _, out = preset_runs["fig2"]
    header, data = read_csv(out / "chi_a.csv")
    assert header[0] == "Delta1 [gamma_a]"
    assert data[0, 0] == -3 and data[-1, 0] == 3
    assert any("Im" in h for h in header) and any("Re" in h for h in header)
    header3, _ = read_csv(out / "chi3.csv")
    assert any("Re" in h for h in header3) and any("Im" in h for h in header3)


def test_fig3_outputs_both_absorption_settings(preset_runs):
    _, out = preset_runs["fig3"]
    for f in ("bandstructure_absorption.csv", "bandstructure_lossless.csv"):
        header, _ = read_csv(out / f)
        assert "R [1]" in header and any(h.startswith("Im K") for h in header)


def test_fig4_outputs_per_width(preset_runs):
    _, out = preset_runs["fig4"]
    for us in (2, 10):
        header, data = read_csv(out / f"design_T0_{us}us.csv")
        assert header == ["nu [1]", "P_in [W]", "z0 [m]", "feasible [0/1]"]
        assert set(data[:, 3]) <= {0.0, 1.0}


def test_soliton_demo_records_variant_and_convergence(preset_runs):
    _, out = preset_runs["soliton-demo"]
    doc = json.loads((out / "manifest_propagate.json").read_text())
    res = doc["results"]
    assert res["variant"] == res["oracle"]["winner"] == "corrected"
    assert res["convergence"]["shape_error_ratio"] >= 3
    assert abs(res["energy_relative_change"]) < 1e-3
    assert (out / "trajectory.bin").exists()


def test_every_csv_column_declares_units(preset_runs):
    for _, out in preset_runs.values():
        for f in out.glob("*.csv"):
            header, _ = read_csv(f)
            assert all(h.endswith("]") and " [" in h for h in header), f


def test_identical_config_gives_identical_csv(tmp_path):
    for run in ("a", "b"):
        assert main(["susceptibility", "--preset", "fig2",
                     "--out", str(tmp_path / run)]) == 0
    for f in sorted((tmp_path / "a").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest_susceptibility.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest_susceptibility.json").read_text())
    ma.pop("created_utc"), mb.pop("created_utc")
    assert ma == mb


def test_thread_count_does_not_change_output(tmp_path):
    def edit(d):
        d["scenario"] = "bandstructure"
        d["bandstructure"] = {"points": 201, "absorption": [False]}

    cfg = write_config(tmp_path, edit)
    for threads in (1, 3):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / str(threads)),
                     "--threads", str(threads)]) == 0
    assert csv_body(tmp_path / "1" / "bandstructure_lossless.csv") == \
        csv_body(tmp_path / "3" / "bandstructure_lossless.csv")


def test_validate_prints_preview_and_writes_nothing(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["validate", "--preset", "default"]) == 0
    text = capsys.readouterr().out
    for key in ("valid", "K0", "n_bar", "kappa", "v_g"):
        assert key in text
    assert list(tmp_path.iterdir()) == []


def test_validate_config_function(tmp_path):
    report = validate_config(write_config(tmp_path))
    assert "valid" in report and "v_g" in report


def test_missing_coupling_violates_eit_condition(tmp_path, capsys):
    cfg = write_config(tmp_path, lambda d: d["fields"].update(Omega_c_gamma_a=0.0))
    assert main(["validate", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "|Omega_c|^2 > Gamma2*Gamma3" in err and "fields.Omega_c_gamma_a" in err


def test_short_signal_wavevector_is_infeasible(tmp_path, capsys):
    cfg = write_config(tmp_path, lambda d: d["geometry"].update(k_s_per_m=7.0e6))
    assert main(["validate", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "GeometryInfeasible" in err and "k_s=7e+06" in err
    with pytest.raises(GeometryInfeasible):
        validate_config(cfg)


def test_feasible_geometry_reports_angle(tmp_path):
    cfg = write_config(tmp_path, lambda d: d["geometry"].update(k_s_per_m=1.2e7))
    assert "Bragg angle" in validate_config(cfg)


def test_unknown_keys_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, lambda d: d["fields"].update(Omega_x_gamma_a=1.0))
    assert main(["validate", "--config", str(cfg)]) == 2
    assert "fields.Omega_x_gamma_a" in capsys.readouterr().err


def test_wrong_type_reports_field(tmp_path):
    cfg = write_config(tmp_path, lambda d: d["geometry"].update(L_m="long"))
    with pytest.raises(ConfigInvalid, match="geometry.L_m"):
        validate_config(cfg)


def test_yaml_syntax_error_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("scenario: coefficients\nfields: [1, 2\n", encoding="utf-8")
    assert main(["validate", "--config", str(path)]) == 2
    assert "line" in capsys.readouterr().err


def test_missing_file_is_config_error(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_run_without_scenario_is_config_error(tmp_path):
    cfg = write_config(tmp_path, lambda d: d.pop("scenario"))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    import eitbragg.bandstructure as bs

    monkeypatch.setattr(bs, "CONVERGENCE_TOL", 1e-30)

    def edit(d):
        d["scenario"] = "bandstructure"
        d["bandstructure"] = {"points": 101, "absorption": [False], "check_convergence": True}

    cfg = write_config(tmp_path, edit)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_run_scenario_api(tmp_path):
    cfg = parse_config(load_yaml(preset_path("default")))
    files, manifest = run_scenario(cfg, "coefficients", tmp_path)
    doc = json.loads(manifest.read_text())
    assert doc["scenario"] == "coefficients"
    assert doc["coefficients"]["units"]["v_g"] == "m/s"
    assert [f.name for f in files] == ["coefficients.csv"]
    with pytest.raises(ConfigInvalid):
        run_scenario(cfg, "nonsense", tmp_path)


def test_presets_listed():
    assert set(FIGURE_PRESETS) <= set(PRESETS)


def test_console_script_entry_point():
    result = subprocess.run([sys.executable, "-m", "eitbragg.cli", "--version"],
                            capture_output=True, text=True)
    assert result.returncode == 0 and "eitbragg" in result.stdout


def test_csv_writer_requires_units_and_equal_lengths(tmp_path):
    from eitbragg.output import write_csv

    with pytest.raises(ValueError, match="unit"):
        write_csv(tmp_path / "a.csv", {"x": [1.0]})
    with pytest.raises(ValueError, match="lengths"):
        write_csv(tmp_path / "a.csv", {"x [m]": [1.0], "y [s]": [1.0, 2.0]})
    path = write_csv(tmp_path / "a.csv", {"x [m]": [0.1, 1 / 3]}, "abc", ["note"])
    lines = path.read_text().splitlines()
    assert lines[1] == "# config_sha256 abc" and lines[2] == "# note"
    assert lines[-1] == "0.333333333333333"


def test_config_hash_tracks_content():
    a = load_preset("default")
    b = parse_config({**load_yaml(preset_path("default")), "output_dir": "elsewhere"})
    assert a.config_hash() == load_preset("default").config_hash()
    assert a.config_hash() != b.config_hash()

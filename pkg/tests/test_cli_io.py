import json
import shutil

import numpy as np
import pytest

from measphase import config as cfgmod
from measphase import io
from measphase.cli import main
from measphase.gafit import ExperimentRecord
from measphase.optics import ARCSEC


def write_config(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


# ---- configuration ---------------------------------------------------------


def test_resolve_fills_defaults():
    raw = cfgmod.resolve({})
    assert raw["optics"]["d_x_mm"] == 1.0
    assert len(raw["stages"]) == 3
    run = cfgmod.RunConfig(raw)
    assert run.n_stages == 3
    assert run.template.imperfections == ()
    assert run.alpha_grid.size == 181
    assert run.ga.population == 64


def test_resolve_is_idempotent():
    raw = cfgmod.resolve({"stages": [{"nu_rad": 0.1, "beta_arcsec": 30}]})
    assert cfgmod.resolve(raw) == raw
    assert raw["stages"][0]["beta_rad"] == pytest.approx(30 * ARCSEC)


@pytest.mark.parametrize(
    "bad",
    [
        {"optics": {"w0_mm": 0}},
        {"optics": {"w0": 1.0}},
        {"stages": []},
        {"stages": [{"beta_rad": 0.1, "beta_arcsec": 3}]},
        {"scan": {"w0_mm": {"start": 0.3, "stop": 1.0}}},
        {"seed": 1.5},
    ],
)
def test_schema_rejects(bad):
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.resolve(bad)


def test_range_forms():
    assert np.allclose(cfgmod.expand_range([0.5, 1.0]), [0.5, 1.0])
    assert np.allclose(cfgmod.expand_range({"start": 0, "stop": 1, "num": 3}), [0, 0.5, 1])


def test_load_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        cfgmod.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load(bad)
    headerless = tmp_path / "x.csv"
    headerless.write_text("# schema=1\na,b\n")
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load(headerless)


# ---- CSV -------------------------------------------------------------------


def test_csv_roundtrip(tmp_path):
    raw = cfgmod.resolve({})
    path = io.write_csv(tmp_path / "t.csv", ("a", "b", "flag"), [(0.1, 2, True), (1 / 3, -1, False)], raw)
    text = path.read_text().splitlines()
    assert text[0] == "# schema=1"
    assert text[1].startswith("# config=")
    cols, vals = io.read_csv(path)
    assert cols == ["a", "b", "flag"]
    assert vals[1, 0] == 1 / 3
    assert cfgmod.load(path) == raw


def test_experiment_csv_roundtrip(tmp_path):
    recs = [ExperimentRecord(1.0, 0.1, 0.2, 0.5), ExperimentRecord(2.0, 0.3, -1.0, 0.9, 2.0)]
    path = io.write_experiment_csv(tmp_path / "e.csv", recs)
    assert io.read_experiment_csv(path) == recs


@pytest.mark.parametrize(
    "body, line",
    [
        ("w0_mm,alpha_rad,chi_rad,contrast\n1,0.1,0.2,0.5\n1,0.1,abc,0.5\n", 3),
        ("w0_mm,alpha_rad,chi_rad,contrast\n1,0.1,0.2\n", 2),
        ("w0_mm,alpha_rad,chi_rad,contrast\n1,0.1,0.2,1.5\n", 2),
        ("w0_mm,alpha_rad,chi_rad,contrast\n-1,0.1,0.2,0.5\n", 2),
        ("w0_mm,alpha_rad,chi_rad,contrast\n\n1,0.1,nan,0.5\n", 3),
        ("w0,alpha,chi,c\n1,0.1,0.2,0.5\n", 1),
    ],
)
def test_experiment_csv_errors_name_the_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(io.DataFormatError, match=f"bad.csv:{line}:"):
        io.read_experiment_csv(path)


def test_experiment_csv_empty(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("# only comments\n")
    with pytest.raises(io.DataFormatError):
        io.read_experiment_csv(path)
    path.write_text("w0_mm,alpha_rad,chi_rad,contrast\n")
    with pytest.raises(io.DataFormatError):
        io.read_experiment_csv(path)


# ---- CLI -------------------------------------------------------------------


def test_missing_config_exits_2(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["chi-curve", "--config", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_invalid_config_reports_schema(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {"optics": {"w0_mm": -1}})
    assert main(["chi-curve", "--config", cfg]) == 2
    assert "optics/w0_mm" in capsys.readouterr().err


@pytest.mark.parametrize("w0, m", [(0.6, 1), (2.5, 0)])
def test_chi_curve_regimes(tmp_path, w0, m):
    out = tmp_path / "out"
    assert main(["chi-curve", "--w0", str(w0), "--output-dir", str(out)]) == 0
    path = next(out.glob("chi_curve_*.csv"))
    cols, vals = io.read_csv(path)
    assert cols == ["alpha_rad", "chi_rad", "chi_unwrapped_rad", "contrast", "valid", "w0_mm"]
    delta = vals[-1, 2] - vals[0, 2]
    assert delta == pytest.approx(2 * np.pi * m, abs=1e-6)


def test_rerun_from_echo_is_byte_identical(tmp_path):
    out = tmp_path / "out"
    assert main(["chi-curve", "--w0", "0.9", "--output-dir", str(out)]) == 0
    path = next(out.glob("chi_curve_*.csv"))
    first = path.read_bytes()
    saved = tmp_path / "saved.csv"
    shutil.copy(path, saved)
    path.unlink()
    assert main(["chi-curve", "--config", str(saved)]) == 0
    assert path.read_bytes() == first


def test_phase_diagram_single_cell(tmp_path):
    cfg = write_config(
        tmp_path / "c.json",
        {"scan": {"w0_mm": [0.5], "gamma_rad": [0.0], "alpha_points": 61}, "output_dir": str(tmp_path / "o")},
    )
    assert main(["phase-diagram", "--config", cfg]) == 0
    cols, vals = io.read_csv(tmp_path / "o" / "phase_diagram.csv")
    assert cols == ["w0_mm", "gamma_rad", "m", "min_contrast", "resolved"]
    assert vals.shape == (1, 5)
    assert vals[0, 2] == 1


def test_scan_w0_writes_transition(tmp_path):
    cfg = write_config(
        tmp_path / "c.json",
        {"scan": {"w0_mm": [0.4, 1.0], "alpha_points": 61}, "output_dir": str(tmp_path / "o")},
    )
    assert main(["scan-w0", "--config", cfg]) == 0
    _, vals = io.read_csv(tmp_path / "o" / "scan_w0.csv")
    assert list(vals[:, 2]) == [1, 0]
    t = json.loads((tmp_path / "o" / "transition.json").read_text())
    assert 0.6 < t["w0_star_mm"] < 0.75
    assert t["config"]["scan"]["alpha_points"] == 61


def test_fringe_and_noise(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["fringe", "--output-dir", out]) == 0
    cols, vals = io.read_csv(tmp_path / "o" / "fringe.csv")
    assert cols == ["delta_rad", "power"] and vals.shape == (64, 2)
    assert main(["fringe", "--output-dir", out, "--noise", "0.01", "--seed", "4"]) == 0
    noisy = io.read_csv(tmp_path / "o" / "fringe.csv")[1]
    assert not np.allclose(noisy[:, 1], vals[:, 1])


def test_critical_strength_command(tmp_path):
    out = tmp_path / "o"
    assert main(["critical-strength", "--output-dir", str(out), "--zeta", "0.95"]) == 0
    res = json.loads((out / "critical_strength.json").read_text())
    assert res["zeta_c"] == pytest.approx(0.912622, abs=1e-6)
    cols, vals = io.read_csv(out / "chi_theta_zeta_0.95.csv")
    assert cols[0] == "theta_rad" and vals.shape[0] == 721


def test_oracle_suite_exit_codes(tmp_path):
    out = str(tmp_path / "o")
    assert main(["oracle-suite", "--quick", "--output-dir", out]) == 0
    bad = write_config(tmp_path / "g.json", {"optics": {"gamma_rad": 0.3}, "output_dir": out})
    assert main(["oracle-suite", "--quick", "--config", bad]) == 1
    zero = write_config(tmp_path / "z.json", {"optics": {"d_x_mm": 0.0}, "output_dir": out})
    assert main(["oracle-suite", "--quick", "--config", zero]) == 0


def test_fit_requires_seed_and_data(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--data", "x.csv"])
    assert exc.value.code == 2
    assert main(["fit", "--seed", "1", "--output-dir", str(tmp_path)]) == 2
    assert main(["fit", "--seed", "1", "--data", str(tmp_path / "missing.csv")]) == 2


def test_fit_aborts_on_malformed_row(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("w0_mm,alpha_rad,chi_rad,contrast\n1,0.1,0.2,0.5\n1,0.2\n")
    out = tmp_path / "o"
    assert main(["fit", "--seed", "1", "--data", str(data), "--output-dir", str(out)]) == 2
    assert "d.csv:3" in capsys.readouterr().err
    assert not out.exists()


def test_synthesize_then_fit_is_reproducible(tmp_path):
    cfg = write_config(
        tmp_path / "c.json",
        {
            "stages": [{"nu_rad": 0.3, "beta_arcsec": 20}, {"nu_rad": 1.0, "beta_arcsec": 10}, {"nu_rad": 2.0, "beta_arcsec": 5}],
            "scan": {"w0_mm": [0.6, 1.2], "alpha_points": 5},
            "ga": {"population": 8, "generations": 3, "immigrants": 2},
            "output_dir": str(tmp_path / "o"),
        },
    )
    assert main(["synthesize", "--config", cfg]) == 0
    data = tmp_path / "o" / "experiment.csv"
    assert len(io.read_experiment_csv(data)) == 10
    args = ["fit", "--config", cfg, "--data", str(data), "--seed", "9"]
    assert main(args) == 0
    genome = (tmp_path / "o" / "best_genome.json").read_bytes()
    history = (tmp_path / "o" / "loss_history.csv").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "o" / "best_genome.json").read_bytes() == genome
    assert (tmp_path / "o" / "loss_history.csv").read_bytes() == history
    payload = json.loads(genome)
    assert len(payload["stages"]) == 3
    assert payload["loss"] <= payload["initial_loss"]
    # the echo inside the genome file reproduces it as well
    saved = tmp_path / "genome_saved.json"
    shutil.copy(tmp_path / "o" / "best_genome.json", saved)
    assert main(["fit", "--config", str(saved), "--seed", "9"]) == 0
    assert (tmp_path / "o" / "best_genome.json").read_bytes() == genome

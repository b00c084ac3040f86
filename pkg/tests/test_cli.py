import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from flexmech.calib import load_curve_csv
from flexmech.cli import main
from flexmech.core import MM, config_to_dict, prototype_default_config
from flexmech.mechanism import assistive_moment

ROOT = Path(__file__).resolve().parents[1]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _toml(cfg) -> str:
    lines = []
    for section, values in config_to_dict(cfg).items():
        lines.append(f"[{section}]")
        for k, v in values.items():
            lines.append(f"{k} = {json.dumps(v)}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def spring_free_config(tmp_path):
    p = tmp_path / "nospring.toml"
    p.write_text(_toml(prototype_default_config().with_values(K=0.0, ecc=0.0)))
    return str(p)


@pytest.fixture
def bad_config(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(_toml(prototype_default_config()).replace("layer_separation_mm = 5.0", "layer_separation_mm = 0.0"))
    return str(p)


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", "--config", str(ROOT / "configs" / "prototype_default.toml"))
    assert code == 0 and json.loads(out) == {"valid": True}


def test_validate_bad(capsys, bad_config):
    code, _, err = run(capsys, "validate", "--config", bad_config)
    assert code == 2
    assert "layout.layer_separation must be positive" in json.loads(err)["errors"]


def test_missing_config_file(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--theta-deg", "5", "--config", str(tmp_path / "nope.toml"))
    assert code == 2


def test_simulate_zero(capsys):
    code, out, _ = run(capsys, "simulate", "--theta-deg", "0")
    d = json.loads(out)
    assert code == 0 and d["m_assist_nm"] == 0.0 and d["m_bars_nm"] == 0.0


def test_simulate_bit_exact(capsys):
    code, out, _ = run(capsys, "simulate", "--theta-deg", "16", "--preload-mm", "0")
    lib = assistive_moment(math.radians(16), prototype_default_config())
    assert code == 0
    assert json.loads(out) == json.loads(json.dumps(lib.to_dict()))
    assert json.loads(out)["m_assist_nm"] == lib.moment_assist


def test_simulate_invalid_config(capsys, bad_config):
    assert run(capsys, "simulate", "--theta-deg", "10", "--config", bad_config)[0] == 2


def test_simulate_solver_failure(capsys, monkeypatch):
    import flexmech.cli as cli
    from flexmech.mechanism import ConstraintInfeasible

    def boom(*a, **k):
        raise ConstraintInfeasible(2, 0.17, 1.0, 2.0)

    monkeypatch.setattr(cli, "assistive_moment", boom)
    assert run(capsys, "simulate", "--theta-deg", "10")[0] == 3


def test_curve_two_points(capsys):
    code, out, _ = run(capsys, "curve", "--points", "2")
    assert code == 0 and len(out.strip().splitlines()) == 3


def test_curve_six_preloads_ordered(capsys, tmp_path):
    out = tmp_path / "curves.csv"
    pre = ["0", "2.5", "5", "7.5", "10", "12.5"]
    code, _, _ = run(capsys, "curve", "--points", "5", "--preload-mm", *pre, "--out", str(out))
    assert code == 0
    rows = load_curve_csv(out)
    ends = [r["m_assist_nm"] for r in rows if r["theta_deg"] == 16.0]
    assert len(ends) == 6
    assert all(b < a for a, b in zip(ends, ends[1:]))
    manifest = json.loads((tmp_path / "curves.csv.manifest.json").read_text())
    assert manifest["command"] == "curve" and manifest["output_paths"] == [str(out)]


def test_curve_json(capsys):
    code, out, _ = run(capsys, "curve", "--points", "3", "--format", "json")
    assert code == 0 and len(json.loads(out)) == 3


def test_curve_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "curve", "--points", "9", "--out", str(a))
    run(capsys, "curve", "--points", "9", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_curve_write_error(capsys, tmp_path):
    code, _, _ = run(capsys, "curve", "--points", "2", "--out", str(tmp_path / "missing" / "c.csv"))
    assert code == 4


def test_oracle_check_spring_free(capsys, spring_free_config):
    code, out, err = run(capsys, "oracle-check", "--config", spring_free_config)
    assert code == 0
    assert "PASS" in err
    devs = [float(line.split(",")[3]) for line in out.strip().splitlines()[1:]]
    assert len(devs) == 10 and max(devs) <= 0.01


def test_oracle_check_zero_tolerance(capsys):
    code, _, err = run(capsys, "oracle-check", "--theta-grid", "16", "--tolerance", "0")
    assert code == 5 and "FAIL" in err


@pytest.fixture
def synth_csv(tmp_path, capsys):
    p = tmp_path / "bend.csv"
    assert run(capsys, "synth", "--lever-mm", "120", "--out", str(p))[0] == 0
    return p


def test_fit_roundtrip(capsys, synth_csv):
    code, out, _ = run(capsys, "fit", str(synth_csv), "--bounds", "E=60:100", "--lever-mm", "120")
    rep = json.loads(out)
    assert code == 0
    assert rep["fitted"]["E_gpa"] == pytest.approx(80.0, rel=0.02)
    assert rep["bounds_hit"] == []


def test_fit_missing_lever(capsys, synth_csv):
    with pytest.raises(SystemExit) as err:
        main(["fit", str(synth_csv), "--bounds", "E=60:100"])
    assert err.value.code == 2


def test_fit_malformed(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time_s,displacement_mm,force_n,preload_mm,cycle_id\n0,0,0,0,1\n0.1,x,1,0,1\n")
    code, _, err = run(capsys, "fit", str(p), "--bounds", "E=60:100", "--lever-mm", "120")
    assert code == 4 and "row 3" in err


def test_fit_missing_bounds(capsys, synth_csv):
    assert run(capsys, "fit", str(synth_csv), "--lever-mm", "120")[0] == 2


def test_sweep_quadruple_spring(capsys, tmp_path):
    p = tmp_path / "thr.toml"
    p.write_text(_toml(prototype_default_config()).replace('mode = "offset"', 'mode = "threshold"'))
    code, out, _ = run(capsys, "sweep", "--config", str(p), "--axis", "K=1.81,7.24", "--format", "json")
    rows = json.loads(out)
    assert code == 0
    assert rows[1]["spring_frac"] / rows[0]["spring_frac"] == pytest.approx(4.0, rel=1e-12)


def test_sweep_unknown_axis(capsys):
    assert run(capsys, "sweep", "--axis", "Q=1,2")[0] == 2


def test_design_target_infeasible(capsys):
    code, out, _ = run(capsys, "design-target", "--target", "1.9", "--k-max-n-per-mm", "2")
    assert code == 0 and json.loads(out)["status"] == "infeasible"


def test_design_target_ok(capsys):
    code, out, _ = run(capsys, "design-target", "--target", "1.0")
    rep = json.loads(out)
    assert code == 0 and rep["status"] == "ok"
    assert rep["achieved_fraction"] == pytest.approx(1.0, rel=1e-9)


def test_usage_error():
    with pytest.raises(SystemExit) as err:
        main(["simulate"])
    assert err.value.code == 2


def test_console_script_entry():
    r = subprocess.run(
        [sys.executable, "-m", "flexmech.cli", "simulate", "--theta-deg", "8"], capture_output=True, text=True
    )
    assert r.returncode == 0 and "m_assist_nm" in r.stdout

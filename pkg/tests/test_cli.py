import json
import math
import subprocess
import sys

import pytest

from qstail import cli, verify
from qstail.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VERIFY, RunConfig, load_config, main, rerun_matches


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_exact_csv(capsys):
    code, out, _ = run(capsys, "exact", "--n", "3")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "# tool: qstail 0.1.0"
    assert '# mean: "8/3"' in lines
    assert lines[-2:] == ["2,0.3333333333333333,1/3", "3,0.6666666666666666,2/3"]


def test_exact_json_tails(capsys):
    code, out, _ = run(capsys, "exact", "--n", "4", "--x", "0.2", "--format", "json")
    doc = json.loads(out)
    assert doc["meta"]["seed"] == 0 and doc["meta"]["config"]["params"]["n"] == 4
    left = [t for t in doc["summary"]["tails"] if t["side"] == "left"][0]
    assert left["p"] == 0.5


def test_mgf(capsys):
    code, out, _ = run(capsys, "mgf", "--t-max", "10", "--format", "json")
    assert code == EXIT_OK
    s = json.loads(out)["summary"]
    assert abs(s["psi_second_0"] - 0.4203) < 1e-4
    assert s["lemma"]["left"]["slack_min"] >= 0


def test_bounds_fj(capsys):
    code, out, _ = run(capsys, "bounds", "--side", "right", "--name", "fj", "--x", "303")
    row = out.splitlines()[-1].split(",")
    assert row[1] == "fj_right" and row[-1] == "True"
    assert float(row[3]) == pytest.approx(-303 * math.log(303) + (1 + math.log(2)) * 303)


def test_bounds_ks_needs_constants(capsys):
    code, _, err = run(capsys, "bounds", "--side", "left", "--name", "ks", "--x", "1")
    assert code == EXIT_CONFIG
    assert json.loads(err)["exit_code"] == EXIT_CONFIG


def test_numeric_error(capsys):
    code, _, err = run(capsys, "mgf", "--t-max", "2", "--grid-points", "101", "--tol", "1e-30", "--max-iter", "1")
    assert code == EXIT_NUMERIC
    assert json.loads(err)["error"] == "ConvergenceError"


def test_bad_arguments(capsys):
    assert run(capsys, "exact", "--n", "-2")[0] == EXIT_CONFIG
    assert run(capsys, "exact", "--bogus")[0] == EXIT_CONFIG
    assert run(capsys)[0] == EXIT_CONFIG


def test_unknown_keys_rejected(tmp_path, capsys):
    with pytest.raises(cli.ConfigError):
        RunConfig.build("exact", params={"n": 3, "depth": 2})
    with pytest.raises(cli.ConfigError):
        RunConfig.from_dict({"command": "exact", "colour": "red"})
    with pytest.raises(cli.ConfigError):
        RunConfig.build("exact", seed=-1)
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"command": "simulate", "params": {"n": 10, "zz": 1}}))
    code, _, err = run(capsys, "--config", str(p))
    assert code == EXIT_CONFIG and "zz" in json.loads(err)["message"]


def test_config_file_and_artifacts(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"command": "exact", "seed": 5, "params": {"n": 4}}))
    cfg = load_config(str(p))
    assert cfg.seed == 5 and cfg.params == {"n": 4, "exact": None, "x": []}
    out = tmp_path / "a.csv"
    assert main(["--config", str(p), "--output", str(out)]) == EXIT_OK
    assert load_config(str(out)) == cfg


@pytest.mark.parametrize(
    "args",
    [
        ["simulate", "--x", "0", "0.5", "--n", "5000", "--seed", "3", "--depth", "12"],
        ["tails", "--side", "left", "--x", "1", "2", "3", "--n", "100", "--eps", "optimize", "--seed", "3"],
        ["tails", "--side", "right", "--x", "10", "--n", "300", "--delta", "0.08", "--spine", "13",
         "--two-sided", "--seed", "3"],
    ],
)
@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_reproducible_artifacts(args, fmt):
    assert rerun_matches(args, fmt)


def test_seed_changes_output(capsys):
    a = run(capsys, "simulate", "--n", "2000", "--seed", "1", "--depth", "8")[1]
    b = run(capsys, "simulate", "--n", "2000", "--seed", "2", "--depth", "8")[1]
    assert a != b


def test_tails_slope_summary(capsys):
    code, out, _ = run(capsys, "tails", "--side", "left", "--x", "2", "3", "4", "--n", "200",
                       "--eps", "optimize", "--format", "json")
    slope = json.loads(out)["summary"]["slope"]["slope"]
    assert 1.5 < slope < 2.2


def test_output_dir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.ENV_OUTPUT_DIR, str(tmp_path / "out"))
    assert main(["exact", "--n", "2", "--format", "json"]) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "exact.json").read_text())
    assert doc["rows"] == [{"fraction": "1", "probability": 1.0, "value": 1}]


def test_verify_exit_codes(monkeypatch, capsys):
    code, out, _ = run(capsys, "verify", "--only", "1", "10")
    assert code == EXIT_OK and "[PASS]  1" in out and "2/2 checks passed" in out
    failing = ((99, "always fails", lambda ctx: (False, "forced"), None),)
    monkeypatch.setattr(verify, "CHECKS", failing)
    code, out, _ = run(capsys, "verify")
    assert code == EXIT_VERIFY and "[FAIL] 99" in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qstail", "exact", "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip().endswith("1,1.0,1")

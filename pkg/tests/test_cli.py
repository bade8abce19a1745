import json
import math
import subprocess
import sys

import pytest

from ksatglass import cli, ksat, parisi
from ksatglass.ksat import Clause, KSatInstance


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_round_trip_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["gen", "--n", "10", "--k", "3", "--alpha", "2", "--seed", "7", "--out", str(a)]) == 0
    assert cli.main(["gen", "--n", "10", "--k", "3", "--alpha", "2", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    code, out, _ = run(["solve", str(a)], capsys)
    assert code == 0
    report = json.loads(out)
    inst = KSatInstance.from_json(a.read_text())
    assert report["min_unsat"] == ksat.ground_state(inst)[0]
    assert report["m_n_alpha"] == ksat.m_n_alpha(inst)


def test_gen_rejects_negative_alpha(capsys):
    code, _, err = run(["gen", "--n", "10", "--k", "3", "--alpha", "-1", "--seed", "7"], capsys)
    assert code == 1
    assert "alpha" in err


def test_solve_special_instances(tmp_path, capsys):
    empty = tmp_path / "empty.json"
    empty.write_text(KSatInstance.from_clauses(4, 2, []).to_json())
    conflict = tmp_path / "conflict.json"
    conflict.write_text(KSatInstance.from_clauses(1, 2, [Clause((1, 1), (1, 1)),
                                                         Clause((1, 1), (-1, -1))]).to_json())
    assert json.loads(run(["solve", str(empty)], capsys)[1])["min_unsat"] == 0
    assert json.loads(run(["solve", str(conflict)], capsys)[1])["min_unsat"] == 1


def test_solve_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["solve", str(bad)], capsys)[0] == 2
    assert run(["solve", str(tmp_path / "missing.json")], capsys)[0] == 2
    big = tmp_path / "big.json"
    big.write_text(ksat.sample_instance(12, 2, 1.0, 0).to_json())
    code, _, err = run(["solve", str(big), "--limit", "10"], capsys)
    assert code == 2 and "cap" in err


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 6, "k": 2, "alpha": 3.0, "seed": 4}))
    code, out, _ = run(["gen", "--config", str(cfg)], capsys)
    assert code == 0 and json.loads(out)["n"] == 6
    code, out, _ = run(["gen", "--config", str(cfg), "--n", "7"], capsys)
    assert json.loads(out)["n"] == 7
    cfg.write_text(json.dumps({"n": 6, "k": 2, "alpha": 3.0, "seed": 4, "colour": 1}))
    code, _, err = run(["gen", "--config", str(cfg)], capsys)
    assert code == 1 and "colour" in err
    cfg.write_text(json.dumps({"n": "six", "k": 2, "alpha": 3.0, "seed": 4}))
    code, _, err = run(["gen", "--config", str(cfg)], capsys)
    assert code == 1 and "n must be" in err


def test_pspin_max(capsys):
    code, out, _ = run(["pspin-max", "--n", "8", "--k", "3", "--seed", "1"], capsys)
    assert code == 0 and json.loads(out)["m_n"] > 0
    code, out, _ = run(["pspin-max", "--n", "6", "--k", "2", "--samples", "20", "--seed", "1"], capsys)
    assert json.loads(out)["n_samples"] == 20


def test_parisi_evaluate(tmp_path, capsys):
    code, out, _ = run(["parisi", "--k", "3", "--u", '{"breakpoints": [], "values": [0]}'], capsys)
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(3 * math.sqrt(2 / math.pi), abs=1e-6)
    u = parisi.StepFunction((0.4,), (0.2, 0.8))
    f1, f2 = tmp_path / "u.json", tmp_path / "r.json"
    f1.write_text(u.to_json())
    f2.write_text(u.refine(0.7).to_json())
    v1 = json.loads(run(["parisi", "--k", "3", "--u", str(f1)], capsys)[1])["value"]
    v2 = json.loads(run(["parisi", "--k", "3", "--u", str(f2)], capsys)[1])["value"]
    assert v1 == pytest.approx(v2, abs=1e-6)


def test_parisi_invalid_step_function(capsys):
    code, _, err = run(["parisi", "--k", "3", "--u", '{"breakpoints": [0.5], "values": [0.9, 0.1]}'], capsys)
    assert code == 1 and "u" in err
    code, _, _ = run(["parisi", "--k", "3"], capsys)
    assert code == 1


def test_parisi_minimize_chain(capsys):
    code, out, _ = run(["parisi", "--k", "3", "--levels", "1", "--restarts", "2", "--seed", "1"], capsys)
    assert code == 0
    chain = json.loads(out)["levels"]
    assert chain[1]["value"] <= chain[0]["value"] + 1e-4


def test_verify_theorem1(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    args = ["verify-theorem1", "--n", "8", "--k", "2", "--alphas", "16", "--samples", "30", "--seed", "3",
            "--out", str(out)]
    code, stdout, _ = run(args, capsys)
    assert code == 0
    assert "omitted" in stdout
    first = out.read_bytes()
    run(args, capsys)
    assert out.read_bytes() == first
    assert first.decode().splitlines()[0] == "alpha,n,mean_mna,se_mna,mean_mn,se_mn,residual,residual_se"
    code, _, err = run(["verify-theorem1", "--alphas", "16,-4"], capsys)
    assert code == 1 and "alphas" in err


def test_interp_check(capsys):
    code, out, _ = run(["interp-check", "--n", "5", "--draws", "40", "--seed", "2"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["draws"] == 40 and "passed" in report
    code, _, err = run(["interp-check", "--t", "0.99"], capsys)
    assert code == 1 and "t" in err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ksatglass", "gen", "--n", "4", "--k", "2", "--alpha", "1",
                           "--seed", "1"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 4
    proc = subprocess.run([sys.executable, "-m", "ksatglass", "bogus"], capture_output=True, text=True, check=False)
    assert proc.returncode != 0

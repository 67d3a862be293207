import json
import subprocess
import sys

import numpy as np
import pytest

from ghk.cli import main
from ghk.extremizer import ExtremizerParams, synthesize
from ghk.grid import indicator, write_ghk1
from ghk.phase import PhaseSamples, RealPolynomial

STD = json.dumps(ExtremizerParams.standard(2, 1).to_json())


def _run(argv, capsys):
    rc = main(argv)
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_norm_from_extremizer(capsys):
    rc, out, _ = _run(["norm", "--extremizer", STD, "--grid", "1024,8"], capsys)
    d = json.loads(out)
    assert rc == 0
    assert d["norm_uk"] == pytest.approx(0.9366870743752482, rel=1e-10)
    assert d["norm_pk"] == pytest.approx(1.0, rel=1e-10)


def test_deficit_from_file(tmp_path, capsys):
    f = indicator((1024,), (-2.0, 2.0), 0.0, 1.0)
    write_ghk1(f, tmp_path / "ind.ghk1")
    rc, out, _ = _run(["deficit", str(tmp_path / "ind.ghk1")], capsys)
    assert rc == 0
    assert json.loads(out)["delta"] == pytest.approx(0.0353, abs=2e-3)


def test_inner_and_chain(tmp_path, capsys):
    paths = []
    for i in range(4):
        p = tmp_path / f"g{i}.ghk1"
        write_ghk1(synthesize(ExtremizerParams(2, 1, 1.0, [0.1 * i], [[1.0]]), (24,), (-4.0, 4.0)), p)
        paths.append(str(p))
    rc, out, _ = _run(["inner", "-k", "2", *paths], capsys)
    assert rc == 0 and json.loads(out)["abs"] > 0
    rc, out, _ = _run(["chain", "-k", "1", *paths], capsys)
    assert rc == 0 and json.loads(out)["ok"]
    rc, out, _ = _run(["chain", "--scalar"], capsys)
    assert rc == 0 and json.loads(out)["ok"]


def test_config_supplies_defaults(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"k": 3}))
    p3 = json.dumps(ExtremizerParams.standard(3, 1).to_json())
    rc, out, _ = _run(["norm", "--config", str(tmp_path / "c.json"), "--extremizer", p3, "--grid", "512,8"],
                      capsys)
    assert json.loads(out)["norm_uk"] == pytest.approx(0.9170040432046711, rel=1e-8)


def test_stability_byte_identical_and_plot(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"N": 128, "amplitudes": [0.0, 0.3], "seeds": [0, 1], "restarts": 0}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["stability", "--config", str(cfg), "--out", str(a), "--plot"]) == 0
    assert main(["stability", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.gp").exists() and (tmp_path / "a.png").stat().st_size > 0
    lines = a.read_text().splitlines()
    assert lines[0].startswith("schema,family,amplitude")
    assert len(lines) == 5


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"family": "spiral"}))
    rc, _, err = _run(["stability", "--config", str(cfg)], capsys)
    assert rc == 2 and "config.family" in err


def test_scale_and_levelset_plots(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert main(["scale", "--extremizer", STD, "--grid", "1024,8", "--out", str(out), "--plot"]) == 0
    assert json.loads(out.read_text())["l_star"] == -1
    assert (tmp_path / "s.png").exists() and (tmp_path / "s.gp").exists()
    out2 = tmp_path / "l.json"
    assert main(["levelset", "--extremizer", STD, "--grid", "256,8", "--points", "3",
                 "--out", str(out2), "--plot"]) == 0
    assert json.loads(out2.read_text())["min_r"] == pytest.approx(1.0)
    assert (tmp_path / "l.png").exists()


def test_fit_and_rearrange(tmp_path, capsys):
    f = indicator((256,), (-4.0, 4.0), -0.5, 0.5)
    write_ghk1(f, tmp_path / "f.ghk1")
    rc, out, _ = _run(["fit", str(tmp_path / "f.ghk1"), "--restarts", "0"], capsys)
    d = json.loads(out)
    assert rc == 0 and d["epsilon"] > 0.1 and "runtime_ms" not in d
    rc, out, _ = _run(["rearrange", str(tmp_path / "f.ghk1"), "--write", str(tmp_path / "fs.ghk1")], capsys)
    d = json.loads(out)
    assert d["norm_uk_star"] >= d["norm_uk"] - 1e-12
    assert (tmp_path / "fs.ghk1").exists()


def test_admissible_and_phase(tmp_path, capsys):
    rc, out, _ = _run(["admissible", "--gowers", "3"], capsys)
    assert rc == 0 and json.loads(out)["admissible"]
    rc, out, _ = _run(["admissible", "--riesz", "1,1,3"], capsys)
    assert not json.loads(out)["admissible"]
    P0 = RealPolynomial.random(1, 2, np.random.default_rng(1))
    PhaseSamples.on_grid(P0, [0.0], 1.0, 0.02).save(tmp_path / "s.bin")
    rc, out, _ = _run(["phase-recover", "-k", "3", str(tmp_path / "s.bin")], capsys)
    got = RealPolynomial.from_json(json.loads(out)["polynomial"])
    assert got.max_coef_diff(P0) < 1e-8


def test_selftest_exit_codes():
    ok = subprocess.run([sys.executable, "-m", "ghk", "selftest"], capture_output=True, text=True)
    assert ok.returncode == 0
    assert all(line.startswith("PASS") for line in ok.stdout.splitlines())
    bad = subprocess.run([sys.executable, "-m", "ghk", "selftest", "--perturb-constants", "1e-6"],
                         capture_output=True, text=True)
    assert bad.returncode == 1
    assert "FAIL constants.young_identity" in bad.stdout


def test_missing_input(capsys):
    rc, _, err = _run(["norm"], capsys)
    assert rc == 2 and "input" in err

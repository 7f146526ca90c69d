import json
import subprocess
import sys

import numpy as np
import pytest

import hifbe.cli as cli
from hifbe.catalog import problem_catalog_get
from hifbe.core import CompositeProblem, NonsmoothOracle


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def data_lines(text):
    return [l for l in text.splitlines() if not l.startswith("#")]


def test_envelope_csv(tmp_path, capsys):
    out = tmp_path / "env.csv"
    plot = tmp_path / "env.svg"
    code, _, _ = run(["envelope", "--problem", "oscillatory", "--p", "1.5", "--gamma", "0.2",
                      "--n", "21", "--out", str(out), "--plot", str(plot)], capsys)
    assert code == 0
    text = out.read_text()
    assert text.startswith("# hifbe 0.1.0\n# command: envelope\n")
    rows = data_lines(text)
    assert rows[0] == "x,phi,envelope,tx,residual,single_valued,certified"
    assert len(rows) == 22
    x, phi, env = (float(t) for t in rows[11].split(",")[:3])
    assert x == 0.0 and env <= phi
    svg = plot.read_text()
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert "<polyline" in svg and "hifbe 0.1.0" in svg


def test_envelope_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        run(["envelope", "--problem", "quad-l1", "--n", "11", "--out", str(path)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_override(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("# sample run\nproblem = oscillatory\np = 1.5\ngamma = 0.3\nn = 5\ninner.grid_points = 2001\n")
    code, out, _ = run(["envelope", "--config", str(conf), "--gamma", "0.2"], capsys)
    assert code == 0
    head = [l for l in out.splitlines() if l.startswith("#")]
    assert "# config: gamma = 0.2" in head
    assert "# config: inner.grid_points = 2001" in head
    assert len(data_lines(out)) == 6


def test_config_errors(tmp_path, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("colour = blue\n")
    assert run(["envelope", "--config", str(conf)], capsys)[0] == 64
    conf.write_text("inner.grid_points = 1000\nproblem = zero\n")
    assert run(["envelope", "--config", str(conf)], capsys)[0] == 64
    assert run(["envelope", "--config", str(tmp_path / "missing")], capsys)[0] == 64


def test_usage_errors(capsys):
    assert run([], capsys)[0] == 64
    assert run(["envelope"], capsys)[0] == 64
    assert run(["envelope", "--problem", "nope"], capsys)[0] == 64
    assert run(["envelope", "--problem", "quad-free"], capsys)[0] == 64
    assert run(["check", "--suite", "bogus"], capsys)[0] == 64
    assert run(["repro", "--figure", "9z"], capsys)[0] == 64
    assert run(["solve", "--problem", "quad-l1"], capsys)[0] == 64
    assert run(["solve", "--problem", "quad-free", "--x0", "1"], capsys)[0] == 64


def test_solve(tmp_path, capsys, frozen):
    out = tmp_path / "trace.csv"
    code, stdout, _ = run(["solve", "--problem", "quad-free1d", "--p", "2", "--gamma", "0.5",
                           "--x0", "2", "--out", str(out)], capsys)
    assert code == 0
    assert "stop_reason: residual-tol" in stdout
    assert f"iterations: {frozen['quad_hifba_records']}" in stdout
    rows = data_lines(out.read_text())
    assert rows[0] == "k,x,phi,env,res_norm,d" and len(rows) == frozen["quad_hifba_records"] + 1
    code, stdout, _ = run(["solve", "--problem", "quad-free", "--x0", "1,1", "--out", str(out)], capsys)
    assert code == 0 and data_lines(out.read_text())[0].startswith("k,x_1,x_2,")


def unbounded(pid):
    g = NonsmoothOracle(1, lambda y: -y[..., 0] ** 4, vectorized=True)
    return CompositeProblem(problem_catalog_get("zero").f, g, id="unbounded")


def test_undefined_envelope_exit_codes(monkeypatch, tmp_path, capsys):
    monkeypatch.setattr(cli, "problem_catalog_get", unbounded)
    out = tmp_path / "u.csv"
    code, _, _ = run(["envelope", "--problem", "zero", "--n", "3", "--out", str(out)], capsys)
    assert code == 2
    assert all(",nan," in l for l in data_lines(out.read_text())[1:])
    code, stdout, _ = run(["solve", "--problem", "zero", "--x0", "0", "--out", str(out)], capsys)
    assert code == 3 and "stop_reason: envelope-undefined" in stdout


def test_check_json(tmp_path, capsys):
    out = tmp_path / "m.json"
    code, _, _ = run(["check", "--suite", "majorant", "--problem", "majorant-demo", "--out", str(out)], capsys)
    assert code == 0
    data = json.loads(out.read_text())
    assert isinstance(data, list) and data[0]["check_id"] == "majorant:majorant-demo"
    assert {s["status"] for s in data[0]["sub_reports"]} == {"pass", "fail-expected"}


def test_check_deterministic(tmp_path, capsys):
    paths = [tmp_path / "k1.json", tmp_path / "k2.json"]
    for p in paths:
        assert run(["check", "--suite", "calm", "--problem", "power-q", "--seed", "5", "--out", str(p)], capsys)[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


@pytest.mark.parametrize("fig", ["1a", "2b"])
def test_repro(tmp_path, capsys, fig):
    code, stdout, _ = run(["repro", "--figure", fig, "--outdir", str(tmp_path)], capsys)
    assert code == 0
    csv = (tmp_path / f"fig{fig}.csv").read_text()
    svg = (tmp_path / f"fig{fig}.svg").read_text()
    cols = data_lines(csv)[0].split(",")
    if fig == "1a":
        assert cols == ["x", "phi", "majorant_0.5", "majorant_1"]
    else:
        assert cols[:3] == ["x", "phi", "envelope"]
    assert len(data_lines(csv)) == 1002
    assert svg.count("<polyline") >= 2


def test_threads_env(monkeypatch, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["envelope", "--problem", "oscillatory", "--n", "41", "--out", str(a)], capsys)
    monkeypatch.setenv("HIFBE_THREADS", "3")
    run(["envelope", "--problem", "oscillatory", "--n", "41", "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("HIFBE_THREADS", "many")
    assert run(["envelope", "--problem", "oscillatory", "--n", "41"], capsys)[0] == 64


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hifbe", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "hifbe 0.1.0" in proc.stdout


def read_rows(text):
    rows = data_lines(text)
    return rows[0].split(","), [dict(zip(rows[0].split(","), r.split(","))) for r in rows[1:]]


def test_envelope_zero_trivial(capsys):
    code, out, _ = run(["envelope", "--problem", "zero", "--p", "2", "--gamma", "1", "--xmin", "-1",
                        "--xmax", "1", "--n", "3"], capsys)
    _, rows = read_rows(out)
    assert code == 0 and len(rows) == 3
    for r in rows:
        assert float(r["phi"]) == float(r["envelope"]) == 0.0 and float(r["tx"]) == float(r["x"])


def test_envelope_gap_shrinks_with_gamma(capsys):
    gaps = {}
    for g in ("1", "0.2"):
        code, out, _ = run(["envelope", "--problem", "oscillatory", "--p", "1.5", "--gamma", g,
                            "--xmin", "-2.5", "--xmax", "2.5", "--n", "1001"], capsys)
        _, rows = read_rows(out)
        gaps[g] = np.array([float(r["phi"]) - float(r["envelope"]) for r in rows])
        assert code == 0 and np.all(gaps[g] >= -1e-10)
    assert np.mean(gaps["0.2"] < gaps["1"]) >= 0.9


def test_solve_zero_single_row(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, stdout, _ = run(["solve", "--problem", "zero", "--x0", "3", "--out", str(out)], capsys)
    assert code == 0 and len(data_lines(out.read_text())) == 2


def test_solve_oscillatory_descends(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, _, _ = run(["solve", "--problem", "oscillatory", "--p", "1.5", "--gamma", "0.2", "--x0", "2",
                      "--out", str(out)], capsys)
    _, rows = read_rows(out.read_text())
    phi = np.array([float(r["phi"]) for r in rows])
    assert code == 0 and np.all(np.diff(phi) <= 1e-10)


def test_check_envelope_zero(tmp_path, capsys):
    out = tmp_path / "z.json"
    code, _, _ = run(["check", "--suite", "envelope", "--problem", "zero", "--out", str(out)], capsys)
    assert code == 0
    assert all(r["status"] in ("pass", "skipped") for r in json.loads(out.read_text()))


def test_repro_2a_envelope_far_below(tmp_path, capsys):
    assert run(["repro", "--figure", "2a", "--outdir", str(tmp_path)], capsys)[0] == 0
    _, rows = read_rows((tmp_path / "fig2a.csv").read_text())
    gap = np.array([float(r["phi"]) - float(r["envelope"]) for r in rows])
    assert gap.max() > 0.5 and np.all(gap >= -1e-10)

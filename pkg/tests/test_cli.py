import json
import math
import subprocess
import sys

import numpy as np
import pytest

from dualif.cli import UsageError, main, parse_model_spec

def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_spikes(path):
    lines = path.read_text().splitlines()
    assert lines[0] == "t_spike"
    return np.array([float(v) for v in lines[1:]])


# --------------------------------------------------------------------------
# catalog


def test_catalog_list(capsys):
    code, out, _ = run(capsys, "catalog", "list")
    assert code == 0
    assert out.split() == ["nif", "qif", "qif*", "lif", "lif*", "lqif", "sqrt-if*", "expsqrt-if"]
    code, out, _ = run(capsys, "catalog", "list", "--format", "json")
    assert len(json.loads(out)) == 8


def test_catalog_show(capsys):
    code, out, _ = run(capsys, "catalog", "show", "qif", "--format", "json")
    assert code == 0
    info = json.loads(out)
    assert info["h"] == "tan(y)"
    assert info["y_plus"] == pytest.approx(math.pi / 2, abs=1e-12)
    assert info["y_minus"] == pytest.approx(-math.pi / 2, abs=1e-12)
    assert info["x_plus"] == "inf"
    code, out, _ = run(capsys, "catalog", "show", "qif")
    assert out.startswith("key,value\n") and "h,tan(y)\n" in out


def test_catalog_errors(capsys):
    code, _, err = run(capsys, "catalog", "show", "foo")
    assert code == 2 and "foo" in err
    assert run(capsys, "catalog", "show")[0] == 2
    assert run(capsys, "catalog", "drop")[0] == 2
    assert run(capsys)[0] == 2


# --------------------------------------------------------------------------
# dualize


def test_dualize_qif(capsys):
    code, out, _ = run(capsys, "dualize", "--f", "x^2", "--x-plus", "inf", "--x-minus", "-inf")
    assert code == 0
    data = json.loads(out)
    assert data["y_plus"] == pytest.approx(math.pi / 2, abs=1e-9)
    assert data["y_minus"] == pytest.approx(-math.pi / 2, abs=1e-9)
    assert data["compactified"] is True and len(data["samples"]) == 257


def test_dualize_lqif(capsys):
    code, out, _ = run(capsys, "dualize", "--f", "2*abs(x)+x^2", "--x-plus", "inf",
                       "--x-minus", "-inf")
    data = json.loads(out)
    assert data["y_plus"] == pytest.approx(1.0, abs=1e-9)
    assert data["y_minus"] == pytest.approx(-1.0, abs=1e-9)


def test_dualize_divergent(capsys):
    code, _, err = run(capsys, "dualize", "--f", "abs(x)", "--x-plus", "inf")
    assert code == 3 and "plus side divergent" in err


def test_dualize_csv(capsys, tmp_path):
    out = tmp_path / "sub" / "lif.csv"
    code, _, _ = run(capsys, "dualize", "--f", "abs(x)", "--x-plus", "1", "--x-minus", "-1",
                     "--samples", "300", "--format", "csv", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# y_plus=0.6931471805")
    assert lines[1] == "y,x,g" and len(lines) == 302
    y, x, g = map(float, lines[150].split(","))
    assert y == pytest.approx(math.copysign(math.log1p(abs(x)), x), abs=1e-10)


@pytest.mark.parametrize("argv", [
    ["dualize", "--f", "x^2 +"],
    ["dualize", "--f", "x - 1"],
    ["dualize", "--f", "z^2"],
    ["dualize", "--f", "x^2", "--samples", "10"],
    ["dualize", "--f", "x^2", "--x-plus", "abc"],
])
def test_dualize_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


# --------------------------------------------------------------------------
# simulate


def test_simulate_qif_phase(capsys, tmp_path):
    prefix = tmp_path / "qif"
    code, _, _ = run(capsys, "simulate", "--model", "qif", "--repr", "phase", "--input",
                     "const:1", "--t-end", "10", "--dt", "0.001", "--out", str(prefix))
    assert code == 0
    spikes = read_spikes(tmp_path / "qif.spikes.csv")
    np.testing.assert_allclose(np.diff(spikes), math.pi, atol=1e-6)
    traj = (tmp_path / "qif.traj.csv").read_text().splitlines()
    assert traj[0] == "t,value" and len(traj) == 10002


def test_simulate_excitable_nif(capsys, tmp_path):
    prefix = tmp_path / "nif"
    code, _, _ = run(capsys, "simulate", "--model", "nif", "--repr", "voltage", "--input",
                     "const:-1", "--t-end", "5", "--out", str(prefix))
    assert code == 0
    assert (tmp_path / "nif.spikes.csv").read_text() == "t_spike\n"


def test_simulate_lif_phase(capsys):
    code, out, _ = run(capsys, "simulate", "--model", "lif", "--repr", "phase", "--input",
                       "const:1", "--t-end", "10")
    assert code == 0
    spikes = np.array([float(v) for v in out.split()[1:]])
    np.testing.assert_allclose(np.diff(spikes), 2 * math.log(2), atol=1e-8)


def test_simulate_expression_model_voltage(capsys):
    code, out, _ = run(capsys, "simulate", "--model", "expr:f=x^2;xp=inf;xm=-inf",
                       "--repr", "voltage", "--input", "const:1", "--t-end", "7")
    assert code == 0
    spikes = np.array([float(v) for v in out.split()[1:]])
    np.testing.assert_allclose(spikes, [math.pi / 2, 1.5 * math.pi], atol=1e-7)


def test_simulate_json(capsys, tmp_path):
    prefix = tmp_path / "run"
    code, _, _ = run(capsys, "simulate", "--model", "nif", "--input", "step:0,2,1",
                     "--t-end", "2", "--repr", "voltage", "--format", "json",
                     "--out", str(prefix))
    assert code == 0
    data = json.loads((tmp_path / "run.json").read_text())
    assert data["repr"] == "voltage" and data["spikes"] == [pytest.approx(1.5, abs=1e-9)]
    assert len(data["t"]) == len(data["v"]) == 2001


def test_simulate_wrap(capsys):
    code, out, _ = run(capsys, "simulate", "--model", "qif*", "--input", "const:2",
                       "--t-end", "4", "--wrap")
    assert code == 0 and len(out.split()) > 2
    code, _, err = run(capsys, "simulate", "--model", "lif", "--input", "const:2",
                       "--t-end", "4", "--wrap")
    assert code == 4 and "compactified" in err


def test_simulate_guard_and_errors(capsys):
    assert run(capsys, "simulate", "--model", "nope", "--t-end", "1")[0] == 2
    assert run(capsys, "simulate", "--model", "qif", "--t-end", "1", "--input", "sine:1")[0] == 2
    assert run(capsys, "simulate", "--model", "qif", "--t-end", "-1")[0] == 2
    assert run(capsys, "simulate", "--model", "qif", "--t-end", "1", "--init", "5")[0] == 4
    # abs(x) cannot be compactified, so an infinite threshold has no phase fallback
    code, _, err = run(capsys, "simulate", "--model", "expr:f=abs(x)", "--repr", "voltage",
                       "--t-end", "1")
    assert code == 3 and "divergent" in err
    # an input expression that is undefined once the run starts
    assert run(capsys, "simulate", "--model", "qif", "--t-end", "1",
               "--input", "expr:log(t - 1)")[0] == 4


def test_parse_model_spec():
    m = parse_model_spec("expr:f=x^2; xp=10 ;xm=-inf")
    assert m.x_plus == 10.0 and m.x_minus == -math.inf and str(m.f) == "x^2"
    assert parse_model_spec("expr:f=abs(x)").x_plus == math.inf
    for bad in ("expr:xp=1", "expr:f=x;q=1", "expr:f"):
        with pytest.raises(UsageError):
            parse_model_spec(bad)


# --------------------------------------------------------------------------
# fi, onset, verify


def test_fi_closed_sqrt(capsys):
    code, out, _ = run(capsys, "fi", "--model", "sqrt-if*", "--i-min", "0", "--i-max", "1",
                       "--steps", "11", "--method", "closed")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "I,rate" and lines[1] == "0,0.25" and len(lines) == 12


def test_fi_nif(capsys):
    code, out, _ = run(capsys, "fi", "--model", "nif", "--i-min", "0", "--i-max", "2",
                       "--steps", "5")
    rates = [float(r.split(",")[1]) for r in out.splitlines()[1:]]
    np.testing.assert_allclose(rates, [0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)


def test_fi_qif_quad(capsys):
    code, out, _ = run(capsys, "fi", "--model", "qif", "--i-min", "0.01", "--i-max", "1",
                       "--steps", "4", "--method", "quad", "--format", "json")
    data = json.loads(out)
    for I, r in zip(data["I"], data["rate"]):
        assert r == pytest.approx(math.sqrt(I) / math.pi, rel=1e-6)


def test_fi_errors(capsys):
    assert run(capsys, "fi", "--model", "qif", "--i-min", "1", "--i-max", "0", "--steps", "3")[0] == 2
    assert run(capsys, "fi", "--model", "qif", "--i-min", "0", "--i-max", "1", "--steps", "0")[0] == 2
    assert run(capsys, "fi", "--model", "zz", "--i-min", "0", "--i-max", "1", "--steps", "3")[0] == 2


def test_onset(capsys):
    code, out, _ = run(capsys, "onset", "--p", "0.5", "--format", "json")
    data = json.loads(out)
    assert data["onset_rate"] == 0.25
    assert data["quadrature_rate_at_0"] == pytest.approx(0.25, abs=1e-8)
    assert run(capsys, "onset", "--p", "-1")[0] == 4


def test_verify_single_models(capsys):
    code, out, _ = run(capsys, "verify", "--model", "qif")
    assert code == 0
    rows = {r["check"]: r for r in json.loads(out)}
    assert rows["reciprocity"]["max_error"] <= 1e-9
    assert set(rows["reciprocity"]) >= {"check", "model", "max_error", "pass"}
    code, out, _ = run(capsys, "verify", "--model", "lif", "--format", "csv")
    assert code == 0
    assert "non-compactifiable sides reported,lif," in out
    assert out.startswith("check,model,max_error,pass\n")


def test_verify_failure_exit_code(capsys):
    code, out, _ = run(capsys, "verify", "--model", "nif", "--tol", "-1")
    assert code == 1
    assert not all(r["pass"] for r in json.loads(out))
    assert run(capsys, "verify", "--model", "hh")[0] == 2


def test_verify_all(capsys):
    code, out, _ = run(capsys, "verify", "--model", "all")
    rows = json.loads(out)
    assert code == 0 and all(r["pass"] for r in rows)
    assert {r["model"] for r in rows} == {"nif", "qif", "qif*", "lif", "lif*", "lqif",
                                          "sqrt-if*", "expsqrt-if"}


# --------------------------------------------------------------------------
# environment, determinism, entry point


def test_quad_tol_environment(capsys, monkeypatch):
    monkeypatch.setenv("DUALIF_QUAD_TOL", "1e-6")
    code, out, _ = run(capsys, "fi", "--model", "qif", "--i-min", "0.25", "--i-max", "1",
                       "--steps", "2")
    assert code == 0
    assert float(out.splitlines()[1].split(",")[1]) == pytest.approx(0.5 / math.pi, rel=1e-6)
    monkeypatch.setenv("DUALIF_QUAD_TOL", "fast")
    assert run(capsys, "fi", "--model", "qif", "--i-min", "0", "--i-max", "1",
               "--steps", "2")[0] == 2
    monkeypatch.setenv("DUALIF_QUAD_TOL", "-1")
    assert run(capsys, "onset", "--p", "0.5")[0] == 2


def test_outputs_are_byte_identical(capsys, tmp_path):
    argv = ["simulate", "--model", "lqif", "--input", "expr:1+0.5*sin(t)", "--t-end", "5"]
    for name in ("a", "b"):
        assert run(capsys, *argv, "--out", str(tmp_path / name))[0] == 0
    for suffix in (".traj.csv", ".spikes.csv"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()
    dual = ["dualize", "--f", "sinh(x)^2", "--format", "csv"]
    run(capsys, *dual, "--out", str(tmp_path / "d1.csv"))
    run(capsys, *dual, "--out", str(tmp_path / "d2.csv"))
    assert (tmp_path / "d1.csv").read_bytes() == (tmp_path / "d2.csv").read_bytes()
    assert b"\r" not in (tmp_path / "d1.csv").read_bytes()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dualif", "catalog", "list"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.split()[0] == "nif"
    proc = subprocess.run([sys.executable, "-m", "dualif", "catalog", "show", "foo"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 2

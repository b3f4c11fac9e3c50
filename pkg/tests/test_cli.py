from __future__ import annotations

import io
import json

import pytest

from prepivot.cli import ingest_csv, main, parse_args, read_config
from prepivot.errors import DesignMismatch, ParseError, SchemaError
from prepivot.locpoly import Sample
from prepivot.rdd import RddSample
from prepivot.simharness import DgpSpec, draw_sample


def _run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr().out


@pytest.fixture
def npreg_csv(tmp_path):
    s = draw_sample(DgpSpec("npreg"), 800, seed=2)
    path = tmp_path / "data.csv"
    path.write_text("x,y\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(s.x.tolist(), s.y.tolist())))
    return path


@pytest.fixture
def rdd_csv(tmp_path):
    s = draw_sample(DgpSpec("rdd1"), 1500, seed=4)
    path = tmp_path / "rdd.csv"
    path.write_text("x,y,d\n" + "".join(f"{a!r},{b!r},{int(a >= 0)}\n" for a, b in zip(s.x.tolist(), s.y.tolist())))
    return path


def test_ingest_examples():
    s = ingest_csv(io.StringIO("x,y\n0.1,1.2\n"))
    assert isinstance(s, Sample) and s.n == 1
    with pytest.raises(ParseError) as exc:
        ingest_csv(io.StringIO("x,y\n0.1,abc\n"))
    assert exc.value.context["line"] == 2
    r = ingest_csv(io.StringIO("x,y,d\n0.2,1.0,1\n"), cutoff=0.0)
    assert isinstance(r, RddSample) and r.d[0] == 1.0
    with pytest.raises(DesignMismatch):
        ingest_csv(io.StringIO("x,y,d\n0.2,1.0,0\n"), cutoff=0.0)


@pytest.mark.parametrize("text,err", [("x,z\n1,2\n", SchemaError), ("x,x,y\n1,1,2\n", SchemaError),
                                      ("", ParseError), ("x,y\n", ParseError),
                                      ("x,y\n1,2\n3\n", ParseError), ("x,y\n1,inf\n", ParseError),
                                      ("x,y,d\n1,2,3\n", ParseError)])
def test_ingest_errors(text, err):
    with pytest.raises(err):
        ingest_csv(io.StringIO(text))


def test_ci_json_schema_and_roundtrip(capsys, npreg_csv):
    code, out = _run(capsys, ["ci", str(npreg_csv), "--point", "-0.333", "--bandwidth", "0.143",
                              "--kernel", "epanechnikov", "--method", "mplp"])
    assert code == 0
    rep = json.loads(out)
    assert rep["schema_version"] == "1.0" and rep["command"] == "ci"
    ci = rep["intervals"]["mplp"]
    for key in ("estimate", "bias_correction", "se", "lower", "upper"):
        assert isinstance(ci[key], float)
    assert set(rep["intervals"]) == {"mplp"}
    # exact round trip of every float
    from prepivot.intervals import local_intervals
    from prepivot.locpoly import FitConfig
    direct = local_intervals(ingest_csv(npreg_csv), FitConfig(-0.333, 0.143, 1, "epanechnikov"),
                             methods=("mplp",))["mplp"]
    assert ci["lower"] == direct.lower and ci["upper"] == direct.upper and ci["se"] == direct.se


def test_byte_identical(capsys, npreg_csv):
    argv = ["ci", str(npreg_csv), "--point", "0.2", "--bandwidth", "0.3", "--bootstrap", "resampled",
            "--reps", "999", "--seed", "5"]
    _, a = _run(capsys, argv)
    _, b = _run(capsys, argv)
    assert a == b
    _, c = _run(capsys, argv[:-1] + ["6"])
    assert a != c


def test_rdd_command(capsys, rdd_csv):
    code, out = _run(capsys, ["rdd", str(rdd_csv), "--bandwidth", "0.1"])
    assert code == 0
    rep = json.loads(out)
    assert set(rep["intervals"]) == {"naive_gp", "naive_lp", "rbc_pgp", "plp", "mplp"}
    assert rep["diagnostics"]["estimate"] == pytest.approx(-3.45, abs=0.3)
    code, out = _run(capsys, ["rdd", str(rdd_csv), "--bandwidth", "0.1", "--format", "text"])
    assert code == 0 and "mplp" in out


def test_formats(capsys, npreg_csv):
    code, out = _run(capsys, ["ci", str(npreg_csv), "--point", "0.0", "--bandwidth", "0.3", "--format", "csv"])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("method,lower,upper") and len(lines) == 7
    code, out = _run(capsys, ["ci", str(npreg_csv), "--point", "0.0", "--bandwidth", "0.3",
                              "--format", "text"])
    first = out.splitlines()[1].split()
    assert len(first[1].split(".")[-1]) == 4


def test_error_codes(capsys, npreg_csv, tmp_path):
    code, out = _run(capsys, ["ci", str(npreg_csv), "--point", "5.0", "--bandwidth", "0.1"])
    assert code == 1
    assert json.loads(out)["error"]["code"] == "insufficient_local_data"
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0.1,abc\n")
    code, out = _run(capsys, ["ci", str(bad), "--point", "0", "--bandwidth", "0.1"])
    err = json.loads(out)["error"]
    assert code == 1 and err["code"] == "parse_error" and err["line"] == 2
    code, out = _run(capsys, ["ci", str(npreg_csv), "--point", "0", "--bandwidth", "0.3", "--alpha", "1.5"])
    assert code == 1 and json.loads(out)["error"]["code"] == "invalid_alpha"
    with pytest.raises(SystemExit) as exc:
        main(["ci", str(npreg_csv), "--point", "0", "--bandwidth", "-1"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_config_file(capsys, npreg_csv, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\npoint = 0.1\nbandwidth=0.4\nkernel = biweight\nalpha=0.1\n")
    assert read_config(cfg)["kernel"] == "biweight"
    args = parse_args(["ci", str(npreg_csv), "--config", str(cfg), "--alpha", "0.2"])
    assert (args.point, args.bandwidth, args.kernel, args.alpha) == (0.1, 0.4, "biweight", 0.2)
    bad = tmp_path / "bad.cfg"
    bad.write_text("point=0.1\nnonsense\n")
    with pytest.raises(ParseError):
        read_config(bad)
    bad.write_text("colour=blue\n")
    code, out = _run(capsys, ["ci", str(npreg_csv), "--config", str(bad), "--point", "0", "--bandwidth", "1"])
    assert code == 2 and json.loads(out)["error"]["code"] == "schema_error"


def test_constants_command(capsys, tmp_path):
    code, out = _run(capsys, ["constants", "--kernel", "epanechnikov", "--region", "interior", "--digits", "2"])
    rep = json.loads(out)["constants"][0]
    assert code == 0 and rep["k_plp"] == 0.85 and rep["k_rbc"] == 1.25 and rep["length_ratio"] == 0.83
    code, out = _run(capsys, ["constants", "--all", "--order", "1"])
    rows = json.loads(out)["constants"]
    assert len(rows) == 10
    tri_bnd = [r for r in rows if r["kernel"] == "triangular" and r["region"] == "boundary"][0]
    assert abs(tri_bnd["k_mplp"] - 7.17) < 0.005
    grid = tmp_path / "g.csv"
    code, out = _run(capsys, ["constants", "--kernel", "uniform", "--region", "boundary",
                              "--emit-grid", str(grid), "--grid-points", "11"])
    assert code == 0 and json.loads(out)["grid"]["rows"] == 11 and grid.exists()
    code, out = _run(capsys, ["constants", "--all", "--emit-grid", str(grid)])
    assert code == 1


def test_simulate_command(capsys, tmp_path):
    out_csv = tmp_path / "t.csv"
    code, out = _run(capsys, ["simulate", "--table", "5", "--dgp", "rdd2", "--n", "800", "--reps", "6",
                              "--bandwidth", "0.3", "--out", str(out_csv), "--format", "csv"])
    assert code == 0
    assert out.splitlines()[0] == "dgp,n,rule,hbar,method,coverage,length,failures"
    assert out_csv.read_text() == out
    code, out = _run(capsys, ["simulate", "--table", "4", "--dgp", "rdd2", "--reps", "2"])
    assert code == 1


def test_module_entry():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "prepivot", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "prepivot" in res.stdout

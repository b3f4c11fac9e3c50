from __future__ import annotations

import csv
import io

import numpy as np
import pytest

from prepivot.errors import ParseError, ZeroCurvature
from prepivot.simharness import (CSV_COLUMNS, DgpSpec, SimConfig, amse, amse_coefficients,
                                 draw_sample, oracle_bandwidth, read_bandwidths, run_simulation,
                                 stream, table_configs, worker_count, write_csv)


@pytest.mark.parametrize("kind,mean", [("npreg", 0.0), ("rdd1", -1.0 / 3.0)])
def test_design_means(kind, mean):
    x = DgpSpec(kind).draw_x(stream(123, 0), 1_000_000)
    assert abs(x.mean() - mean) < 0.002
    assert x.min() >= -1.0 and x.max() <= 1.0


def test_true_values_and_g():
    assert DgpSpec("rdd1").true_value() == pytest.approx(-3.45)
    assert DgpSpec("rdd2").true_value() == pytest.approx(0.04)
    d = DgpSpec("npreg")
    assert d.g(0.0) == 0.0
    x = np.array([-0.7, -0.2, 0.3, 0.8])
    ref = np.where(x > 0, np.sin(1.5 * np.pi * x) / (1 + 36 * x**2), np.sin(1.5 * np.pi * x))
    np.testing.assert_allclose(d.g(x), ref, rtol=1e-14)
    # symbolic derivative against a central difference
    for t in (-1 / 3, 0.4):
        fd = (d.g(t + 1e-4) - 2 * d.g(t) + d.g(t - 1e-4)) / 1e-8
        assert d.derivative(t, 2) == pytest.approx(fd, rel=1e-5)
    assert d.derivative(-1 / 3, 2) == pytest.approx((1.5 * np.pi) ** 2, rel=1e-12)
    with pytest.raises(ValueError):
        DgpSpec("rdd3")


def test_sample_determinism():
    a = draw_sample(DgpSpec("rdd2"), 500, seed=9, index=4)
    b = draw_sample(DgpSpec("rdd2"), 500, seed=9, index=4)
    c = draw_sample(DgpSpec("rdd2"), 500, seed=9, index=5)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.x, c.x)


def test_oracle_bandwidth_table_values():
    d = DgpSpec("npreg")
    assert oracle_bandwidth(d, -1 / 3, 2000) == pytest.approx(0.125, abs=0.002)
    assert oracle_bandwidth(d, -1 / 3, 1000) == pytest.approx(0.143, abs=0.002)
    # RDD oracle vs the reported average bandwidths, loosely
    assert oracle_bandwidth(DgpSpec("rdd1"), 0.0, 4000, "triangular") == pytest.approx(0.054, rel=0.10)
    assert oracle_bandwidth(DgpSpec("rdd1"), 0.0, 2000, "triangular") == pytest.approx(0.063, rel=0.10)
    assert oracle_bandwidth(DgpSpec("rdd2"), 0.0, 4000, "triangular") == pytest.approx(0.172, rel=0.10)


@pytest.mark.parametrize("kind,point,kernel,n", [("npreg", -1 / 3, "epanechnikov", 2000),
                                                 ("npreg", -1.0, "epanechnikov", 2000),
                                                 ("rdd1", 0.0, "triangular", 4000)])
def test_oracle_matches_grid_search(kind, point, kernel, n):
    d = DgpSpec(kind)
    b, v2 = amse_coefficients(d, point, kernel, 1, "boundary" if point != -1 / 3 else "interior")
    hs = np.arange(0.01, 1.0 + 1e-12, 1e-4)
    h_grid = hs[np.argmin(amse(hs, b, v2, n))]
    assert abs(h_grid - oracle_bandwidth(d, point, n, kernel)) < 1e-3


def test_zero_curvature():
    # g'' of sin(3 pi x / 2) vanishes at x = -2/3
    with pytest.raises(ZeroCurvature):
        oracle_bandwidth(DgpSpec("npreg"), -2.0 / 3.0, 1000)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(replications=0)
    with pytest.raises(ValueError):
        SimConfig(bandwidth_rule="silverman")
    with pytest.raises(ValueError):
        SimConfig(bandwidth_rule=-0.1)
    with pytest.raises(ValueError):
        SimConfig(bandwidths=(0.1, 0.0))
    assert SimConfig(dgp="rdd1", point=0.5).point == 0.0
    assert SimConfig().name == "npreg_int" and SimConfig(point=-1.0).name == "npreg_bnd"


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("NPREG_THREADS", "1")
    assert worker_count(8) == 1
    monkeypatch.setenv("NPREG_THREADS", "3")
    assert worker_count(8) == 3
    monkeypatch.delenv("NPREG_THREADS")
    assert worker_count(2) == 2


def test_run_determinism_across_workers(monkeypatch):
    monkeypatch.delenv("NPREG_THREADS", raising=False)
    cfg = SimConfig(dgp="rdd2", n=600, replications=12, kernel="triangular", seed=3, workers=1)
    a = run_simulation(cfg)
    b = run_simulation(SimConfig(dgp="rdd2", n=600, replications=12, kernel="triangular", seed=3,
                                 workers=2))
    for m in cfg.methods:
        assert a.summaries[m] == b.summaries[m]
        assert np.array_equal(a.lengths[m], b.lengths[m])
    assert a.hbar == b.hbar
    # naive GP and LP lengths agree replication by replication
    np.testing.assert_allclose(a.lengths["naive_gp"], a.lengths["naive_lp"], rtol=1e-12)


def test_csv_output():
    res = run_simulation(SimConfig(n=400, replications=5, bandwidth_rule=0.3))
    buf = io.StringIO()
    write_csv([res], buf)
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r["method"] for r in rows] == list(res.config.methods)
    assert rows[0]["rule"] == "fixed" and float(rows[0]["hbar"]) == 0.3
    assert res.coverage_se_pct("mplp") >= 0


def test_bandwidth_replay(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("rep,h\n0,0.2\n1,0.25\n\n# comment\n2,0.3\n")
    hs = read_bandwidths(path)
    assert hs == (0.2, 0.25, 0.3)
    cfg = SimConfig(n=400, replications=4, bandwidths=hs)
    assert cfg.rule == "replay" and cfg.bandwidth(3) == 0.2
    assert run_simulation(cfg).hbar == pytest.approx((0.2 + 0.25 + 0.3 + 0.2) / 4)
    bad = tmp_path / "bad.txt"
    bad.write_text("0.2\nabc\n")
    with pytest.raises(ParseError) as exc:
        read_bandwidths(bad)
    assert exc.value.context["line"] == 2


def test_table_configs():
    t4 = table_configs(4, replications=10)
    assert [c.name for c in t4] == ["npreg_int", "npreg_bnd"]
    assert t4[1].point == -1.0 and t4[0].kernel == "epanechnikov"
    t5 = table_configs(5, replications=10, dgps=["rdd2"])
    assert [c.name for c in t5] == ["rdd2"] and t5[0].n == 4000 and t5[0].kernel == "triangular"
    with pytest.raises(ValueError):
        table_configs(6)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hifbe.algo import (HifbaTrace, descent_guaranteed, hifba_run, hifba_step,
                        scaled_gradient_check)
from hifbe.catalog import problem_catalog_get
from hifbe.core import CompositeProblem, NonsmoothOracle
from hifbe.inner import EnvelopeConfig


def test_quadratic_run(frozen):
    P = problem_catalog_get("quad-free1d")
    tr = hifba_run(P, [2.0], EnvelopeConfig(p=2, gamma=0.5), max_iters=100, res_tol=1e-6)
    assert tr.stop_reason == "residual-tol"
    assert len(tr) == frozen["quad_hifba_records"]
    assert np.allclose([r.x[0] for r in tr.records], 2.0 * 0.5 ** np.arange(len(tr)))
    assert tr.final.res_norm <= 1e-6


def test_step_is_representative():
    P = problem_catalog_get("quad-l1")
    assert hifba_step(P, [2.0], EnvelopeConfig(p=2, gamma=0.5))[0] == pytest.approx(1.0)


@given(x0=st.floats(-3, 3), gamma=st.floats(0.05, 0.8))
def test_monotone_objective_oscillatory(x0, gamma):
    P = problem_catalog_get("oscillatory")
    cfg = EnvelopeConfig(p=1.5, gamma=gamma)
    assert descent_guaranteed(P, cfg)
    tr = hifba_run(P, [x0], cfg, max_iters=40)
    assert not tr.faults
    phis = tr.phis
    assert np.all(np.diff(phis) <= cfg.tol_val)
    for r in tr.records:
        assert r.env <= r.phi + cfg.tol_val


@given(x0=st.floats(-3, 3), gamma=st.floats(0.05, 0.8))
def test_scaled_gradient_identity(x0, gamma):
    P = problem_catalog_get("oscillatory")
    cfg = EnvelopeConfig(p=1.5, gamma=gamma)
    tr = hifba_run(P, [x0], cfg, max_iters=15)
    for r in tr.records:
        if not (r.single_valued and r.certified):
            continue
        val = scaled_gradient_check(P, r, cfg)
        if val is not None:
            assert val <= 1e-6


def test_scaled_gradient_skips_zero_step():
    P = problem_catalog_get("quad-l1")
    cfg = EnvelopeConfig(p=2, gamma=0.5)
    tr = hifba_run(P, [0.0], cfg)
    assert tr.stop_reason == "residual-tol" and len(tr) == 1
    assert scaled_gradient_check(P, tr.final, cfg) is None


def test_descent_guard():
    P = problem_catalog_get("oscillatory")
    assert not descent_guaranteed(P, EnvelopeConfig(p=2.0, gamma=0.1))
    assert not descent_guaranteed(P, EnvelopeConfig(p=1.5, gamma=1.0))
    assert descent_guaranteed(problem_catalog_get("zero"), EnvelopeConfig(p=2.0, gamma=100.0))


def test_stop_reasons():
    P = problem_catalog_get("power-q")
    tr = hifba_run(P, [2.0], EnvelopeConfig(p=1.5, gamma=0.2), max_iters=3)
    assert tr.stop_reason == "max-iters" and len(tr) == 3
    g = NonsmoothOracle(1, lambda y: -y[..., 0] ** 4, vectorized=True)
    bad = CompositeProblem(problem_catalog_get("zero").f, g)
    tr = hifba_run(bad, [0.0], EnvelopeConfig(p=2, gamma=1.0))
    assert tr.stop_reason == "envelope-undefined" and tr.faults and len(tr) == 0
    with pytest.raises(ValueError):
        hifba_run(P, [0.0], EnvelopeConfig(), max_iters=0)


def test_stalled_run():
    # residual stays above res_tol but steps fall under tol_y
    P = problem_catalog_get("quad-free1d")
    cfg = EnvelopeConfig(p=2, gamma=1e-9)
    tr = hifba_run(P, [1.0], cfg, res_tol=1e-12)
    assert tr.stop_reason == "stalled" and len(tr) == 10


def test_csv_layout():
    tr = hifba_run(problem_catalog_get("quad-free1d"), [1.0], EnvelopeConfig(p=2, gamma=0.5), max_iters=3)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "k,x,phi,env,res_norm,d"
    assert len(lines) == 4 and lines[1].startswith("0,1,0.5,")
    tr2 = hifba_run(problem_catalog_get("quad-free"), [1.0, 1.0], EnvelopeConfig(p=2, gamma=0.3), max_iters=2)
    assert tr2.to_csv().splitlines()[0] == "k,x_1,x_2,phi,env,res_norm,d_1,d_2"
    assert HifbaTrace().to_csv() == ""

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hifbe.analysis import (CheckReport, bundle, check_descent_lemma, check_envelope_regularity,
                            check_envelope_relations, check_gradient_consistency, check_hifba_descent,
                            check_majorant, check_p_calm, check_power_split, check_stationarity_inclusion,
                            check_tau_containment, check_uniform_shrinkage, envelope_constants,
                            estimate_calm_constant, estimate_kappa_p, fixed_point_gamma, holder_modulus,
                            lower_bound_constant, single_valued_threshold, skipped, tau_bound,
                            weak_smoothness_exponent)
from hifbe.analysis import single_valued_report
from hifbe.catalog import CATALOG_IDS, problem_catalog_get
from hifbe.core import CompositeProblem, NonsmoothOracle, SmoothOracle
from hifbe.errors import (CapabilityError, DomainError, GammaTooLargeError, ProxBoundViolationError)
from hifbe.inner import EnvelopeConfig


def zero_f_with(g):
    return CompositeProblem(problem_catalog_get("zero").f, g, id="custom")


# ---- kappa and the power inequalities --------------------------------------

def test_kappa_exact_at_two():
    assert estimate_kappa_p(2.0, 1.0) == pytest.approx(0.99, rel=1e-12)


def test_kappa_one_dimensional_infimum(frozen):
    k = estimate_kappa_p(1.5, 1.0)
    assert 0.99 * frozen["kappa_1d_p15"] <= k <= 0.99 * frozen["kappa_1d_p15"] * 1.01


def test_kappa_monotone_in_p():
    ks = [estimate_kappa_p(p, 1.0) for p in (1.25, 1.5, 1.75, 2.0)]
    assert all(a < b for a, b in zip(ks, ks[1:]))


def test_kappa_scale_invariant():
    assert estimate_kappa_p(1.5, 1.0, seed=3) == pytest.approx(estimate_kappa_p(1.5, 4.0, seed=3), rel=1e-9)


def test_kappa_arguments():
    with pytest.raises(ValueError):
        estimate_kappa_p(1.5, 1.0, n_samples=100)
    with pytest.raises(ValueError):
        estimate_kappa_p(2.5, 1.0)


def test_kappa_two_dims_positive():
    k = estimate_kappa_p(1.5, 1.0, dim=2)
    assert 0 < k <= 0.99 * 0.5 * 1.01


@given(p=st.floats(1.05, 2.0), seed=st.integers(0, 50))
def test_power_split(p, seed):
    assert check_power_split(p, seed=seed).passed


def test_descent_lemma_all_catalog():
    for pid in CATALOG_IDS:
        assert check_descent_lemma(problem_catalog_get(pid), n_pairs=2000).status == "pass", pid


def test_descent_lemma_detects_small_constant():
    P = problem_catalog_get("quad-l1")
    f = SmoothOracle(1, P.f.value, P.f.gradient, P.f.hessian, nu=1.0, l_nu=0.5, vectorized=True)
    rep = check_descent_lemma(CompositeProblem(f, P.g), n_pairs=2000)
    assert rep.status == "fail" and rep.witness is not None


# ---- constants -------------------------------------------------------------

def test_tau_example(frozen):
    tau, tau_hat = tau_bound(1.0, 0.1, 1.0, 1.0, 2.0, 0.0, 0.0)
    assert tau == pytest.approx(frozen["tau_example"], rel=1e-14)
    assert tau_hat == tau
    assert holder_modulus(1.0, 1.0, tau, 0.1, 2.0, 1.0) == pytest.approx(frozen["modulus_example"], rel=1e-14)


def test_tau_step_limit():
    with pytest.raises(GammaTooLargeError):
        tau_bound(1.0, 0.25, 1.0, 1.0, 2.0, 0.0, 0.0)
    with pytest.raises(GammaTooLargeError):
        tau_bound(1.0, 0.1, 1.0, 1.0, 2.0, 0.0, 0.0, gamma_max=0.3)


@given(g1=st.floats(0.001, 0.249), g2=st.floats(0.001, 0.249), p=st.floats(1.1, 2.0))
def test_tau_increases_with_gamma(g1, g2, p):
    lo, hi = sorted((g1, g2))
    limit = 4.0 ** (1 - p)
    lo, hi = lo * limit / 0.25, hi * limit / 0.25
    t_lo, t_hat = tau_bound(1.0, lo, 1.0, 1.0, p, 0.3, -0.2, gamma_max=hi)
    t_hi, _ = tau_bound(1.0, hi, 1.0, 1.0, p, 0.3, -0.2)
    assert t_lo <= t_hi * (1 + 1e-12)
    assert t_hat == pytest.approx(t_hi, rel=1e-12)


def test_tau_blows_up_at_limit():
    limit = 4.0 ** -0.5
    taus = [tau_bound(1.0, limit * (1 - 10.0 ** -k), 1.0, 1.0, 1.5, 0.0, 0.0)[0] for k in range(1, 7)]
    assert all(a < b for a, b in zip(taus, taus[1:])) and taus[-1] > 100 * taus[0]


def test_exponent_and_threshold():
    assert weak_smoothness_exponent(0.5, 1.0) == 0.125
    assert weak_smoothness_exponent(0.5, 0.2) == pytest.approx(0.05)
    assert single_valued_threshold(0.5, 1.0, 3.0, 2.0, 10.0, 1.5) == pytest.approx(0.25 * 4 ** -0.5)
    assert single_valued_threshold(0.5, 1.0, 3.0, 2.0, 0.01, 1.5) == 0.01


def test_lower_bound_constant_power_q(frozen):
    c1 = lower_bound_constant(problem_catalog_get("power-q"), 1.0, 1.0, 1.5)
    ref = frozen["powerq_c1_min"]
    assert ref - 0.05 <= c1 <= ref


def test_lower_bound_rejects_unbounded_g():
    P = zero_f_with(NonsmoothOracle(1, lambda y: -y[..., 0] ** 2, vectorized=True))
    with pytest.raises(ProxBoundViolationError):
        lower_bound_constant(P, 1.0, 1.0, 1.5)


def test_lower_bound_hint():
    g = NonsmoothOracle(1, lambda y: -y[..., 0] ** 2, vectorized=True, prox_bound_hint=0.5)
    with pytest.raises(GammaTooLargeError):
        lower_bound_constant(zero_f_with(g), 1.0, 1.0, 2.0)


def test_envelope_constants_need_1d():
    from hifbe.errors import DependencyError
    with pytest.raises(DependencyError):
        envelope_constants(problem_catalog_get("quad-free"), EnvelopeConfig(p=2, gamma=0.1), 1.0)


def test_tau_containment_oscillatory():
    P = problem_catalog_get("oscillatory")
    rep = check_tau_containment(P, EnvelopeConfig(p=1.5, gamma=0.2), 2.0, n_samples=200)
    assert rep.status == "pass" and rep.n_samples == 200


# ---- calmness ---------------------------------------------------------------

def test_calm_power_q():
    P = problem_catalog_get("power-q")
    M = estimate_calm_constant(P, [0.0], 1.5)
    assert M == 1e-6  # x_bar = 0 is a global minimizer
    rep = check_p_calm(P, [0.0], M, 1.5)
    assert rep.status == "pass"
    assert fixed_point_gamma(P, M, 1.5) == pytest.approx(1 / (2 * P.f.l_nu))


def test_calm_counterexample():
    # phi = -|x| is not p-calm at 0 for any M when p > 1
    P = zero_f_with(NonsmoothOracle(1, lambda y: -np.abs(y[..., 0]), vectorized=True))
    M = 10.0
    rep = check_p_calm(P, [0.0], M, 1.5)
    assert rep.status == "fail"
    assert rep.sub_reports[0].status == "fail"
    assert abs(float(rep.sub_reports[0].witness[0])) < (1 / M) ** 2
    assert estimate_calm_constant(P, [0.0], 1.5) >= 1e-4 ** -0.5


def test_calm_outside_domain():
    from hifbe.catalog import box_g
    P = zero_f_with(box_g(-1, 1))
    with pytest.raises(DomainError):
        check_p_calm(P, [2.0], 1.0, 2.0)


def test_stationarity_oscillatory():
    P = problem_catalog_get("oscillatory")
    cfg = EnvelopeConfig(p=1.5, gamma=0.2)
    for x in np.linspace(-2.4, 2.4, 13):
        assert check_stationarity_inclusion(P, [x], cfg).status == "pass", x
    assert check_stationarity_inclusion(P, [0.0], cfg, calm_point=True).status == "pass"


def test_stationarity_detects_wrong_subdifferential():
    P = problem_catalog_get("quad-l1")
    g = NonsmoothOracle(1, P.g.value, analytic_prox=P.g.analytic_prox, prox_orders=(2.0,),
                        subdiff_1d=lambda y: (5.0, 6.0), vectorized=True)
    rep = check_stationarity_inclusion(CompositeProblem(P.f, g), [2.0], EnvelopeConfig(p=2, gamma=0.5))
    assert rep.status == "fail"


def test_stationarity_needs_1d():
    with pytest.raises(CapabilityError):
        check_stationarity_inclusion(problem_catalog_get("quad-free"), [0.0, 0.0], EnvelopeConfig())


def test_shrinkage_power_q(frozen):
    P = problem_catalog_get("power-q")
    rep = check_uniform_shrinkage(P, EnvelopeConfig(p=1.5, gamma=0.2), [0.0], 0.1)
    theta = rep.constants_used["theta"]
    ref = frozen["powerq_shrink_theta_eps01"]
    # a sampled worst case can only undershoot the true sup, so allow a small overshoot
    assert rep.status == "pass" and 0.9 * ref <= theta <= 1.01 * ref


def test_shrinkage_inconclusive():
    P = problem_catalog_get("power-q")
    rep = check_uniform_shrinkage(P, EnvelopeConfig(p=1.5, gamma=0.2), [0.0], 0.1, radii=(1.0,), n_samples=20)
    assert rep.status == "inconclusive"


# ---- regularity, majorant, relations, gradient, iteration -------------------

def test_regularity_power_q():
    P = problem_catalog_get("power-q")
    rep = check_envelope_regularity(P, EnvelopeConfig(p=1.5, gamma=0.2), n_pairs=1000, local_pairs=200)
    assert rep.status == "pass"
    ids = [s.check_id.split(":")[-1] for s in rep.sub_reports]
    assert ids == ["envelope-holder", "map-holder", "gradient-holder", "gradient-path"]
    path = rep.sub_reports[-1]
    assert path.n_samples >= 100
    assert path.constants_used["max_jump"] <= path.constants_used["fitted_constant"] * 1.0 + 1e-6


def test_regularity_skips_large_gamma():
    P = problem_catalog_get("power-q")
    rep = check_envelope_regularity(P, EnvelopeConfig(p=1.5, gamma=0.9), n_pairs=200, local_pairs=100)
    assert rep.sub_reports[0].status == "skipped"


def test_majorant_demo():
    rep = check_majorant(problem_catalog_get("majorant-demo"))
    status = {s.constants_used["mu"]: s.status for s in rep.sub_reports}
    assert status == {0.5: "pass", 1.0: "fail-expected", 0.2: "fail-expected"}
    assert rep.status == "pass"


def test_majorant_unexpected_failure_fails():
    rep = check_majorant(problem_catalog_get("majorant-demo"), expected={0.5: True, 1.0: True, 0.2: True})
    assert rep.status == "fail"


def test_envelope_relations():
    P = problem_catalog_get("oscillatory")
    L = P.f.l_nu
    cfgs = [EnvelopeConfig(p=1.5, gamma=g) for g in (0.2, 0.9 / L, 1.0, 2.0)]
    rep = check_envelope_relations(P, cfgs, grid=(-2.5, 2.5, 201))
    assert rep.status == "pass"
    by_id = {s.check_id.split(":", 2)[-1]: s.status for s in rep.sub_reports}
    assert by_id["gamma-monotone"] == "pass"
    assert by_id["descent-chain:gamma=2"] == "skipped"


def test_gradient_consistency_catalog():
    for pid in ("oscillatory", "quad-l1", "quad-free", "majorant-demo"):
        P = problem_catalog_get(pid)
        cfg = EnvelopeConfig(p=1.0 + P.f.nu, gamma=0.3)
        rep = check_gradient_consistency(P, cfg, n_points=30)
        assert rep.status == "pass", pid


def test_gradient_consistency_skips_fixed_points():
    rep = check_gradient_consistency(problem_catalog_get("zero"), EnvelopeConfig(), n_points=5)
    assert rep.status == "skipped"


def test_hifba_descent_oscillatory():
    rep = check_hifba_descent(problem_catalog_get("oscillatory"), EnvelopeConfig(p=1.5, gamma=0.2), n_starts=3)
    assert rep.status == "pass"


# ---- reports ----------------------------------------------------------------

def test_reports_reproducible_and_serializable():
    P = problem_catalog_get("oscillatory")
    a = check_descent_lemma(P, n_pairs=500, seed=11).to_dict()
    b = check_descent_lemma(P, n_pairs=500, seed=11).to_dict()
    assert a == b
    rep = check_majorant(problem_catalog_get("majorant-demo"))
    text = json.dumps(rep.to_dict())
    assert json.loads(text)["sub_reports"][1]["status"] == "fail-expected"
    r = CheckReport("x", True, worst_violation=math.inf, witness=np.array([math.nan]))
    assert r.to_dict()["worst_violation"] == "inf" and r.to_dict()["witness"] == ["nan"]


def test_bundle_status_rules():
    ok = CheckReport("a", True)
    bad = CheckReport("b", False, worst_violation=2.0)
    inc = CheckReport("c", False, status="inconclusive")
    assert bundle("x", [ok, skipped("s", "why")]).status == "pass"
    assert bundle("x", [ok, inc]).status == "inconclusive"
    out = bundle("x", [ok, inc, bad])
    assert out.status == "fail" and out.worst_violation == 2.0


def test_single_valued_threshold_report():
    P = problem_catalog_get("quad-l1")
    cfg = EnvelopeConfig(p=2.0, gamma=0.2)
    rep = single_valued_report(P, cfg, 2.0, estimate_kappa_p(2.0, 2.0), n_samples=50)
    c = rep.constants_used
    assert rep.status == "pass" and c["hess_bound"] == 1.0
    assert c["threshold"] == pytest.approx(min(0.2, 0.99 / 1.0))


def test_single_valued_threshold_unbounded_hessian():
    P = problem_catalog_get("oscillatory")
    rep = single_valued_report(P, EnvelopeConfig(p=1.5, gamma=0.2), 2.0, 0.495, n_samples=20)
    assert rep.status == "skipped" and rep.constants_used["threshold"] == 0.0


def test_gradient_path_detects_small_constant():
    from hifbe.analysis import _gradient_path
    P = problem_catalog_get("quad-free1d")
    cfg = EnvelopeConfig(p=2.0, gamma=0.2)
    rep = _gradient_path(P, cfg, np.array([0.5]), 0.4, 1e-3, 1.0, 1e-12, 41, "path", 0, fitted_ok=True)
    assert rep.status == "fail"

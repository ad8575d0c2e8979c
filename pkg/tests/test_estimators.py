import warnings

import numpy as np
import pytest

from conftest import setup
from bdrecon.errors import DegenerateFit, InsufficientTrials, ValidationError
from bdrecon.estimators import (EstimatorConfig, averaged_estimate, boundary_constant, coverage_and_N0,
                                direct_estimate, fit_rate, summability_proxy, theoretical_N0,
                                window_average_direct)
from bdrecon.fields import EMParameters, LameFields, ScalarField
from bdrecon.maxwell import coefficient_for


def em(eps="const:2", sigma="const:0.5", mu="const:1"):
    return EMParameters(ScalarField.from_id(mu), ScalarField.from_id(eps), ScalarField.from_id(sigma), 1.0)


def test_fit_rate_examples():
    xs = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    fit = fit_rate(xs, xs**-2.0)
    assert fit.slope == pytest.approx(-2.0, abs=1e-12) and fit.r2 == pytest.approx(1.0)
    const = fit_rate(xs, np.full(5, 3.0))
    assert const.slope == 0.0 and const.r2 == 1.0
    rng = np.random.default_rng(0)
    x = np.geomspace(16, 4096, 9)
    noisy = fit_rate(x, x**-0.5 * np.exp(0.02 * rng.standard_normal(9)))
    assert noisy.slope == pytest.approx(-0.5, abs=0.05)


def test_fit_rate_degenerate_and_invalid():
    xs = np.arange(1.0, 7.0)
    ys = np.array([1.0, 3.0, 1.2, 2.8, 1.1, 3.1])
    with pytest.raises(DegenerateFit):
        fit_rate(xs, ys, strict=True)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        assert fit_rate(xs, ys).degenerate
    assert rec
    with pytest.raises(ValidationError):
        fit_rate([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValidationError):
        fit_rate([1, 2, 3, 4], [1, 0, 3, 4])


@pytest.mark.parametrize("kw,msg", [
    ({"theta": 1.5}, "open interval"), ({"theta": 0.0}, "open interval"), ({"target": "Sigma"}, "target"),
    ({"noise_level": "Huge"}, "noise_level"), ({"N_grid": ()}, "N_grid"), ({"trials": 0}, "trials"),
])
def test_config_validation(kw, msg):
    with pytest.raises(ValidationError, match=msg):
        EstimatorConfig(**kw)


def test_l2_noise_requires_c11_for_maxwell_only():
    patch, p, _ = setup("wedge", (0.3, 0.2))
    with pytest.raises(ValidationError):
        EstimatorConfig(noise_level="L2").check_patch(patch)
    EstimatorConfig(target="ElasticZ", noise_level="L2").check_patch(patch)


def test_theoretical_N0_law():
    N0 = theoretical_N0(0.8, 0.1, 0.5)
    bound = 0.8**2 / (0.1 * 0.5)
    assert (N0 - 1) ** 0.5 > bound >= (N0 - 2) ** 0.5
    # half the tolerance needs four times the grid for theta = 1/2
    assert theoretical_N0(0.8, 0.05, 0.5) / N0 == pytest.approx(4.0, rel=0.05)
    assert theoretical_N0(1e-6, 0.1, 0.5) == 2
    assert boundary_constant([4, 16], [0.5, 0.2]) == pytest.approx(1.0)


def test_noiseless_direct_estimate_converges(flat):
    patch, p, _ = flat
    cfg = EstimatorConfig(N_grid=(64, 128, 256, 512, 1024))
    rep = direct_estimate(cfg, patch, p, em(), diagnostics=False)
    assert rep.fitted_slopes["abs_error"] == pytest.approx(-1.0, abs=0.1)
    last = rep.rows[-1]
    assert last["abs_error"] <= 0.01 * abs(last["truth"])
    assert last["truth"] == pytest.approx(2 + 0.5j)


def test_estimate_is_linear_in_coefficient(flat):
    patch, p, _ = flat
    cfg = EstimatorConfig(N_grid=(64, 256))
    a = direct_estimate(cfg, patch, p, em(eps="const:1", sigma="const:0"), diagnostics=False).column("estimate")
    b = direct_estimate(cfg, patch, p, em(eps="const:3", sigma="const:0"), diagnostics=False).column("estimate")
    assert np.allclose(b, 3 * a, rtol=1e-12)


def test_noisy_runs_are_reproducible(flat):
    patch, p, _ = flat
    cfg = EstimatorConfig(noise_level="HMinus1", N_grid=(64, 128, 256, 512), trials=20, seed=9, stress_rho=0.3)
    a = direct_estimate(cfg, patch, p, em(), diagnostics=False)
    b = direct_estimate(cfg, patch, p, em(), diagnostics=False)
    assert np.array_equal(a.estimates, b.estimates)
    c = direct_estimate(EstimatorConfig(noise_level="HMinus1", N_grid=(64, 128, 256, 512), trials=20, seed=10),
                        patch, p, em(), diagnostics=False)
    assert not np.allclose(a.estimates, c.estimates)


def test_uncertified_point_is_rejected(flat):
    from bdrecon.geometry import AdmissiblePoint, make_patch

    patch = make_patch("flat")
    bare = AdmissiblePoint.at(patch, np.zeros(2))
    assert not bare.certified
    with pytest.raises(ValidationError):
        direct_estimate(EstimatorConfig(N_grid=(64,)), patch, bare, em())


def test_coverage_needs_trials(flat):
    patch, p, _ = flat
    cfg = EstimatorConfig(noise_level="HMinus1", N_grid=(64, 128), trials=10)
    rep = direct_estimate(cfg, patch, p, em(), diagnostics=False)
    with pytest.raises(InsufficientTrials):
        coverage_and_N0(cfg, rep)


def test_summability_proxy():
    Ns = np.array([64.0, 128.0, 256.0, 512.0])
    good = summability_proxy(Ns, Ns**-2.0, 0.5)
    assert good.summable and np.isfinite(good.tail_bound)
    assert good.terms == pytest.approx(Ns**-1.5)
    bad = summability_proxy(Ns, Ns**-0.25, 0.5)
    assert not bad.summable and bad.tail_bound == np.inf


def test_elastic_estimate_recovers_lame(flat):
    patch, p, _ = flat
    L = LameFields(ScalarField.from_id("const:0"), ScalarField.from_id("const:1"))
    cfg = EstimatorConfig(target="ElasticZ", noise_level="HMinus1", N_grid=(16, 32, 64, 128), trials=4)
    rep = direct_estimate(cfg, patch, p, L)
    lam, mu = rep.rows[-1]["diagnostics"]["lame"]
    assert lam == pytest.approx(0.0, abs=1e-3) and mu == pytest.approx(1.0, rel=1e-3)
    assert rep.rows[-1]["abs_error"] < rep.rows[0]["abs_error"]


def test_averaged_deterministic_part_matches_direct_average(flat):
    patch, p, frame = flat
    cfg = EstimatorConfig(noise_level="L2", N_grid=(2,), trials=3)
    par = em()
    rep = averaged_estimate(cfg, patch, p, par)
    row = rep.rows[0]
    T = row["diagnostics"]["T"]
    ref = window_average_direct(coefficient_for(par, "gamma"), patch, p, frame, T)
    assert row["deterministic"] == pytest.approx(ref, rel=1e-4)
    assert row["diagnostics"]["noise_var_theory"] > 0
    with pytest.raises(ValidationError):
        averaged_estimate(EstimatorConfig(noise_level="HMinus1", N_grid=(2,)), patch, p, par)

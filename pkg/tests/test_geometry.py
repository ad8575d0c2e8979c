import numpy as np
import pytest

from bdrecon.errors import NotAdmissible, QuadratureFailure, UndefinedGradient, ValidationError
from bdrecon.fields import ScalarField
from bdrecon.geometry import (C11, LIPSCHITZ, AdmissiblePoint, certify_admissible, flatten_map,
                              forward_jacobian_field, gradient_oscillation_integral, hypothesis_h1_ratio,
                              inverse_jacobian_field, jacobian, lebesgue_defect, make_patch,
                              metric_from_gradient)


@pytest.mark.parametrize("pid,cls", [("flat", C11), ("tilted:1,0", C11), ("quad:0.5", C11),
                                     ("wedge", LIPSCHITZ), ("bump:0.1,3", C11)])
def test_catalog_classes(pid, cls):
    assert make_patch(pid).smoothness_class == cls


@pytest.mark.parametrize("bad", ["sphere", "tilted:1", "quad:a", "bump:1"])
def test_catalog_rejects(bad):
    with pytest.raises(ValidationError):
        make_patch(bad)


def test_flatten_map_lifts_boundary():
    patch = make_patch("quad:0.5,0.25")
    p = AdmissiblePoint.at(patch, [0.2, -0.1])
    x = np.array([[0.1, 0.3, 0.0], [-0.2, 0.05, 0.4]])
    z = flatten_map(patch, p, x)
    assert np.allclose(z[:, :2], x[:, :2] + p.p_prime)
    assert np.allclose(z[:, 2], x[:, 2] + patch.phi(z[:, :2]))


def test_jacobians_are_inverse_and_unimodular():
    patch = make_patch("bump:0.3,2")
    p = AdmissiblePoint.at(patch, [0.1, 0.2])
    xp = np.random.default_rng(0).uniform(-0.5, 0.5, (20, 2))
    M, D = inverse_jacobian_field(patch, p, xp), forward_jacobian_field(patch, p, xp)
    assert np.allclose(M @ D, np.eye(3))
    assert np.allclose(np.linalg.det(M), 1.0)
    J = jacobian(patch, p, [0.0, 0.0])
    g = p.grad_at_p
    assert np.allclose(J.MMt, [[1, 0, -g[0]], [0, 1, -g[1]], [-g[0], -g[1], 1 + g @ g]])
    assert np.allclose(metric_from_gradient(g), J.MMt)


def test_jacobian_matches_finite_difference():
    patch = make_patch("quad:0.7,-0.3")
    p = AdmissiblePoint.at(patch, [0.3, 0.1])
    x0, h = np.array([0.05, -0.02, 0.1]), 1e-6
    D = np.stack([(flatten_map(patch, p, x0 + h * e) - flatten_map(patch, p, x0 - h * e)) / (2 * h)
                  for e in np.eye(3)], axis=-1)
    assert np.allclose(D, forward_jacobian_field(patch, p, x0[:2]), atol=1e-8)


def test_quad_patch_defect_is_quarter_pi_s2():
    # grad phi(y') - grad phi(0) = (y1, 0) for phi = z1^2 / 2
    patch = make_patch("quad:0.5")
    p = AdmissiblePoint.at(patch, np.zeros(2))
    for s in (0.5, 0.1, 2.0 ** -10):
        assert lebesgue_defect(patch, p, s) == pytest.approx(np.pi * s**2 / 4, rel=1e-12)


def test_certificates():
    assert certify_admissible(make_patch("flat"), [0, 0]).certified
    assert certify_admissible(make_patch("quad:0.5"), [0.1, 0.2]).certified
    with pytest.raises(NotAdmissible):
        certify_admissible(make_patch("quad:0.5"), [0, 0], ks=range(1, 3), require=True)


def test_wedge_gradient_undefined_on_ridge():
    wedge = make_patch("wedge")
    with pytest.raises(UndefinedGradient):
        AdmissiblePoint.at(wedge, [0.0, 0.3])
    p = AdmissiblePoint.at(wedge, [0.25, 0.0])
    assert np.allclose(p.grad_at_p, [1.0, 0.0])
    # inside the half-plane: no oscillation
    assert gradient_oscillation_integral(wedge, p, 0.1) == 0.0
    # disk crossing the ridge: oscillation sees the jump
    assert gradient_oscillation_integral(wedge, p, 0.5) > 0


def test_oscillation_nan_fraction_failure():
    patch = make_patch("flat")
    broken = type(patch)("broken", patch.phi, lambda z: np.full(np.shape(z), np.nan), 1.0, LIPSCHITZ)
    p = AdmissiblePoint(np.zeros(2), 0.0, np.zeros(2))
    with pytest.raises(QuadratureFailure):
        gradient_oscillation_integral(broken, p, 0.1)


def test_h1_ratio_bounded_by_field_lipschitz():
    patch = make_patch("quad:0.5")
    p = AdmissiblePoint.at(patch, [0.1, 0.0])
    c = ScalarField.from_id("affine:2,0.3,-0.2,0.5")
    ratio = hypothesis_h1_ratio(c, patch, p, np.random.default_rng(1))
    # c(F(x',x3)) - c(F(x',0)) = 0.5 x3 exactly
    assert ratio == pytest.approx(0.5, rel=1e-9)

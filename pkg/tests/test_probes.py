import numpy as np
import pytest

from conftest import setup
from bdrecon.cutoff import DEFAULT_CUTOFF
from bdrecon.errors import OutOfChart, ValidationError
from bdrecon.probes import (ScalarProbe, elastic_boundary_input, elastic_direction, elastic_residuals,
                            eval_boundary_input, eval_grad_probe, eval_scalar_probe, frame_residuals,
                            make_elastic_probe, make_maxwell_frame, maxwell_boundary_input)


def test_frame_for_grad_0_2():
    # u = (0, 1), |g| = 2: alpha = (1 + 4) u with third entry |g|
    f = make_maxwell_frame([0.0, 2.0])
    assert np.allclose(f.alpha, [0, 5, 2])
    assert np.allclose(f.b, [-1, 0, 1])
    assert max(frame_residuals(f).values()) < 1e-13


def test_frame_flat_default_direction():
    f = make_maxwell_frame([0, 0])
    assert np.allclose(f.alpha, [1, 0, 0])
    assert np.allclose(f.beta, [1j, 0, -1])
    g = make_maxwell_frame([0, 0], default_direction=(0, 3))
    assert np.allclose(g.alpha, [0, 1, 0])


def test_beta_identities():
    g = np.array([0.7, -1.1])
    f = make_maxwell_frame(g)
    M = np.eye(3)
    M[2, :2] = -g
    beta = M.T @ f.zeta
    assert np.allclose(beta, f.beta)
    assert abs(beta @ beta) < 1e-13
    assert np.vdot(beta, beta).real == pytest.approx(2 * (1 + g @ g))


def test_elastic_direction_branch():
    w = elastic_direction([1.0, 0.0])
    assert np.allclose(w, [0, np.sqrt(2), 0])
    w = elastic_direction([0.0, -2.0])
    assert np.allclose(w, [np.sqrt(5), 0, 0])
    assert np.allclose(elastic_direction([0, 0], np.pi / 2), [0, 1, 0], atol=1e-15)
    pr = make_elastic_probe([0.3, 0.4], [1, 1j, 0])
    assert max(elastic_residuals(pr).values()) < 1e-14
    with pytest.raises(ValidationError):
        make_elastic_probe([0, 0], [0, 0, 0])


def test_scalar_probe_gradient_matches_finite_difference():
    _, _, frame = setup("tilted:0.4,0.2")
    pr = ScalarProbe.for_frame(frame, 50.0)
    y = np.array([[0.06, -0.05, 0.04]])
    h = 1e-7
    fd = np.stack([(eval_scalar_probe(pr, y + h * e) - eval_scalar_probe(pr, y - h * e)) / (2 * h)
                   for e in np.eye(3)], axis=-1)
    assert np.allclose(fd, eval_grad_probe(pr, y), rtol=1e-6, atol=1e-8)
    assert pr.radius == pytest.approx(50 ** -0.5)


def test_boundary_input_support_and_forms():
    patch, p, frame = setup("quad:0.5")
    N = 100.0
    red = maxwell_boundary_input(patch, p, frame, N, form="reduced")
    tr = maxwell_boundary_input(patch, p, frame, N, form="trace")
    assert np.all(red(np.array([[0.11, 0.0], [0.0, -0.2]])) == 0)
    xp = np.array([[0.06, 0.02]])
    assert np.allclose(np.abs(red(xp)), np.abs(red(xp)))
    # trace form carries the O(N) term; the reduced form does not
    assert np.linalg.norm(tr(xp)) > 10 * np.linalg.norm(red(xp))
    z = np.array([[0.06, 0.02, patch.phi(np.array([0.06, 0.02]))]])
    assert np.allclose(eval_boundary_input(patch, p, frame, N, z), red(xp))
    with pytest.raises(ValidationError):
        eval_boundary_input(patch, p, frame, N, z + [0, 0, 0.1])
    with pytest.raises(ValidationError):
        maxwell_boundary_input(patch, p, frame, N, form="full")


def test_trace_form_is_tangential_trace_of_curl_free_part():
    # flat patch: trace = c0^{-1/2} e3 x grad_{x'} (psi e^{i N x1}) on y3 = 0
    patch, p, frame = setup("flat")
    N = 64.0
    f = maxwell_boundary_input(patch, p, frame, N, form="trace")
    xp = np.array([[0.05, 0.07]])
    h = 1e-7
    v = lambda q: DEFAULT_CUTOFF.eta(np.sqrt(N) * np.hypot(*q)) * np.exp(1j * N * q[0])
    grad = np.array([(v(xp[0] + h * e) - v(xp[0] - h * e)) / (2 * h) for e in np.eye(2)])
    ref = np.array([-grad[1], grad[0], 0]) / np.sqrt(DEFAULT_CUTOFF.c0([0, 0]))
    assert np.allclose(f(xp)[0], ref, rtol=1e-6)


def test_out_of_chart():
    patch, p, frame = setup("flat")
    with pytest.raises(OutOfChart):
        maxwell_boundary_input(patch, p, frame, 0.2)
    with pytest.raises(ValidationError):
        maxwell_boundary_input(patch, p, frame, -1.0)


def test_elastic_boundary_input():
    patch, p, _ = setup("flat")
    pr = make_elastic_probe([0, 0], [0, 0, 1])
    f = elastic_boundary_input(patch, p, pr, 16.0)
    val = f(np.array([[0.05, 0.0]]))[0]
    assert np.allclose(val, [0, 0, np.exp(1j * 16 * 0.05) / np.sqrt(DEFAULT_CUTOFF.kappa)])

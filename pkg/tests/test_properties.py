import numpy as np
from hypothesis import given, settings, strategies as st

import oracles
from bdrecon.elastic import (POLARIZATION_AMPLITUDES, ZMatrix, energy_density, isotropic_tensor, lame_from_Z,
                             z_closed_form, z_from_polarization)
from bdrecon.geometry import AdmissiblePoint, inverse_jacobian_field, make_patch
from bdrecon.noise import covariance_factor, hadamard_covariance
from bdrecon.probes import elastic_residuals, frame_residuals, make_elastic_probe, make_maxwell_frame

floats = st.floats(-5.0, 5.0, allow_nan=False)
angles = st.floats(0.0, 2 * np.pi, allow_nan=False)


@st.composite
def gradients(draw):
    r = draw(st.floats(0.0, 5.0))
    th = draw(angles)
    return np.array([r * np.cos(th), r * np.sin(th)])


@st.composite
def lame_pairs(draw):
    mu = draw(st.floats(0.2, 5.0))
    lam = draw(st.floats(-2 * mu / 3 + 1e-2, 10.0))
    return lam, mu


def unit(th):
    return np.array([np.cos(th), np.sin(th)])


@given(gradients())
@settings(max_examples=200, deadline=None)
def test_frame_residuals_vanish(g):
    assert max(frame_residuals(make_maxwell_frame(g)).values()) <= 1e-11
    assert np.allclose(make_maxwell_frame(g).alpha, oracles.frame(g), atol=1e-12)


@given(gradients(), angles, st.lists(floats, min_size=6, max_size=6))
@settings(max_examples=100, deadline=None)
def test_elastic_probe_conditions(g, th, coeffs):
    a = np.array(coeffs[:3]) + 1j * np.array(coeffs[3:])
    if np.linalg.norm(a) < 1e-3:
        a = np.array([1.0, 0, 0])
    assert max(elastic_residuals(make_elastic_probe(g, a, th)).values()) <= 1e-11


@given(lame_pairs(), angles)
@settings(max_examples=200, deadline=None)
def test_impedance_is_hermitian_positive(lm, th):
    lam, mu = lm
    Z = z_closed_form(lam, mu, unit(th)).Z
    assert np.allclose(Z, Z.conj().T, atol=1e-13)
    assert np.linalg.eigvalsh(Z)[0] >= -1e-12 * mu
    assert np.allclose(Z, oracles.z_matrix(lam, mu, unit(th)), atol=1e-12)


@given(lame_pairs(), angles)
@settings(max_examples=200, deadline=None)
def test_lame_round_trip(lm, th):
    lam, mu = lm
    l2, m2 = lame_from_Z(z_closed_form(lam, mu, unit(th)), unit(th))
    assert abs(l2 - lam) <= 1e-10 * (1 + abs(lam)) and abs(m2 - mu) <= 1e-10 * mu


@given(st.lists(floats, min_size=18, max_size=18))
@settings(max_examples=200, deadline=None)
def test_polarization_recovers_hermitian_matrix(v):
    A = (np.array(v[:9]) + 1j * np.array(v[9:])).reshape(3, 3)
    Z = A + A.conj().T
    vals = [ZMatrix(Z).form(a) for a in POLARIZATION_AMPLITUDES]
    assert np.allclose(z_from_polarization(vals).Z, Z, atol=1e-12)


@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_hadamard_covariance_is_psd(J, rank, seed):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((J, rank)) + 1j * rng.standard_normal((J, rank))
    K = hadamard_covariance(V @ V.conj().T)
    assert np.linalg.eigvalsh(K)[0] >= -1e-10 * np.trace(K).real
    L = covariance_factor(K)
    assert np.allclose(L @ L.conj().T, K, atol=1e-9 * np.trace(K).real)


@given(lame_pairs(), st.lists(floats, min_size=18, max_size=18))
@settings(max_examples=100, deadline=None)
def test_isotropic_energy_matches_loops_and_is_nonnegative(lm, v):
    lam, mu = lm
    D = (np.array(v[:9]) + 1j * np.array(v[9:])).reshape(3, 3)
    C = isotropic_tensor(lam, mu).C
    assert np.allclose(C, oracles.iso_tensor(lam, mu))
    e = energy_density(C, D)
    assert abs(e.imag) <= 1e-10 * (1 + abs(e))
    sym = 0.5 * (D + D.T)
    assert e.real >= -1e-10 * (1 + np.sum(np.abs(sym) ** 2))


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
@settings(max_examples=50, deadline=None)
def test_inverse_jacobian_is_unimodular_shear(px, py, dx, dy):
    patch = make_patch("quad:0.5")
    p = AdmissiblePoint.at(patch, [px, py])
    M = inverse_jacobian_field(patch, p, np.array([dx, dy]))
    assert abs(np.linalg.det(M) - 1.0) <= 1e-12
    assert np.allclose(M[:2, :2], np.eye(2)) and np.allclose(M[2, 2], 1.0)

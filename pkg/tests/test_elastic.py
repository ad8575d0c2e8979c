import numpy as np
import pytest

import oracles
from conftest import setup
from bdrecon.elastic import (POLARIZATION_AMPLITUDES, ZMatrix, contraction_limit, elastic_measurement,
                             elastic_terms, elliptic_bound_rhs, energy_density, halfspace_impedance,
                             isotropic_tensor, lame_from_Z, pullback_tensor, z_closed_form, z_from_polarization)
from bdrecon.errors import ConvexityViolation, InversionInfeasible, ValidationError
from bdrecon.fields import LameFields, ScalarField
from bdrecon.probes import make_elastic_probe


def lame(lam, mu):
    return LameFields(ScalarField.from_id(f"const:{lam}"), ScalarField.from_id(f"const:{mu}"))


def test_isotropic_tensor_matches_loops_and_symmetries():
    C = isotropic_tensor(0.7, 1.3).C
    assert np.allclose(C, oracles.iso_tensor(0.7, 1.3))
    assert np.allclose(C, C.transpose(1, 0, 2, 3))
    assert np.allclose(C, C.transpose(2, 3, 0, 1))
    with pytest.raises(ConvexityViolation):
        isotropic_tensor(-1.0, 1.0)


def test_z_for_lambda0_mu1():
    # [DERIVED] closed-form substitution, lambda = 0, mu = 1, omega = e1
    Z = z_closed_form(0.0, 1.0, [1.0, 0.0]).Z
    assert np.allclose(np.diag(Z), [4 / 3, 1, 4 / 3])
    assert Z[0, 2] == pytest.approx(-2j / 3)
    assert Z[0, 1] == 0 and Z[1, 2] == 0


def test_z_closed_form_vs_one_based_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        mu = rng.uniform(0.2, 4)
        lam = rng.uniform(-0.6 * mu, 8)
        th = rng.uniform(0, 2 * np.pi)
        w = [np.cos(th), np.sin(th)]
        Z = z_closed_form(lam, mu, w).Z
        assert np.allclose(Z, oracles.z_matrix(lam, mu, w), atol=1e-14)
        assert np.allclose(Z, Z.conj().T)
        assert np.all(np.linalg.eigvalsh(Z) > 0)


def test_z_closed_form_input_checks():
    with pytest.raises(ValidationError):
        z_closed_form(0, 1, [2.0, 0.0])
    with pytest.raises(ValidationError):
        z_closed_form(0, 1, [1.0, 0.0, 0.5])


def test_halfspace_impedance_matches_closed_form():
    rng = np.random.default_rng(1)
    for _ in range(10):
        mu = rng.uniform(0.3, 3)
        lam = rng.uniform(-0.6 * mu, 10 * mu)
        th = rng.uniform(0, 2 * np.pi)
        w = np.array([np.cos(th), np.sin(th)])
        Zh = halfspace_impedance(isotropic_tensor(lam, mu), w).Z
        assert np.allclose(Zh, z_closed_form(lam, mu, w).Z, atol=1e-10 * mu)


def test_halfspace_impedance_scales_with_frequency():
    C = isotropic_tensor(1.0, 1.0)
    Z1 = halfspace_impedance(C, [0.6, 0.8]).Z
    Z3 = halfspace_impedance(C, [1.8, 2.4]).Z
    assert np.allclose(Z3, 3 * Z1, atol=1e-10)


def test_shear_horizontal_energy():
    # a = iota: u = iota exp(i x.omega - y3) solves the system, energy mu |omega|
    Z = ZMatrix(z_closed_form(2.0, 0.5, [0.0, 1.0]).Z)
    assert Z.form([1, 0, 0]) == pytest.approx(0.5)


def test_pullback_preserves_energy_density():
    rng = np.random.default_rng(2)
    C = isotropic_tensor(0.4, 1.1)
    M = np.eye(3)
    M[2, :2] = rng.normal(size=2)
    Ct = pullback_tensor(C, M).C
    grad_t = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert energy_density(Ct, grad_t) == pytest.approx(energy_density(C.C, grad_t @ M))
    assert np.allclose(pullback_tensor(C, np.eye(3)).C, C.C)


def test_lame_round_trip_and_infeasible():
    for lam, mu in [(0, 1), (-0.5, 1.0), (7.0, 0.3)]:
        assert lame_from_Z(z_closed_form(lam, mu, [0, 1]), [0, 1]) == pytest.approx((lam, mu), abs=1e-12)
    with pytest.raises(InversionInfeasible):
        lame_from_Z(np.eye(3))
    with pytest.raises(InversionInfeasible):
        bad = np.diag([0.1, 0.1, 0.1]).astype(complex)
        bad[0, 2], bad[2, 0] = -1j, 1j
        lame_from_Z(bad)


def test_polarization_round_trip():
    Z = z_closed_form(1.3, 0.7, [np.cos(1.0), np.sin(1.0)])
    vals = [Z.form(a) for a in POLARIZATION_AMPLITUDES]
    assert np.allclose(z_from_polarization(vals).Z, Z.Z, atol=1e-14)


def test_contraction_flat_hand_value():
    # C_1111 + C_1313 for lambda = 0, mu = 1 and a = omega = e1
    probe = make_elastic_probe([0, 0], [1, 0, 0])
    assert contraction_limit(isotropic_tensor(0, 1), np.eye(3), probe, [1, 0, 0]) == pytest.approx(3.0)


def test_probe_energy_dominates_twice_z():
    # exp(i omega.x - y3) a is admissible for the energy minimisation: a^H Z a <= E / 2,
    # E the probe energy density; for real a the contraction equals E
    rng = np.random.default_rng(3)
    for _ in range(100):
        mu = rng.uniform(0.2, 4)
        lam = rng.uniform(-0.6 * mu, 8)
        a = rng.normal(size=3) + 1j * rng.normal(size=3)
        probe = make_elastic_probe([0, 0], a, rng.uniform(0, 6.3))
        C = isotropic_tensor(lam, mu)
        E = energy_density(C.C, np.outer(a, probe.zeta)).real
        q = z_closed_form(lam, mu, probe.omega[:2]).form(a).real
        assert q <= 0.5 * E * (1 + 1e-12)
        ar = a.real
        c = contraction_limit(C, np.eye(3), probe, ar)
        assert c == pytest.approx(energy_density(C.C, np.outer(ar, probe.zeta)))


def test_elastic_terms_flat():
    patch, p, _ = setup("flat")
    probe = make_elastic_probe([0, 0], [1, 0, 0])
    T = elastic_terms(lame(0, 1), patch, p, probe, 256.0, audit=True)
    assert T["contraction"] == pytest.approx(3.0)
    assert T["I"].real / T["kappa"] == pytest.approx(1.5, rel=1e-8)
    assert T["II_1_bound"] == 0 and T["II_2_bound"] == 0 and abs(T["II"]) == 0
    assert abs(T["IV"]) < 0.1


def test_elastic_measurement_flat_equals_form():
    patch, p, _ = setup("flat")
    probe = make_elastic_probe([0, 0], [1, 0, 0])
    q = elastic_measurement(lame(0.5, 2.0), patch, p, probe, 64.0)
    Z = z_closed_form(0.5, 2.0, [1, 0])
    assert np.allclose(q, [Z.form(a) for a in POLARIZATION_AMPLITUDES], rtol=1e-9)


def test_elliptic_rhs_quad():
    patch, p, _ = setup("quad:0.5")
    N = 400.0
    assert elliptic_bound_rhs(patch, p, N) == pytest.approx(N ** -0.5 * (1 + np.sqrt(np.pi) / 2), rel=1e-10)

import numpy as np
import pytest

import oracles
from conftest import setup
from bdrecon.fields import EMParameters, ScalarField
from bdrecon.maxwell import (coefficient_for, dominant_admittance, dominant_impedance, dominant_term,
                             maxwell_measurement, remainder_diagnostics, truth_value)


def params(mu="const:1", eps="const:2", sigma="const:0.5", omega=1.0):
    return EMParameters(ScalarField.from_id(mu), ScalarField.from_id(eps), ScalarField.from_id(sigma), omega)


FROZEN = [
    # [DERIVED] separable adaptive-quadrature oracle (tests/oracles.py)
    ("flat", 2 + 0.5j, 64.0, 2.253231539574267 + 0.5633078848935668j),
    ("flat", 2 + 0.5j, 1024.0, 2.01582652309846 + 0.503956630774615j),
    ("tilted:1,0", 1.0, 256.0, 1.0158265231203616),
    ("tilted:0.3,-0.4", 1.0, 256.0, 1.0253224369773528),
]


@pytest.mark.parametrize("pid,gamma,N,ref", FROZEN)
def test_dominant_term_frozen(pid, gamma, N, ref):
    patch, p, frame = setup(pid)
    res = dominant_term(lambda z: np.full(len(z), gamma, complex), patch, p, frame, N)
    assert res.value == pytest.approx(ref, rel=1e-8)
    g = p.grad_at_p
    assert ref == pytest.approx(oracles.dominant_term_constant(gamma, g, N), rel=1e-10)


def test_admittance_and_impedance():
    patch, p, frame = setup("flat")
    par = params(mu="const:1.5")
    assert dominant_admittance(par, patch, p, frame, 1024.0) == pytest.approx(FROZEN[1][3], rel=1e-8)
    assert dominant_impedance(par, patch, p, frame, 1024.0) == pytest.approx(1.5 * FROZEN[1][3] / (2 + 0.5j), rel=1e-8)
    with pytest.raises(ValueError):
        coefficient_for(par, "sigma")


def test_linearity_in_coefficient():
    patch, p, frame = setup("quad:0.5")
    par = params(eps="affine:2,0.5,0,0.3")
    c = coefficient_for(par, "gamma")
    a = dominant_term(c, patch, p, frame, 128.0).value
    b = dominant_term(lambda z: 3.0 * c(z), patch, p, frame, 128.0).value
    assert b == pytest.approx(3.0 * a, rel=1e-13)


def test_truth_value():
    patch, p, _ = setup("quad:0.5", (0.2, 0.1))
    par = params(eps="affine:2,1,0,1")
    z3 = patch.phi(np.array([0.2, 0.1]))
    assert truth_value(par, patch, p) == pytest.approx(2 + 0.2 + z3 + 0.5j)


def test_remainders_on_flat_constant():
    patch, p, frame = setup("flat")
    d = remainder_diagnostics(params(), patch, p, frame, 256.0, boundary_norms=False)
    assert d["rem_lipschitz_grad"] == 0.0
    assert d["rem_variation"] == pytest.approx(0.0, abs=1e-20)
    # N^2 int |y'|^2 exp(-2 N y3) psi^2 ~ pi / (4 N) times the cutoff factors
    assert d["rem_lipschitz_y"] < 1.0 / 256


def test_measurement_bundle():
    patch, p, frame = setup("quad:0.5")
    m = maxwell_measurement(params(), patch, p, frame, 64.0)
    for key in ("rem_cutoff", "rem_lipschitz", "rem_LN_l2", "rem_LN_grad", "rem_variation",
                "fN_l2", "fN_l2_trace", "fN_hm1"):
        assert np.isfinite(m.diagnostics[key]) and m.diagnostics[key] >= 0
    assert m.quad_error <= 1e-6 * abs(m.value)

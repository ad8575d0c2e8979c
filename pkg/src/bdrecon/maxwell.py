"""Dominant energy term of the Maxwell probes and the remainder-bound diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cutoff import DEFAULT_CUTOFF, CutoffProfile
from .fields import EMParameters
from .geometry import AdmissiblePoint, BoundaryPatch, flatten_map, metric_from_gradient
from .probes import MaxwellFrame, ScalarProbe, eval_grad_probe, maxwell_boundary_input
from .quadrature import (DEFAULT_SPEC, HMINUS1, L2_SURFACE, InnerProductKind, QuadratureSpec,
                         field_norm_sq, integrate_probe_support)

TARGETS = ("gamma", "mu")


@dataclass
class MaxwellMeasurement:
    value: complex
    quad_error: float
    diagnostics: dict = field(default_factory=dict)


def coefficient_for(params: EMParameters, target: str) -> Callable[[np.ndarray], np.ndarray]:
    if target == "gamma":
        return params.gamma
    if target == "mu":
        return lambda z: params.mu(z).astype(complex)
    raise ValueError(f"target must be one of {TARGETS}")


def _metric(patch: BoundaryPatch, p: AdmissiblePoint, y: np.ndarray) -> np.ndarray:
    return metric_from_gradient(patch.grad_phi(y[..., :2] + p.p_prime))


def dominant_term(coef: Callable, patch: BoundaryPatch, p: AdmissiblePoint, frame: MaxwellFrame,
                  N: float, spec: Optional[QuadratureSpec] = None,
                  cutoff: CutoffProfile = DEFAULT_CUTOFF, normalize: bool = True):
    """c0^{-1} int c(F(y)) conj(grad v_N) . M M^t grad v_N dy over the flattened half-space.

    Returns the QuadResult; with ``normalize=False`` the c0 factor is kept.
    """
    probe = ScalarProbe.for_frame(frame, N, cutoff)
    scale = 1.0 / cutoff.c0(p.grad_at_p) if normalize else 1.0

    def integrand(y):
        gv = eval_grad_probe(probe, y)
        G = _metric(patch, p, y)
        quad = np.einsum("pi,pij,pj->p", np.conj(gv), G, gv)
        return coef(flatten_map(patch, p, y)) * quad * scale

    return integrate_probe_support(integrand, N, spec)


def dominant_admittance(params: EMParameters, patch, p, frame, N, spec=None,
                        cutoff: CutoffProfile = DEFAULT_CUTOFF) -> complex:
    return complex(dominant_term(params.gamma, patch, p, frame, N, spec, cutoff).value)


def dominant_impedance(params: EMParameters, patch, p, frame, N, spec=None,
                       cutoff: CutoffProfile = DEFAULT_CUTOFF) -> complex:
    return complex(dominant_term(coefficient_for(params, "mu"), patch, p, frame, N, spec, cutoff).value)


def remainder_diagnostics(params: EMParameters, patch: BoundaryPatch, p: AdmissiblePoint,
                          frame: MaxwellFrame, N: float, spec: Optional[QuadratureSpec] = None,
                          cutoff: CutoffProfile = DEFAULT_CUTOFF, target: str = "gamma",
                          boundary_norms: bool = True, hm1: InnerProductKind = HMINUS1) -> dict:
    """Every remainder quantity of the dominant-term argument, computed by quadrature.

    Keys: rem_cutoff, rem_lipschitz (= rem_lipschitz_y + rem_lipschitz_grad),
    rem_variation, rem_LN_l2, rem_LN_grad and, with ``boundary_norms``, the
    boundary-input norms fN_l2 (reduced form), fN_l2_trace and fN_hm1 (trace
    form, H^-1 surrogate).
    """
    spec = spec or DEFAULT_SPEC
    coef = coefficient_for(params, target)
    probe = ScalarProbe.for_frame(frame, N, cutoff)
    zeta = frame.zeta
    metric0 = metric_from_gradient(p.grad_at_p)
    c_at_p = complex(coef(flatten_map(patch, p, np.zeros(3))))
    L_vec = c_at_p * (frame.a + 1j * frame.b)

    def integrand(y):
        e2 = np.exp(-2.0 * N * y[:, 2])
        psi = probe.psi(y)
        gpsi = probe.psi_grad(y)
        G = _metric(patch, p, y)
        cF = coef(flatten_map(patch, p, y))
        cut = np.abs(cF) ** 2 * np.sum(np.abs(np.einsum("pij,pj->pi", G, gpsi)) ** 2, axis=-1) * e2
        rho2 = y[:, 0] ** 2 + y[:, 1] ** 2
        dg = patch.grad_phi(y[:, :2] + p.p_prime) - p.grad_at_p
        lip_y = N**2 * rho2 * e2
        lip_g = N**2 * np.sum(dg * dg, axis=-1) * e2
        dG = cF[:, None, None] * G - c_at_p * metric0[None]
        var = N**2 * np.sum(np.abs(np.einsum("pij,j->pi", dG, zeta)) ** 2, axis=-1) * psi**2 * e2
        ln_l2 = np.sum(np.abs(L_vec) ** 2) * psi**2 * e2
        ln_grad = np.abs(gpsi @ L_vec) ** 2 * e2
        return np.stack([cut, lip_y, lip_g, var, ln_l2, ln_grad], axis=-1)

    res = integrate_probe_support(integrand, N, spec, box=False)
    cut, lip_y, lip_g, var, ln_l2, ln_grad = np.real(res.value)
    out = {
        "rem_cutoff": float(cut),
        "rem_lipschitz": float(lip_y + lip_g),
        "rem_lipschitz_y": float(lip_y),
        "rem_lipschitz_grad": float(lip_g),
        "rem_variation": float(var),
        "rem_LN_l2": float(ln_l2),
        "rem_LN_grad": float(ln_grad),
    }
    if boundary_norms:
        out.update(boundary_input_norms(patch, p, frame, N, spec, cutoff, hm1))
    return out


def boundary_input_norms(patch, p, frame, N, spec=None, cutoff: CutoffProfile = DEFAULT_CUTOFF,
                         hm1: InnerProductKind = HMINUS1) -> dict:
    reduced = maxwell_boundary_input(patch, p, frame, N, cutoff, form="reduced")
    trace = maxwell_boundary_input(patch, p, frame, N, cutoff, form="trace")
    return {
        "fN_l2": float(np.sqrt(field_norm_sq(reduced, L2_SURFACE, spec))),
        "fN_l2_trace": float(np.sqrt(field_norm_sq(trace, L2_SURFACE, spec))),
        "fN_hm1": float(np.sqrt(field_norm_sq(trace, hm1, spec))),
    }


def maxwell_measurement(params: EMParameters, patch, p, frame, N, spec=None,
                        cutoff: CutoffProfile = DEFAULT_CUTOFF, target: str = "gamma",
                        boundary_norms: bool = True, hm1: InnerProductKind = HMINUS1) -> MaxwellMeasurement:
    res = dominant_term(coefficient_for(params, target), patch, p, frame, N, spec, cutoff)
    diag = remainder_diagnostics(params, patch, p, frame, N, spec, cutoff, target, boundary_norms, hm1)
    return MaxwellMeasurement(complex(res.value), float(res.error), diag)


def truth_value(params: EMParameters, patch, p, target: str = "gamma") -> complex:
    """Coefficient value at P = (p', phi(p'))."""
    z = np.array([p.p_prime[0], p.p_prime[1], p.height])
    return complex(coefficient_for(params, target)(z))

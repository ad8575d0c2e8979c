"""Oscillatory probes: Maxwell frames, elastic probes, scalar probes and boundary inputs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .cutoff import DEFAULT_CUTOFF, CutoffProfile
from .errors import OutOfChart, ValidationError
from .geometry import (AdmissiblePoint, BoundaryPatch, forward_jacobian_field,
                       metric_from_gradient)

E3 = np.array([0.0, 0.0, 1.0])


def _unit_direction(grad, default_direction) -> tuple[np.ndarray, float]:
    g = np.asarray(grad, dtype=float).reshape(2)
    n = float(np.hypot(*g))
    if n == 0.0:
        u = np.asarray(default_direction, dtype=float).reshape(2)
        return u / np.hypot(*u), 0.0
    return g / n, n


@dataclass(frozen=True)
class MaxwellFrame:
    alpha: np.ndarray
    a: np.ndarray
    b: np.ndarray
    beta: np.ndarray
    grad_at_p: np.ndarray

    @property
    def zeta(self) -> np.ndarray:
        """Exponent direction i alpha - e3 of the probe."""
        return 1j * self.alpha - E3


def make_maxwell_frame(grad_at_p, default_direction=(1.0, 0.0)) -> MaxwellFrame:
    """Real vectors alpha = a and b with M(0)^t(i alpha - e3) complex-isotropic.

    With u the unit gradient direction (``default_direction`` when the gradient
    vanishes): alpha = ((1+|g|^2) u, |g|), b = (-u2, u1, 1).
    """
    u, n = _unit_direction(grad_at_p, default_direction)
    g = n * u
    alpha = np.array([(1.0 + n * n) * u[0], (1.0 + n * n) * u[1], n])
    b = np.array([-u[1], u[0], 1.0]) + 0.0
    beta = np.array([1j * u[0] + g[0], 1j * u[1] + g[1], 1j * n - 1.0])
    return MaxwellFrame(alpha, alpha.copy(), b, beta, np.asarray(grad_at_p, float).reshape(2))


def frame_residuals(frame: MaxwellFrame) -> dict:
    """Absolute residuals of every algebraic identity the frame must satisfy."""
    g = frame.grad_at_p
    M = np.eye(3)
    M[2, :2] = -g
    MMt = metric_from_gradient(g)
    alpha, a, b, beta = frame.alpha, frame.a, frame.b, frame.beta
    beta_direct = M.T @ (1j * alpha - E3)
    zeta = 1j * alpha - E3
    return {
        "beta_def": float(np.max(np.abs(beta - beta_direct))),
        "beta_isotropic": float(abs(beta @ beta)),
        "beta_norm": float(abs(np.vdot(beta, beta).real - 2.0 * (1.0 + g @ g))),
        "alpha_norm": float(abs(np.linalg.norm(M.T @ alpha) - np.linalg.norm(M.T @ E3))),
        "alpha_orth": float(abs(alpha @ MMt @ E3)),
        "curl_e3": float(np.max(np.abs(np.cross(E3, a) + np.cross(alpha, b) - MMt @ E3))),
        "curl_alpha": float(np.max(np.abs(np.cross(alpha, a) - np.cross(E3, b) - MMt @ alpha))),
        "divergence": float(abs(zeta @ MMt @ zeta)),
    }


@dataclass(frozen=True)
class ElasticProbe:
    omega: np.ndarray
    amplitude: np.ndarray
    iota: np.ndarray
    grad_at_p: np.ndarray

    @property
    def zeta(self) -> np.ndarray:
        return 1j * self.omega - E3


def elastic_direction(grad_at_p, theta: float = 0.0) -> np.ndarray:
    """Tangential covector with omega' orthogonal to grad and |omega'|^2 = 1 + |grad|^2.

    Branch: omega2 >= 0, then omega1 >= 0. For a vanishing gradient the
    direction (cos theta, sin theta) is used as given.
    """
    g = np.asarray(grad_at_p, dtype=float).reshape(2)
    n = float(np.hypot(*g))
    if n == 0.0:
        return np.array([np.cos(theta), np.sin(theta), 0.0])
    w = np.sqrt(1.0 + n * n) * np.array([-g[1], g[0]]) / n
    if w[1] < 0 or (w[1] == 0 and w[0] < 0):
        w = -w
    return np.array([w[0], w[1], 0.0]) + 0.0


def make_elastic_probe(grad_at_p, amplitude, theta: float = 0.0) -> ElasticProbe:
    amp = np.asarray(amplitude, dtype=complex).reshape(3)
    if not np.any(amp != 0):
        raise ValidationError("elastic probe amplitude must be nonzero")
    omega = elastic_direction(grad_at_p, theta)
    iota = np.array([omega[1], -omega[0], 0.0])
    return ElasticProbe(omega, amp, iota, np.asarray(grad_at_p, float).reshape(2))


def elastic_residuals(probe: ElasticProbe) -> dict:
    g = probe.grad_at_p
    M = np.eye(3)
    M[2, :2] = -g
    w = probe.omega
    return {
        "norm": float(abs(np.sum((M.T @ w) ** 2) - np.sum((M.T @ E3) ** 2))),
        "orth": float(abs(w @ M @ M.T @ E3)),
        "iota": float(abs(np.linalg.norm(probe.iota) - np.linalg.norm(w))),
    }


@dataclass(frozen=True)
class ScalarProbe:
    """v_N(y) = eta(N^{1/2}|y'|) eta(N^{1/2} y3) exp(N zeta . y)."""

    N: float
    zeta: np.ndarray
    cutoff: CutoffProfile = DEFAULT_CUTOFF

    @classmethod
    def for_frame(cls, frame, N: float, cutoff: CutoffProfile = DEFAULT_CUTOFF) -> "ScalarProbe":
        return cls(float(N), np.asarray(frame.zeta, dtype=complex), cutoff)

    @property
    def radius(self) -> float:
        return self.N ** -0.5

    def psi(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        s = np.sqrt(self.N)
        rho = np.hypot(y[..., 0], y[..., 1])
        return self.cutoff.eta(s * rho) * self.cutoff.eta(s * y[..., 2])

    def psi_grad(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        s = np.sqrt(self.N)
        rho = np.hypot(y[..., 0], y[..., 1])
        er, dr = self.cutoff.eta(s * rho), self.cutoff.deta(s * rho)
        ez, dz = self.cutoff.eta(s * y[..., 2]), self.cutoff.deta(s * y[..., 2])
        safe = np.where(rho > 0, rho, 1.0)
        radial = s * dr * ez / safe
        return np.stack([radial * y[..., 0], radial * y[..., 1], s * er * dz], axis=-1)

    def exponential(self, y) -> np.ndarray:
        return np.exp(self.N * (np.asarray(y, dtype=float) @ self.zeta))


def eval_scalar_probe(probe: ScalarProbe, y) -> np.ndarray:
    return probe.psi(y) * probe.exponential(y)


def eval_grad_probe(probe: ScalarProbe, y) -> np.ndarray:
    e = probe.exponential(y)[..., None]
    return (probe.psi_grad(y) + probe.psi(y)[..., None] * probe.N * probe.zeta) * e


@dataclass(frozen=True)
class BoundaryField:
    """Tangential field exp(i k.x') A(x') on the flattened chart, zero for |x'| >= radius.

    ``breaks`` lists radii where the envelope changes character (quadrature panel
    edges). The surface weight sqrt(1+|grad phi|^2) comes from ``patch``.
    """

    wavevector: np.ndarray
    radius: float
    envelope: Callable[[np.ndarray], np.ndarray]
    patch: BoundaryPatch
    point: AdmissiblePoint
    breaks: tuple = ()
    label: str = ""

    def __call__(self, xp) -> np.ndarray:
        xp = np.asarray(xp, dtype=float)
        phase = np.exp(1j * (xp @ self.wavevector))
        inside = (np.hypot(xp[..., 0], xp[..., 1]) < self.radius)[..., None]
        return np.where(inside, phase[..., None] * self.envelope(xp), 0.0)

    def surface_weight(self, xp) -> np.ndarray:
        g = self.patch.grad_phi(np.asarray(xp, float) + self.point.p_prime)
        return np.sqrt(1.0 + np.sum(g * g, axis=-1))


def _check_chart(patch: BoundaryPatch, N: float):
    if not N > 0:
        raise ValidationError("N must be positive")
    if N ** -0.5 >= patch.chart_radius:
        raise OutOfChart(f"support radius N^-1/2 = {N ** -0.5:.3g} exceeds chart radius {patch.chart_radius}")


def maxwell_boundary_input(patch: BoundaryPatch, p: AdmissiblePoint, frame: MaxwellFrame, N: float,
                           cutoff: CutoffProfile = DEFAULT_CUTOFF, form: str = "reduced") -> BoundaryField:
    """Normalized tangential input carried by the probe on the flattened boundary.

    ``form="trace"``: c0^{-1/2} DF(x') (e3 x grad v_N(x', 0)), the full trace.
    ``form="reduced"``: the same with DF(0) (e3 x alpha) removed from the
    oscillating N-term, i.e. c0^{-1/2} exp(i N alpha'.x') [DF(x')(e3 x grad psi_N)
    + i N (DF(x') - DF(0)) (e3 x alpha) psi_N]. The two coincide only when
    e3 x alpha vanishes under DF(0), which it never does; see the README.
    """
    _check_chart(patch, N)
    if form not in ("trace", "reduced"):
        raise ValidationError(f"unknown boundary-input form {form!r}")
    c0 = cutoff.c0(p.grad_at_p)
    scale = np.sqrt(N)
    e3_cross_alpha = np.array([-frame.alpha[1], frame.alpha[0], 0.0])
    g0 = p.grad_at_p

    def envelope(xp):
        xp = np.asarray(xp, dtype=float)
        rho = np.hypot(xp[..., 0], xp[..., 1])
        safe = np.where(rho > 0, rho, 1.0)
        rad = scale * cutoff.deta(scale * rho) / safe
        psi = cutoff.eta(scale * rho)
        gpsi = np.stack([rad * xp[..., 0], rad * xp[..., 1], np.zeros_like(rho)], axis=-1)
        t = np.stack([-gpsi[..., 1], gpsi[..., 0], gpsi[..., 2]], axis=-1).astype(complex)
        D = forward_jacobian_field(patch, p, xp)
        out = np.einsum("...ij,...j->...i", D, t)
        g = patch.grad_phi(xp + p.p_prime)
        if form == "trace":
            osc = 1j * N * psi[..., None] * np.einsum("...ij,j->...i", D, e3_cross_alpha)
        else:
            dg = (g - g0) @ e3_cross_alpha[:2]
            osc = np.zeros(out.shape, dtype=complex)
            osc[..., 2] = 1j * N * psi * dg
        return (out + osc) / np.sqrt(c0)

    r = 1.0 / scale
    return BoundaryField(N * frame.alpha[:2].copy(), r, envelope, patch, p,
                         breaks=(0.5 * r,), label=f"maxwell-{form}:N={N:g}")


def eval_boundary_input(patch: BoundaryPatch, p: AdmissiblePoint, frame: MaxwellFrame, N: float,
                        z_on_boundary, cutoff: CutoffProfile = DEFAULT_CUTOFF,
                        form: str = "reduced") -> np.ndarray:
    """Value of the normalized boundary input at surface points z = (z', phi(z'))."""
    z = np.asarray(z_on_boundary, dtype=float)
    if np.any(np.abs(z[..., 2] - patch.phi(z[..., :2])) > 1e-9 * (1.0 + np.abs(z[..., 2]))):
        raise ValidationError("evaluation point is not on the patch surface")
    field = maxwell_boundary_input(patch, p, frame, N, cutoff, form)
    return field(z[..., :2] - p.p_prime)


def elastic_boundary_input(patch: BoundaryPatch, p: AdmissiblePoint, probe: ElasticProbe, N: float,
                           cutoff: CutoffProfile = DEFAULT_CUTOFF,
                           amplitude: Optional[np.ndarray] = None) -> BoundaryField:
    """kappa^{-1/2} eta(N^{1/2}|x'|) exp(i N omega'.x') a on the flattened boundary."""
    _check_chart(patch, N)
    amp = probe.amplitude if amplitude is None else np.asarray(amplitude, dtype=complex)
    scale = np.sqrt(N)
    norm = 1.0 / np.sqrt(cutoff.kappa)

    def envelope(xp):
        rho = np.hypot(xp[..., 0], xp[..., 1])
        return norm * cutoff.eta(scale * rho)[..., None] * amp

    r = 1.0 / scale
    return BoundaryField(N * probe.omega[:2].copy(), r, envelope, patch, p,
                         breaks=(0.5 * r,), label=f"elastic:N={N:g}")

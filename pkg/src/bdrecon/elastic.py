"""Isotropic elasticity: tensors, pull-back, probe energy terms, the impedance matrix Z and its inversion."""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .cutoff import DEFAULT_CUTOFF, CutoffProfile
from .errors import ConvexityViolation, InversionInfeasible, ValidationError
from .fields import LameFields
from .geometry import (AdmissiblePoint, BoundaryPatch, flatten_map, gradient_oscillation_integral,
                       inverse_jacobian_field)
from .probes import ElasticProbe
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_disk, integrate_probe_support

ISOTROPIC = "Isotropic"
PULLED_BACK = "PulledBack"

_D = np.eye(3)
_LAMBDA_BASIS = np.einsum("ij,kl->ijkl", _D, _D)
_MU_BASIS = np.einsum("ik,jl->ijkl", _D, _D) + np.einsum("il,jk->ijkl", _D, _D)

SQ = 1.0 / np.sqrt(2.0)
POLARIZATION_AMPLITUDES = np.array([
    [1, 0, 0], [0, 1, 0], [0, 0, 1],
    [SQ, SQ, 0], [SQ, 1j * SQ, 0],
    [SQ, 0, SQ], [SQ, 0, 1j * SQ],
    [0, SQ, SQ], [0, SQ, 1j * SQ],
], dtype=complex)
_PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class ElasticTensor:
    C: np.ndarray
    flavor: str = ISOTROPIC


@dataclass(frozen=True)
class ZMatrix:
    Z: np.ndarray

    def form(self, a) -> complex:
        """Quadratic form a^H Z a."""
        a = np.asarray(a, dtype=complex)
        return complex(np.conj(a) @ self.Z @ a)


def check_convexity(lam, mu):
    lam, mu = np.asarray(lam, float), np.asarray(mu, float)
    if np.any(mu <= 0) or np.any(3 * lam + 2 * mu <= 0):
        raise ConvexityViolation(f"need mu > 0 and 3 lambda + 2 mu > 0, got lambda={lam}, mu={mu}")


def isotropic_tensor(lam: float, mu: float) -> ElasticTensor:
    check_convexity(lam, mu)
    return ElasticTensor(lam * _LAMBDA_BASIS + mu * _MU_BASIS, ISOTROPIC)


def pullback_tensor(C: ElasticTensor, M) -> ElasticTensor:
    """C~_iqkp = sum_{l,j} C_ijkl M_pl M_qj with M = DF^{-1}."""
    M = M.M if hasattr(M, "M") else np.asarray(M, float)
    return ElasticTensor(np.einsum("ijkl,pl,qj->iqkp", C.C, M, M), PULLED_BACK)


def energy_density(C: np.ndarray, grad_u: np.ndarray) -> complex:
    """C grad u : conj(grad u) with grad_u[k, l] = d u_k / d x_l."""
    return complex(np.einsum("ijkl,kl,ij->", C, grad_u, np.conj(grad_u)))


def z_closed_form(lam: float, mu: float, omega) -> ZMatrix:
    """Closed-form impedance matrix for a unit in-plane covector omega."""
    check_convexity(lam, mu)
    w = np.asarray(omega, dtype=float).ravel()
    if w.size == 3 and w[2] != 0:
        raise ValidationError("omega must be tangential")
    if abs(np.hypot(w[0], w[1]) - 1.0) > 1e-12:
        raise ValidationError("omega must be a unit vector")
    io = np.array([w[1], -w[0], 0.0])
    f = mu / (lam + 3 * mu)
    Z = np.zeros((3, 3), dtype=complex)
    for i in range(3):
        Z[i, i] = f * (2 * (lam + 2 * mu) - (lam + mu) * io[i] ** 2)
    for i, j in _PAIRS:
        k = 3 - i - j
        # (-1)^k with the one-based index k + 1
        Z[i, j] = f * (-(lam + mu) * io[i] * io[j] + 1j * (-1) ** (k + 1) * 2 * mu * io[k])
        Z[j, i] = np.conj(Z[i, j])
    return ZMatrix(Z)


def lame_from_Z(Z, omega=None) -> tuple[float, float]:
    """Recover (lambda, mu) from tr Z = mu(5 lambda + 11 mu)/(lambda + 3 mu) and
    |(Im Z13, Im Z23)| = 2 mu^2/(lambda + 3 mu), valid for a unit covector."""
    Z = Z.Z if isinstance(Z, ZMatrix) else np.asarray(Z, dtype=complex)
    if omega is not None and abs(np.linalg.norm(np.asarray(omega, float)) - 1.0) > 1e-12:
        raise ValidationError("omega must be a unit vector")
    A = float(np.trace(Z).real)
    B = float(np.hypot(Z[0, 2].imag, Z[1, 2].imag))
    if not B > 0:
        raise InversionInfeasible("off-diagonal imaginary coupling vanishes")
    mu = (A + 2 * B) / 5.0
    lam = 2 * mu**2 / B - 3 * mu
    if not (mu > 0 and 3 * lam + 2 * mu > 0):
        raise InversionInfeasible(f"recovered pair ({lam:.4g}, {mu:.4g}) is not strongly convex")
    return lam, mu


def z_from_polarization(values: Sequence[complex]) -> ZMatrix:
    """Hermitian Z from the nine quadratic-form values a^H Z a over POLARIZATION_AMPLITUDES."""
    q = np.real(np.asarray(values, dtype=complex))
    Z = np.zeros((3, 3), dtype=complex)
    Z[np.diag_indices(3)] = q[:3]
    for n, (i, j) in enumerate(_PAIRS):
        base = 0.5 * (q[i] + q[j])
        re = q[3 + 2 * n] - base
        im = base - q[4 + 2 * n]
        Z[i, j] = re + 1j * im
        Z[j, i] = re - 1j * im
    return ZMatrix(Z)


def contraction_limit(C: ElasticTensor, M0, probe: ElasticProbe, a) -> complex:
    """sum_{ijkl} C_ijkl a_k conj(a_i) X_lj with X = M0^t (omega omega^t + e3 e3^t) M0."""
    M = M0.M if hasattr(M0, "M") else np.asarray(M0, float)
    w = np.asarray(probe.omega, float)
    X = np.einsum("pl,qj,pq->lj", M, M, np.outer(w, w) + np.diag([0.0, 0.0, 1.0]))
    a = np.asarray(a, dtype=complex)
    return complex(np.einsum("ijkl,k,i,lj->", C.C, a, np.conj(a), X))


def _iso_form(lam, mu, X, a):
    """sum C_ijkl a_k conj(a_i) X_lj for isotropic C, vectorized over leading axes of X."""
    ab = np.conj(a)
    t1 = np.einsum("l,...lj,j->...", a, X, ab)
    tr = np.trace(X, axis1=-2, axis2=-1)
    t3 = np.einsum("i,...ij,j->...", ab, X, a)
    return lam * t1 + mu * (np.vdot(a, a).real * tr + t3)


def _lame_at(L: LameFields, patch, p, y):
    z = flatten_map(patch, p, y)
    return L.lam(z), L.mu(z)


def elastic_terms(L: LameFields, patch: BoundaryPatch, p: AdmissiblePoint, probe: ElasticProbe,
                  N: float, spec: Optional[QuadratureSpec] = None,
                  cutoff: CutoffProfile = DEFAULT_CUTOFF, audit: bool = False) -> dict:
    """Terms I, III, IV of the probe energy expansion, the bounds II_1, II_2 and, with
    ``audit``, the signed II. All integrands are the expansion's displayed ones,
    with exp(-2 N y3) carried in II."""
    spec = spec or DEFAULT_SPEC
    a = probe.amplitude
    w = np.asarray(probe.omega, float)
    s = np.sqrt(N)
    M0 = inverse_jacobian_field(patch, p, np.zeros(2))
    lam0, mu0 = (float(v) for v in _lame_at(L, patch, p, np.zeros(3)))
    X0 = M0.T @ (np.outer(w, w) + np.diag([0.0, 0.0, 1.0])) @ M0
    contraction = complex(_iso_form(lam0, mu0, X0, a))
    ct0 = pullback_tensor(isotropic_tensor(lam0, mu0), M0).C
    W = np.outer(w, w)

    def integrand(y):
        P = len(y)
        e2 = np.exp(-2.0 * N * y[:, 2])
        rho = np.hypot(y[:, 0], y[:, 1])
        safe = np.where(rho > 0, rho, 1.0)
        rhat = np.zeros((P, 3))
        rhat[:, 0], rhat[:, 1] = y[:, 0] / safe, y[:, 1] / safe
        er, dr = cutoff.eta(s * rho), cutoff.deta(s * rho)
        ez, dz = cutoff.eta(s * y[:, 2]), cutoff.deta(s * y[:, 2])
        psi = er * ez
        M = inverse_jacobian_field(patch, p, y[:, :2])
        lam, mu = _lame_at(L, patch, p, y)
        e3 = np.array([0.0, 0.0, 1.0])
        c3 = (-2.0 * psi)[:, None, None] * (
            (dr * ez)[:, None, None] * np.einsum("pa,b->pab", rhat, e3)
            + (er * dz)[:, None, None] * np.outer(e3, e3)[None])
        c4 = ((dr * ez) ** 2)[:, None, None] * np.einsum("pa,pb->pab", rhat, rhat) \
            + (2 * dr * er * ez * dz)[:, None, None] * np.einsum("pa,b->pab", rhat, e3) \
            + ((dz * er) ** 2)[:, None, None] * np.outer(e3, e3)[None]
        X3 = np.einsum("xpl,xpq,xqj->xlj", M, c3, M)
        X4 = np.einsum("xpl,xpq,xqj->xlj", M, c4, M)
        t1 = N**2 * psi**2 * e2
        t3 = N**1.5 * _iso_form(lam, mu, X3, a) * e2
        t4 = N * _iso_form(lam, mu, X4, a) * e2
        z0 = np.concatenate([y[:, :2], np.zeros((P, 1))], axis=-1)
        lam_b, mu_b = _lame_at(L, patch, p, z0)
        dl, dm = lam - lam_b, mu - mu_b
        opnorm = np.linalg.norm(M, ord=2, axis=(1, 2))
        abs_sum = 3 * np.abs(dl + 2 * dm) + 6 * np.abs(dl) + 12 * np.abs(dm)
        ii1 = N**2 * abs_sum * psi**2 * e2
        out = [t1, t3, t4, ii1, opnorm]
        if audit:
            ct = np.einsum("xijkl,xpl,xqj->xiqkp", lam[:, None, None, None, None] * _LAMBDA_BASIS
                           + mu[:, None, None, None, None] * _MU_BASIS, M, M)
            d = ct - ct0[None]
            form = np.einsum("xiqkp,pq,k,i->x", d[:, :, :2, :, :2], W[:2, :2], a, np.conj(a)) \
                + np.einsum("xik,k,i->x", d[:, :, 2, :, 2], a, np.conj(a))
            out.append(N**2 * form * psi**2 * e2)
        return np.stack(out, axis=-1)

    res = integrate_probe_support(integrand, N, spec, box=False)
    vals = res.value
    norms = _max_opnorm(patch, p, N)
    terms = {
        "I": complex(contraction * vals[0]),
        "III": complex(vals[1]),
        "IV": complex(vals[2]),
        "II_1_bound": float(norms**2 * vals[3].real),
        "II_2_bound": _ii2_bound(L, patch, p, N, ct0, cutoff, spec),
        "contraction": contraction,
        "kappa": cutoff.kappa,
        "quad_error": float(res.error),
    }
    if audit:
        terms["II"] = complex(vals[5])
    return terms


def _max_opnorm(patch, p, N, n=64) -> float:
    r = N ** -0.5
    t = np.linspace(-r, r, n)
    X, Y = np.meshgrid(t, t)
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= r]
    M = inverse_jacobian_field(patch, p, pts)
    return float(np.max(np.linalg.norm(M, ord=2, axis=(1, 2))))


def _ii2_bound(L, patch, p, N, ct0, cutoff, spec) -> float:
    s = np.sqrt(N)

    def integrand(xp):
        P = len(xp)
        M = inverse_jacobian_field(patch, p, xp)
        z = np.concatenate([xp, np.zeros((P, 1))], axis=-1)
        lam, mu = _lame_at(L, patch, p, z)
        C = lam[:, None, None, None, None] * _LAMBDA_BASIS + mu[:, None, None, None, None] * _MU_BASIS
        d = np.abs(np.einsum("xijkl,xpl,xqj->xiqkp", C, M, M) - ct0[None])
        tang = d[:, :, :2, :, :2].sum(axis=(1, 2, 3, 4))
        normal = d[:, :, 2, :, 2].sum(axis=(1, 2))
        return N * (tang + normal) * cutoff.eta(s * np.hypot(xp[:, 0], xp[:, 1])) ** 2

    loose = replace(spec, target_rel_tol=max(spec.target_rel_tol, 1e-3), max_level=min(spec.max_level, 4.0))
    return float(integrate_disk(integrand, N ** -0.5, loose, raise_on_budget=False).value.real)


def _cheb(n: int):
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


@lru_cache(maxsize=8)
def _halfspace_grid(n: int):
    x, D = _cheb(n)
    dydx_over_L = -2.0 / (1.0 + x[:-1]) ** 2
    return D, dydx_over_L


def halfspace_impedance(Ct, omega, n: int = 60, scale: float = 40.0) -> ZMatrix:
    """Surface impedance of the half-space {y3 > 0} for tensor Ct and tangential covector omega.

    Solves sum_{jl} Ct_ijkl D_j D_l w_k = 0 with D = (i omega1, i omega2, d/dy3),
    w(0) = a and decay at infinity, by Chebyshev collocation on the mapped
    semi-axis y3 = L (1-x)/(1+x) with L = scale/|omega|. Returns Z with
    a^H Z a equal to the energy per unit area.
    """
    Ct = Ct.C if isinstance(Ct, ElasticTensor) else np.asarray(Ct, float)
    w = np.asarray(omega, dtype=float).ravel()[:2]
    L = scale / float(np.hypot(*w))
    D, dydx = _halfspace_grid(n)
    m = n + 1
    Dy = np.zeros((m, m))
    # the last node sits at infinity where w vanishes; its row is never used
    Dy[:-1] = D[:-1] / (L * dydx)[:, None]
    I = np.eye(m)
    ops = [1j * w[0] * I, 1j * w[1] * I, Dy.astype(complex)]
    prods = [[ops[j] @ ops[l] for l in range(3)] for j in range(3)]
    A = np.zeros((3 * m, 3 * m), dtype=complex)
    for i in range(3):
        for k in range(3):
            blk = np.zeros((m, m), dtype=complex)
            for j in range(3):
                for l in range(3):
                    if Ct[i, j, k, l] != 0:
                        blk += Ct[i, j, k, l] * prods[j][l]
            A[i * m:(i + 1) * m, k * m:(k + 1) * m] = blk
    interior = np.arange(1, n)
    rows = np.concatenate([c * m + interior for c in range(3)])
    bnd = np.array([c * m for c in range(3)])
    sol = np.linalg.solve(A[np.ix_(rows, rows)], -A[np.ix_(rows, bnd)])
    Z = np.zeros((3, 3), dtype=complex)
    for col in range(3):
        full = np.zeros(3 * m, dtype=complex)
        full[bnd[col]] = 1.0
        full[rows] = sol[:, col]
        W = full.reshape(3, m)
        grads = [ops[l] @ W.T for l in range(3)]  # grads[l][:, k] = D_l w_k
        t = np.array([sum(Ct[i, 2, k, l] * grads[l][0, k] for k in range(3) for l in range(3))
                      for i in range(3)])
        Z[:, col] = -t
    return ZMatrix(Z)


def frozen_impedance_field(L: LameFields, patch, p, probe: ElasticProbe, xp: np.ndarray,
                           n: int = 60) -> np.ndarray:
    """Half-space impedance of the frozen pulled-back tensor at boundary offsets xp, shape (P, 3, 3)."""
    P = len(xp)
    z = np.concatenate([xp, np.zeros((P, 1))], axis=-1)
    lam, mu = _lame_at(L, patch, p, z)
    g = patch.grad_phi(xp + p.p_prime)
    key = np.round(np.column_stack([lam, mu, g]), 13)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    out = np.empty((len(uniq), 3, 3), dtype=complex)
    for u, (lv, mv, g1, g2) in enumerate(uniq):
        M = np.eye(3)
        M[2, 0], M[2, 1] = -g1, -g2
        ct = pullback_tensor(isotropic_tensor(lv, mv), M)
        out[u] = halfspace_impedance(ct, probe.omega, n).Z
    return out[np.asarray(inv).ravel()]


def elastic_measurement(L: LameFields, patch: BoundaryPatch, p: AdmissiblePoint, probe: ElasticProbe,
                        N: float, amplitudes=POLARIZATION_AMPLITUDES, spec: Optional[QuadratureSpec] = None,
                        cutoff: CutoffProfile = DEFAULT_CUTOFF) -> np.ndarray:
    """Normalized probe energies kappa^{-1} int N eta(N^{1/2}|x'|)^2 a^H Z~(x') a dx' per amplitude.

    Z~(x') is the half-space impedance of the coefficients frozen at F(x', 0);
    this is the local Dirichlet-to-Neumann energy of the probe's boundary data.
    """
    s = np.sqrt(N)
    amps = np.asarray(amplitudes, dtype=complex)

    def integrand(xp):
        Zf = frozen_impedance_field(L, patch, p, probe, xp)
        wts = N * cutoff.eta(s * np.hypot(xp[:, 0], xp[:, 1])) ** 2 / cutoff.kappa
        q = np.einsum("ai,xij,aj->xa", np.conj(amps), Zf, amps)
        return wts[:, None] * q

    return integrate_disk(integrand, N ** -0.5, spec).value


def elliptic_bound_rhs(patch: BoundaryPatch, p: AdmissiblePoint, N: float) -> float:
    osc = gradient_oscillation_integral(patch, p, N ** -0.5)
    return float(N ** -0.5 + np.sqrt(N) * np.sqrt(osc))

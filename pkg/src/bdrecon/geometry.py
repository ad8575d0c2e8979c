"""Graph patches, the flattening map and its Jacobian, and Lebesgue-point certificates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NotAdmissible, QuadratureFailure, UndefinedGradient, ValidationError

ArrayFn = Callable[[np.ndarray], np.ndarray]

LIPSCHITZ = "Lipschitz"
C11 = "C11"


@dataclass(frozen=True)
class BoundaryPatch:
    """Boundary locally given by z3 = phi(z') with a closed-form gradient.

    ``phi`` maps (..., 2) -> (...); ``grad_phi`` maps (..., 2) -> (..., 2)
    and returns NaN where the gradient does not exist.
    """

    name: str
    phi: ArrayFn
    grad_phi: ArrayFn
    lipschitz_bound: float
    smoothness_class: str
    chart_radius: float = 2.0
    params: tuple = ()

    def __post_init__(self):
        if self.smoothness_class not in (LIPSCHITZ, C11):
            raise ValidationError(f"unknown smoothness class {self.smoothness_class!r}")
        if not self.lipschitz_bound > 0:
            raise ValidationError("lipschitz_bound must be positive")

    @property
    def patch_id(self) -> str:
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(repr(float(v)) for v in self.params)


def _flat() -> BoundaryPatch:
    return BoundaryPatch(
        "flat",
        lambda z: np.zeros(np.shape(z)[:-1]),
        lambda z: np.zeros(np.shape(z)),
        lipschitz_bound=1e-12,
        smoothness_class=C11,
    )


def _tilted(g1: float, g2: float) -> BoundaryPatch:
    g = np.array([g1, g2], dtype=float)
    return BoundaryPatch(
        "tilted",
        lambda z: np.asarray(z, float) @ g,
        lambda z: np.broadcast_to(g, np.shape(z)).copy(),
        lipschitz_bound=max(float(np.hypot(g1, g2)), 1e-12),
        smoothness_class=C11,
        params=(g1, g2),
    )


def _quad(c1: float, c2: float) -> BoundaryPatch:
    c = np.array([c1, c2], dtype=float)

    def phi(z):
        z = np.asarray(z, float)
        return z[..., 0] ** 2 * c1 + z[..., 1] ** 2 * c2

    def grad(z):
        return 2.0 * np.asarray(z, float) * c

    return BoundaryPatch(
        "quad",
        phi,
        grad,
        # gradient bound on |z'| <= 3, i.e. the chart around any |p'| <= 1
        lipschitz_bound=max(6.0 * max(abs(c1), abs(c2)), 1e-12),
        smoothness_class=C11,
        params=(c1, c2),
    )


def _wedge() -> BoundaryPatch:
    def grad(z):
        z = np.asarray(z, float)
        out = np.zeros(z.shape)
        s = np.sign(z[..., 0])
        out[..., 0] = np.where(s == 0, np.nan, s)
        out[..., 1] = np.where(s == 0, np.nan, 0.0)
        return out

    return BoundaryPatch(
        "wedge",
        lambda z: np.abs(np.asarray(z, float)[..., 0]),
        grad,
        lipschitz_bound=1.0,
        smoothness_class=LIPSCHITZ,
    )


def _bump(amp: float, k: float) -> BoundaryPatch:
    def phi(z):
        z = np.asarray(z, float)
        return amp * np.sin(k * z[..., 0]) * np.sin(k * z[..., 1])

    def grad(z):
        z = np.asarray(z, float)
        s1, s2 = np.sin(k * z[..., 0]), np.sin(k * z[..., 1])
        c1, c2 = np.cos(k * z[..., 0]), np.cos(k * z[..., 1])
        return amp * k * np.stack([c1 * s2, s1 * c2], axis=-1)

    return BoundaryPatch(
        "bump",
        phi,
        grad,
        lipschitz_bound=max(abs(amp) * abs(k) * np.sqrt(2.0), 1e-12),
        smoothness_class=C11,
        params=(amp, k),
    )


def make_patch(patch_id: str) -> BoundaryPatch:
    """Build a catalog patch from an id such as ``"tilted:1.0,0.0"`` or ``"quad:0.5"``.

    ``quad:c`` is phi = c z1^2, ``quad:c1,c2`` is c1 z1^2 + c2 z2^2 and
    ``bump:A,k`` is A sin(k z1) sin(k z2).
    """
    name, _, rest = patch_id.strip().partition(":")
    try:
        args = [float(v) for v in rest.split(",")] if rest else []
    except ValueError as exc:
        raise ValidationError(f"bad patch parameters in {patch_id!r}") from exc
    if name == "flat" and not args:
        return _flat()
    if name == "wedge" and not args:
        return _wedge()
    if name == "tilted" and len(args) == 2:
        return _tilted(*args)
    if name == "quad" and len(args) in (1, 2):
        return _quad(args[0], args[1] if len(args) == 2 else 0.0)
    if name == "bump" and len(args) == 2:
        return _bump(*args)
    raise ValidationError(
        f"unknown patch id {patch_id!r}; expected flat, wedge, tilted:g1,g2, quad:c[,c2] or bump:A,k"
    )


@dataclass(frozen=True)
class AdmissiblePoint:
    p_prime: np.ndarray
    height: float
    grad_at_p: np.ndarray
    defect_report: tuple = field(default=())
    certified: bool = False

    @classmethod
    def at(cls, patch: BoundaryPatch, p_prime: Sequence[float]) -> "AdmissiblePoint":
        """Point on the patch without a defect certificate."""
        pp = np.asarray(p_prime, dtype=float).reshape(2)
        g = np.asarray(patch.grad_phi(pp), dtype=float)
        if not np.all(np.isfinite(g)):
            raise UndefinedGradient(f"gradient of {patch.name} undefined at {pp.tolist()}")
        return cls(pp, float(patch.phi(pp)), g)


@dataclass(frozen=True)
class FlatteningJacobian:
    M: np.ndarray
    MMt: np.ndarray
    det: float


def flatten_map(patch: BoundaryPatch, p: AdmissiblePoint, x) -> np.ndarray:
    """F(x) = (x' + p', x3 + phi(x' + p')); vectorized over leading axes."""
    x = np.asarray(x, dtype=float)
    zp = x[..., :2] + p.p_prime
    return np.concatenate([zp, (x[..., 2] + patch.phi(zp))[..., None]], axis=-1)


def _gradient_or_raise(patch: BoundaryPatch, z: np.ndarray) -> np.ndarray:
    g = np.asarray(patch.grad_phi(z), dtype=float)
    if not np.all(np.isfinite(g)):
        raise UndefinedGradient(f"gradient of {patch.name} undefined on the requested points")
    return g


def inverse_jacobian_field(patch: BoundaryPatch, p: AdmissiblePoint, x_prime) -> np.ndarray:
    """Stack of M = DF^{-1} at tangential offsets x' (shape (..., 3, 3))."""
    x_prime = np.asarray(x_prime, dtype=float)
    g = _gradient_or_raise(patch, x_prime + p.p_prime)
    M = np.zeros(g.shape[:-1] + (3, 3))
    M[..., 0, 0] = M[..., 1, 1] = M[..., 2, 2] = 1.0
    M[..., 2, 0] = -g[..., 0]
    M[..., 2, 1] = -g[..., 1]
    return M


def forward_jacobian_field(patch: BoundaryPatch, p: AdmissiblePoint, x_prime) -> np.ndarray:
    """Stack of DF at tangential offsets x'."""
    x_prime = np.asarray(x_prime, dtype=float)
    g = _gradient_or_raise(patch, x_prime + p.p_prime)
    D = np.zeros(g.shape[:-1] + (3, 3))
    D[..., 0, 0] = D[..., 1, 1] = D[..., 2, 2] = 1.0
    D[..., 2, 0] = g[..., 0]
    D[..., 2, 1] = g[..., 1]
    return D


def jacobian(patch: BoundaryPatch, p: AdmissiblePoint, x_prime) -> FlatteningJacobian:
    M = inverse_jacobian_field(patch, p, np.asarray(x_prime, float).reshape(2))
    return FlatteningJacobian(M, M @ M.T, float(np.linalg.det(M)))


def metric_from_gradient(grad) -> np.ndarray:
    """M M^t for a flattening with gradient ``grad`` (shape (..., 2) -> (..., 3, 3))."""
    g = np.asarray(grad, dtype=float)
    out = np.zeros(g.shape[:-1] + (3, 3))
    out[..., 0, 0] = out[..., 1, 1] = 1.0
    out[..., 0, 2] = out[..., 2, 0] = -g[..., 0]
    out[..., 1, 2] = out[..., 2, 1] = -g[..., 1]
    out[..., 2, 2] = 1.0 + np.sum(g * g, axis=-1)
    return out


def _polar_disk_rule(radius: float, n_r: int = 48, n_theta: int = 96):
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * radius * (x + 1.0)
    wr = 0.5 * radius * w * r
    th = 2.0 * np.pi * np.arange(n_theta) / n_theta
    pts = np.stack(
        [np.outer(r, np.cos(th)), np.outer(r, np.sin(th))], axis=-1
    ).reshape(-1, 2)
    wts = np.outer(wr, np.full(n_theta, 2.0 * np.pi / n_theta)).ravel()
    return pts, wts


def gradient_oscillation_integral(patch: BoundaryPatch, p: AdmissiblePoint, s: float,
                                  n_r: int = 48, n_theta: int = 96) -> float:
    """Integral of |grad phi(y'+p') - grad phi(p')|^2 over the disk |y'| < s."""
    if not s > 0:
        raise ValidationError("s must be positive")
    pts, wts = _polar_disk_rule(s, n_r, n_theta)
    g = np.asarray(patch.grad_phi(pts + p.p_prime), dtype=float)
    bad = ~np.all(np.isfinite(g), axis=-1)
    if bad.mean() > 1e-3:
        raise QuadratureFailure(
            f"gradient oracle failed on {bad.mean():.1%} of the nodes in the disk of radius {s}"
        )
    vals = np.sum((g - p.grad_at_p) ** 2, axis=-1)
    vals[bad] = 0.0
    return float(vals @ wts)


def lebesgue_defect(patch: BoundaryPatch, p: AdmissiblePoint, s: float, **rule) -> float:
    """s^{-2} times the squared gradient oscillation over the disk of radius s."""
    return gradient_oscillation_integral(patch, p, s, **rule) / s**2


def certify_admissible(patch: BoundaryPatch, p_prime, threshold: float = 1e-3,
                       ks: Sequence[int] = range(2, 11), monotone_tol: float = 1e-12,
                       require: bool = False) -> AdmissiblePoint:
    """Evaluate the defect on s = 2^-k and certify when the last value is below threshold.

    With ``require=True`` a failed certificate raises NotAdmissible.
    """
    base = AdmissiblePoint.at(patch, p_prime)
    report = tuple((2.0 ** -k, lebesgue_defect(patch, base, 2.0 ** -k)) for k in ks)
    vals = np.array([d for _, d in report])
    monotone = bool(np.all(np.diff(vals) <= monotone_tol + 1e-6 * vals[:-1]))
    ok = bool(vals[-1] < threshold and monotone)
    if require and not ok:
        raise NotAdmissible(
            f"defect {vals[-1]:.3e} at s={report[-1][0]:.3e} (threshold {threshold}), monotone={monotone}"
        )
    return AdmissiblePoint(base.p_prime, base.height, base.grad_at_p, report, ok)


def hypothesis_h1_ratio(field, patch: BoundaryPatch, p: AdmissiblePoint,
                        rng: np.random.Generator, n: int = 256, depth: float = 0.5) -> float:
    """Largest sampled |c(F(x',x3)) - c(F(x',0))| / |x3| for a coefficient field c."""
    r = patch.chart_radius * np.sqrt(rng.uniform(size=n)) * 0.5
    th = rng.uniform(0, 2 * np.pi, size=n)
    xp = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    x3 = rng.uniform(1e-6, depth, size=n)
    top = flatten_map(patch, p, np.concatenate([xp, x3[:, None]], axis=-1))
    bottom = flatten_map(patch, p, np.concatenate([xp, np.zeros((n, 1))], axis=-1))
    return float(np.max(np.abs(field(top) - field(bottom)) / x3))

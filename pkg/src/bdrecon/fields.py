"""Catalog of Lipschitz coefficient fields and the Maxwell / Lame parameter bundles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvexityViolation, ValidationError


@dataclass(frozen=True)
class ScalarField:
    """Real coefficient field on R^3 from a closed-form catalog.

    ids: ``const:c``, ``affine:c0,g1,g2,g3`` (c0 + g.z) and
    ``bump:c0,A,w,x1,x2,x3`` (c0 + A exp(-|z-x|^2/w^2)).
    """

    kind: str
    params: tuple

    def __post_init__(self):
        expected = {"const": 1, "affine": 4, "bump": 6}
        if self.kind not in expected or len(self.params) != expected[self.kind]:
            raise ValidationError(f"bad coefficient field {self.field_id!r}")
        if self.kind == "bump" and not self.params[2] > 0:
            raise ValidationError("bump width must be positive")

    @classmethod
    def from_id(cls, field_id) -> "ScalarField":
        if isinstance(field_id, (int, float)):
            return cls("const", (float(field_id),))
        kind, _, rest = str(field_id).strip().partition(":")
        try:
            params = tuple(float(v) for v in rest.split(",")) if rest else ()
        except ValueError as exc:
            raise ValidationError(f"bad coefficient field {field_id!r}") from exc
        return cls(kind, params)

    @property
    def field_id(self) -> str:
        return self.kind + ":" + ",".join(repr(float(v)) for v in self.params)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "const":
            return np.full(z.shape[:-1], self.params[0])
        if self.kind == "affine":
            return self.params[0] + z @ np.asarray(self.params[1:])
        c0, amp, w = self.params[:3]
        d2 = np.sum((z - np.asarray(self.params[3:])) ** 2, axis=-1)
        return c0 + amp * np.exp(-d2 / w**2)

    @property
    def lipschitz(self) -> float:
        if self.kind == "const":
            return 0.0
        if self.kind == "affine":
            return float(np.linalg.norm(self.params[1:]))
        amp, w = self.params[1], self.params[2]
        return float(abs(amp) * np.sqrt(2.0) / w * np.exp(-0.5))

    def lower_bound(self) -> float:
        """Infimum over the unit ball around the origin (used for positivity checks)."""
        if self.kind == "const":
            return self.params[0]
        if self.kind == "affine":
            return self.params[0] - 2.0 * self.lipschitz
        return self.params[0] + min(self.params[1], 0.0)


@dataclass(frozen=True)
class EMParameters:
    """Permeability, permittivity and conductivity fields at angular frequency omega."""

    mu: ScalarField
    eps: ScalarField
    sigma: ScalarField
    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValidationError("angular frequency must be positive")

    def gamma(self, z) -> np.ndarray:
        return self.eps(z) + 1j * self.sigma(z) / self.omega

    @property
    def gamma_lipschitz(self) -> float:
        return self.eps.lipschitz + self.sigma.lipschitz / self.omega

    def validate(self, samples: np.ndarray) -> None:
        """Ellipticity on sample points: mu > 0, eps > 0, sigma >= 0."""
        if np.any(self.mu(samples) <= 0) or np.any(self.eps(samples) <= 0):
            raise ValidationError("mu and eps must be positive on the sampled region")
        if np.any(self.sigma(samples) < 0):
            raise ValidationError("sigma must be non-negative on the sampled region")


@dataclass(frozen=True)
class LameFields:
    lam: ScalarField
    mu: ScalarField

    def validate(self, samples: np.ndarray) -> None:
        lam, mu = self.lam(samples), self.mu(samples)
        if np.any(mu <= 0) or np.any(3 * lam + 2 * mu <= 0):
            raise ConvexityViolation("need mu > 0 and 3 lambda + 2 mu > 0 on the sampled region")

"""Radial cutoff profiles equal to 1 on [0, 1/2] and 0 beyond 1."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import expit

from .errors import ValidationError

KINDS = ("smooth", "bump")


@dataclass(frozen=True)
class CutoffProfile:
    """Cutoff eta(|t|).

    ``smooth``: C-infinity smooth step built from exp(-1/x); the default.
    ``bump``: exp(1 - 1/(1 - q^2)) with q = 2|t| - 1 on the transition. Its second
    derivative jumps at |t| = 1/2, so it is only C^{1,1}; it serves as the
    alternative admissible cutoff.
    """

    kind: str = "smooth"
    support_radius: float = field(default=1.0, init=False)
    plateau_radius: float = field(default=0.5, init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown cutoff kind {self.kind!r}; expected one of {KINDS}")

    def _transition(self, r):
        inside = (r > 0.5) & (r < 1.0)
        rr = np.where(inside, r, 0.75)
        if self.kind == "smooth":
            u = 1.0 / (1.0 - rr) - 1.0 / (rr - 0.5)
            val = expit(-u)
            du = 1.0 / (1.0 - rr) ** 2 + 1.0 / (rr - 0.5) ** 2
            der = -expit(-u) * expit(u) * du
        else:
            q = 2.0 * rr - 1.0
            one_m = 1.0 - q * q
            val = np.exp(1.0 - 1.0 / one_m)
            der = val * (-2.0 * q / one_m**2) * 2.0
        return inside, val, der

    def eta(self, t) -> np.ndarray:
        r = np.abs(np.asarray(t, dtype=float))
        inside, val, _ = self._transition(r)
        return np.where(r <= 0.5, 1.0, np.where(inside, val, 0.0))

    def deta(self, t) -> np.ndarray:
        """Derivative d eta / dt (odd in t)."""
        t = np.asarray(t, dtype=float)
        r = np.abs(t)
        inside, _, der = self._transition(r)
        return np.where(inside, der * np.sign(t), 0.0)

    @cached_property
    def derivative_bounds(self) -> tuple[float, float]:
        """(max |eta'|, max |eta''|) sampled on a fine grid of the transition."""
        r = np.linspace(0.5, 1.0, 200001)[1:-1]
        d1 = self.deta(r)
        d2 = np.gradient(d1, r)
        return float(np.max(np.abs(d1))), float(np.max(np.abs(d2)))

    def radial_integral(self, fn) -> float:
        """2 pi times the integral of fn(r) r over r in [0, 1] (fn vectorized)."""
        inner, _ = integrate.quad(lambda r: fn(np.array(r)) * r, 0.0, 0.5,
                                  epsabs=0, epsrel=1e-13, limit=200)
        outer, _ = integrate.quad(lambda r: fn(np.array(r)) * r, 0.5, 1.0,
                                  epsabs=0, epsrel=1e-13, limit=400)
        return float(2.0 * np.pi * (inner + outer))

    @cached_property
    def kappa(self) -> float:
        """Integral of eta(|y'|)^2 over the plane."""
        return self.radial_integral(lambda r: self.eta(r) ** 2)

    @cached_property
    def grad_energy(self) -> float:
        """Integral of eta'(|y'|)^2 over the plane."""
        return self.radial_integral(lambda r: self.deta(r) ** 2)

    def c0(self, grad_at_p) -> float:
        g = np.asarray(grad_at_p, dtype=float)
        return float((1.0 + g @ g) * self.kappa)

    def depth_integral(self, rate: float) -> float:
        """Integral over s >= 0 of eta(s)^2 exp(-rate s)."""
        a, _ = integrate.quad(lambda s: np.exp(-rate * s), 0.0, 0.5, epsabs=0, epsrel=1e-13)
        b, _ = integrate.quad(lambda s: self.eta(s) ** 2 * np.exp(-rate * s), 0.5, 1.0,
                              epsabs=0, epsrel=1e-13, limit=400)
        return float(a + b)


DEFAULT_CUTOFF = CutoffProfile()

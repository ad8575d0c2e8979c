"""Quadrature on shrinking probe supports and the two boundary pairings.

Volume integrals use a rescaled polar-by-depth tensor rule whose depth panels
grade geometrically toward y3 = 0, where exp(-2N y3) concentrates. Every
integral is computed at two refinement levels; their difference is the error
estimate, and the level is doubled until the estimate meets the tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import BudgetExceeded, ChartOverflow, ValidationError

L2_KIND = "L2Surface"
HM1_KIND = "HMinus1Surrogate"


@dataclass(frozen=True)
class QuadratureSpec:
    nodes_per_wavelength: int = 6
    depth_nodes: int = 10
    radial_nodes: int = 20
    angular_nodes: int = 32
    target_rel_tol: float = 1e-6
    max_evals: int = 50_000_000
    max_level: float = 16.0
    grid_oversampling: float = 1.5

    def __post_init__(self):
        for name in ("nodes_per_wavelength", "depth_nodes", "radial_nodes", "angular_nodes", "max_evals"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be a positive integer")
        if not self.target_rel_tol > 0:
            raise ValidationError("target_rel_tol must be positive")


DEFAULT_SPEC = QuadratureSpec()


@dataclass
class QuadResult:
    """Integral value with its error estimate; unpacks as (value, error)."""

    value: complex | np.ndarray
    error: float
    evals: int
    flagged: bool = False

    def __iter__(self):
        yield self.value
        yield self.error


@lru_cache(maxsize=None)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(int(n))


def composite_gauss(breaks: Sequence[float], counts) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on consecutive panels [breaks[i], breaks[i+1]]."""
    breaks = np.asarray(breaks, dtype=float)
    if np.isscalar(counts):
        counts = [counts] * (len(breaks) - 1)
    xs, ws = [], []
    for a, b, n in zip(breaks[:-1], breaks[1:], counts):
        x, w = _gauss(max(int(n), 1))
        xs.append(0.5 * (b - a) * x + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def _even(n: float) -> int:
    n = int(np.ceil(n))
    return n + (n % 2)


def probe_support_rule(N: float, level: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC,
                       wavenumber: float = 0.0, box: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (P, 3) and weights (P,) on {|y'| <= N^-1/2} x [0, N^-1/2].

    With ``box=True`` the four corners of the square [-R, R]^2 outside the disk
    are covered too. ``wavenumber`` is the largest tangential frequency of the
    integrand and sets the angular and radial resolution.
    """
    R = float(N) ** -0.5
    kr = abs(wavenumber) * R
    npw = spec.nodes_per_wavelength

    rb = np.array([0.0, 0.5, 0.75, 1.0])
    rcounts = [np.ceil(level * max(spec.radial_nodes, npw * kr * (b - a) / (2 * np.pi)))
               for a, b in zip(rb[:-1], rb[1:])]
    rho, wrho = composite_gauss(rb, rcounts)
    n_th = _even(level * max(spec.angular_nodes, 1.5 * kr + 16))
    th = 2.0 * np.pi * np.arange(n_th) / n_th
    wth = np.full(n_th, 2.0 * np.pi / n_th)

    delta = 0.5 / np.sqrt(N)
    sb, d = [0.0], delta
    while d < 0.5:
        sb.append(d)
        d *= 2.0
    sb = np.array(sb + [0.5, 0.75, 1.0])
    s, ws = composite_gauss(sb, np.ceil(level * spec.depth_nodes))

    P = rho[:, None] * np.cos(th)[None, :], rho[:, None] * np.sin(th)[None, :]
    W2 = (wrho * rho)[:, None] * wth[None, :]
    planar = [np.stack([P[0].ravel(), P[1].ravel()], axis=-1)]
    weights = [W2.ravel()]

    if box:
        nc = int(np.ceil(level * 6))
        ct, cw = composite_gauss(np.linspace(0, 2 * np.pi, 9), nc)
        rmax = 1.0 / np.maximum(np.abs(np.cos(ct)), np.abs(np.sin(ct)))
        u, uw = _gauss(nc)
        rr = 1.0 + 0.5 * (rmax[:, None] - 1.0) * (u[None, :] + 1.0)
        rw = 0.5 * (rmax[:, None] - 1.0) * uw[None, :] * rr
        planar.append(np.stack([(rr * np.cos(ct)[:, None]).ravel(),
                                (rr * np.sin(ct)[:, None]).ravel()], axis=-1))
        weights.append((rw * cw[:, None]).ravel())

    planar = np.concatenate(planar) * R
    w2 = np.concatenate(weights) * R**2
    pts = np.concatenate([np.repeat(planar, len(s), axis=0),
                          np.tile(s * R, len(planar))[:, None]], axis=-1)
    w = np.repeat(w2, len(s)) * np.tile(ws * R, len(planar))
    return pts, w


def _weighted_sum(w: np.ndarray, vals: np.ndarray):
    vals = np.asarray(vals)
    if vals.ndim == 1:
        return np.sum(w * vals), np.sum(w * np.abs(vals))
    shape = (-1,) + (1,) * (vals.ndim - 1)
    wv = w.reshape(shape)
    return np.sum(wv * vals, axis=0), np.sum(wv * np.abs(vals), axis=0)


def _refine(evaluate: Callable[[float], tuple], spec: QuadratureSpec, raise_on_budget: bool) -> QuadResult:
    """Double the rule level until consecutive levels agree to the tolerance."""
    coarse, _, n_coarse = evaluate(0.5)
    level, evals = 1.0, n_coarse
    while True:
        fine, scale, n_fine = evaluate(level)
        evals += n_fine
        err = float(np.max(np.abs(np.asarray(fine) - np.asarray(coarse))))
        ref = float(np.max(np.abs(scale))) if np.size(scale) else 0.0
        if err <= spec.target_rel_tol * max(ref, 1e-300):
            return QuadResult(fine, err, evals, False)
        if evals >= spec.max_evals or level * 2 > spec.max_level:
            if raise_on_budget:
                raise BudgetExceeded(
                    f"quadrature error {err:.3e} above {spec.target_rel_tol:g} x {ref:.3e} after {evals} evaluations"
                )
            return QuadResult(fine, err, evals, True)
        coarse, level = fine, level * 2


def integrate_probe_support(f: Callable[[np.ndarray], np.ndarray], N: float,
                            spec: Optional[QuadratureSpec] = None, wavenumber: float = 0.0,
                            box: bool = True, raise_on_budget: bool = True) -> QuadResult:
    """Integrate f over the probe support box (or its inscribed cylinder with ``box=False``).

    ``f`` maps (P, 3) points to (P, ...) values. The error estimate is
    relative to the integral of |f|, so sign-cancelling integrands are handled.
    """
    spec = spec or DEFAULT_SPEC

    def evaluate(level):
        pts, w = probe_support_rule(N, level, spec, wavenumber, box)
        value, scale = _weighted_sum(w, f(pts))
        return value, scale, len(w)

    return _refine(evaluate, spec, raise_on_budget)


def disk_rule(radius: float, level: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC,
              wavenumber: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Polar nodes (P, 2) and weights on the disk |x'| <= radius, panels matched to the cutoff."""
    kr = abs(wavenumber) * radius
    rb = np.array([0.0, 0.5, 0.75, 1.0])
    rcounts = [np.ceil(level * max(spec.radial_nodes, spec.nodes_per_wavelength * kr * (b - a) / (2 * np.pi)))
               for a, b in zip(rb[:-1], rb[1:])]
    rho, wrho = composite_gauss(rb, rcounts)
    n_th = _even(level * max(spec.angular_nodes, 1.5 * kr + 16))
    th = 2.0 * np.pi * np.arange(n_th) / n_th
    pts = radius * np.stack([(rho[:, None] * np.cos(th)).ravel(), (rho[:, None] * np.sin(th)).ravel()], axis=-1)
    w = radius**2 * np.repeat(wrho * rho, n_th) * (2.0 * np.pi / n_th)
    return pts, w


def integrate_disk(f: Callable[[np.ndarray], np.ndarray], radius: float,
                   spec: Optional[QuadratureSpec] = None, wavenumber: float = 0.0,
                   raise_on_budget: bool = True) -> QuadResult:
    """Integrate f over the planar disk |x'| <= radius with level doubling."""
    spec = spec or DEFAULT_SPEC

    def evaluate(level):
        pts, w = disk_rule(radius, level, spec, wavenumber)
        value, scale = _weighted_sum(w, f(pts))
        return value, scale, len(w)

    return _refine(evaluate, spec, raise_on_budget)


@dataclass(frozen=True)
class InnerProductKind:
    """Boundary pairing: ``L2Surface`` or ``HMinus1Surrogate``.

    ``side`` is the periodic square Q = [-side/2, side/2]^2 in flattened
    coordinates used by the surrogate and by grid-based projections.
    """

    kind: str = L2_KIND
    side: float = 1.0

    def __post_init__(self):
        if self.kind not in (L2_KIND, HM1_KIND):
            raise ValidationError(f"unknown inner product {self.kind!r}")
        if not self.side > 0:
            raise ValidationError("pairing square side must be positive")


L2_SURFACE = InnerProductKind(L2_KIND)
HMINUS1 = InnerProductKind(HM1_KIND)


@dataclass(frozen=True)
class FourierMode:
    """Periodic mode e^{i xi.x'} e_c on Q, normalized for the chosen pairing.

    L2 normalization: w^{-1/2} |Q|^{-1/2}; H^-1 normalization additionally
    carries (1+|xi|^2)^{1/2}.
    """

    index: tuple
    component: int
    side: float
    normalization: str = L2_KIND
    patch: object = None
    point: object = None

    radius = None

    @property
    def xi(self) -> np.ndarray:
        return 2.0 * np.pi * np.asarray(self.index, dtype=float) / self.side

    @property
    def wavevector(self) -> np.ndarray:
        return self.xi

    def surface_weight(self, xp) -> np.ndarray:
        if self.patch is None:
            return np.ones(np.shape(xp)[:-1])
        g = self.patch.grad_phi(np.asarray(xp, float) + self.point.p_prime)
        return np.sqrt(1.0 + np.sum(g * g, axis=-1))

    def __call__(self, xp) -> np.ndarray:
        xp = np.asarray(xp, dtype=float)
        amp = np.exp(1j * (xp @ self.xi)) / self.side
        if self.normalization == HM1_KIND:
            amp = amp * np.sqrt(1.0 + self.xi @ self.xi)
        else:
            amp = amp / np.sqrt(self.surface_weight(xp))
        out = np.zeros(xp.shape[:-1] + (3,), dtype=complex)
        out[..., self.component] = amp
        return out


@dataclass(frozen=True)
class ChartGrid:
    """Uniform periodic grid on Q with n points per side."""

    side: float
    n: int

    @cached_property
    def h(self) -> float:
        return self.side / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.side + self.h * np.arange(self.n)

    @cached_property
    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x, self.x, indexing="ij")
        return np.stack([X, Y], axis=-1)

    @cached_property
    def freqs(self) -> np.ndarray:
        return 2.0 * np.pi * sfft.fftfreq(self.n, d=self.h)

    @cached_property
    def multiplier(self) -> np.ndarray:
        k = self.freqs
        return 1.0 / (1.0 + k[:, None] ** 2 + k[None, :] ** 2)

    @cached_property
    def shift(self) -> np.ndarray:
        k = self.freqs
        x0 = self.x[0]
        return np.exp(-1j * x0 * (k[:, None] + k[None, :]))


def _check_fits(field, side: float):
    r = getattr(field, "radius", None)
    if r is not None and r > 0.5 * side:
        raise ChartOverflow(f"field support radius {r:.4g} exceeds half the pairing square side {side / 2:.4g}")


def grid_for(fields: Sequence, side: float, spec: QuadratureSpec = DEFAULT_SPEC) -> ChartGrid:
    """Grid fine enough for the carriers plus envelope bandwidth of all fields."""
    kmax, band = 0.0, 0.0
    for f in fields:
        _check_fits(f, side)
        kmax = max(kmax, float(np.linalg.norm(f.wavevector)))
        r = getattr(f, "radius", None)
        if r is not None:
            band = max(band, 60.0 / r)
    n = int(np.ceil(spec.grid_oversampling * side * (kmax + band) / np.pi)) + 8
    return ChartGrid(side, sfft.next_fast_len(max(n, 64)))


def field_spectrum(field, grid: ChartGrid, weight_power: float = 0.0) -> np.ndarray:
    """Coefficients |Q|^{-1/2} int f_c w^p e^{-i xi.x} dx' on the grid, shape (3, n, n)."""
    vals = np.asarray(field(grid.points), dtype=complex)
    if weight_power:
        vals = vals * field.surface_weight(grid.points)[..., None] ** weight_power
    spec = sfft.fft2(np.moveaxis(vals, -1, 0), axes=(1, 2))
    return spec * (grid.h**2 / grid.side) * grid.shift[None]


def _grid_pair(f, g, kind: InnerProductKind, grid: ChartGrid) -> complex:
    if kind.kind == HM1_KIND:
        cf, cg = field_spectrum(f, grid), field_spectrum(g, grid)
        return complex(np.sum(cf * np.conj(cg) * grid.multiplier[None]))
    fv, gv = f(grid.points), g(grid.points)
    w = f.surface_weight(grid.points)
    return complex(np.sum(fv * np.conj(gv) * w[..., None]) * grid.h**2)


def _pairing_side(f, g, kind: InnerProductKind) -> float:
    for h in (f, g):
        if isinstance(h, FourierMode):
            return h.side
    return kind.side


def _polar_l2(f, g, spec: QuadratureSpec, raise_on_budget: bool) -> QuadResult:
    R = min(f.radius, g.radius)
    breaks = {0.0, R}
    for h in (f, g):
        for b in tuple(h.breaks) + (h.radius,):
            if 0 < b < R:
                breaks.add(b)
            mid = 0.5 * (b + h.radius)
            if 0 < mid < R:
                breaks.add(mid)
    breaks = np.array(sorted(breaks))
    dk = np.asarray(f.wavevector, float) - np.asarray(g.wavevector, float)
    kr = float(np.linalg.norm(dk)) * R
    npw = spec.nodes_per_wavelength

    def evaluate(level):
        counts = [np.ceil(level * max(spec.radial_nodes,
                                      npw * np.linalg.norm(dk) * (b - a) / (2 * np.pi)))
                  for a, b in zip(breaks[:-1], breaks[1:])]
        r, wr = composite_gauss(breaks, counts)
        n_th = _even(level * max(spec.angular_nodes, 1.5 * kr + 16))
        th = 2.0 * np.pi * np.arange(n_th) / n_th
        xp = np.stack([np.outer(r, np.cos(th)), np.outer(r, np.sin(th))], axis=-1).reshape(-1, 2)
        w = (np.outer(wr * r, np.full(n_th, 2 * np.pi / n_th))).ravel()
        vals = np.exp(1j * (xp @ dk)) * np.sum(f.envelope(xp) * np.conj(g.envelope(xp)), axis=-1)
        vals = vals * f.surface_weight(xp)
        value, scale = _weighted_sum(w, vals)
        return value, scale, 2 * len(w)

    return _refine(evaluate, spec, raise_on_budget)


def surface_inner_product(f, g, kind: InnerProductKind = L2_SURFACE, patch=None,
                          spec: Optional[QuadratureSpec] = None, with_error: bool = False,
                          raise_on_budget: bool = True):
    """Pairing (f|g) of two tangential boundary fields on the flattened chart.

    L2Surface: int f . conj(g) sqrt(1+|grad phi|^2) dx'. HMinus1Surrogate:
    periodic Bessel-potential pairing on Q with multiplier (1+|xi|^2)^-1. The
    surface weight comes from the fields; ``patch`` is accepted for symmetry
    with the call sites and must match them when given.
    """
    spec = spec or DEFAULT_SPEC
    if patch is not None and getattr(f, "patch", patch) is not patch:
        raise ValidationError("field and patch disagree")
    periodic = isinstance(f, FourierMode) or isinstance(g, FourierMode)
    if kind.kind == L2_KIND and not periodic:
        if np.linalg.norm(np.asarray(f.point.p_prime) - np.asarray(g.point.p_prime)) > 0:
            raise ValidationError("fields live on different charts")
        res = _polar_l2(f, g, spec, raise_on_budget)
    else:
        side = _pairing_side(f, g, kind)
        grid = grid_for([f, g], side, spec)
        coarse = _grid_pair(f, g, kind, ChartGrid(side, sfft.next_fast_len(max(64, (3 * grid.n) // 4))))
        val = _grid_pair(f, g, kind, grid)
        res = QuadResult(val, abs(val - coarse), 0, False)
    if with_error:
        return res
    return complex(res.value)


def gram_matrix(fields: Sequence, kind: InnerProductKind = L2_SURFACE,
                spec: Optional[QuadratureSpec] = None, memory_limit: float = 1.2e9) -> np.ndarray:
    """Hermitian Gram matrix G_jk = (f_j | f_k)."""
    spec = spec or DEFAULT_SPEC
    J = len(fields)
    G = np.zeros((J, J), dtype=complex)
    if kind.kind == HM1_KIND:
        side = kind.side
        for f in fields:
            if isinstance(f, FourierMode):
                side = f.side
        grid = grid_for(fields, side, spec)
        if J * 3 * grid.n**2 * 16 <= memory_limit:
            root = np.sqrt(grid.multiplier)[None]
            spectra = [field_spectrum(f, grid) * root for f in fields]
            for j in range(J):
                for k in range(j, J):
                    G[j, k] = np.sum(spectra[j] * np.conj(spectra[k]))
        else:
            for j in range(J):
                cj = field_spectrum(fields[j], grid) * grid.multiplier[None]
                for k in range(j, J):
                    G[j, k] = np.sum(cj * np.conj(field_spectrum(fields[k], grid)))
    else:
        for j in range(J):
            for k in range(j, J):
                G[j, k] = surface_inner_product(fields[j], fields[k], kind, spec=spec)
    G = np.triu(G) + np.conj(np.triu(G, 1)).T
    G[np.diag_indices(J)] = G.diagonal().real
    return G


def field_norm_sq(f, kind: InnerProductKind = L2_SURFACE, spec: Optional[QuadratureSpec] = None) -> float:
    return float(surface_inner_product(f, f, kind, spec=spec).real)

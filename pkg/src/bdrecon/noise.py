"""Circular complex Gaussian measurement noise on boundary probe families.

Two samplers produce the bilinear noise term W(f, g) = sum_ab (f|e_a)(g|e_b) X_ab:
an explicit truncated orthonormal basis with i.i.d. X, and the exact joint
law on a finite family, whose covariance is the entrywise square of the Gram
matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.special import j0

from .cutoff import DEFAULT_CUTOFF, CutoffProfile
from .errors import BudgetExceeded, FactorizationFailure, ValidationError
from .quadrature import (DEFAULT_SPEC, HM1_KIND, L2_KIND, L2_SURFACE, ChartGrid, FourierMode,
                         InnerProductKind, QuadratureSpec, composite_gauss, field_spectrum, gram_matrix,
                         grid_for, surface_inner_product)


def rng_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for realization ``index`` under a master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def complex_gaussian(rng: np.random.Generator, shape=()) -> np.ndarray:
    """Standard circular complex Gaussians: E X = 0, E|X|^2 = 1, E X^2 = 0."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


@dataclass
class BasisTruncation:
    """First modes of the periodic Fourier basis on the pairing square, all three components."""

    basis: list
    m: int
    X: Optional[np.ndarray] = None
    kind: InnerProductKind = L2_SURFACE

    @property
    def indices(self) -> np.ndarray:
        return np.array([b.index for b in self.basis])

    @property
    def components(self) -> np.ndarray:
        return np.array([b.component for b in self.basis])

    def draw(self, rng: np.random.Generator) -> "BasisTruncation":
        return BasisTruncation(self.basis, self.m, complex_gaussian(rng, (self.m, self.m)), self.kind)


def make_basis_truncation(kind: InnerProductKind = L2_SURFACE, modes_per_side: int = 32,
                          patch=None, point=None, rng: Optional[np.random.Generator] = None) -> BasisTruncation:
    """Modes with indices in [-n/2, n/2)^2 ordered by |index|, per component."""
    if modes_per_side < 1:
        raise ValidationError("modes_per_side must be positive")
    half = modes_per_side // 2
    r = np.arange(-half, modes_per_side - half)
    idx = sorted(((i, j) for i in r for j in r), key=lambda ij: (ij[0] ** 2 + ij[1] ** 2, ij))
    norm = HM1_KIND if kind.kind == HM1_KIND else L2_KIND
    basis = [FourierMode(ij, c, kind.side, norm, patch if norm == L2_KIND else None,
                         point if norm == L2_KIND else None)
             for ij in idx for c in range(3)]
    trunc = BasisTruncation(basis, len(basis), None, kind)
    return trunc.draw(rng) if rng is not None else trunc


def _truncation_grid(fields, trunc: BasisTruncation, spec) -> ChartGrid:
    side = trunc.kind.side
    grid = grid_for(list(fields), side, spec)
    need = 2 * int(np.max(np.abs(trunc.indices))) + 2
    if grid.n < need:
        grid = ChartGrid(side, sfft.next_fast_len(need))
    return grid


def basis_projections(fields: Sequence, trunc: BasisTruncation,
                      spec: Optional[QuadratureSpec] = None) -> np.ndarray:
    """Coefficients (f_j | e_a), shape (J, m)."""
    spec = spec or DEFAULT_SPEC
    grid = _truncation_grid(fields, trunc, spec)
    n = grid.n
    ii = trunc.indices % n
    comp = trunc.components
    xi2 = np.sum((2 * np.pi * trunc.indices / trunc.kind.side) ** 2, axis=-1)
    out = np.empty((len(fields), trunc.m), dtype=complex)
    for j, f in enumerate(fields):
        if trunc.kind.kind == HM1_KIND:
            c = field_spectrum(f, grid)[comp, ii[:, 0], ii[:, 1]] / np.sqrt(1.0 + xi2)
        else:
            c = field_spectrum(f, grid, weight_power=0.5)[comp, ii[:, 0], ii[:, 1]]
        out[j] = c
    return out


def sample_bilinear_noise_basis(f, g, trunc: BasisTruncation, spec: Optional[QuadratureSpec] = None,
                                projections: Optional[np.ndarray] = None) -> complex:
    """sum_{a,b <= m} (f|e_a)(g|e_b) X_ab for the truncation's current draw."""
    if trunc.X is None:
        raise ValidationError("truncation has no Gaussian draw; call draw(rng) first")
    cf, cg = basis_projections([f, g], trunc, spec) if projections is None else projections
    return complex(cf @ trunc.X @ cg)


def basis_noise_draws(projections: np.ndarray, m: int, n_draws: int, rng: np.random.Generator,
                      batch: int = 256) -> np.ndarray:
    """W_j = c_j^t X c_j for n_draws independent X, shape (n_draws, J)."""
    C = np.asarray(projections, dtype=complex)
    out = np.empty((n_draws, len(C)), dtype=complex)
    for start in range(0, n_draws, batch):
        b = min(batch, n_draws - start)
        Y = complex_gaussian(rng, (b, m, m)) @ C.T
        out[start:start + b] = np.einsum("ja,daj->dj", C, Y)
    return out


@dataclass
class NoiseRealization:
    probe_family: list
    gram: np.ndarray
    covariance: np.ndarray
    values: np.ndarray
    factor: np.ndarray = field(repr=False, default=None)


def hadamard_covariance(G: np.ndarray) -> np.ndarray:
    """K_jk = G_jk^2 (no conjugation on the second factor)."""
    G = np.asarray(G, dtype=complex)
    return G * G


def covariance_factor(K: np.ndarray) -> np.ndarray:
    """L with K = L L^H: Cholesky with at most 1e-12 trace jitter, else a clipped eigendecomposition."""
    K = np.asarray(K, dtype=complex)
    K = 0.5 * (K + K.conj().T)
    tr = float(np.trace(K).real)
    if tr <= 0:
        if np.allclose(K, 0):
            return np.zeros_like(K)
        raise FactorizationFailure("covariance has non-positive trace")
    for jitter in (0.0, 1e-15 * tr, 1e-12 * tr):
        try:
            return np.linalg.cholesky(K + jitter * np.eye(len(K)))
        except np.linalg.LinAlgError:
            continue
    lam, V = np.linalg.eigh(K)
    if lam[0] < -1e-8 * tr:
        raise FactorizationFailure(f"covariance eigenvalue {lam[0]:.3e} below -1e-8 x trace")
    return V * np.sqrt(np.clip(lam, 0.0, None))[None, :]


def sample_gram_noise(K_or_factor: np.ndarray, rng: np.random.Generator, n_draws: Optional[int] = None,
                      is_factor: bool = False) -> np.ndarray:
    L = K_or_factor if is_factor else covariance_factor(K_or_factor)
    J = L.shape[0]
    if n_draws is None:
        return L @ complex_gaussian(rng, J)
    return complex_gaussian(rng, (n_draws, J)) @ L.T


def sample_joint_noise_gram(family: Sequence, inner: InnerProductKind = L2_SURFACE, seed: int = 0,
                            spec: Optional[QuadratureSpec] = None, n_draws: Optional[int] = None,
                            gram: Optional[np.ndarray] = None, index: int = 0) -> NoiseRealization:
    """Exact joint law of (W(f_j, f_j))_j: W = L xi with L L^H = G o G."""
    G = gram_matrix(list(family), inner, spec) if gram is None else np.asarray(gram, dtype=complex)
    K = hadamard_covariance(G)
    L = covariance_factor(K)
    values = sample_gram_noise(L, rng_stream(seed, index), n_draws, is_factor=True)
    return NoiseRealization(list(family), G, K, values, L)


# -- averaging filter -------------------------------------------------------------------------

def radial_pairing(s: float, t: float, cutoff: CutoffProfile = DEFAULT_CUTOFF, nodes: int = 0) -> float:
    """(f_{s^2} | f_{t^2}) in L2 for the reduced Maxwell input on a flat patch.

    The envelopes are c0^{-1/2} e3 x grad eta(s|x'|), so the pairing reduces to
    c0^{-1} s t 2 pi int J0(|s^2 - t^2| r) eta'(s r) eta'(t r) r dr.
    """
    lo = max(0.5 / s, 0.5 / t)
    hi = min(1.0 / s, 1.0 / t)
    if hi <= lo:
        return 0.0
    d = abs(s * s - t * t)
    n = nodes or int(max(48, np.ceil(6 * d * (hi - lo) / (2 * np.pi)) + 32))
    x, w = composite_gauss([lo, hi], n)
    c0 = cutoff.kappa
    return float(s * t * 2 * np.pi * np.sum(w * j0(d * x) * cutoff.deta(s * x) * cutoff.deta(t * x) * x) / c0)


def family_pairing(patch, point, frame, cutoff: CutoffProfile = DEFAULT_CUTOFF,
                   inner: InnerProductKind = L2_SURFACE, spec: Optional[QuadratureSpec] = None,
                   fast: Optional[bool] = None) -> Callable[[float, float], complex]:
    """Pairing (s, t) -> (f_{s^2} | f_{t^2}) of reduced inputs; the Hankel form is used on flat patches."""
    from .probes import maxwell_boundary_input

    flat = patch.patch_id == "flat" and inner.kind == L2_KIND
    if fast is None:
        fast = flat
    if fast and not flat:
        raise ValidationError("the radial pairing needs the flat patch and the L2 pairing")
    if fast:
        return lambda s, t: radial_pairing(s, t, cutoff)
    cache = {}

    def field_at(t):
        if t not in cache:
            cache[t] = maxwell_boundary_input(patch, point, frame, t * t, cutoff, form="reduced")
        return cache[t]

    return lambda s, t: surface_inner_product(field_at(s), field_at(t), inner, spec=spec)


def window_node_count(T: float, M: Optional[int] = None) -> int:
    """M = max(32, ceil(4T)) by default so the unit-width diagonal ridge is resolved."""
    return int(M) if M else max(32, int(np.ceil(4 * T)))


def averaging_nodes(T: float, M: Optional[int] = None, panel_max: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """M Gauss nodes on [T, 2T]: one rule up to ``panel_max`` nodes, equal panels beyond."""
    M = window_node_count(T, M)
    panels = -(-M // panel_max)
    counts = [M // panels + (k < M % panels) for k in range(panels)]
    return composite_gauss(np.linspace(T, 2 * T, panels + 1), counts)


def _t_panels(T: float, S: float) -> tuple[np.ndarray, np.ndarray]:
    edge = min(2 * S, 0.25 * T)
    return composite_gauss([T, T + edge, 2 * T - edge, 2 * T], [8, 16, 8])


def _s_panels(t: float, T: float, S: float, band_width: float = 0.25, outer_width: float = 1.0, n: int = 4):
    lo, hi = max(T, t - S), min(2 * T, t + S)
    band = np.linspace(lo, hi, max(1, int(np.ceil((hi - lo) / band_width))) + 1)
    xb, wb = composite_gauss(band, n)
    parts = [(xb, wb, True)]
    for a, b in ((T, lo), (hi, 2 * T)):
        if b - a > 1e-12:
            edges = np.linspace(a, b, max(1, int(np.ceil((b - a) / outer_width))) + 1)
            x, w = composite_gauss(edges, n)
            parts.append((x, w, False))
    return parts


def averaging_variance_T(T: float, pairing: Callable[[float, float], complex],
                         max_pairs: int = 2_000_000, split: bool = False):
    """(1/T^2) int int_{[T,2T]^2} |(f_{s^2}|f_{t^2})|^2 ds dt by a rule refined on |s - t| <= T^{1/3}.

    With ``split`` returns (total, band, off_band).
    """
    if T <= 0:
        raise ValidationError("T must be positive")
    S = T ** (1.0 / 3.0)
    ts, tw = _t_panels(T, S)
    total = band = 0.0
    pairs = 0
    for t, wt in zip(ts, tw):
        for xs, ws, in_band in _s_panels(t, T, S):
            pairs += len(xs)
            if pairs > max_pairs:
                raise BudgetExceeded(f"averaging quadrature needs more than {max_pairs} pairings")
            vals = np.array([abs(pairing(s, t)) ** 2 for s in xs])
            c = wt * float(np.sum(ws * vals))
            total += c
            if in_band:
                band += c
    total, band = total / T**2, band / T**2
    return (total, band, total - band) if split else total


def averaging_variance(N: float, theta: float, pairing: Callable[[float, float], complex],
                       max_pairs: int = 2_000_000, split: bool = False):
    """Averaging variance on the schedule T_N = N^{3 + 3 theta / 2}."""
    if not 0 < theta < 1:
        raise ValidationError("theta must lie in (0, 1)")
    return averaging_variance_T(schedule_T(N, theta), pairing, max_pairs, split)


def schedule_T(N: float, theta: float) -> float:
    return float(N) ** (3.0 + 1.5 * theta)


def window_family_gram(T: float, pairing: Callable[[float, float], complex], M: Optional[int] = None):
    """Nodes, weights and the Gram matrix of the node family {f_{t_j^2}} on [T, 2T]."""
    t, w = averaging_nodes(T, M)
    G = np.empty((len(t), len(t)), dtype=complex)
    for j in range(len(t)):
        for k in range(j, len(t)):
            G[j, k] = pairing(t[j], t[k])
            G[k, j] = np.conj(G[j, k])
    G[np.diag_indices(len(t))] = G.diagonal().real
    return t, w, G


def window_noise_variance(w: np.ndarray, G: np.ndarray, T: float) -> float:
    """Variance of (1/T) sum_j w_j W_j under K = G o G."""
    K = hadamard_covariance(G)
    return float(np.real(w @ K @ w)) / T**2

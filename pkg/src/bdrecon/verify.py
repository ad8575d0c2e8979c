"""Built-in invariant suite behind ``bdrecon --verify``."""
from __future__ import annotations

import time
from typing import Callable

import numpy as np

from .elastic import (contraction_limit, halfspace_impedance, isotropic_tensor, lame_from_Z,
                      z_closed_form)
from .geometry import AdmissiblePoint, make_patch
from .noise import basis_noise_draws, basis_projections, hadamard_covariance, make_basis_truncation, rng_stream
from .probes import (elastic_residuals, frame_residuals, make_elastic_probe, make_maxwell_frame,
                     maxwell_boundary_input)
from .quadrature import HMINUS1, L2_SURFACE, gram_matrix


def random_gradients(rng: np.random.Generator, n: int, max_norm: float = 5.0) -> np.ndarray:
    """Uniform directions with radii uniform in [0, max_norm]; the first one is zero."""
    th = rng.uniform(0, 2 * np.pi, n)
    r = rng.uniform(0, max_norm, n)
    g = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    g[0] = 0.0
    return g


def random_lame(rng: np.random.Generator, n: int) -> np.ndarray:
    """Strongly convex pairs: mu in [0.2, 5], lambda in (-2 mu / 3, 10]."""
    mu = rng.uniform(0.2, 5.0, n)
    lam = -2.0 * mu / 3.0 + rng.uniform(0.05, 1.0, n) * (10.0 + 2.0 * mu / 3.0)
    return np.stack([lam, mu], axis=-1)


def check_frames(n: int = 1000, seed: int = 0) -> tuple[bool, str]:
    worst = 0.0
    for g in random_gradients(np.random.default_rng(seed), n):
        worst = max(worst, max(frame_residuals(make_maxwell_frame(g)).values()))
    return worst <= 1e-11, f"max residual {worst:.2e} over {n} gradients"


def check_elastic_probes(n: int = 1000, seed: int = 1) -> tuple[bool, str]:
    worst = 0.0
    for g in random_gradients(np.random.default_rng(seed), n):
        worst = max(worst, max(elastic_residuals(make_elastic_probe(g, [1, 0, 0])).values()))
    return worst <= 1e-11, f"max residual {worst:.2e}"


def check_parseval(draws: int = 10_000, seed: int = 2) -> tuple[bool, str]:
    patch = make_patch("flat")
    p = AdmissiblePoint.at(patch, np.zeros(2))
    frame = make_maxwell_frame(p.grad_at_p)
    f = maxwell_boundary_input(patch, p, frame, 4.0, form="reduced")
    g = maxwell_boundary_input(patch, p, frame, 6.0, form="trace")
    worst = 0.0
    for kind in (L2_SURFACE, HMINUS1):
        trunc = make_basis_truncation(kind, 6, patch, p)
        C = basis_projections([f, g], trunc)
        X_draws = _pair_draws(C, trunc.m, draws, rng_stream(seed))
        target = np.sum(np.abs(C[0]) ** 2) * np.sum(np.abs(C[1]) ** 2)
        worst = max(worst, abs(np.mean(np.abs(X_draws) ** 2) / target - 1.0))
    return worst <= 0.05, f"max relative deviation {worst:.3f} at {draws} draws"


def _pair_draws(C, m, draws, rng, batch=500):
    out = np.empty(draws, dtype=complex)
    for s in range(0, draws, batch):
        b = min(batch, draws - s)
        X = (rng.standard_normal((b, m, m)) + 1j * rng.standard_normal((b, m, m))) * np.sqrt(0.5)
        out[s:s + b] = (X @ C[1]) @ C[0]
    return out


def check_covariance_psd() -> tuple[bool, str]:
    patch = make_patch("quad:0.5")
    p = AdmissiblePoint.at(patch, np.zeros(2))
    frame = make_maxwell_frame(p.grad_at_p)
    fam = [maxwell_boundary_input(patch, p, frame, N, form="trace") for N in (16, 32, 64, 128)]
    K = hadamard_covariance(gram_matrix(fam, HMINUS1))
    lo = float(np.linalg.eigvalsh(K)[0] / np.trace(K).real)
    return lo >= -1e-10, f"min eigenvalue / trace = {lo:.2e}"


def check_halfspace_oracle(n: int = 50, seed: int = 3) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for lam, mu in random_lame(rng, n):
        th = rng.uniform(0, 2 * np.pi)
        w = np.array([np.cos(th), np.sin(th)])
        Zh = halfspace_impedance(isotropic_tensor(lam, mu), w).Z
        worst = max(worst, float(np.max(np.abs(Zh - z_closed_form(lam, mu, w).Z)) / mu))
    return worst <= 1e-9, f"max |Z_halfspace - Z| / mu = {worst:.2e}"


def check_contraction(n: int = 1000, seed: int = 4) -> tuple[bool, str]:
    """Literal comparison of the 81-term contraction with a^H Z a on flat patches."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for lam, mu in random_lame(rng, n):
        th = rng.uniform(0, 2 * np.pi)
        a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        probe = make_elastic_probe(np.zeros(2), a, th)
        c = contraction_limit(isotropic_tensor(lam, mu), np.eye(3), probe, a)
        Z = z_closed_form(lam, mu, probe.omega[:2]).Z
        worst = max(worst, abs(c - np.conj(a) @ Z @ a) / abs(c))
    return worst <= 1e-10, f"max relative mismatch {worst:.3e}"


def check_lame_round_trip(n: int = 1000, seed: int = 5) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for lam, mu in random_lame(rng, n):
        th = rng.uniform(0, 2 * np.pi)
        w = np.array([np.cos(th), np.sin(th)])
        l2, m2 = lame_from_Z(z_closed_form(lam, mu, w), w)
        worst = max(worst, abs(l2 - lam) / (1 + abs(lam)), abs(m2 - mu) / mu)
    return worst <= 1e-10, f"max relative error {worst:.2e}"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "frame algebra": check_frames,
    "elastic probe conditions": check_elastic_probes,
    "Parseval identity (both pairings)": check_parseval,
    "Hadamard covariance PSD": check_covariance_psd,
    "half-space impedance vs closed-form Z": check_halfspace_oracle,
    "81-term contraction vs closed-form Z": check_contraction,
    "Lame round trip": check_lame_round_trip,
}


def run_verification(printer=print) -> bool:
    ok_all = True
    for name, check in CHECKS.items():
        t0 = time.perf_counter()
        ok, detail = check()
        ok_all &= ok
        printer(f"{'PASS' if ok else 'FAIL'}  {name}: {detail} ({time.perf_counter() - t0:.1f} s)")
    return ok_all

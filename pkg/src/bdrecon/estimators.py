"""Direct and window-averaged estimators, Monte Carlo coverage and rate fits."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .cutoff import DEFAULT_CUTOFF, CutoffProfile
from .elastic import (POLARIZATION_AMPLITUDES, elastic_measurement, elliptic_bound_rhs, halfspace_impedance,
                      isotropic_tensor, lame_from_Z, pullback_tensor, z_closed_form, z_from_polarization)
from .errors import BdreconError, BudgetExceeded, DegenerateFit, InsufficientTrials, ValidationError
from .fields import EMParameters, LameFields
from .geometry import C11, AdmissiblePoint, BoundaryPatch, flatten_map, inverse_jacobian_field
from .maxwell import coefficient_for, dominant_term, remainder_diagnostics, truth_value
from .noise import (averaging_nodes, covariance_factor, family_pairing, hadamard_covariance, rng_stream,
                    sample_gram_noise, schedule_T, window_node_count, window_noise_variance)
from .probes import (elastic_boundary_input, make_elastic_probe, make_maxwell_frame,
                     maxwell_boundary_input)
from .quadrature import HMINUS1, L2_SURFACE, InnerProductKind, QuadratureSpec, field_norm_sq, gram_matrix

TARGETS = ("GammaAdmittance", "MuImpedance", "ElasticZ")
NOISE_LEVELS = ("None", "HMinus1", "L2")
_MAXWELL_COEF = {"GammaAdmittance": "gamma", "MuImpedance": "mu"}


@dataclass(frozen=True)
class EstimatorConfig:
    target: str = "GammaAdmittance"
    noise_level: str = "None"
    theta: float = 0.5
    N_grid: tuple = (64, 128, 256, 512, 1024)
    trials: int = 1
    seed: int = 0
    stress_rho: float = 0.0

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValidationError(f"target must be one of {TARGETS}, got {self.target!r}")
        if self.noise_level not in NOISE_LEVELS:
            raise ValidationError(f"noise_level must be one of {NOISE_LEVELS}, got {self.noise_level!r}")
        if not 0.0 < float(self.theta) < 1.0:
            raise ValidationError(f"theta must lie in the open interval (0, 1), got {self.theta}")
        if len(self.N_grid) == 0 or any(float(n) <= 0 for n in self.N_grid):
            raise ValidationError("N_grid must be a non-empty list of positive numbers")
        if int(self.trials) < 1:
            raise ValidationError("trials must be at least 1")
        if not float(self.stress_rho) >= 0:
            raise ValidationError("stress_rho must be non-negative")
        object.__setattr__(self, "N_grid", tuple(self.N_grid))

    def check_patch(self, patch: BoundaryPatch):
        # surface-L2 noise needs C^{1,1} graphs; the elastic estimate only uses Lipschitz bounds
        if self.noise_level == "L2" and self.target != "ElasticZ" and patch.smoothness_class != C11:
            raise ValidationError(f"L2 noise needs a C11 patch; {patch.patch_id} is {patch.smoothness_class}")

    @property
    def is_elastic(self) -> bool:
        return self.target == "ElasticZ"


@dataclass
class ExperimentReport:
    rows: list
    fitted_slopes: dict
    coverage: dict
    N0_theoretical: Optional[int]
    seed: int
    config: dict
    estimates: np.ndarray = field(repr=False, default=None)
    errors: np.ndarray = field(repr=False, default=None)
    notes: list = field(default_factory=list)

    @property
    def Ns(self) -> np.ndarray:
        return np.array([r["N"] for r in self.rows], dtype=float)

    def column(self, key) -> np.ndarray:
        return np.array([r[key] if key in r else r["diagnostics"][key] for r in self.rows])


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    degenerate: bool = False


def fit_rate(xs: Sequence[float], ys: Sequence[float], strict: bool = False) -> RateFit:
    """Least squares line through (log x, log y)."""
    x, y = np.asarray(xs, float), np.asarray(ys, float)
    if x.shape != y.shape or x.size < 4:
        raise ValidationError("fit_rate needs at least four (x, y) pairs")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValidationError("fit_rate needs positive finite values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum((ly - (slope * lx + intercept)) ** 2))
    if ss_tot <= 1e-28 * max(1.0, float(np.sum(ly**2))):
        slope, r2 = 0.0, 1.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    bad = r2 < 0.5
    if bad:
        msg = f"log-log fit has r^2 = {r2:.3f} < 0.5"
        if strict:
            raise DegenerateFit(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return RateFit(float(slope), float(intercept), float(r2), bad)


def _map(fn, items, jobs: int):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _stress(cfg: EstimatorConfig, N_grid, shape_tail=()) -> np.ndarray:
    """rho N^{-1/2} exp(i phi) with phi uniform, one stream per trial."""
    out = np.zeros((cfg.trials, len(N_grid)) + shape_tail, dtype=complex)
    if cfg.stress_rho == 0:
        return out
    Ns = np.asarray(N_grid, float).reshape((1, -1) + (1,) * len(shape_tail))
    for r in range(cfg.trials):
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), r, 1]))
        out[r] = np.exp(2j * np.pi * rng.random((len(N_grid),) + shape_tail))
    return cfg.stress_rho * Ns ** -0.5 * out


def _noise_kind(cfg) -> Optional[InnerProductKind]:
    return {"None": None, "HMinus1": HMINUS1, "L2": L2_SURFACE}[cfg.noise_level]


def _family_noise(fields, kind, cfg, spec):
    """(trials, J) joint noise for the family, its Gram and theoretical variances."""
    G = gram_matrix(fields, kind, spec)
    L = covariance_factor(hadamard_covariance(G))
    W = np.stack([sample_gram_noise(L, rng_stream(cfg.seed, r), is_factor=True) for r in range(cfg.trials)])
    return W, G


def direct_estimate(cfg: EstimatorConfig, patch: BoundaryPatch, p: AdmissiblePoint, params,
                    spec: Optional[QuadratureSpec] = None, cutoff: CutoffProfile = DEFAULT_CUTOFF,
                    direction=(1.0, 0.0), theta_dir: float = 0.0, diagnostics: bool = True,
                    jobs: int = 1) -> ExperimentReport:
    """Deterministic measurement plus the bilinear noise term at every N of the grid and every trial."""
    cfg.check_patch(patch)
    if not p.certified:
        raise ValidationError("the boundary point has no admissibility certificate")
    if cfg.is_elastic:
        return _direct_elastic(cfg, patch, p, params, spec, cutoff, theta_dir, jobs)
    return _direct_maxwell(cfg, patch, p, params, spec, cutoff, direction, diagnostics, jobs)


def _direct_maxwell(cfg, patch, p, params: EMParameters, spec, cutoff, direction, diagnostics, jobs):
    target = _MAXWELL_COEF[cfg.target]
    coef = coefficient_for(params, target)
    frame = make_maxwell_frame(p.grad_at_p, direction)
    Ns = list(cfg.N_grid)

    def measure(N):
        res = dominant_term(coef, patch, p, frame, N, spec, cutoff)
        diag = remainder_diagnostics(params, patch, p, frame, N, spec, cutoff, target) if diagnostics else {}
        return complex(res.value), float(res.error), diag

    meas = _map(measure, Ns, jobs)
    det = np.array([m[0] for m in meas])
    kind = _noise_kind(cfg)
    noise = np.zeros((cfg.trials, len(Ns)), dtype=complex)
    theory_var = np.zeros(len(Ns))
    if kind is not None:
        form = "trace" if kind is HMINUS1 else "reduced"
        fields = [maxwell_boundary_input(patch, p, frame, N, cutoff, form=form) for N in Ns]
        noise, G = _family_noise(fields, kind, cfg, spec)
        theory_var = np.abs(np.diag(G)) ** 2
    est = det[None, :] + noise + _stress(cfg, Ns)
    truth = truth_value(params, patch, p, target)
    err = np.abs(est - truth)
    rows = []
    for j, N in enumerate(Ns):
        rows.append({
            "N": N, "estimate": complex(est[:, j].mean()), "deterministic": complex(det[j]),
            "truth": truth, "abs_error": float(np.sqrt(np.mean(err[:, j] ** 2))),
            "noise_var": float(np.var(noise[:, j])) if cfg.trials > 1 else float(theory_var[j]),
            "diagnostics": dict(meas[j][2], quad_error=meas[j][1], noise_var_theory=float(theory_var[j])),
        })
    report = ExperimentReport(rows, {}, {}, None, cfg.seed, asdict(cfg), est, err)
    report.fitted_slopes = _slopes(report, ("abs_error", "rem_cutoff", "rem_LN_l2", "noise_var_theory"))
    if diagnostics:
        hm = np.array([r["diagnostics"]["fN_hm1"] ** 2 for r in rows])
        if len(Ns) >= 4:
            report.fitted_slopes["fN_hm1_sq"] = fit_rate(Ns, hm).slope
        report.notes.append("almost-sure convergence is certified through coverage and summability surrogates")
    return report


def _slopes(report, keys) -> dict:
    out = {}
    if len(report.rows) < 4:
        return out
    Ns = report.Ns
    for key in keys:
        try:
            ys = np.abs(report.column(key)).astype(float)
        except KeyError:
            continue
        if np.all(ys > 0):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                out[key] = fit_rate(Ns, ys).slope
    return out


def elastic_truth(L: LameFields, patch: BoundaryPatch, p: AdmissiblePoint, probe) -> np.ndarray:
    """Z at P: closed form on flat patches, half-space impedance of the pulled-back tensor otherwise."""
    z0 = flatten_map(patch, p, np.zeros(3))
    lam, mu = float(L.lam(z0)), float(L.mu(z0))
    if patch.patch_id == "flat":
        return z_closed_form(lam, mu, probe.omega[:2]).Z
    M0 = inverse_jacobian_field(patch, p, np.zeros(2))
    return halfspace_impedance(pullback_tensor(isotropic_tensor(lam, mu), M0), probe.omega).Z


def _direct_elastic(cfg, patch, p, L: LameFields, spec, cutoff, theta_dir, jobs):
    probe = make_elastic_probe(p.grad_at_p, POLARIZATION_AMPLITUDES[0], theta_dir)
    Ns = list(cfg.N_grid)
    det = np.array(_map(lambda N: elastic_measurement(L, patch, p, probe, N, POLARIZATION_AMPLITUDES, spec, cutoff),
                        Ns, jobs))
    kind = _noise_kind(cfg)
    namp = len(POLARIZATION_AMPLITUDES)
    noise = np.zeros((cfg.trials, len(Ns), namp), dtype=complex)
    if kind is not None:
        fields = [elastic_boundary_input(patch, p, probe, N, cutoff, amplitude=a)
                  for N in Ns for a in POLARIZATION_AMPLITUDES]
        W, _ = _family_noise(fields, kind, cfg, spec)
        noise = W.reshape(cfg.trials, len(Ns), namp)
    vals = det[None] + noise + _stress(cfg, Ns, (namp,))
    truth = elastic_truth(L, patch, p, probe)
    unit = abs(np.linalg.norm(probe.omega) - 1.0) < 1e-12
    est = np.empty((cfg.trials, len(Ns), 3, 3), dtype=complex)
    for r in range(cfg.trials):
        for j in range(len(Ns)):
            est[r, j] = z_from_polarization(vals[r, j]).Z
    err = np.max(np.abs(est - truth[None, None]), axis=(2, 3))
    rows = []
    for j, N in enumerate(Ns):
        Zm = est[:, j].mean(axis=0)
        diag = {"elliptic_rhs": elliptic_bound_rhs(patch, p, N),
                "fN_l2": float(np.sqrt(field_norm_sq(elastic_boundary_input(patch, p, probe, N, cutoff), L2_SURFACE, spec)))}
        if unit:
            try:
                diag["lame"] = lame_from_Z(Zm, probe.omega[:2])
            except BdreconError as exc:
                diag["lame"] = f"infeasible: {exc}"
        rows.append({"N": N, "estimate": Zm, "truth": truth,
                     "abs_error": float(np.sqrt(np.mean(err[:, j] ** 2))),
                     "noise_var": float(np.mean(np.var(noise[:, j], axis=0))) if cfg.trials > 1 else 0.0,
                     "diagnostics": diag})
    report = ExperimentReport(rows, {}, {}, None, cfg.seed, asdict(cfg), est, err)
    report.fitted_slopes = _slopes(report, ("abs_error",))
    return report


def averaged_estimate(cfg: EstimatorConfig, patch: BoundaryPatch, p: AdmissiblePoint, params: EMParameters,
                      spec: Optional[QuadratureSpec] = None, cutoff: CutoffProfile = DEFAULT_CUTOFF,
                      direction=(1.0, 0.0), M: Optional[int] = None, max_pairs: int = 200_000,
                      jobs: int = 1) -> ExperimentReport:
    """Y_N = (1/T_N) int_{T_N}^{2 T_N} N(f_{t^2}, f_{t^2}) dt on the Gauss node family."""
    if cfg.noise_level != "L2":
        raise ValidationError("the averaged estimator is defined for L2 noise")
    if cfg.target == "ElasticZ":
        raise ValidationError("the averaged estimator covers the Maxwell targets")
    cfg.check_patch(patch)
    target = _MAXWELL_COEF[cfg.target]
    coef = coefficient_for(params, target)
    frame = make_maxwell_frame(p.grad_at_p, direction)
    pairing = family_pairing(patch, p, frame, cutoff, L2_SURFACE, spec)
    Ns = list(cfg.N_grid)
    plans = []
    for N in Ns:
        T = schedule_T(N, cfg.theta)
        m = window_node_count(T, M)
        if m * (m + 1) // 2 > max_pairs:
            raise BudgetExceeded(f"N = {N}: the window Gram needs {m * (m + 1) // 2} pairings, "
                                 f"above the budget {max_pairs}")
        plans.append((T, *averaging_nodes(T, M)))
    truth = truth_value(params, patch, p, target)
    est = np.empty((cfg.trials, len(Ns)), dtype=complex)
    noise = np.empty((cfg.trials, len(Ns)), dtype=complex)
    stress = _stress(cfg, Ns)
    rows = []
    for j, (N, (T, t, w)) in enumerate(zip(Ns, plans)):
        D = np.array(_map(lambda tt: complex(dominant_term(coef, patch, p, frame, tt * tt, spec, cutoff).value),
                          list(t), jobs))
        det = complex(np.sum(w * D) / T)
        G = np.empty((len(t), len(t)), dtype=complex)
        for a in range(len(t)):
            for b in range(a, len(t)):
                G[a, b] = pairing(t[a], t[b])
                G[b, a] = np.conj(G[a, b])
        Lf = covariance_factor(hadamard_covariance(G))
        for r in range(cfg.trials):
            W = sample_gram_noise(Lf, rng_stream(cfg.seed, r * len(Ns) + j), is_factor=True)
            noise[r, j] = np.sum(w * W) / T
        est[:, j] = det + noise[:, j] + stress[:, j]
        var_theory = window_noise_variance(w, G, T)
        rows.append({"N": N, "estimate": complex(est[:, j].mean()), "deterministic": det, "truth": truth,
                     "abs_error": float(np.sqrt(np.mean(np.abs(est[:, j] - truth) ** 2))),
                     "noise_var": float(np.var(noise[:, j])) if cfg.trials > 1 else var_theory,
                     "diagnostics": {"T": T, "M": len(t), "noise_var_theory": var_theory}})
    err = np.abs(est - truth)
    report = ExperimentReport(rows, {}, {}, None, cfg.seed, asdict(cfg), est, err)
    report.notes.append("noise realized jointly on the Gauss node family of each window")
    return report


def window_average_direct(coef, patch, p, frame, T: float, spec=None, cutoff: CutoffProfile = DEFAULT_CUTOFF,
                          epsrel: float = 1e-9) -> complex:
    """Adaptive t-average (1/T) int_T^{2T} D(t^2) dt of the direct dominant estimate."""
    def D(tt):
        v = complex(dominant_term(coef, patch, p, frame, tt * tt, spec, cutoff).value)
        return np.array([v.real, v.imag])

    val, _ = integrate.quad_vec(D, T, 2 * T, epsabs=0, epsrel=epsrel, limit=50)
    return complex(val[0], val[1]) / T


@dataclass(frozen=True)
class CoverageResult:
    C: float
    C_boundary: float
    N0: int
    coverage: dict
    eps: float


def theoretical_N0(C_boundary: float, eps: float, theta: float) -> int:
    """Smallest integer N0 >= 2 with (N0 - 1)^{1 - theta} > C^2 / (eps (1 - theta))."""
    if not 0 < eps < 1 or not 0 < theta < 1:
        raise ValidationError("eps and theta must lie in (0, 1)")
    bound = C_boundary**2 / (eps * (1.0 - theta))
    n = max(int(np.floor(bound ** (1.0 / (1.0 - theta)))) + 2, 2)
    # guard the floor against rounding in the power
    while n > 2 and (n - 2) ** (1.0 - theta) > bound:
        n -= 1
    while (n - 1) ** (1.0 - theta) <= bound:
        n += 1
    return n


def boundary_constant(Ns, hm1_norms) -> float:
    """sup_N N ||f_N||^2 in the H^-1 surrogate, from norms ||f_N||."""
    return float(np.max(np.asarray(Ns, float) * np.asarray(hm1_norms, float) ** 2))


def coverage_and_N0(cfg: EstimatorConfig, report: ExperimentReport, eps: float = 0.1,
                    C_boundary: Optional[float] = None, min_trials: int = 200) -> CoverageResult:
    """Held-out coverage of {|estimate - truth| <= C N^{-theta/2}} and N0 from the boundary constant.

    C is the (1 - eps) quantile over the calibration half of max_N |e_N| N^{theta/2}.
    """
    errs = np.asarray(report.errors, float)
    if errs.shape[0] < min_trials:
        raise InsufficientTrials(f"coverage needs at least {min_trials} trials, got {errs.shape[0]}")
    Ns = report.Ns
    scale = Ns ** (cfg.theta / 2.0)
    half = errs.shape[0] // 2
    cal, held = errs[:half], errs[half:]
    C = float(np.quantile(np.max(cal * scale[None], axis=1), 1.0 - eps))
    cover = {float(N): float(np.mean(held[:, j] <= C / scale[j])) for j, N in enumerate(Ns)}
    if C_boundary is None:
        C_boundary = boundary_constant(Ns, report.column("fN_hm1"))
    N0 = theoretical_N0(C_boundary, eps, cfg.theta)
    return CoverageResult(C, float(C_boundary), N0, cover, eps)


@dataclass(frozen=True)
class SummabilityProxy:
    terms: np.ndarray
    partial_sum: float
    tail_bound: float
    summable: bool


def summability_proxy(Ns, variances, theta: float) -> SummabilityProxy:
    """Partial sum of lambda_N^{-2} Var(W_N) with lambda_N = N^{-theta/2} along the grid.

    The series counts as summable when the log-log slope of the terms vs N is
    negative; the tail is then bounded by the geometric continuation of the last ratio.
    """
    Ns, v = np.asarray(Ns, float), np.asarray(variances, float)
    terms = Ns**theta * v
    fit = fit_rate(Ns, terms)
    ratio = terms[-1] / terms[-2]
    summable = fit.slope < 0 and ratio < 1
    tail = float(terms[-1] * ratio / (1.0 - ratio)) if summable else float("inf")
    return SummabilityProxy(terms, float(np.sum(terms)), tail, bool(summable))

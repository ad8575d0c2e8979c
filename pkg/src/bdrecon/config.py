"""Strict TOML experiment configuration."""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, fields as dc_fields, replace
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cutoff import CutoffProfile
from .errors import ValidationError
from .estimators import EstimatorConfig
from .fields import EMParameters, LameFields, ScalarField
from .geometry import certify_admissible, make_patch
from .quadrature import DEFAULT_SPEC, QuadratureSpec

MODES = ("direct", "averaged")

_SCHEMA = {
    "seed": None,
    "patch": {"id", "point"},
    "fields": {"mu", "eps", "sigma", "omega", "lam"},
    "estimator": {f.name for f in dc_fields(EstimatorConfig)} | {"mode", "eps", "M"},
    "quadrature": {f.name for f in dc_fields(QuadratureSpec)},
    "cutoff": {"kind"},
    "output": {"dir", "name"},
}
_MAXWELL_FIELDS = {"mu", "eps", "sigma", "omega"}
_ELASTIC_FIELDS = {"lam", "mu"}


@dataclass(frozen=True)
class ExperimentConfig:
    patch_id: str
    point: tuple
    fields: dict
    estimator: EstimatorConfig
    mode: str = "direct"
    coverage_eps: float = 0.1
    window_nodes: int | None = None
    quadrature: QuadratureSpec = DEFAULT_SPEC
    cutoff: str = "smooth"
    out_dir: str = "out"
    name: str = "experiment"

    def build(self):
        """Patch, certified point, parameter bundle, quadrature spec and cutoff."""
        patch = make_patch(self.patch_id)
        point = certify_admissible(patch, np.asarray(self.point, float), require=True)
        f = self.fields
        if self.estimator.is_elastic:
            params = LameFields(ScalarField.from_id(f["lam"]), ScalarField.from_id(f["mu"]))
        else:
            params = EMParameters(ScalarField.from_id(f["mu"]), ScalarField.from_id(f["eps"]),
                                  ScalarField.from_id(f["sigma"]), float(f["omega"]))
        return patch, point, params, self.quadrature, CutoffProfile(self.cutoff)

    def to_dict(self) -> dict:
        est = {f.name: getattr(self.estimator, f.name) for f in dc_fields(EstimatorConfig)}
        est["N_grid"] = list(est["N_grid"])
        est.update(mode=self.mode, eps=self.coverage_eps)
        if self.window_nodes is not None:
            est["M"] = self.window_nodes
        quad = {f.name: getattr(self.quadrature, f.name) for f in dc_fields(QuadratureSpec)
                if getattr(self.quadrature, f.name) != getattr(DEFAULT_SPEC, f.name)}
        out = {"patch": {"id": self.patch_id, "point": list(self.point)},
               "fields": dict(self.fields), "estimator": est,
               "cutoff": {"kind": self.cutoff}, "output": {"dir": self.out_dir, "name": self.name}}
        if quad:
            out["quadrature"] = quad
        return out


def _check_keys(section: str, got: dict, allowed: set):
    extra = set(got) - allowed
    if extra:
        raise ValidationError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    _check_keys("top level", raw, set(_SCHEMA))
    for name, allowed in _SCHEMA.items():
        if allowed is not None and name in raw:
            if not isinstance(raw[name], dict):
                raise ValidationError(f"[{name}] must be a table")
            _check_keys(name, raw[name], allowed)
    for required in ("patch", "fields", "estimator"):
        if required not in raw:
            raise ValidationError(f"missing [{required}] table")
    patch = raw["patch"]
    if "id" not in patch:
        raise ValidationError("[patch] needs an id")
    make_patch(patch["id"])
    point = tuple(float(v) for v in patch.get("point", (0.0, 0.0)))
    if len(point) != 2:
        raise ValidationError("[patch] point must have two coordinates")

    est = dict(raw["estimator"])
    mode = est.pop("mode", "direct")
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    eps = float(est.pop("eps", 0.1))
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    M = est.pop("M", None)
    if "seed" in raw and "seed" not in est:
        est["seed"] = raw["seed"]
    if "seed" in est and (not isinstance(est["seed"], int) or est["seed"] < 0):
        raise ValidationError("seed must be a non-negative integer")
    try:
        ecfg = EstimatorConfig(**est)
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc

    fields = dict(raw["fields"])
    need = _ELASTIC_FIELDS if ecfg.is_elastic else _MAXWELL_FIELDS
    _check_keys("fields", fields, need)
    missing = need - set(fields)
    if missing:
        raise ValidationError(f"[fields] is missing {', '.join(sorted(missing))}")
    for k, v in fields.items():
        if k != "omega":
            ScalarField.from_id(v)
    if mode == "averaged" and ecfg.noise_level != "L2":
        raise ValidationError("averaged mode needs noise_level = 'L2'")

    try:
        quad = replace(DEFAULT_SPEC, **raw.get("quadrature", {}))
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc
    cutoff = raw.get("cutoff", {}).get("kind", "smooth")
    CutoffProfile(cutoff)
    out = raw.get("output", {})
    return ExperimentConfig(patch["id"], point, fields, ecfg, mode, eps, None if M is None else int(M),
                            quad, cutoff, str(out.get("dir", "out")), str(out.get("name", "experiment")))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config {path} is not valid TOML: {exc}") from exc
    return config_from_dict(raw)

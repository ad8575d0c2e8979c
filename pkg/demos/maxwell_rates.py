"""Admittance recovery on a curved patch: error, remainder and noise scalings vs N."""
import numpy as np

from bdrecon import EstimatorConfig, certify_admissible, direct_estimate, make_patch
from bdrecon.fields import EMParameters, ScalarField

patch = make_patch("quad:0.5")
p = certify_admissible(patch, np.array([0.1, -0.05]), require=True)
params = EMParameters(ScalarField.from_id("const:1"), ScalarField.from_id("affine:2,0.5,0,0.3"),
                      ScalarField.from_id("const:0.5"), omega=1.0)

cfg = EstimatorConfig(target="GammaAdmittance", noise_level="HMinus1", N_grid=(64, 128, 256, 512, 1024),
                      trials=100, seed=1)
rep = direct_estimate(cfg, patch, p, params, jobs=4)

print(f"gamma(P) = {rep.rows[0]['truth']:.6f}")
print(f"{'N':>6} {'estimate':>24} {'rms error':>10} {'noise var':>10}")
for r in rep.rows:
    print(f"{r['N']:>6} {r['estimate']:>24.6f} {r['abs_error']:>10.2e} {r['noise_var']:>10.2e}")

print("\nlog-log slopes")
for key, slope in sorted(rep.fitted_slopes.items()):
    print(f"  {key:<18} {slope:+.3f}")

"""Radial distortion models: evaluation, inversion, and shape diagnostics.

The multiplier L(r) = f(r)/g(r) scales normalized image coordinates by a
rational function of the radius.  Barrel lenses shrink the periphery
(L decreasing and concave), pincushion lenses stretch it, and rational
models with a denominator root inside the field of view blow up, which is
the zero-crossing pathology the shape-constrained fits remove.
"""

import numpy as np

from shapecal.distortion import (DistortionModel, PoleError, distort,
                                 shape_check, undistort)

barrel = DistortionModel("polynomial", (-0.2, -0.08, 0.0, 0, 0, 0))
pincushion = DistortionModel("division", (0, 0, 0, -0.15, 0.0, 0.0))

rs = np.linspace(0.0, 1.0, 6)
print("radius:    ", np.round(rs, 3))
print("barrel L:  ", np.round(barrel.L(rs), 4))
print("pincushion:", np.round(pincushion.L(rs), 4))

pt = np.array([0.5, 0.3])
out = distort(barrel, pt)
back = undistort(barrel, out, search_max=2.0)
print("\nroundtrip (0.5, 0.3) ->", np.round(out, 6), "->", np.round(back, 9))

for model, shape in ((barrel, "barrel"), (pincushion, "pincushion")):
    report = shape_check(model, shape, rbar=1.0)
    print(f"{shape} shape check: max violation {report.max_violation}")

# The wrong shape fails loudly.
report = shape_check(barrel, "pincushion", rbar=1.0)
print("barrel checked as pincushion: max violation",
      round(report.max_violation, 4), "at", len(report.violating_radii),
      "radii")

# Shared root in f and g: the multiplier is fine almost everywhere but has
# a pole where the denominator crosses zero.
s = -1.0 / 1.5
mustache = DistortionModel("rational", (s, 0, 0, s, 0, 0))
print("\nshared-root model: L(1.0) =", mustache.L(1.0))
try:
    mustache.L(1.5)
except PoleError as exc:
    print("at the root:", exc)

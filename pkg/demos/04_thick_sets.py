"""Thick observation sets on the grid.

Half-period slabs are (1/2, 1)-thick: every unit window holds half its
length in the set, and no more.  Random cell patterns are checked by
sliding windows over the torus.
"""

import numpy as np

from ou_inverse import GridSpec, ThickSetSpec, build_mask, check_thickness

g = GridSpec(1, 8.0, 256)
slabs = build_mask(ThickSetSpec("periodic_slabs", 1.0, 0.5), g)
print("certificate:", slabs.certificate.to_dict())
for lam in (0.5, 0.6):
    r = check_thickness(slabs, lam, [1.0])
    print(f"lambda = {lam}: passed = {r.passed}, worst window fraction = {r.worst_fraction}")

g2 = GridSpec(2, 8.0, 64)
passed = []
for seed in range(20):
    cells = build_mask(ThickSetSpec("bernoulli_cells", cell=4 * g2.h, p=0.7, seed=seed), g2)
    passed.append(check_thickness(cells, 0.35, [32 * g2.h] * 2).passed)
print(f"Bernoulli cells p = 0.7: {sum(passed)}/20 masks are (0.35, {32 * g2.h})-thick")

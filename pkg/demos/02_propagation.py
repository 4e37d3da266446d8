"""Fourier and Kolmogorov evaluation of the semigroup, and the L2 decay law.

The Fourier route handles every order s; the Kolmogorov route (Gaussian
kernel) exists for s = 1 and serves as an independent check.  The norm
obeys ||u(t)|| <= e^{-tr(B) t/2} ||u0||, and for a contracting drift with
weak diffusion ||u(t)|| itself can grow while the rescaled norm falls.
"""

import numpy as np

from ou_inverse import (GridSpec, OUModel, PropagatorConfig, auto_half_width, norm_l2,
                        propagate_fourier, propagate_kolmogorov, time_series)


def bump(X):
    d = X - 0.5
    return np.exp(-0.5 * np.sum(d * d, axis=-1)) * (1 + 0.3 * np.sin(X[..., 0]))


m = OUModel(np.eye(2), [[-1.0, 1.0], [0.0, -1.0]])
g = GridSpec(2, auto_half_width(m, 1.0), 256)
cfg = PropagatorConfig(kernel_quad_points=36)
u0 = g.sample(bump)
for t in (0.1, 0.5, 1.0):
    a = propagate_fourier(m, u0, t, cfg)
    b = propagate_kolmogorov(m, bump, t, cfg, grid=g)
    print(f"t = {t}: relative L2 gap Fourier vs Kolmogorov = {norm_l2(a - b) / norm_l2(b):.2e}")

weak = OUModel(0.05, -1.0)
g1 = GridSpec(1, 40.0, 512)
v0 = g1.sample(lambda X: np.exp(-2.0 * X[..., 0] ** 2))
times = np.linspace(0.0, 1.0, 6)
for t, u in zip(times, time_series(weak, v0, times)):
    print(f"t = {t:.1f}: ||u|| = {norm_l2(u):.6f}   e^(tr(B) t/2) ||u|| = "
          f"{np.exp(-0.5 * t) * norm_l2(u):.6f}")

for s in (0.6, 1.0, 1.5):
    frac = OUModel(1.0, -1.0, s)
    u = propagate_fourier(frac, g1.sample(lambda X: np.exp(-X[..., 0] ** 2)), 1.0)
    print(f"s = {s}: ||u(1)|| = {norm_l2(u):.6f}")

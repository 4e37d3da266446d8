"""Invariant covariance and analyticity angle for a few drift matrices.

A symmetric drift with identity diffusion gives a self-adjoint generator on
L^2(mu) and the right angle psi = pi/2; a shear pushes psi below pi/2 and
with it the exponent phi = pi/psi used by the log-convexity estimate.
"""

import numpy as np

from ou_inverse import OUModel, gramian_qt, lyapunov_residual

models = {
    "symmetric": OUModel(np.eye(2), [[-1.0, 0.0], [0.0, -2.0]]),
    "shear": OUModel(np.eye(2), [[-1.0, 1.0], [0.0, -1.0]]),
    "strong shear": OUModel(np.eye(2), [[-1.0, 3.0], [0.0, -2.0]]),
}

for name, m in models.items():
    rep = m.angle
    res = lyapunov_residual(m.B, rep.q_inf, m.Q)
    print(f"{name:>12}: psi = {rep.psi:.6f}  r = {rep.r:.4f}  phi = {rep.phi:.4f}  "
          f"c_psi = {rep.c_psi:.4f}  Lyapunov residual = {res:.1e}")

# Q_t approaches Q_inf as t grows
m = models["shear"]
for t in (0.5, 2.0, 8.0, 30.0):
    gap = np.abs(gramian_qt(m, t) - m.angle.q_inf).max()
    print(f"t = {t:5.1f}: max |Q_t - Q_inf| = {gap:.2e}")

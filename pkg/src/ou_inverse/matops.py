"""Small dense matrix kernels for Ornstein-Uhlenbeck models.

Matrix exponentials, Gramians ``Q_t`` and ``Q_inf``, the Hurwitz test and the
analyticity angle of the semigroup on the invariant-measure space, together
with the exponents ``r``, ``phi`` and ``c_psi`` that the angle determines.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import HurwitzViolation
from .quadrature import adaptive_simpson

_CLAMP = 1e-13


@dataclass(frozen=True, eq=False)
class OUModel:
    """Problem data of ``du/dt = -tr^s(-Q grad^2) u + Bx . grad u``.

    ``Q`` and ``B`` may be given as scalars for one-dimensional models.
    """

    Q: np.ndarray
    B: np.ndarray
    s: float = 1.0
    dim: int = field(init=False)

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if Q.shape != B.shape or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q {Q.shape} and B {B.shape} must be equal square shapes")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-14 * max(1.0, np.abs(Q).max())):
            raise ValueError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        if np.linalg.eigvalsh(Q).min() <= 0:
            raise ValueError("Q must be positive definite")
        if not np.any(B != 0):
            raise ValueError("B must be nonzero")
        if not (self.s > 0 and math.isfinite(self.s)):
            raise ValueError("s must be a positive real")
        Q.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "dim", Q.shape[0])

    @cached_property
    def hurwitz(self) -> bool:
        return is_hurwitz(self.B)

    @cached_property
    def angle(self) -> "AngleReport":
        return analyticity_angle(self)

    @cached_property
    def sqrt_Q(self) -> np.ndarray:
        return sym_sqrt(self.Q)

    def scaled(self, lam):
        """Same drift and order, diffusion ``lam * Q``."""
        return OUModel(lam * self.Q, self.B, self.s)

    def __repr__(self):
        return f"OUModel(Q={self.Q.tolist()}, B={self.B.tolist()}, s={self.s})"


@dataclass(frozen=True)
class AngleReport:
    q_inf: np.ndarray
    psi: float
    r: float
    phi: float
    c_psi: float
    cot_psi: float = 0.0

    def to_dict(self):
        return {"q_inf": self.q_inf.tolist(), "psi": self.psi, "r": self.r,
                "phi": self.phi, "c_psi": self.c_psi, "cot_psi": self.cot_psi}


def expm(B, t=1.0):
    """Matrix exponential ``e^{tB}``.

    Closed form for 1x1 and 2x2 matrices (trace shift plus Cayley-Hamilton on
    the traceless part); larger matrices go to scipy's Pade scaling and
    squaring.
    """
    A = t * np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    if n == 1:
        return np.array([[math.exp(A[0, 0])]])
    if n != 2:
        return scipy.linalg.expm(A)
    m = 0.5 * (A[0, 0] + A[1, 1])
    C = A - m * np.eye(2)
    # C @ C = delta * I for traceless 2x2 C
    delta = C[0, 0] ** 2 + C[0, 1] * C[1, 0]
    root = math.sqrt(abs(delta))
    if root < 1e-4:
        # Taylor series of cosh(x) and sinh(x)/x in delta, enough terms for 1e-16
        d = delta
        ch = 1.0 + d / 2 + d * d / 24 + d ** 3 / 720 + d ** 4 / 40320
        sh = 1.0 + d / 6 + d * d / 120 + d ** 3 / 5040 + d ** 4 / 362880
        return math.exp(m) * (ch * np.eye(2) + sh * C)
    if delta > 0:
        ep = math.exp(m + root)
        em = math.exp(m - root)
        return 0.5 * (ep + em) * np.eye(2) + (0.5 * (ep - em) / root) * C
    em = math.exp(m)
    return em * (math.cos(root) * np.eye(2) + (math.sin(root) / root) * C)


def eigenvalues(B):
    """Eigenvalues of a square matrix, closed form up to 2x2."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = B.shape[0]
    if n == 1:
        return np.array([complex(B[0, 0])])
    if n == 2:
        tr = B[0, 0] + B[1, 1]
        det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
        disc = complex(0.25 * tr * tr - det)
        root = disc ** 0.5
        return np.array([0.5 * tr + root, 0.5 * tr - root])
    return np.linalg.eigvals(B)


def is_hurwitz(B) -> bool:
    """True iff every eigenvalue of ``B`` has strictly negative real part."""
    return bool(np.all(eigenvalues(B).real < 0))


def spectral_abscissa(B) -> float:
    return float(eigenvalues(B).real.max())


def sym_sqrt(Q, inverse=False):
    """Symmetric square root (or inverse square root) of an SPD matrix."""
    w, V = np.linalg.eigh(Q)
    p = -0.5 if inverse else 0.5
    return (V * w ** p) @ V.T


def _as_model_mats(model):
    return model.Q, model.B


def gramian_qt(model, t, tol=1e-12):
    """``Q_t = int_0^t e^{tau B} Q e^{tau B^T} dtau`` by adaptive Simpson.

    The tolerance is absolute for integrands of order one and scales with the
    largest endpoint value of the integrand beyond that, so strongly expanding
    drifts over long horizons still converge.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    Q, B = _as_model_mats(model)
    if t == 0:
        return np.zeros_like(Q)

    def integrand(tau):
        E = expm(B, tau)
        return E @ Q @ E.T

    scale = max(1.0, float(np.abs(integrand(float(t))).max()), float(np.abs(Q).max()))
    G = adaptive_simpson(integrand, 0.0, float(t), tol=tol * scale)
    return 0.5 * (G + G.T)


def lyapunov_solve(B, Q):
    """Solve ``B X + X B^T = -Q`` on the ``N(N+1)/2`` symmetric unknowns."""
    B = np.atleast_2d(B)
    n = B.shape[0]
    idx = [(i, j) for i in range(n) for j in range(i, n)]
    A = np.empty((len(idx), len(idx)))
    for col, (i, j) in enumerate(idx):
        E = np.zeros((n, n))
        E[i, j] = E[j, i] = 1.0
        R = B @ E + E @ B.T
        A[:, col] = [R[k, l] for k, l in idx]
    rhs = -np.array([Q[k, l] for k, l in idx])
    sol = np.linalg.solve(A, rhs)
    X = np.zeros((n, n))
    for v, (i, j) in zip(sol, idx):
        X[i, j] = X[j, i] = v
    return X


def gramian_qinf(model):
    """Invariant-measure Gramian ``Q_inf`` from the Lyapunov equation.

    Raises
    ------
    HurwitzViolation
        If ``B`` is not Hurwitz; no invariant measure exists then.
    """
    if not is_hurwitz(model.B):
        raise HurwitzViolation(
            f"B has spectral abscissa {spectral_abscissa(model.B):.6g} >= 0; "
            "no invariant measure")
    return lyapunov_solve(model.B, model.Q)


def lyapunov_residual(B, X, Q):
    return float(np.linalg.norm(B @ X + X @ B.T + Q, 2))


def angle_exponents(psi):
    """``(r, phi, c_psi)`` for an analyticity angle ``psi``.

    ``r = 1, phi = 1`` in the right-angle case, otherwise ``r = 2 cos(psi/2)``
    and ``phi = pi / psi``; ``c_psi = (1/r)**phi``.
    """
    if psi == math.pi / 2:
        r, phi = 1.0, 1.0
    else:
        r, phi = 2.0 * math.cos(0.5 * psi), math.pi / psi
    return r, phi, (1.0 / r) ** phi


def analyticity_angle(model) -> AngleReport:
    """Optimal sector angle of the semigroup on ``L^2_mu``.

    ``cot psi = 2 || I/2 + Q^{-1/2} Q_inf B^T Q^{-1/2} ||`` with the spectral
    norm.  Norms below 1e-13 are treated as zero so roundoff cannot push
    ``psi`` past ``pi/2``.
    """
    q_inf = gramian_qinf(model)
    iq = sym_sqrt(model.Q, inverse=True)
    M = 0.5 * np.eye(model.dim) + iq @ q_inf @ model.B.T @ iq
    cot = 2.0 * float(np.linalg.norm(M, 2))
    if cot < _CLAMP:
        cot = 0.0
    psi = math.atan2(1.0, cot)
    r, phi, c_psi = angle_exponents(psi)
    return AngleReport(q_inf=q_inf, psi=psi, r=r, phi=phi, c_psi=c_psi, cot_psi=cot)

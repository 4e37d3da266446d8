"""Convexity constants, logarithmic-convexity checks and stability bounds.

The fractional estimate compares ``||u(t)||`` with
``e^{-tr(B)(1-c)t/2} ||u0||^{1-ct/T} ||u(T)||^{ct/T}`` where ``c = c1/c2`` comes
from the extrema of

    beta(t, xi) = (1/t) int_0^t |Q^{1/2} e^{tau B^T} xi|^{2s} dtau

over ``[0, T] x S^{N-1}``.  The analytic estimate on ``L^2_mu`` uses the
exponent ``theta(t) = (t / (r T))^phi`` and reports the smallest constant
that makes it hold on the tested data.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateNorm, DomainError
from .field import Field, invariant_density, norm_l2, norm_l2_mu
from .matops import expm
from .quadrature import adaptive_simpson
from .semigroup import DEFAULT_CONFIG, get_propagator, kolmogorov_eval
from .special import gamma, incomplete_gamma  # noqa: F401  (re-exported)

UNDERFLOW = 1e-280
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ConvexityReport:
    c1: float
    c2: float
    c: float
    grid_resolution: tuple
    worst_ratio_fractional: float = float("nan")
    k_needed_analytic: float = float("nan")
    argmin: tuple = ()
    argmax: tuple = ()

    def to_dict(self):
        return {
            "c1": self.c1, "c2": self.c2, "c": self.c,
            "grid_resolution": list(self.grid_resolution),
            "worst_ratio_fractional": self.worst_ratio_fractional,
            "k_needed_analytic": self.k_needed_analytic,
            "argmin": list(self.argmin), "argmax": list(self.argmax),
        }


def _integrand(model, xi):
    Q, B, s = model.Q, model.B, model.s

    def f(tau):
        E = expm(B, tau)
        q = np.einsum("...i,ij,...j->...", xi, E @ Q @ E.T, xi)
        return np.maximum(q, 0.0) ** s

    return f


def beta(model, t, xi_unit, tol=1e-13):
    """Time-averaged symbol along the direction ``xi_unit``.

    Below ``t = 1e-8`` the value is the first-order expansion
    ``f(0) + t f'(0) / 2`` of the average.
    """
    xi = np.atleast_1d(np.asarray(xi_unit, dtype=float))
    if abs(float(np.dot(xi, xi)) - 1.0) > 1e-12:
        raise ValueError("xi_unit must have unit length")
    if t < 0:
        raise ValueError("t must be nonnegative")
    Q, B, s = model.Q, model.B, model.s
    q0 = float(xi @ Q @ xi)
    if t < 1e-8:
        dq = float(xi @ (B @ Q + Q @ B.T) @ xi)
        return q0 ** s + 0.5 * t * s * q0 ** (s - 1.0) * dq
    f = _integrand(model, xi)
    return float(adaptive_simpson(f, 0.0, float(t), tol=tol * max(1.0, t * q0 ** s))) / t


def sphere_directions(dim, count):
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    theta = 2.0 * math.pi * np.arange(count) / count
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


def beta_table(model, T, time_samples, directions):
    """``beta`` on ``linspace(0, T, time_samples) x directions``.

    Cumulative Simpson with one midpoint per time cell.
    """
    times = np.linspace(0.0, T, time_samples)
    f = _integrand(model, directions)
    mids = 0.5 * (times[1:] + times[:-1])
    fv = np.array([f(t) for t in times])
    fm = np.array([f(t) for t in mids])
    dt = np.diff(times)[:, None]
    cells = dt / 6.0 * (fv[:-1] + 4.0 * fm + fv[1:])
    cum = np.vstack([np.zeros((1, len(directions))), np.cumsum(cells, axis=0)])
    out = np.empty_like(cum)
    out[0] = fv[0]
    out[1:] = cum[1:] / times[1:, None]
    return times, out


def _golden(fun, lo, hi, iters=60):
    """Minimise ``fun`` on ``[lo, hi]``; endpoints are candidates too."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        if b - a < 1e-12 * max(1.0, abs(a) + abs(b)):
            break
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = fun(x2)
    cands = [(f1, x1), (f2, x2), (fun(lo), lo), (fun(hi), hi)]
    return min(cands)[::-1]


def _polish(model, T, t0, theta0, dt, dtheta, sign):
    """Coordinate-wise golden refinement of ``sign * beta`` near a grid extremum."""
    dim = model.dim

    def unit(th):
        return np.array([1.0]) if dim == 1 else np.array([math.cos(th), math.sin(th)])

    t, th = float(t0), float(theta0)
    best = sign * beta(model, t, unit(th), tol=1e-12)
    for _ in range(2 if dim == 2 else 1):
        t, val = _golden(lambda u: sign * beta(model, u, unit(th), tol=1e-12),
                         max(0.0, t - dt), min(T, t + dt), iters=45)
        best = min(best, val)
        if dim == 2:
            th, val = _golden(lambda a: sign * beta(model, t, unit(a), tol=1e-12),
                              th - dtheta, th + dtheta, iters=45)
            best = min(best, val)
    return float(sign * best), (float(t), float(th))


def convexity_constant(model, T, time_samples=512, sphere_samples=256) -> ConvexityReport:
    """Extrema ``c1 <= c2`` of ``beta`` and ``c = c1 / c2``.

    Dense tensor sampling of ``[0, T] x S^{N-1}`` followed by golden-section
    polishing around the sampled minimum and maximum.
    """
    if time_samples < 64 or sphere_samples < 64:
        raise ValueError("need at least 64 samples in time and on the sphere")
    if not T > 0:
        raise ValueError("T must be positive")
    dirs = sphere_directions(model.dim, sphere_samples)
    times, table = beta_table(model, T, time_samples, dirs)
    dt = times[1] - times[0]
    dtheta = 2.0 * math.pi / sphere_samples
    thetas = np.arctan2(dirs[:, -1], dirs[:, 0]) if model.dim == 2 else np.zeros(len(dirs))

    i, j = np.unravel_index(np.argmin(table), table.shape)
    c1, arg1 = _polish(model, T, times[i], thetas[j], dt, dtheta, +1.0)
    c1 = min(c1, float(table[i, j]))
    i, j = np.unravel_index(np.argmax(table), table.shape)
    c2, arg2 = _polish(model, T, times[i], thetas[j], dt, dtheta, -1.0)
    c2 = max(c2, float(table[i, j]))
    return ConvexityReport(c1=c1, c2=c2, c=c1 / c2,
                           grid_resolution=(time_samples, len(dirs)),
                           argmin=arg1, argmax=arg2)


# ----------------------------------------------------------------------------
# logarithmic convexity in L^2(R^N), fractional semigroup
# ----------------------------------------------------------------------------

@dataclass
class ConvexityCheck:
    passed: bool
    worst_ratio: float
    rows: list = field(default_factory=list)  # (t, lhs, rhs, ratio)


class FractionalConvexityChecker:
    """Reusable checker: propagators and ``c`` are built once per model.

    :meth:`check` accepts one field or a stack of them (leading axis).
    """

    def __init__(self, model, grid, T, t_list, cfg=DEFAULT_CONFIG, c=None, slack=1e-6):
        self.model, self.grid, self.T = model, grid, float(T)
        self.t_list = [float(t) for t in t_list]
        if any(t < 0 or t > self.T for t in self.t_list):
            raise ValueError("t_list must lie in [0, T]")
        self.c = convexity_constant(model, T).c if c is None else float(c)
        self.slack = slack
        self.tr = float(np.trace(model.B))
        self._props = {t: get_propagator(model, grid, t, cfg) for t in set(self.t_list) | {self.T}}

    def _norms(self, values):
        axes = tuple(range(-self.grid.dim, 0))
        return np.sqrt(self.grid.cell * np.sum(np.abs(values) ** 2, axis=axes))

    def ratios(self, values):
        """LHS, RHS and LHS/RHS, each of shape ``(trials, len(t_list))``."""
        v = np.asarray(values)
        single = v.ndim == self.grid.dim
        if single:
            v = v[None]
        n0 = self._norms(v)
        if np.any(n0 == 0):
            raise ValueError("initial datum must be nonzero")
        nT = self._norms(self._props[self.T].apply(v))
        if np.any(nT < UNDERFLOW):
            raise DegenerateNorm(f"||u(T)|| = {nT.min():.3e} underflows")
        lhs, rhs = [], []
        for t in self.t_list:
            lt = n0 if t == 0 else self._norms(self._props[t].apply(v))
            th = self.c * t / self.T
            log_rhs = (-0.5 * self.tr * (1.0 - self.c) * t
                       + (1.0 - th) * np.log(n0) + th * np.log(nT))
            lhs.append(lt)
            rhs.append(np.exp(log_rhs))
        lhs, rhs = np.array(lhs).T, np.array(rhs).T
        return lhs, rhs, lhs / rhs

    def check(self, values) -> ConvexityCheck:
        lhs, rhs, ratio = self.ratios(values)
        rows = [(t, lhs[k, j], rhs[k, j], ratio[k, j])
                for k in range(ratio.shape[0]) for j, t in enumerate(self.t_list)]
        worst = float(ratio.max())
        return ConvexityCheck(passed=worst <= 1.0 + self.slack, worst_ratio=worst, rows=rows)


def check_logconvexity_fractional(model, u0: Field, T, t_list, cfg=DEFAULT_CONFIG, c=None,
                                  slack=1e-6) -> ConvexityCheck:
    """Test the fractional log-convexity estimate on one datum."""
    checker = FractionalConvexityChecker(model, u0.grid, T, t_list, cfg, c=c, slack=slack)
    return checker.check(u0.values)


# ----------------------------------------------------------------------------
# logarithmic convexity in L^2_mu, analytic semigroup
# ----------------------------------------------------------------------------

@dataclass
class AnalyticCheck:
    passed: bool
    k_needed: float
    rows: list = field(default_factory=list)  # (t, lhs, base, ratio)


def check_logconvexity_analytic(model, u0, T, t_list, cfg=DEFAULT_CONFIG, grid=None,
                                k_cap=float("inf")) -> AnalyticCheck:
    """Smallest ``K`` with ``||u(t)|| <= K ||u0||^{1-theta} ||u(T)||^theta`` in ``L^2_mu``.

    ``u0`` is a :class:`Field` or a callable (then ``grid`` is required); the
    solution comes from Kolmogorov's formula, norms from the sampled invariant
    density.  ``passed`` compares ``k_needed`` with ``k_cap``.
    """
    if model.s != 1.0:
        raise ValueError("the analytic estimate is stated for s = 1")
    if isinstance(u0, Field):
        grid = u0.grid
        v0 = u0.values
    elif grid is None:
        raise ValueError("a grid is required for callable initial data")
    else:
        v0 = np.asarray(u0(grid.coords), dtype=complex)
    rep = model.angle
    rho = invariant_density(model, grid)

    def norm_at(t):
        if t == 0:
            return norm_l2_mu(Field(grid, v0), rho)
        return norm_l2_mu(Field(grid, kolmogorov_eval(model, u0, t, grid.coords, cfg)), rho)

    n0 = norm_at(0.0)
    nT = norm_at(float(T))
    if nT < UNDERFLOW:
        raise DegenerateNorm(f"||u(T)|| = {nT:.3e} underflows")
    rows = []
    k = 0.0
    for t in t_list:
        th = (t / (rep.r * T)) ** rep.phi
        lt = n0 if t == 0 else norm_at(float(t))
        base = math.exp((1.0 - th) * math.log(n0) + th * math.log(nT))
        rows.append((float(t), lt, base, lt / base))
        k = max(k, lt / base)
    return AnalyticCheck(passed=k <= k_cap, k_needed=k, rows=rows)


# ----------------------------------------------------------------------------
# stability bounds
# ----------------------------------------------------------------------------

def holder_defaults(eps):
    """Default ``(p, gamma, alpha)`` for the analytic stability bound.

    ``p`` is the midpoint of ``(1, 1/(1-eps))``, ``gamma`` the midpoint of
    ``(0, 1 - 1/p)``, and ``alpha = gamma / p``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    p = 0.5 * (1.0 + 1.0 / (1.0 - eps))
    g = 0.5 * (1.0 - 1.0 / p)
    return p, g, g / p


def stability_bound_analytic(eta, report, p, alpha, K):
    """``K * (Gamma(1/phi) / ((-c_psi p log eta)^{1/phi} phi))^alpha``."""
    if not 0 < eta < 1:
        raise DomainError("eta must lie in (0, 1)")
    phi, c_psi = report.phi, report.c_psi
    core = gamma(1.0 / phi) / ((-c_psi * p * math.log(eta)) ** (1.0 / phi) * phi)
    return K * core ** alpha


def stability_bound_fractional(eta, C, C1):
    """``-C / log(C1 eta)``; requires ``C1 * eta < 1``."""
    if not eta > 0 or C1 * eta >= 1:
        raise DomainError("need 0 < C1 * eta < 1")
    return -C / math.log(C1 * eta)


def elementary_inequality(x):
    """Both sides of ``(x-1)/log x + x <= -(1 + e^{-2}) / log x`` on ``(0, 1)``."""
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0) | (x >= 1)):
        raise DomainError("x must lie in (0, 1)")
    lx = np.log(x)
    return (x - 1.0) / lx + x, -(1.0 + math.exp(-2.0)) / lx

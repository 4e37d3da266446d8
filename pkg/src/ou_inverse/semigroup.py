"""Ornstein-Uhlenbeck and fractional OU semigroups from their explicit formulas.

Two independent evaluation routes:

* Fourier side: ``u_hat(t, xi) = e^{-tr(B) t} exp(-S(t, xi)) u0_hat(e^{-t B^T} xi)``
  with ``S(t, xi) = int_0^t |Q^{1/2} e^{-tau B^T} xi|^{2s} dtau``.  One shot in
  ``t``; the warped read of ``u0_hat`` is an explicit sparse linear stage so the
  discrete adjoint is exact.
* Kolmogorov kernel (``s = 1`` only): Gaussian average of ``u0(e^{tB} x - y)``
  with covariance ``2 Q_t``, by tensor Gauss-Legendre quadrature.
"""

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.ndimage
import scipy.sparse

from .errors import DomainTooSmall, FractionalUnsupported, FrequencyBoxExceeded
from .field import Field, GridSpec, boundary_ratio, fft_forward, fft_inverse
from .matops import OUModel, expm, gramian_qt
from .quadrature import adaptive_simpson, batched_simpson, gauss_legendre

INTERP_KINDS = ("nearest", "linear", "cubic-spline")
TAPER_FRACTION = 0.05
DECAY_TOL = 1e-8
MAX_PADDED = 1 << 21


@dataclass(frozen=True)
class PropagatorConfig:
    quad_tol: float = 1e-10
    interp: str = "cubic-spline"
    kernel_quad_points: int = 64
    oversample: int = 8

    def __post_init__(self):
        if not self.quad_tol > 0:
            raise ValueError("quad_tol must be positive")
        if self.interp not in INTERP_KINDS:
            raise ValueError(f"interp must be one of {INTERP_KINDS}")
        if self.kernel_quad_points < 8:
            raise ValueError("kernel_quad_points must be >= 8")
        if self.oversample not in (1, 2, 4, 8):
            raise ValueError("oversample must be 1, 2, 4 or 8")


DEFAULT_CONFIG = PropagatorConfig()


# ----------------------------------------------------------------------------
# symbol of the fractional OU semigroup
# ----------------------------------------------------------------------------

def _power_integrand(model, xi, sign):
    """``tau -> |Q^{1/2} e^{sign tau B^T} xi|^{2s}`` for a batch of ``xi`` rows."""
    Q, B, s = model.Q, model.B, model.s

    def f(tau):
        E = expm(B, sign * tau)
        G = E @ Q @ E.T
        q = np.einsum("...i,ij,...j->...", xi, G, xi)
        return np.maximum(q, 0.0) ** s

    return f


def power_integral(model, t, xi, sign=-1, tol=1e-10):
    """``int_0^t |Q^{1/2} e^{sign tau B^T} xi|^{2s} dtau`` for rows of ``xi``.

    For ``s = 1`` the integral is a quadratic form in the Gramian of
    ``sign * B``; otherwise panel-doubling Simpson runs on the whole batch.
    """
    xi = np.asarray(xi, dtype=float)
    if t == 0:
        return np.zeros(xi.shape[:-1])
    if model.s == 1.0:
        G = gramian_qt(OUModel(model.Q, sign * model.B, 1.0), t, tol=min(tol, 1e-12))
        return np.maximum(np.einsum("...i,ij,...j->...", xi, G, xi), 0.0)
    return batched_simpson(_power_integrand(model, xi, sign), float(t), tol=tol)


def symbol_integral(model, t, xi, cfg=DEFAULT_CONFIG) -> float:
    """Exponent ``int_0^t |Q^{1/2} e^{-tau B^T} xi|^{2s} dtau`` at one frequency.

    Recursive adaptive Simpson with absolute tolerance
    ``quad_tol * max(1, t * |Q^{1/2} xi|^{2s})``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if t == 0 or not np.any(xi):
        return 0.0
    f = _power_integrand(model, xi, -1)
    scale = max(1.0, t * float(f(0.0)))
    return float(adaptive_simpson(f, 0.0, float(t), tol=cfg.quad_tol * scale))


# ----------------------------------------------------------------------------
# warped-frequency resampling as a sparse linear map
# ----------------------------------------------------------------------------

def _bspline3(d):
    d = np.abs(d)
    return np.where(d < 1, 2.0 / 3.0 - d * d + 0.5 * d ** 3,
                    np.where(d < 2, (2.0 - d) ** 3 / 6.0, 0.0))


class WarpOperator:
    """Read gridded coefficients at arbitrary frequency points.

    ``apply(c)`` returns the interpolant of ``c`` at ``points``; points outside
    the frequency box read 0.  For ``cubic-spline`` the map is
    ``E @ P^{-1}``: ``P`` is the tridiagonal B-spline prefilter per axis
    (coefficients beyond the box are zero) and ``E`` the sparse 4^N-tap
    evaluation.  ``P`` is symmetric, so the adjoint is ``P^{-1} @ E^T``.
    """

    def __init__(self, grid, points, kind="cubic-spline"):
        self.grid = grid
        self.kind = kind
        n, N = grid.n, grid.dim
        p = np.asarray(points, dtype=float) / grid.dxi + n // 2
        M = p.shape[0]
        inside = np.all((p >= 0) & (p <= n - 1), axis=1)
        if kind == "nearest":
            offs, wfun = [0], None
            base = np.rint(p).astype(int)
        elif kind == "linear":
            offs = [0, 1]
            base = np.floor(p).astype(int)
        else:
            offs = [-1, 0, 1, 2]
            base = np.floor(p).astype(int)
        rows, cols, vals = [], [], []
        row_ids = np.arange(M)
        for combo in np.ndindex(*([len(offs)] * N)):
            idx = np.empty((M, N), dtype=int)
            w = np.ones(M)
            for ax in range(N):
                o = offs[combo[ax]]
                idx[:, ax] = base[:, ax] + o
                d = p[:, ax] - idx[:, ax]
                if kind == "nearest":
                    pass
                elif kind == "linear":
                    w = w * (1.0 - np.abs(d))
                else:
                    w = w * _bspline3(d)
            ok = inside & np.all((idx >= 0) & (idx < n), axis=1) & (w != 0)
            flat = np.ravel_multi_index(tuple(idx[ok].T), grid.shape)
            rows.append(row_ids[ok])
            cols.append(flat)
            vals.append(w[ok])
        self.E = scipy.sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(M, n ** N))
        self.Et = self.E.T.tocsr()
        self.inside = inside
        if kind == "cubic-spline":
            ab = np.empty((3, n))
            ab[0] = ab[2] = 1.0 / 6.0
            ab[1] = 4.0 / 6.0
            self._banded = ab

    def _prefilter(self, c):
        # c: (batch,) + grid.shape
        if self.kind != "cubic-spline":
            return c
        N = self.grid.dim
        for ax in range(c.ndim - N, c.ndim):
            moved = np.moveaxis(c, ax, 0)
            shp = moved.shape
            sol = scipy.linalg.solve_banded((1, 1), self._banded, moved.reshape(shp[0], -1),
                                            check_finite=False)
            c = np.moveaxis(sol.reshape(shp), 0, ax)
        return c

    def apply(self, coeffs):
        """``coeffs``: ``batch + grid.shape`` -> ``batch + (M,)``."""
        g = self.grid
        batch = coeffs.shape[: coeffs.ndim - g.dim]
        c = self._prefilter(coeffs.reshape((-1,) + g.shape))
        out = (self.E @ c.reshape(c.shape[0], -1).T).T
        return out.reshape(batch + (self.E.shape[0],))

    def adjoint(self, vals):
        """``vals``: ``batch + (M,)`` -> ``batch + grid.shape``."""
        g = self.grid
        batch = vals.shape[:-1]
        v = vals.reshape(-1, vals.shape[-1])
        c = (self.Et @ v.T).T.reshape((-1,) + g.shape)
        return self._prefilter(c).reshape(batch + g.shape)


# ----------------------------------------------------------------------------
# Fourier propagator
# ----------------------------------------------------------------------------

class FourierPropagator:
    """Discrete ``T(t)`` on a grid: pad, transform, warp, multiply, invert.

    ``u0`` is zero-padded to a box ``cfg.oversample`` times wider before the
    transform, so ``u0_hat`` is read from a grid that much finer in frequency;
    the interpolation error of the warp drops accordingly.  Everything that
    depends only on ``(model, grid, t, cfg)`` is built once; :meth:`apply` and
    :meth:`adjoint` accept a leading batch axis.
    """

    def __init__(self, model, grid, t, cfg=DEFAULT_CONFIG):
        if t < 0:
            raise ValueError("t must be nonnegative")
        if model.dim != grid.dim:
            raise ValueError("model and grid dimensions differ")
        self.model, self.grid, self.t, self.cfg = model, grid, float(t), cfg
        # the padded grid is capped at MAX_PADDED points
        k = cfg.oversample
        while k > 1 and (k * grid.n) ** grid.dim > MAX_PADDED:
            k //= 2
        self.k = k
        self.fine = GridSpec(grid.dim, grid.L * k, grid.n * k) if k > 1 else grid
        lo = (k - 1) * grid.n // 2
        self._inner = tuple(slice(lo, lo + grid.n) for _ in range(grid.dim))
        xi = grid.freqs.reshape(-1, grid.dim)
        S = power_integral(model, self.t, xi, sign=-1, tol=cfg.quad_tol)
        self.log_growth = -float(np.trace(model.B)) * self.t
        self.multiplier = np.exp(self.log_growth - S)
        # rows of xi map to rows of (e^{-tB^T} xi)^T = xi^T e^{-tB}
        self.warp = WarpOperator(self.fine, xi @ expm(model.B, -self.t), cfg.interp)

    def _pad(self, values):
        if self.fine is self.grid:
            return values
        batch = values.shape[: values.ndim - self.grid.dim]
        out = np.zeros(batch + self.fine.shape, dtype=complex)
        out[(Ellipsis,) + self._inner] = values
        return out

    def _crop(self, values):
        if self.fine is self.grid:
            return values
        return values[(Ellipsis,) + self._inner]

    def apply(self, values):
        g = self.grid
        batch = values.shape[: values.ndim - g.dim]
        c = fft_forward(self.fine, self._pad(values))
        w = self.warp.apply(c) * self.multiplier
        return fft_inverse(g, w.reshape(batch + g.shape))

    def adjoint(self, values):
        g = self.grid
        batch = values.shape[: values.ndim - g.dim]
        c = fft_forward(g, values).reshape(batch + (-1,))
        w = self.warp.adjoint(c * self.multiplier)
        scale = float(self.k ** g.dim)
        return self._crop(fft_inverse(self.fine, w)) * scale

    def lost_fraction(self, values):
        """Share of the would-be output energy carried past the frequency box.

        Content of ``u0_hat`` at ``zeta`` lands at ``e^{t B^T} zeta``; where that
        leaves the box it is dropped.  Each dropped coefficient is weighted by the
        damping it would have received.
        """
        g, f = self.grid, self.fine
        c = fft_forward(f, self._pad(values)).reshape(-1)
        energy = np.abs(c) ** 2
        if energy.sum() == 0:
            return 0.0
        zeta = f.freqs.reshape(-1, g.dim)
        dest = zeta @ expm(self.model.B, self.t)
        edge = g.dxi * (g.n // 2 - 1)
        out = np.any(np.abs(dest) > edge, axis=1) & (energy > 0)
        if not np.any(out):
            return 0.0
        S = power_integral(self.model, self.t, dest[out], sign=-1, tol=self.cfg.quad_tol)
        lost = float(np.sum(energy[out] * np.exp(-2.0 * S))) / self.k ** g.dim
        kept_c = self.warp.apply(c.reshape(f.shape)) * self.multiplier
        jac = math.exp(self.log_growth)
        kept = float(np.sum(np.abs(kept_c) ** 2)) / max(jac, 1e-300)
        return lost / max(lost + kept, 1e-300)


@lru_cache(maxsize=24)
def get_propagator(model, grid, t, cfg=DEFAULT_CONFIG):
    """Cached :class:`FourierPropagator` keyed on model identity."""
    return FourierPropagator(model, grid, t, cfg)


def _check_decay(values, what="u0"):
    r = boundary_ratio(values)
    if r > DECAY_TOL:
        raise DomainTooSmall(f"{what} is {r:.2e} of its peak at the box boundary (> {DECAY_TOL})")


def propagate_fourier(model, u0: Field, t, cfg=DEFAULT_CONFIG, check_domain=True) -> Field:
    """``T(t) u0`` via the Fourier representation of the semigroup.

    Raises :class:`DomainTooSmall` if ``u0`` does not decay below 1e-8 of its
    peak at the box boundary, and warns with :class:`FrequencyBoxExceeded` when
    more than 1% of the output energy is lost past the frequency box.
    """
    if check_domain:
        _check_decay(u0.values)
    prop = get_propagator(model, u0.grid, float(t), cfg)
    if check_domain and t > 0:
        frac = prop.lost_fraction(u0.values)
        if frac > 0.01:
            warnings.warn(f"{100 * frac:.1f}% of the energy leaves the frequency box",
                          FrequencyBoxExceeded, stacklevel=2)
    return Field(u0.grid, prop.apply(u0.values))


def _threads():
    try:
        return max(1, int(os.environ.get("OU_INVERSE_THREADS", "1")))
    except ValueError:
        return 1


def time_series(model, u0: Field, times, cfg=DEFAULT_CONFIG, check_domain=True):
    """Propagate ``u0`` to each time independently (no step accumulation).

    ``OU_INVERSE_THREADS`` caps the worker count; output order follows
    ``times`` regardless.
    """
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or times != sorted(times):
        raise ValueError("times must be sorted and nonnegative")
    if check_domain:
        _check_decay(u0.values)

    def one(t):
        return Field(u0.grid, get_propagator(model, u0.grid, t, cfg).apply(u0.values))

    workers = min(_threads(), len(times))
    if workers <= 1:
        return [one(t) for t in times]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(one, times))


# ----------------------------------------------------------------------------
# Kolmogorov kernel
# ----------------------------------------------------------------------------

def kolmogorov_eval(model, u0, t, points, cfg=DEFAULT_CONFIG, chunk=1 << 22):
    """Evaluate ``(T_0(t) u0)(x)`` at arbitrary ``points`` (shape ``(..., N)``).

    ``u0`` is a :class:`Field` (cubic spline off the grid, zero outside) or a
    callable taking coordinates of shape ``(..., N)``.
    """
    if model.s != 1.0:
        raise FractionalUnsupported("the Kolmogorov kernel exists only for s = 1")
    if not t > 0:
        raise ValueError("t must be positive")
    N = model.dim
    pts = np.asarray(points, dtype=float)
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, N)
    cov = 2.0 * gramian_qt(model, t)
    lam, V = np.linalg.eigh(cov)
    scale = V * np.sqrt(np.maximum(lam, 0.0))
    z, wz = gauss_legendre(cfg.kernel_quad_points, -8.0, 8.0)
    wz = wz * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    nodes = np.stack([g.ravel() for g in np.meshgrid(*([z] * N), indexing="ij")], axis=-1)
    weights = np.prod([g.ravel() for g in np.meshgrid(*([wz] * N), indexing="ij")], axis=0)
    shifts = nodes @ scale.T
    centers = pts @ expm(model.B, t).T
    evaluate = _evaluator(u0)
    out = np.zeros(len(pts), dtype=complex)
    per = max(1, chunk // max(1, len(pts)))
    for start in range(0, len(nodes), per):
        sh = shifts[start:start + per]
        X = centers[None, :, :] - sh[:, None, :]
        vals = evaluate(X)
        out += np.tensordot(weights[start:start + per], vals, axes=1)
    return out.reshape(shape)


def _evaluator(u0):
    if callable(u0) and not isinstance(u0, Field):
        return lambda X: np.asarray(u0(X), dtype=complex)
    grid = u0.grid
    kw = dict(order=3, mode="grid-constant")
    cre = scipy.ndimage.spline_filter(u0.values.real, **kw)
    cim = scipy.ndimage.spline_filter(u0.values.imag, **kw)
    has_imag = bool(np.any(u0.values.imag))

    def ev(X):
        idx = (X + grid.L) / grid.h
        coords = np.moveaxis(idx, -1, 0).reshape(grid.dim, -1)
        re = scipy.ndimage.map_coordinates(cre, coords, prefilter=False, **kw)
        out = re.astype(complex)
        if has_imag:
            out += 1j * scipy.ndimage.map_coordinates(cim, coords, prefilter=False, **kw)
        return out.reshape(X.shape[:-1])

    return ev


def propagate_kolmogorov(model, u0, t, cfg=DEFAULT_CONFIG, grid=None, check_domain=True) -> Field:
    """``T_0(t) u0`` on a grid from Kolmogorov's formula.

    ``u0`` may be a :class:`Field` or a callable; with a callable, ``grid``
    must be given.  Requires ``s = 1``.
    """
    if model.s != 1.0:
        raise FractionalUnsupported("the Kolmogorov kernel exists only for s = 1")
    if isinstance(u0, Field):
        grid = u0.grid
        if check_domain:
            _check_decay(u0.values)
    elif grid is None:
        raise ValueError("a grid is required for callable initial data")
    return Field(grid, kolmogorov_eval(model, u0, t, grid.coords, cfg))


# ----------------------------------------------------------------------------
# generator
# ----------------------------------------------------------------------------

def boundary_taper(grid):
    """Product cosine taper: 1 inside ``|x_j| <= 0.95 L``, 0 at the box edge."""
    inner = (1.0 - TAPER_FRACTION) * grid.L
    d = np.clip((np.abs(grid.x) - inner) / (TAPER_FRACTION * grid.L), 0.0, 1.0)
    w1 = np.cos(0.5 * math.pi * d) ** 2
    w = w1
    for _ in range(grid.dim - 1):
        w = np.multiply.outer(w, w1)
    return w


def interior_mask(grid):
    inner = (1.0 - TAPER_FRACTION) * grid.L
    m = np.abs(grid.x) <= inner
    out = m
    for _ in range(grid.dim - 1):
        out = np.logical_and.outer(out, m)
    return out


def spectral_gradient(grid, values):
    """Components ``d u / d x_j`` stacked on a new leading axis."""
    c = fft_forward(grid, values)
    nyq = np.ones(grid.n)
    nyq[0] = 0.0
    out = []
    for ax in range(grid.dim):
        shape = [1] * grid.dim
        shape[ax] = grid.n
        k = (1j * grid.xi * nyq).reshape(shape)
        out.append(fft_inverse(grid, c * k))
    return np.stack(out)


def apply_generator(model, u0: Field, check_domain=True) -> Field:
    """``A u0 = -tr^s(-Q grad^2) u0 + Bx . grad u0``.

    The diffusion part is the Fourier multiplier ``-<Q xi, xi>^s``; the drift
    multiplies the spectral gradient by ``Bx`` under :func:`boundary_taper`.
    """
    grid = u0.grid
    if check_domain:
        _check_decay(u0.values)
    xi = grid.freqs
    sym = np.maximum(np.einsum("...i,ij,...j->...", xi, model.Q, xi), 0.0) ** model.s
    diff = fft_inverse(grid, -sym * fft_forward(grid, u0.values))
    grad = spectral_gradient(grid, u0.values)
    if check_domain:
        radial = np.einsum("...i,i...->...", grid.coords, grad)
        _check_decay_relative(radial, u0.values, "x . grad u0")
    bx = grid.coords @ model.B.T
    drift = np.einsum("...i,i...->...", bx, grad) * boundary_taper(grid)
    return Field(grid, diff + drift)


def _check_decay_relative(values, ref, what):
    top = max(np.abs(ref).max(), np.abs(values).max())
    if top == 0:
        return
    edge = np.zeros(values.shape, dtype=bool)
    edge[tuple(slice(1, -1) for _ in values.shape)] = True
    r = float(np.abs(values[~edge]).max() / top)
    if r > DECAY_TOL:
        raise DomainTooSmall(f"{what} is {r:.2e} of its peak at the box boundary")

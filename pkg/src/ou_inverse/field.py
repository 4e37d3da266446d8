"""Sampled functions on a truncated periodic grid ``[-L, L)^N``.

Transforms follow ``g_hat(xi) = int g(x) exp(-i x.xi) dx`` discretised by the
trapezoidal rule, so the forward transform carries the factor ``h^N`` and the
coefficient array is stored centred: index ``i`` on an axis holds frequency
``xi = (pi / L) * (i - n/2)``.
"""

import csv
import math
import struct
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainTooSmallWarning, GridMismatch
from .matops import gramian_qinf

FIELD_MAGIC = b"OUFLD1"
_HEADER = struct.Struct("<6s2xiid8x")


@dataclass(frozen=True)
class GridSpec:
    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        n = self.points_per_axis
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if not (16 <= n <= 4096 and n & (n - 1) == 0):
            raise ValueError("points_per_axis must be a power of two in [16, 4096]")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def n(self):
        return self.points_per_axis

    @property
    def L(self):
        return self.half_width

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def h(self):
        return 2.0 * self.L / self.n

    @property
    def dxi(self):
        return math.pi / self.L

    @property
    def cell(self):
        return self.h ** self.dim

    @cached_property
    def x(self):
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def xi(self):
        return self.dxi * np.arange(-self.n // 2, self.n // 2)

    @cached_property
    def coords(self):
        """Spatial mesh, shape ``grid.shape + (dim,)``."""
        return np.stack(np.meshgrid(*([self.x] * self.dim), indexing="ij"), axis=-1)

    @cached_property
    def freqs(self):
        """Frequency mesh, shape ``grid.shape + (dim,)``."""
        return np.stack(np.meshgrid(*([self.xi] * self.dim), indexing="ij"), axis=-1)

    @cached_property
    def _phase(self):
        k = np.arange(-self.n // 2, self.n // 2)
        p = np.where(k % 2 == 0, 1.0, -1.0)
        out = p
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, p)
        return out

    def sample(self, func):
        """Evaluate ``func(coords)`` on the grid."""
        return Field(self, np.asarray(func(self.coords), dtype=complex))


@dataclass(eq=False)
class Field:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite entries")
        self.values = v

    def __add__(self, other):
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, a):
        return Field(self.grid, self.values * a)

    __rmul__ = __mul__

    def copy(self):
        return Field(self.grid, self.values.copy())


@dataclass(eq=False)
class SpectralField:
    grid: GridSpec
    coeffs: np.ndarray


def _same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatch(f"{a.grid} != {b.grid}")


def fft_forward(grid, values):
    """Array-level forward transform, batched over leading axes."""
    axes = tuple(range(-grid.dim, 0))
    F = np.fft.fftshift(np.fft.fftn(values, axes=axes), axes=axes)
    return grid.cell * grid._phase * F


def fft_inverse(grid, coeffs):
    axes = tuple(range(-grid.dim, 0))
    F = np.fft.ifftshift(coeffs * grid._phase, axes=axes)
    return np.fft.ifftn(F, axes=axes) / grid.cell


def forward_transform(f: Field) -> SpectralField:
    return SpectralField(f.grid, fft_forward(f.grid, f.values))


def inverse_transform(F: SpectralField) -> Field:
    return Field(F.grid, fft_inverse(F.grid, F.coeffs))


def coeff_norm(F: SpectralField) -> float:
    """``(2 pi)^{-N/2}``-normalised l2 norm of Fourier coefficients."""
    g = F.grid
    return math.sqrt((g.dxi / (2 * math.pi)) ** g.dim * float(np.sum(np.abs(F.coeffs) ** 2)))


def norm_l2(f: Field) -> float:
    return math.sqrt(f.grid.cell * float(np.sum(np.abs(f.values) ** 2)))


def norm_l2_mu(f: Field, rho: Field) -> float:
    _same_grid(f, rho)
    return math.sqrt(f.grid.cell * float(np.sum(np.abs(f.values) ** 2 * rho.values.real)))


def norm_l2_masked(f: Field, mask) -> float:
    m = getattr(mask, "mask", mask)
    return math.sqrt(f.grid.cell * float(np.sum(np.abs(f.values[m]) ** 2)))


def inner(f: Field, g: Field) -> complex:
    """Grid-weighted ``int f conj(g) dx``."""
    _same_grid(f, g)
    return f.grid.cell * complex(np.vdot(g.values, f.values))


def quad_form(P, x):
    """``<P x, x>`` over the trailing axis of ``x``."""
    return np.einsum("...i,ij,...j->...", x, P, x)


def gaussian_log_density(model, coords):
    """Log of the invariant density at ``coords``."""
    q_inf = gramian_qinf(model)
    n = model.dim
    _, logdet = np.linalg.slogdet(q_inf)
    return (-0.5 * n * math.log(4 * math.pi) - 0.5 * logdet
            - 0.25 * quad_form(np.linalg.inv(q_inf), coords))


def invariant_density(model, grid: GridSpec) -> Field:
    """Sample the invariant density ``rho`` on the grid.

    Emits :class:`DomainTooSmallWarning` when the grid mass of ``rho`` differs
    from one by more than 1e-6.
    """
    rho = np.exp(gaussian_log_density(model, grid.coords))
    mass = grid.cell * rho.sum()
    if abs(mass - 1.0) > 1e-6:
        warnings.warn(f"invariant density has grid mass {mass:.9f}; enlarge L",
                      DomainTooSmallWarning, stacklevel=2)
    return Field(grid, rho)


def norm_h_s_mu(f: Field, model, s_order: float) -> float:
    """Weighted Sobolev norm ``|| f exp(-<Q_inf^{-1} x, x>/8) ||_{H^s}``.

    Computed spectrally as ``((2 pi)^{-N} int (1+|xi|^2)^s |g_hat|^2 dxi)^{1/2}``.
    """
    grid = f.grid
    q_inv = np.linalg.inv(gramian_qinf(model))
    w = np.exp(-0.125 * quad_form(q_inv, grid.coords))
    G = fft_forward(grid, f.values * w)
    xi2 = np.sum(grid.freqs ** 2, axis=-1)
    dens = (1.0 + xi2) ** s_order * np.abs(G) ** 2
    return math.sqrt((grid.dxi / (2 * math.pi)) ** grid.dim * float(dens.sum()))


def boundary_ratio(values, width=1):
    """Max modulus on the outer ``width`` layers relative to the global max."""
    v = np.abs(values)
    top = v.max()
    if top == 0:
        return 0.0
    inner_mask = np.zeros(v.shape, dtype=bool)
    sl = tuple(slice(width, -width) for _ in v.shape)
    inner_mask[sl] = True
    return float(v[~inner_mask].max() / top)


def sample_admissible(model, grid: GridSpec, eps: float, bound_M: float, seed: int,
                      mode: str = "weighted") -> Field:
    """Random smooth initial datum with prescribed admissibility norm.

    Fourier coefficients with random phases and amplitudes decaying like
    ``(1+|xi|^2)^{-(N+2)/2}`` on the lowest ``n/4`` modes per axis give a
    band-limited real field; a Gaussian envelope of width ``L/16`` makes it decay
    to roundoff at the box boundary.  The result is scaled so that

    * ``mode="weighted"``: ``||u0||_{H^{2 eps}_mu} = bound_M``;
    * ``mode="lebesgue"``: ``||u0||_{L^2} + ||A u0||_{L^2} = bound_M``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n, N = grid.n, grid.dim
    k = np.arange(-n // 2, n // 2)
    band = np.abs(k) < n // 8
    sel = band
    for _ in range(N - 1):
        sel = np.logical_and.outer(sel, band)
    xi2 = np.sum(grid.freqs ** 2, axis=-1)
    amp = (1.0 + xi2) ** (-(N + 2) / 2.0)
    phase = np.exp(2j * math.pi * rng.random(grid.shape))
    coeffs = np.where(sel, amp * phase, 0.0)
    u = fft_inverse(grid, coeffs).real
    sigma = grid.L / 16.0
    r2 = np.sum(grid.coords ** 2, axis=-1)
    u = u * np.exp(-0.5 * r2 / sigma ** 2)
    f = Field(grid, u)
    if mode == "weighted":
        nrm = norm_h_s_mu(f, model, 2.0 * eps)
    elif mode == "lebesgue":
        from .semigroup import apply_generator
        nrm = norm_l2(f) + norm_l2(apply_generator(model, f, check_domain=False))
    else:
        raise ValueError(f"unknown admissibility mode {mode!r}")
    return Field(grid, f.values * (bound_M / nrm))


def write_field(path, f: Field):
    """Binary field file: 32-byte header then little-endian (re, im) float64 pairs."""
    g = f.grid
    data = np.empty(f.values.size * 2, dtype="<f8")
    flat = f.values.ravel()
    data[0::2] = flat.real
    data[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FIELD_MAGIC, g.dim, g.n, g.L))
        fh.write(data.tobytes())


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, dim, n, L = _HEADER.unpack_from(raw)
    if magic != FIELD_MAGIC:
        raise ValueError(f"{path}: not a field file")
    grid = GridSpec(dim, L, n)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != 2 * n ** dim:
        raise ValueError(f"{path}: truncated payload")
    vals = (data[0::2] + 1j * data[1::2]).reshape(grid.shape)
    return Field(grid, vals)


def write_field_csv(path, f: Field):
    g = f.grid
    names = ["x", "y"][: g.dim]
    pts = g.coords.reshape(-1, g.dim)
    vals = f.values.ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["re", "im"])
        for p, v in zip(pts, vals):
            w.writerow([f"{c:.17g}" for c in p] + [f"{v.real:.17g}", f"{v.imag:.17g}"])


def auto_half_width(model, T) -> float:
    """Box half-width for data that must stay resolved up to time ``T``.

    ``L = 8 * max(sqrt(lambda_max(Q_inf)), sqrt(2 T ||Q||^{1/(2s)} + 1)) * max(1, ||e^{-TB}||)``
    rounded up to one decimal.  The ``Q_inf`` term enters only for Hurwitz
    drifts; the last factor allows for the spatial dilation ``x -> e^{-tB} x``
    that the drift imposes on the solution.
    """
    from .matops import expm
    if not T > 0:
        raise ValueError("T must be positive")
    diff = math.sqrt(2.0 * T * np.linalg.norm(model.Q, 2) ** (1.0 / (2.0 * model.s)) + 1.0)
    spread = diff
    if model.hurwitz:
        spread = max(spread, math.sqrt(np.linalg.eigvalsh(gramian_qinf(model)).max()))
    dilation = max(1.0, float(np.linalg.norm(expm(model.B, -T), 2)))
    return math.ceil(8.0 * spread * dilation * 10.0 - 1e-9) / 10.0

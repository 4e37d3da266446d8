"""Observation sets: construction, thickness certificates, grid masks.

Thickness is checked on the periodic torus ``[-L, L)^N``.  Measures are cell
counts, so a certificate is only valid up to the grid resolution recorded in
it.
"""

import math
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridMismatch, ResolutionTooCoarse
from .field import Field, GridSpec

MASK_MAGIC = b"OUMSK1"
_HEADER = struct.Struct("<6s2xiidB7x")
KINDS = ("periodic_slabs", "periodic_cubes", "bernoulli_cells", "full", "custom_mask")


@dataclass(frozen=True)
class ThickSetSpec:
    kind: str
    period: float = 1.0
    width: float = 0.5
    offset: float = 0.0
    cell: float = 1.0
    p: float = 1.0
    seed: int = 0
    custom: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown set kind {self.kind!r}")
        if self.kind in ("periodic_slabs", "periodic_cubes"):
            if not 0 < self.width <= self.period:
                raise ValueError("need 0 < width <= period")
        if self.kind == "bernoulli_cells":
            if not 0 <= self.p <= 1:
                raise ValueError("need 0 <= p <= 1")
            if not self.cell > 0:
                raise ValueError("cell side must be positive")
        if self.kind == "custom_mask" and self.custom is None:
            raise ValueError("custom_mask needs a boolean array")


@dataclass(frozen=True)
class Certificate:
    lam: float
    a: tuple
    resolution: float
    note: str = "checked on the periodic torus up to grid resolution"

    def to_dict(self):
        return {"lambda": self.lam, "a": list(self.a), "resolution": self.resolution,
                "note": self.note}


@dataclass(eq=False)
class ObservationMask:
    grid: GridSpec
    mask: np.ndarray
    certificate: Optional[Certificate] = None

    @property
    def is_full(self):
        return bool(self.mask.all())

    @property
    def fraction(self):
        return float(self.mask.mean())


def build_mask(spec: ThickSetSpec, grid: GridSpec) -> ObservationMask:
    """Sample the set on the grid, with the certificate the construction implies.

    Slabs ``[kP, kP + w)`` are ``(w/P, P)``-thick, periodic cubes
    ``((w/P)^N, P)``-thick; Bernoulli cells carry no certificate.
    """
    X = grid.coords
    N = grid.dim
    cert = None
    if spec.kind == "full":
        m = np.ones(grid.shape, dtype=bool)
        cert = Certificate(1.0, (grid.L,) * N, grid.h)
    elif spec.kind == "periodic_slabs":
        m = np.mod(X[..., 0] - spec.offset, spec.period) < spec.width
        a = (spec.period,) + (grid.L,) * (N - 1)
        cert = Certificate(spec.width / spec.period, a, grid.h)
    elif spec.kind == "periodic_cubes":
        m = np.all(np.mod(X - spec.offset, spec.period) < spec.width, axis=-1)
        cert = Certificate((spec.width / spec.period) ** N, (spec.period,) * N, grid.h)
    elif spec.kind == "bernoulli_cells":
        ncell = int(math.ceil(2 * grid.L / spec.cell))
        rng = np.random.default_rng(spec.seed)
        keep = rng.random((ncell,) * N) < spec.p
        idx = np.minimum(np.floor((X + grid.L) / spec.cell).astype(int), ncell - 1)
        m = keep[tuple(np.moveaxis(idx, -1, 0))]
    else:
        m = np.asarray(spec.custom, dtype=bool)
        if m.shape != grid.shape:
            raise GridMismatch(f"custom mask shape {m.shape} != grid {grid.shape}")
    return ObservationMask(grid, m, cert)


@dataclass
class ThicknessResult:
    passed: bool
    worst_fraction: float
    slack: float
    window_cells: tuple


def window_fractions(mask: ObservationMask, cells):
    """Fraction of ``mask`` in every periodic translate of a ``cells`` box."""
    m = mask.mask.astype(float)
    for ax, k in enumerate(cells):
        n = m.shape[ax]
        ext = np.concatenate([m, np.take(m, np.arange(k), axis=ax)], axis=ax)
        cs = np.cumsum(ext, axis=ax)
        zero = np.zeros_like(np.take(cs, [0], axis=ax))
        cs = np.concatenate([zero, cs], axis=ax)
        m = np.take(cs, np.arange(k, k + n), axis=ax) - np.take(cs, np.arange(n), axis=ax)
    return m / float(np.prod(cells))


def check_thickness(mask: ObservationMask, lam, a, translates=None) -> ThicknessResult:
    """Sampled ``(lam, a)``-thickness test.

    Every grid-aligned periodic translate is examined when ``translates`` is
    None or at least the number of grid points; otherwise that many evenly
    spaced translates.  Passes iff the smallest fraction is at least
    ``lam - sum_j h / a_j`` (one layer of boundary cells per axis).
    """
    g = mask.grid
    a = np.broadcast_to(np.asarray(a, dtype=float), (g.dim,))
    if np.any(a >= 2 * g.L):
        raise ValueError("rectangle sides must be smaller than the box")
    cells = tuple(int(round(aj / g.h)) for aj in a)
    if min(cells) < 8:
        raise ResolutionTooCoarse(f"a/h = {min(a) / g.h:.2f} < 8")
    frac = window_fractions(mask, cells).ravel()
    if translates is not None and 0 < translates < frac.size:
        pick = np.linspace(0, frac.size - 1, int(translates)).astype(int)
        frac = frac[pick]
    slack = float(sum(1.0 / k for k in cells))
    worst = float(frac.min())
    return ThicknessResult(passed=worst >= lam - slack, worst_fraction=worst,
                           slack=slack, window_cells=cells)


def restrict(f: Field, mask: ObservationMask) -> Field:
    """Zero ``f`` outside the observation set."""
    if f.grid != mask.grid:
        raise GridMismatch(f"{f.grid} != {mask.grid}")
    return Field(f.grid, np.where(mask.mask, f.values, 0.0))


def write_mask(path, mask: ObservationMask):
    """Run-length encoded mask: header, run count, then uint32 run lengths."""
    flat = mask.mask.ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).astype("<u4")
    g = mask.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MASK_MAGIC, g.dim, g.n, g.L, int(flat[0])))
        fh.write(struct.pack("<I", runs.size))
        fh.write(runs.tobytes())


def read_mask(path) -> ObservationMask:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, dim, n, L, first = _HEADER.unpack_from(raw)
    if magic != MASK_MAGIC:
        raise ValueError(f"{path}: not a mask file")
    (count,) = struct.unpack_from("<I", raw, _HEADER.size)
    runs = np.frombuffer(raw, dtype="<u4", count=count, offset=_HEADER.size + 4)
    vals = (np.arange(count) + first) % 2 == 1
    grid = GridSpec(dim, L, n)
    flat = np.repeat(vals, runs)
    if flat.size != n ** dim:
        raise ValueError(f"{path}: runs do not cover the grid")
    return ObservationMask(grid, flat.reshape(grid.shape))

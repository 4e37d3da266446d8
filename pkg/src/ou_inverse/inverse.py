"""Observation operator, its discrete adjoint, Tikhonov reconstruction and stability sweeps.

Data live in ``L^2`` of the snapshots: ``<d, e> = h^N sum_i sum_x d_i conj(e_i)``.
The forward map ``F u0 = (1_omega T(t_i) u0)_i`` and its adjoint
``F* d = sum_i T(t_i)* (1_omega d_i)`` are built from the same discrete stages,
so the dot-product test holds to roundoff.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse

from .errors import MissingDerivative, NonConvergence, RegimeRefused
from .field import Field, fft_forward, fft_inverse, norm_l2
from .semigroup import DEFAULT_CONFIG, FourierPropagator, apply_generator


@dataclass(eq=False)
class ObservationData:
    times: list
    snapshots: list
    derivative_snapshots: Optional[list] = None
    noise_level: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        self.times = [float(t) for t in self.times]
        if len(self.times) != len(self.snapshots):
            raise ValueError("one snapshot per observation time")
        if self.times != sorted(self.times) or (self.times and self.times[0] <= 0):
            raise ValueError("times must be sorted and positive")
        if self.derivative_snapshots is not None and len(self.derivative_snapshots) != len(self.times):
            raise ValueError("one derivative snapshot per observation time")

    @property
    def grid(self):
        return self.snapshots[0].grid

    def stacked(self):
        return np.stack([s.values for s in self.snapshots])

    def __sub__(self, other):
        der = None
        if self.derivative_snapshots is not None and other.derivative_snapshots is not None:
            der = [a - b for a, b in zip(self.derivative_snapshots, other.derivative_snapshots)]
        return ObservationData(self.times, [a - b for a, b in zip(self.snapshots, other.snapshots)],
                               der)


@dataclass
class ReconstructionResult:
    u0_hat: Field
    relative_error: float
    residual_history: list
    alpha_reg: float
    cg_iterations: int
    converged: bool = True
    final_residual: float = 0.0

    def to_dict(self):
        return {"relative_error": self.relative_error, "alpha_reg": self.alpha_reg,
                "cg_iterations": self.cg_iterations, "converged": self.converged,
                "final_residual": self.final_residual,
                "residual_history": list(self.residual_history)}


@dataclass
class StabilityFit:
    noise_levels: list
    data_norms: list
    recon_errors: list
    fitted_C: float
    fitted_alpha: float
    fit_r2: float
    degenerate: bool = False
    norm: str = "h1"
    rows: list = field(default_factory=list)

    def summary(self):
        return {"C": self.fitted_C, "alpha": self.fitted_alpha, "r2": self.fit_r2}


class ObservationOperator:
    """``F`` and ``F*`` for fixed model, mask and observation times.

    Every time shares the padding, the fine-grid transform and the spline
    prefilter of the input, so those run once per application; the per-time
    warps are stacked into one sparse matrix.
    """

    def __init__(self, model, mask, times, cfg=DEFAULT_CONFIG):
        self.model, self.mask, self.cfg = model, mask, cfg
        self.grid = mask.grid
        self.times = [float(t) for t in times]
        self.props = [FourierPropagator(model, self.grid, t, cfg) for t in self.times]
        self._m = mask.mask
        lead = self.props[0]
        self._lead = lead
        self._E = scipy.sparse.vstack([p.warp.E for p in self.props]).tocsr()
        self._Et = self._E.T.tocsr()
        self._mult = np.concatenate([p.multiplier for p in self.props])
        self._scale = float(lead.k ** self.grid.dim)

    def forward(self, values):
        g, lead = self.grid, self._lead
        c = lead.warp._prefilter(fft_forward(lead.fine, lead._pad(values))[None])
        w = (self._E @ c.ravel()) * self._mult
        out = fft_inverse(g, w.reshape((len(self.times),) + g.shape))
        return np.where(self._m, out, 0.0)

    def adjoint(self, data):
        g, lead = self.grid, self._lead
        c = fft_forward(g, np.where(self._m, data, 0.0)).reshape(-1)
        w = (self._Et @ (c * self._mult)).reshape((1,) + lead.fine.shape)
        w = lead.warp._prefilter(w)[0]
        return lead._crop(fft_inverse(lead.fine, w)) * self._scale

    def inner(self, a, b):
        return self.grid.cell * complex(np.vdot(b, a))

    def norm(self, a):
        return math.sqrt(self.grid.cell * float(np.sum(np.abs(a) ** 2)))

def forward_observe(model, u0: Field, mask, times, cfg=DEFAULT_CONFIG,
                    with_derivative=False) -> ObservationData:
    """Masked snapshots of ``T(t_i) u0``; optionally of ``z = T(t_i) A u0`` too."""
    op = ObservationOperator(model, mask, times, cfg)
    snaps = [Field(u0.grid, v) for v in op.forward(u0.values)]
    der = None
    if with_derivative:
        z0 = apply_generator(model, u0, check_domain=False)
        der = [Field(u0.grid, v) for v in op.forward(z0.values)]
    return ObservationData(list(times), snaps, der)


def time_weights(times):
    """Trapezoid weights on ``[0, t_m]``, constant extension on ``[0, t_1]``."""
    t = np.asarray(times, dtype=float)
    if t.size == 1:
        return t.copy()
    w = np.empty_like(t)
    w[0] = t[0] + 0.5 * (t[1] - t[0])
    w[1:-1] = 0.5 * (t[2:] - t[:-2])
    w[-1] = 0.5 * (t[-1] - t[-2])
    return w


def observation_norms(data: ObservationData, need_h1=True):
    """``(||u||_{L^2(0,T;L^2(omega))}, ||u||_{H^1(0,T;L^2(omega))})``.

    Raises :class:`MissingDerivative` when ``need_h1`` and there is no
    derivative channel; with ``need_h1=False`` the second entry is NaN then.
    """
    w = time_weights(data.times)
    l2sq = float(sum(wi * norm_l2(s) ** 2 for wi, s in zip(w, data.snapshots)))
    if data.derivative_snapshots is None:
        if need_h1:
            raise MissingDerivative("no derivative snapshots for the H1 norm")
        return math.sqrt(l2sq), float("nan")
    dsq = float(sum(wi * norm_l2(s) ** 2 for wi, s in zip(w, data.derivative_snapshots)))
    return math.sqrt(l2sq), math.sqrt(l2sq + dsq)


def add_noise(data: ObservationData, level, seed) -> ObservationData:
    """Gaussian noise on the observation set, scaled to ``level`` times the clean norm.

    Snapshots and derivative snapshots receive independent draws, each scaled
    in its own ``L^2(0,T;L^2(omega))`` norm.
    """
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    rng = np.random.default_rng(seed)
    grid = data.grid
    support = np.abs(data.stacked()).sum(axis=0) > 0

    def perturb(fields):
        clean = ObservationData(data.times, fields)
        ref, _ = observation_norms(clean, need_h1=False)
        if level == 0 or ref == 0:
            return [f.copy() for f in fields]
        raw = [Field(grid, np.where(support, rng.standard_normal(grid.shape), 0.0))
               for _ in fields]
        nrm, _ = observation_norms(ObservationData(data.times, raw), need_h1=False)
        k = level * ref / nrm
        return [f + r * k for f, r in zip(fields, raw)]

    snaps = perturb(data.snapshots)
    der = None if data.derivative_snapshots is None else perturb(data.derivative_snapshots)
    return ObservationData(data.times, snaps, der, noise_level=float(level), seed=seed)


def adjoint_observe(model, data: ObservationData, mask, cfg=DEFAULT_CONFIG) -> Field:
    """``F* d``: exact discrete adjoint of :func:`forward_observe`."""
    op = ObservationOperator(model, mask, data.times, cfg)
    return Field(mask.grid, op.adjoint(data.stacked()))


def _cg(op, d, alpha, cg_max, cg_tol, x0=None):
    """CG on ``(F*F + alpha I) x = F* d``.

    The history records ``sqrt(||F x - d||^2 + alpha ||x||^2)``, the Tikhonov
    functional, which CG decreases monotonically.  The data residual is
    carried incrementally from ``F p``.
    """
    b = op.adjoint(d)
    bn = op.norm(b)
    if x0 is None:
        x = np.zeros(op.grid.shape, dtype=complex)
        rd = -d.astype(complex)
        r = b.copy()
    else:
        x = x0.astype(complex).copy()
        Fx = op.forward(x)
        rd = Fx - d
        r = b - op.adjoint(Fx) - alpha * x
    history = [math.sqrt(op.norm(rd) ** 2 + alpha * op.norm(x) ** 2)]
    if bn == 0:
        return x, history, 0, True, 0.0
    p = r.copy()
    rr = op.inner(r, r).real
    it = 0
    converged = math.sqrt(rr) <= cg_tol * bn
    while not converged and it < cg_max:
        Fp = op.forward(p)
        Ap = op.adjoint(Fp) + alpha * p
        pAp = op.inner(Ap, p).real
        if pAp <= 0:
            break
        a = rr / pAp
        x = x + a * p
        rd = rd + a * Fp
        r = r - a * Ap
        rr_new = op.inner(r, r).real
        it += 1
        history.append(math.sqrt(op.norm(rd) ** 2 + alpha * op.norm(x) ** 2))
        converged = math.sqrt(rr_new) <= cg_tol * bn
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, history, it, converged, math.sqrt(rr) / bn


def tikhonov_reconstruct(model, data: ObservationData, mask, alpha_reg, cg_max=500,
                         cg_tol=1e-10, cfg=DEFAULT_CONFIG, truth=None, op=None,
                         x0=None) -> ReconstructionResult:
    """Minimise ``||F u0 - d||^2 + alpha_reg ||u0||^2`` by CG on the normal equations.

    Stops at relative normal-equation residual ``cg_tol`` or after ``cg_max``
    iterations; the latter only warns (:class:`NonConvergence`).
    """
    if not alpha_reg > 0:
        raise ValueError("alpha_reg must be positive")
    if op is None:
        op = ObservationOperator(model, mask, data.times, cfg)
    d = data.stacked()
    x, hist, it, conv, res = _cg(op, d, alpha_reg, cg_max, cg_tol, x0)
    if not conv:
        warnings.warn(f"CG stopped after {it} iterations at relative residual {res:.3e}",
                      NonConvergence, stacklevel=2)
    u_hat = Field(mask.grid, x)
    err = float("nan")
    if truth is not None:
        tn = norm_l2(truth)
        err = norm_l2(u_hat - truth) / tn if tn > 0 else norm_l2(u_hat)
    return ReconstructionResult(u_hat, err, hist, float(alpha_reg), it, conv, res)


def discrepancy_alpha(op, d, delta, alphas=None, tau=1.1, cg_max=500, cg_tol=1e-10):
    """Largest ``alpha`` on a decreasing log grid with ``||F u_alpha - d|| <= tau delta``.

    Falls back to the smallest grid value.  Returns ``(alpha, x, iterations)``.
    """
    if alphas is None:
        alphas = np.logspace(0, -14, 29)
    x = None
    for alpha in alphas:
        x, _, it, _, _ = _cg(op, d, alpha, cg_max, cg_tol, x0=x)
        if op.norm(op.forward(x) - d) <= tau * delta:
            return float(alpha), x, it
    return float(alphas[-1]), x, it


def fit_log_law(etas, errors):
    """Least squares ``log e = log C - alpha log|log eta|``; returns ``(C, alpha, r2)``."""
    x = np.log(np.abs(np.log(np.asarray(etas, dtype=float))))
    y = np.log(np.asarray(errors, dtype=float))
    if x.size < 2 or np.ptp(x) == 0:
        return float("nan"), float("nan"), float("nan")
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else float("nan")
    return math.exp(icpt), -float(slope), r2


def stability_sweep(model, mask, u0_truth: Field, noise_levels, alpha_rule="discrepancy",
                    seeds=(0, 1, 2, 3, 4), times=None, T=1.0, cfg=DEFAULT_CONFIG,
                    norm="h1", cg_max=500, cg_tol=1e-10) -> StabilityFit:
    """Reconstruct from noisy data over levels and seeds; fit ``e = C / |log eta|^alpha``.

    ``eta`` is the observation norm of the added noise (``norm`` = ``"l2"`` or
    ``"h1"``), ``e`` the ``L^2`` reconstruction error.  ``alpha_rule`` is
    ``"discrepancy"`` (Morozov with factor 1.1), a number, or a callable of the
    noise level.

    Raises
    ------
    RegimeRefused
        For ``s <= 1/2`` with partial observation.
    """
    if model.s <= 0.5 and not mask.is_full:
        raise RegimeRefused(
            f"s = {model.s} <= 1/2: final-state observability from a partial set fails "
            "in this regime, so the stability sweep is refused")
    levels = [float(v) for v in noise_levels]
    if len(levels) < 4:
        raise ValueError("need at least four noise levels")
    if times is None:
        times = np.linspace(T / 20, T, 20)
    op = ObservationOperator(model, mask, times, cfg)
    clean = forward_observe(model, u0_truth, mask, times, cfg, with_derivative=True)
    d_clean = clean.stacked()
    rows = []
    for level in levels:
        for seed in seeds:
            noisy = add_noise(clean, level, seed)
            eta_l2, eta_h1 = observation_norms(noisy - clean)
            d = noisy.stacked()
            delta = op.norm(d - d_clean)
            if alpha_rule == "discrepancy":
                alpha, x, it = discrepancy_alpha(op, d, delta, cg_max=cg_max, cg_tol=cg_tol)
            else:
                alpha = float(alpha_rule(level) if callable(alpha_rule) else alpha_rule)
                x, _, it, _, _ = _cg(op, d, alpha, cg_max, cg_tol)
            err = norm_l2(Field(mask.grid, x) - u0_truth)
            rows.append({"level": level, "seed": int(seed), "eta_l2": eta_l2,
                         "eta_h1": eta_h1, "error": err, "alpha_reg": alpha,
                         "cg_iterations": int(it)})
    key = "eta_h1" if norm == "h1" else "eta_l2"
    uniq = sorted(set(levels))
    med_eta = [float(np.median([r[key] for r in rows if r["level"] == v])) for v in uniq]
    med_err = [float(np.median([r["error"] for r in rows if r["level"] == v])) for v in uniq]
    degenerate = len(uniq) < 2
    if degenerate:
        C, alpha, r2 = float("nan"), float("nan"), float("nan")
    else:
        C, alpha, r2 = fit_log_law([r[key] for r in rows], [r["error"] for r in rows])
    return StabilityFit(uniq, med_eta, med_err, C, alpha, r2, degenerate, norm, rows)

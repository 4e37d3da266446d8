"""Adaptive Simpson quadrature for scalar, array-valued and batched integrands."""

import numpy as np

from .errors import QuadratureError

MAX_DEPTH = 50


def adaptive_simpson(f, a, b, tol=1e-12, max_depth=MAX_DEPTH):
    """Integrate ``f`` over ``[a, b]`` by recursive adaptive Simpson.

    ``f`` may return a scalar or an ndarray; the error estimate uses the
    max-abs norm of the difference between the coarse and refined panels.
    The tolerance is absolute and split between halves on each refinement.

    Raises
    ------
    QuadratureError
        If some panel still misses its share of ``tol`` at ``max_depth``.
    """
    if a == b:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    # explicit stack instead of recursion: deep refinements stay cheap
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - s
        err = float(np.max(np.abs(delta)))
        if err <= 15.0 * eps:
            total = total + left + right + delta / 15.0
        elif depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson did not converge on [{lo}, {hi}] (error {err:.3e})")
        else:
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
    return total


def batched_simpson(f, t, tol=1e-10, start_panels=16, max_panels=2 ** 16):
    """Integrate ``f(tau)`` over ``[0, t]`` for a whole batch at once.

    ``f`` maps a scalar ``tau`` to an array of integrand values, one per batch
    member.  The composite Simpson rule is refined by panel doubling until every
    member satisfies ``|S_2n - S_n| <= 15 * tol * max(1, |S_2n|)``.  This is the
    globally refined variant of adaptive Simpson, used where a per-point
    recursion would be too slow.
    """
    if t == 0:
        return np.zeros_like(np.asarray(f(0.0), dtype=float))
    m = start_panels
    taus = np.linspace(0.0, t, 2 * m + 1)
    vals = [f(tau) for tau in taus]
    prev = _simpson(vals, t)
    while True:
        m *= 2
        new_taus = np.linspace(0.0, t, 2 * m + 1)[1::2]
        fresh = [f(tau) for tau in new_taus]
        merged = [None] * (2 * m + 1)
        merged[0::2] = vals
        merged[1::2] = fresh
        vals = merged
        cur = _simpson(vals, t)
        if np.all(np.abs(cur - prev) <= 15.0 * tol * np.maximum(1.0, np.abs(cur))):
            return cur + (cur - prev) / 15.0
        if m >= max_panels:
            raise QuadratureError("batched Simpson hit its panel cap")
        prev = cur


def _simpson(vals, t):
    n = len(vals) - 1
    h = t / n
    acc = vals[0] + vals[-1]
    acc = acc + 4.0 * sum(vals[1:-1:2]) + 2.0 * sum(vals[2:-1:2])
    return acc * h / 3.0


def gauss_legendre(n, lo=-1.0, hi=1.0):
    """Gauss-Legendre nodes and weights mapped to ``[lo, hi]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w

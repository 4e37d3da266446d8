"""Command-line driver: ``ou-inverse <subcommand> --config PATH [--set key=value ...]``.

Exit codes: 0 success, 1 numerical non-convergence, 2 configuration error
(including values a library routine rejects),
3 domain or regime refusal.  Errors are reported as one JSON object on stderr.
JSON and CSV outputs print floats with 17 significant digits, so identical
inputs give identical bytes.
"""

import argparse
import csv
import json
import math
import os
import sys
import warnings

import numpy as np

from .config import ExperimentConfig
from .errors import (ConfigError, DegenerateNorm, DomainError, DomainTooSmall,
                     FractionalUnsupported, HurwitzViolation, NonConvergence, OUError,
                     RegimeRefused, ResolutionTooCoarse)

SUBCOMMANDS = ("angle", "propagate", "convexity-check", "thickness-check", "reconstruct",
               "stability-sweep")
REFUSALS = (DomainTooSmall, RegimeRefused, HurwitzViolation, FractionalUnsupported,
            ResolutionTooCoarse, DomainError, DegenerateNorm)


# ----------------------------------------------------------------------------
# deterministic emission
# ----------------------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(obj, depth=0):
    pad = "  " * (depth + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, depth + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * depth + "}"
    if isinstance(obj, list):
        return "[" + ", ".join(_encode(v, depth + 1) for v in obj) + "]"
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _float_text(obj) if math.isfinite(obj) else "null"
    return json.dumps(str(obj))


def _float_text(x):
    # keep a decimal point so integral floats re-parse as floats
    text = format(x, ".17g")
    return text if any(ch in text for ch in ".en") else text + ".0"


def dumps_json(obj):
    """JSON with floats at 17 significant digits; NaN and infinities become null."""
    return _encode(_plain(obj)) + "\n"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps_json(obj))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def loglog_svg(path, etas, errors, fit_C, fit_alpha, width=480, height=360):
    """Static plot of error against ``|log eta|`` with the fitted law."""
    x = np.log10(np.abs(np.log(np.asarray(etas, dtype=float))))
    y = np.log10(np.asarray(errors, dtype=float))
    pad = 50
    xl, xh = float(x.min()), float(x.max())
    yl, yh = float(y.min()), float(y.max())
    xh = xh if xh > xl else xl + 1
    yh = yh if yh > yl else yl + 1

    def px(v):
        return pad + (v - xl) / (xh - xl) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - yl) / (yh - yl) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">'
             'log10 |log eta|</text>',
             f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})"'
             ' text-anchor="middle">log10 error</text>']
    for a, b in zip(x, y):
        parts.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="steelblue"/>')
    if math.isfinite(fit_C) and math.isfinite(fit_alpha):
        xs = np.linspace(xl, xh, 50)
        ys = math.log10(fit_C) - fit_alpha * xs
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="crimson"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

def _initial(cfg, model, grid, seed):
    from .field import sample_admissible
    mode = cfg["run.admissible"]
    if mode == "weighted" and not model.hurwitz:
        mode = "lebesgue"
    return sample_admissible(model, grid, cfg["run.eps"], cfg["run.M"], seed, mode=mode)


def cmd_angle(cfg, out, seed):
    from .matops import lyapunov_residual
    model = cfg.model()
    rep = model.angle
    d = rep.to_dict()
    d["lyapunov_residual"] = lyapunov_residual(model.B, rep.q_inf, model.Q)
    write_json(os.path.join(out, "angle.json"), d)
    return d


def cmd_propagate(cfg, out, seed):
    from .field import norm_l2, write_field, write_field_csv
    from .semigroup import time_series
    model, grid, pc = cfg.model(), cfg.grid(), cfg.propagator_config()
    u0 = _initial(cfg, model, grid, seed)
    times = cfg["run.times"]
    sols = time_series(model, u0, times, pc)
    fmts = cfg["output.formats"]
    tr = float(np.trace(model.B))
    n0 = norm_l2(u0)
    rows = [(0.0, n0, n0)]
    for k, (t, u) in enumerate(zip(times, sols)):
        rows.append((t, norm_l2(u), math.exp(-0.5 * tr * t) * n0))
        if "bin" in fmts:
            write_field(os.path.join(out, f"u_{k:03d}.ouf"), u)
        if "csv" in fmts:
            write_field_csv(os.path.join(out, f"u_{k:03d}.csv"), u)
    if "bin" in fmts:
        write_field(os.path.join(out, "u0.ouf"), u0)
    write_csv(os.path.join(out, "norms.csv"), ["t", "l2_norm", "decay_bound"], rows)
    return {"L": grid.L, "n": grid.n, "times": times, "norms": [r[1] for r in rows[1:]]}


def cmd_convexity(cfg, out, seed):
    from .convexity import (FractionalConvexityChecker, check_logconvexity_analytic,
                            convexity_constant, holder_defaults)
    model, grid, pc = cfg.model(), cfg.grid(), cfg.propagator_config()
    T = cfg["run.T"]
    rep = convexity_constant(model, T, cfg["run.time_samples"], cfg["run.sphere_samples"])
    t_list = [t for t in cfg["run.times"] if t <= T]
    checker = FractionalConvexityChecker(model, grid, T, t_list, pc, c=rep.c,
                                         slack=cfg["run.slack"])
    trials = cfg["run.trials"]
    stack = np.stack([_initial(cfg, model, grid, seed + k).values for k in range(trials)])
    lhs, rhs, ratio = checker.ratios(stack)
    rep.worst_ratio_fractional = float(ratio.max())
    rows = [(k, t, lhs[k, j], rhs[k, j], ratio[k, j])
            for k in range(trials) for j, t in enumerate(t_list)]
    write_csv(os.path.join(out, "trials.csv"), ["trial", "t", "lhs", "rhs", "ratio"], rows)
    d = rep.to_dict()
    d["passed"] = bool(rep.worst_ratio_fractional <= 1.0 + cfg["run.slack"])
    if cfg["run.analytic"] and model.s == 1.0 and model.hurwitz:
        u0 = _initial(cfg, model, grid, seed)
        ac = check_logconvexity_analytic(model, u0, T, t_list, pc)
        rep.k_needed_analytic = ac.k_needed
        d["k_needed_analytic"] = ac.k_needed
        p, g, a = holder_defaults(cfg["run.eps"])
        p = p if cfg["run.p"] == "auto" else cfg["run.p"]
        g = g if cfg["run.gamma"] == "auto" else cfg["run.gamma"]
        d["holder"] = {"p": p, "gamma": g, "alpha": g / p}
    write_json(os.path.join(out, "convexity.json"), d)
    return d


def cmd_thickness(cfg, out, seed):
    from .thickset import build_mask, check_thickness, write_mask
    grid = cfg.grid()
    mask = build_mask(cfg.set_spec(), grid)
    a = cfg["run.a"]
    if len(a) == 1:
        a = a * grid.dim
    tr = cfg["run.translates"] or None
    res = check_thickness(mask, cfg["run.lambda"], a, tr)
    d = {"lambda": cfg["run.lambda"], "a": a, "passed": res.passed,
         "worst_fraction": res.worst_fraction, "slack": res.slack,
         "window_cells": list(res.window_cells), "mask_fraction": mask.fraction,
         "certificate": None if mask.certificate is None else mask.certificate.to_dict()}
    write_json(os.path.join(out, "thickness.json"), d)
    write_mask(os.path.join(out, "mask.msk"), mask)
    return d


def cmd_reconstruct(cfg, out, seed):
    from .field import write_field
    from .inverse import add_noise, forward_observe, tikhonov_reconstruct
    from .thickset import build_mask
    model, grid, pc = cfg.model(), cfg.grid(), cfg.propagator_config()
    mask = build_mask(cfg.set_spec(), grid)
    u0 = _initial(cfg, model, grid, seed)
    data = forward_observe(model, u0, mask, cfg["run.times"], pc)
    data = add_noise(data, cfg["run.noise"], seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergence)
        res = tikhonov_reconstruct(model, data, mask, cfg["run.alpha_reg"], cfg["run.cg_max"],
                                   cfg["run.cg_tol"], pc, truth=u0)
    write_json(os.path.join(out, "reconstruction.json"), res.to_dict())
    write_field(os.path.join(out, "u0_true.ouf"), u0)
    write_field(os.path.join(out, "u0_hat.ouf"), res.u0_hat)
    if not res.converged:
        raise NonConvergenceExit(f"CG did not converge; final relative residual "
                                 f"{res.final_residual:.3e}", res.to_dict())
    return res.to_dict()


def cmd_sweep(cfg, out, seed):
    from .inverse import stability_sweep
    from .thickset import build_mask
    model, grid, pc = cfg.model(), cfg.grid(), cfg.propagator_config()
    mask = build_mask(cfg.set_spec(), grid)
    u0 = _initial(cfg, model, grid, seed)
    times = cfg["run.times"]
    if len(times) == 1:
        T = cfg["run.T"]
        times = list(np.linspace(T / 20, T, 20))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergence)
        fit = stability_sweep(model, mask, u0, cfg["run.noise_levels"], cfg["run.alpha_rule"],
                              cfg["run.seeds"], times, cfg["run.T"], pc, cfg["run.norm"],
                              cfg["run.cg_max"], cfg["run.cg_tol"])
    cols = ["level", "seed", "eta_l2", "eta_h1", "error", "alpha_reg", "cg_iterations"]
    write_csv(os.path.join(out, "sweep.csv"), cols, [[r[c] for c in cols] for r in fit.rows])
    summary = fit.summary()
    summary["degenerate"] = fit.degenerate
    summary["norm"] = fit.norm
    summary["median_errors"] = fit.recon_errors
    summary["median_etas"] = fit.data_norms
    summary["noise_levels"] = fit.noise_levels
    write_json(os.path.join(out, "fit.json"), summary)
    if "svg" in cfg["output.formats"]:
        key = "eta_h1" if fit.norm == "h1" else "eta_l2"
        loglog_svg(os.path.join(out, "sweep.svg"), [r[key] for r in fit.rows],
                   [r["error"] for r in fit.rows], fit.fitted_C, fit.fitted_alpha)
    return summary


COMMANDS = {"angle": cmd_angle, "propagate": cmd_propagate, "convexity-check": cmd_convexity,
            "thickness-check": cmd_thickness, "reconstruct": cmd_reconstruct,
            "stability-sweep": cmd_sweep}


class NonConvergenceExit(Exception):
    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


# ----------------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="ou-inverse", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", metavar="PATH")
    ap.add_argument("--set", metavar="KEY=VALUE", action="append", default=[])
    ap.add_argument("--out", metavar="DIR")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--quiet", action="store_true")
    ap.add_argument("--lambda", dest="lam", type=float, help="thickness-check: lambda")
    ap.add_argument("--a", help="thickness-check: rectangle sides")
    ap.add_argument("--translates", type=int, help="thickness-check: translate count")
    return ap


def _error(kind, message, code, **extra):
    payload = {"error": kind, "message": message, "exit_code": code}
    payload.update(extra)
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    sets = list(args.set)
    if args.lam is not None:
        sets.append(f"run.lambda = {args.lam!r}")
    if args.a is not None:
        sets.append(f"run.a = {args.a}")
    if args.translates is not None:
        sets.append(f"run.translates = {args.translates}")
    if args.out is not None:
        sets.append(f"output.dir = {args.out}")
    if args.seed is not None:
        sets.append(f"run.seed = {args.seed}")
    try:
        cfg = ExperimentConfig.load(args.config, sets)
        out = cfg["output.dir"]
        os.makedirs(out, exist_ok=True)
        result = COMMANDS[args.subcommand](cfg, out, cfg["run.seed"])
    except ConfigError as exc:
        return _error("ConfigError", str(exc), 2, key=exc.key)
    except REFUSALS as exc:
        return _error(type(exc).__name__, str(exc), 3)
    except NonConvergenceExit as exc:
        return _error("NonConvergence", str(exc), 1)
    except OUError as exc:
        return _error(type(exc).__name__, str(exc), 1)
    except ValueError as exc:
        # a library precondition rejected a configured value
        return _error("ConfigError", str(exc), 2, key=None)
    if not args.quiet:
        sys.stdout.write(dumps_json(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())

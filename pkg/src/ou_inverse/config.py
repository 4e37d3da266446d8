"""Flat ``section.key = value`` experiment configuration.

One assignment per line; ``#`` starts a comment; values may be wrapped in
double quotes.  Lists are whitespace or comma separated.  Unknown keys and
missing required keys raise :class:`ConfigError` naming the key.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

REQUIRED = object()


def _floats(text):
    parts = text.replace(",", " ").split()
    if not parts:
        raise ValueError("empty list")
    return [float(p) for p in parts]


def _ints(text):
    return [int(p) for p in text.replace(",", " ").split()]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_or_auto(text):
    return "auto" if text.strip() == "auto" else float(text)


def _strs(text):
    return text.replace(",", " ").split()


def _alpha_rule(text):
    return "discrepancy" if text.strip() == "discrepancy" else float(text)


# key -> (parser, default)
SCHEMA = {
    "model.N": (int, REQUIRED),
    "model.Q": (_floats, REQUIRED),
    "model.B": (_floats, REQUIRED),
    "model.s": (float, 1.0),
    "grid.L": (_float_or_auto, "auto"),
    "grid.n": (int, 256),
    "set.kind": (str, "full"),
    "set.period": (float, 1.0),
    "set.width": (float, 0.5),
    "set.offset": (float, 0.0),
    "set.cell": (float, 1.0),
    "set.p": (float, 1.0),
    "set.seed": (int, 0),
    "set.file": (str, ""),
    "run.T": (float, 1.0),
    "run.times": (_floats, [1.0]),
    "run.noise_levels": (_floats, [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]),
    "run.seeds": (_ints, [0, 1, 2, 3, 4]),
    "run.seed": (int, 0),
    "run.eps": (float, 0.5),
    "run.M": (float, 1.0),
    "run.admissible": (str, "weighted"),
    "run.quad_tol": (float, 1e-10),
    "run.interp": (str, "cubic-spline"),
    "run.kernel_quad_points": (int, 64),
    "run.oversample": (int, 8),
    "run.trials": (int, 100),
    "run.slack": (float, 1e-6),
    "run.time_samples": (int, 512),
    "run.sphere_samples": (int, 256),
    "run.analytic": (_bool, False),
    "run.lambda": (float, 0.5),
    "run.a": (_floats, [1.0]),
    "run.translates": (int, 0),
    "run.alpha_reg": (float, 1e-8),
    "run.alpha_rule": (_alpha_rule, "discrepancy"),
    "run.noise": (float, 0.0),
    "run.cg_max": (int, 500),
    "run.cg_tol": (float, 1e-10),
    "run.norm": (str, "h1"),
    "run.p": (_float_or_auto, "auto"),
    "run.gamma": (_float_or_auto, "auto"),
    "output.dir": (str, "out"),
    "output.formats": (_strs, ["json", "csv", "bin"]),
}


def _render(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, list):
        return " ".join(_render(v) for v in value)
    return str(value)


def parse_lines(lines, source="<config>"):
    """Raw ``{key: text}`` from config lines; later assignments win."""
    raw = {}
    for num, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{source}:{num}: expected key = value")
        key, val = (p.strip() for p in text.split("=", 1))
        if len(val) >= 2 and val[0] == val[-1] == '"':
            val = val[1:-1]
        raw[key] = val
    return raw


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def from_raw(cls, raw):
        vals = {}
        for key in raw:
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}", key)
        for key, (parse, default) in SCHEMA.items():
            if key in raw:
                try:
                    vals[key] = parse(raw[key])
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key!r}: {exc}", key) from None
            elif default is REQUIRED:
                raise ConfigError(f"missing config key {key!r}", key)
            else:
                vals[key] = list(default) if isinstance(default, list) else default
        cfg = cls(vals)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path=None, overrides=()):
        raw = {}
        if path is not None:
            try:
                with open(path) as fh:
                    raw = parse_lines(fh, str(path))
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        raw.update(parse_lines(overrides, "--set"))
        return cls.from_raw(raw)

    def __getitem__(self, key):
        return self.values[key]

    def validate(self):
        N = self["model.N"]
        for key in ("model.Q", "model.B"):
            if len(self[key]) != N * N:
                raise ConfigError(f"{key} needs {N * N} entries, got {len(self[key])}", key)
        if self["run.norm"] not in ("l2", "h1"):
            raise ConfigError("run.norm must be l2 or h1", "run.norm")
        try:
            self.model()
        except ValueError as exc:
            raise ConfigError(f"invalid model: {exc}", "model") from None

    def dumps(self):
        """Canonical text; parsing it back gives an equal config."""
        return "".join(f"{k} = {_render(v)}\n" for k, v in self.values.items())

    # ---- builders -------------------------------------------------------

    def model(self):
        from .matops import OUModel
        N = self["model.N"]
        Q = np.array(self["model.Q"]).reshape(N, N)
        B = np.array(self["model.B"]).reshape(N, N)
        return OUModel(Q, B, self["model.s"])

    def half_width(self):
        from .field import auto_half_width
        L = self["grid.L"]
        return auto_half_width(self.model(), self["run.T"]) if L == "auto" else L

    def grid(self):
        from .field import GridSpec
        try:
            return GridSpec(self["model.N"], self.half_width(), self["grid.n"])
        except ValueError as exc:
            raise ConfigError(f"invalid grid: {exc}", "grid") from None

    def propagator_config(self):
        from .semigroup import PropagatorConfig
        try:
            return PropagatorConfig(self["run.quad_tol"], self["run.interp"],
                                    self["run.kernel_quad_points"], self["run.oversample"])
        except ValueError as exc:
            raise ConfigError(str(exc), "run") from None

    def set_spec(self):
        from .thickset import ThickSetSpec
        custom = None
        if self["set.kind"] == "custom_mask":
            from .thickset import read_mask
            if not self["set.file"]:
                raise ConfigError("missing config key 'set.file'", "set.file")
            custom = read_mask(self["set.file"]).mask
        try:
            return ThickSetSpec(self["set.kind"], self["set.period"], self["set.width"],
                                self["set.offset"], self["set.cell"], self["set.p"],
                                self["set.seed"], custom)
        except ValueError as exc:
            raise ConfigError(str(exc), "set") from None

"""Run configuration: a flat JSON object validated field by field.

Common keys: ``scheme`` (mbo | pde | ondiff), ``N``, ``n``, ``initial_condition``,
``record_every``, optional ``output``, ``seed``, ``render_every``, ``glyph_spacing``
and the analysis toggles ``analyze_interface``, ``analyze_index``, ``analyze_energy``.

Scheme keys:

mbo     ``tau``, ``tol``, ``max_iters``
pde     ``epsilon``, ``dt``, ``t_end``; optional ``reaction``, ``unsafe``, ``allow_coarse_grid``
ondiff  ``dt``, ``t_end``; optional ``project``

Physical parameters have no defaults.
"""
from dataclasses import asdict, dataclass
import json
import math

from .errors import ConfigError

SCHEMES = ("mbo", "pde", "ondiff")
REQUIRED = {
    "mbo": ("tau", "tol", "max_iters"),
    "pde": ("epsilon", "dt", "t_end"),
    "ondiff": ("dt", "t_end"),
}
OPTIONAL = {
    "mbo": (),
    "pde": ("reaction", "unsafe", "allow_coarse_grid"),
    "ondiff": ("project",),
}
COMMON = ("scheme", "N", "n", "initial_condition", "record_every", "output", "seed",
          "render_every", "glyph_spacing", "analyze_interface", "analyze_index", "analyze_energy")


@dataclass
class RunConfig:
    scheme: str
    N: int
    initial_condition: dict
    n: int = 2
    record_every: int = 1
    tau: float | None = None
    tol: float | None = None
    max_iters: int | None = None
    epsilon: float | None = None
    dt: float | None = None
    t_end: float | None = None
    reaction: str = "exact"
    unsafe: bool = False
    allow_coarse_grid: bool = False
    project: bool = False
    output: str | None = None
    seed: int | None = None
    render_every: int = 0
    glyph_spacing: int = 16
    analyze_interface: bool = True
    analyze_index: bool = True
    analyze_energy: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        scheme = d.get("scheme")
        if scheme is None:
            raise ConfigError("scheme", "missing")
        if scheme not in SCHEMES:
            raise ConfigError("scheme", f"must be one of {SCHEMES}, got {scheme!r}")
        allowed = set(COMMON) | set(REQUIRED[scheme]) | set(OPTIONAL[scheme])
        for k in d:
            if k not in allowed:
                raise ConfigError(k, f"unknown or not valid for scheme {scheme!r}")
        for k in ("N", "initial_condition") + REQUIRED[scheme]:
            if k not in d:
                raise ConfigError(k, f"required for scheme {scheme!r}")

        kw = {"scheme": scheme}
        kw["N"] = _pos_int(d, "N")
        if kw["N"] % 2:
            raise ConfigError("N", "must be even")
        kw["n"] = _pos_int(d, "n", 2)
        if not isinstance(d["initial_condition"], dict) or "kind" not in d["initial_condition"]:
            raise ConfigError("initial_condition", "must be an object with a 'kind'")
        kw["initial_condition"] = d["initial_condition"]
        kw["record_every"] = _pos_int(d, "record_every", 1)
        if scheme == "mbo":
            kw["tau"] = _pos_real(d, "tau")
            kw["tol"] = _pos_real(d, "tol")
            kw["max_iters"] = _pos_int(d, "max_iters")
        else:
            kw["dt"] = _pos_real(d, "dt")
            kw["t_end"] = _real(d, "t_end")
            if kw["t_end"] < 0:
                raise ConfigError("t_end", "must be nonnegative")
        if scheme == "pde":
            kw["epsilon"] = _pos_real(d, "epsilon")
            kw["reaction"] = d.get("reaction", "exact")
            if kw["reaction"] not in ("exact", "explicit"):
                raise ConfigError("reaction", "must be 'exact' or 'explicit'")
            kw["unsafe"] = _bool(d, "unsafe", False)
            kw["allow_coarse_grid"] = _bool(d, "allow_coarse_grid", False)
        if scheme == "ondiff":
            kw["project"] = _bool(d, "project", False)
        if "output" in d and d["output"] is not None:
            if not isinstance(d["output"], str):
                raise ConfigError("output", "must be a path string")
            kw["output"] = d["output"]
        if d.get("seed") is not None:
            s = d["seed"]
            if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2 ** 64:
                raise ConfigError("seed", "must be an unsigned 64-bit integer")
            kw["seed"] = s
        kw["render_every"] = _nonneg_int(d, "render_every", 0)
        kw["glyph_spacing"] = _nonneg_int(d, "glyph_spacing", 16)
        for k in ("analyze_interface", "analyze_index", "analyze_energy"):
            kw[k] = _bool(d, k, True)
        return cls(**kw)

    def to_dict(self) -> dict:
        """Fully resolved config: every key relevant to the scheme, defaults filled in."""
        d = asdict(self)
        keep = set(COMMON) | set(REQUIRED[self.scheme]) | set(OPTIONAL[self.scheme])
        return {k: v for k, v in d.items() if k in keep and not (k in ("output", "seed") and v is None)}


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"invalid JSON: {e}") from None
    except OSError as e:
        raise ConfigError("<file>", f"cannot read {path}: {e.strerror}") from None
    return RunConfig.from_dict(d)


def _real(d, k, default=None):
    v = d.get(k, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(k, f"must be a finite number, got {v!r}")
    return float(v)


def _pos_real(d, k, default=None):
    v = _real(d, k, default)
    if v <= 0:
        raise ConfigError(k, f"must be positive, got {v!r}")
    return v


def _int_val(d, k, default):
    v = d.get(k, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v != int(v):
        raise ConfigError(k, f"must be an integer, got {v!r}")
    return int(v)


def _pos_int(d, k, default=None):
    v = _int_val(d, k, default)
    if v < 1:
        raise ConfigError(k, f"must be a positive integer, got {v!r}")
    return v


def _nonneg_int(d, k, default):
    v = _int_val(d, k, default)
    if v < 0:
        raise ConfigError(k, f"must be nonnegative, got {v!r}")
    return v


def _bool(d, k, default):
    v = d.get(k, default)
    if not isinstance(v, bool):
        raise ConfigError(k, f"must be true or false, got {v!r}")
    return v

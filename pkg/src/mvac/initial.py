"""Initial fields from a small closed catalogue of generator specs.

A spec is a dict with a ``kind`` key:

uniform       ``matrix`` (n x n list), or ``phase`` and ``sign`` (+1 rotation, -1 reflection)
rotation      ``eta``: phase spec; ``sign`` optional (-1 gives reflections)
disk_defect   rotation with ``eta`` where r < r0 + amp sin(mode theta), reflection outside
strip_defect  rotation with ``eta_outer`` where |x2| > half_width, reflection with ``eta_inner`` inside
random        independent standard normal entries from ``seed`` (numpy default_rng)

Phase specs (``form`` key), all in radians:

constant      ``value``
linear        2 pi (n1 x1 + n2 x2) + offset
sinusoidal    amp sin(2 pi (k1 x1 + k2 x2) + phase) + 2 pi (n1 x1 + n2 x2) + offset, where
              ``amplitude`` is in radians or ``amplitude_pi`` in units of pi
"""
import numpy as np

from .errors import BadParameter, UnknownGenerator, UnsupportedN
from .field import reflection_field, rotation_field
from .grid import Grid

KINDS = ("uniform", "rotation", "disk_defect", "strip_defect", "random")
PHASE_FORMS = ("constant", "linear", "sinusoidal")


def _num(spec, key, default=None, where="initial_condition"):
    if key not in spec:
        if default is None:
            raise BadParameter(f"{where}.{key} is required")
        return default
    v = spec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise BadParameter(f"{where}.{key} must be a number, got {v!r}")
    v = float(v)
    if not np.isfinite(v):
        raise BadParameter(f"{where}.{key} must be finite")
    return v


def _int(spec, key, default=None, where="initial_condition"):
    v = _num(spec, key, default, where)
    if v != int(v):
        raise BadParameter(f"{where}.{key} must be an integer, got {spec[key]!r}")
    return int(v)


def phase(spec, grid: Grid, where="eta") -> np.ndarray:
    """Evaluate a phase spec at the grid points."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        spec = {"form": "constant", "value": spec}
    if not isinstance(spec, dict):
        raise BadParameter(f"{where} must be a phase spec object")
    x1, x2 = grid.coords
    form = spec.get("form")
    if form == "constant":
        return np.full(x1.shape, _num(spec, "value", where=where))
    lin = 2 * np.pi * (_int(spec, "n1", 0, where) * x1 + _int(spec, "n2", 0, where) * x2)
    lin = lin + _num(spec, "offset", 0.0, where)
    if form == "linear":
        return lin
    if form == "sinusoidal":
        if "amplitude_pi" in spec:
            amp = np.pi * _num(spec, "amplitude_pi", where=where)
        else:
            amp = _num(spec, "amplitude", where=where)
        k1, k2 = _int(spec, "k1", 0, where), _int(spec, "k2", 0, where)
        return lin + amp * np.sin(2 * np.pi * (k1 * x1 + k2 * x2) + _num(spec, "phase", 0.0, where))
    raise UnknownGenerator(f"{where}.form must be one of {PHASE_FORMS}, got {form!r}")


def _sign(spec, key="sign"):
    s = _int(spec, key, 1)
    if s not in (1, -1):
        raise BadParameter(f"initial_condition.{key} must be +1 or -1")
    return s


def _oriented(eta, sign):
    return rotation_field(eta) if sign > 0 else reflection_field(eta)


def generate_initial(spec: dict, N: int, n: int = 2, seed: int | None = None) -> np.ndarray:
    """Build the (N, N, n, n) initial field described by ``spec``.

    ``seed`` overrides ``spec['seed']`` for the random generator.
    """
    if not isinstance(spec, dict):
        raise BadParameter("initial_condition must be an object")
    grid = Grid(N)
    kind = spec.get("kind")
    if kind not in KINDS:
        raise UnknownGenerator(f"initial_condition.kind must be one of {KINDS}, got {kind!r}")

    if kind == "random":
        s = seed if seed is not None else spec.get("seed")
        if s is None or isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2 ** 64:
            raise BadParameter("random generator needs an unsigned 64-bit integer seed")
        return np.random.default_rng(s).standard_normal((N, N, n, n))

    if kind == "uniform" and "matrix" in spec:
        M = np.asarray(spec["matrix"], dtype=float)
        if M.shape != (n, n):
            raise BadParameter(f"initial_condition.matrix must be {n}x{n}")
        return np.broadcast_to(M, (N, N, n, n)).copy()

    if n != 2:
        raise UnsupportedN(f"generator {kind!r} needs n = 2 (got n = {n})")

    if kind == "uniform":
        eta = np.full((N, N), _num(spec, "phase", 0.0))
        return _oriented(eta, _sign(spec))
    if kind == "rotation":
        return _oriented(phase(spec.get("eta"), grid), _sign(spec))

    x1, x2 = grid.coords
    if kind == "disk_defect":
        eta = phase(spec.get("eta", 0.0), grid)
        r0 = _num(spec, "r0")
        amp = _num(spec, "amp", 0.0)
        mode = _int(spec, "mode", 0)
        if r0 <= 0:
            raise BadParameter("initial_condition.r0 must be positive")
        r = np.hypot(x1, x2)
        th = np.arctan2(x2, x1)
        inside = r < r0 + amp * np.sin(mode * th)
        return np.where(inside[..., None, None], rotation_field(eta), reflection_field(eta))

    # strip_defect
    hw = _num(spec, "half_width")
    if not 0 < hw < 0.5:
        raise BadParameter("initial_condition.half_width must lie in (0, 1/2)")
    outer = phase(spec.get("eta_outer"), grid, "eta_outer")
    inner = phase(spec.get("eta_inner"), grid, "eta_inner")
    return np.where((np.abs(x2) > hw)[..., None, None], rotation_field(outer), reflection_field(inner))

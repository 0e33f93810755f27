"""Interfaces between det-positive and det-negative regions.

Curves come from periodic marching squares on the bilinear interpolant of a
scalar field (the det-sign field of an orthogonal field, or det itself for a
diffuse field).  Every curve is oriented with the det-positive side on its
left, so a det-positive disk is traversed counterclockwise; ``normal`` is the
outward normal of the det-positive region and ``kappa = dphi/ds`` (phi the
tangent angle) is positive on a shrinking det-positive disk.

Coordinates are physical (torus [-1/2, 1/2)^2) and unwrapped along each curve;
a curve that winds around the torus closes up to the integer shift ``wrap``.
"""
from dataclasses import dataclass, field
from functools import cached_property
import logging

import numpy as np

from .asymptotics import SURFACE_TENSION
from .errors import BadParameter, CorrespondenceFailure, EmptyInterface
from .field import determinant, orthogonality_defect, wrap_angle
from .grid import grid_of
from .spectral import SpectralWorkspace

log = logging.getLogger(__name__)

MATCH_LIMIT = 5.0      # closest-point matches farther than this many h are rejected
SIGN_SMOOTHING = 1.0   # Gaussian width (in h) applied to two-valued fields before contouring


# -- curve type ---------------------------------------------------------------

@dataclass
class InterfaceCurve:
    vertices: np.ndarray                 # (M, 2) unwrapped physical points, closing vertex not repeated
    wrap: tuple = (0, 0)                 # closing shift: vertex M equals vertex 0 + wrap
    spacing: float = 0.0                 # grid spacing of the source field
    eta_plus: np.ndarray | None = None   # phase sampled on the det-positive side
    eta_minus: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.wrap = tuple(int(w) for w in self.wrap)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise BadParameter("vertices must have shape (M, 2)")

    def __len__(self):
        return len(self.vertices)

    @property
    def closed_vertices(self):
        """Vertices with the closing point (vertex 0 shifted by ``wrap``) appended."""
        return np.vstack([self.vertices, self.vertices[:1] + np.asarray(self.wrap, dtype=float)])

    @property
    def wrapped_vertices(self):
        return np.mod(self.vertices + 0.5, 1.0) - 0.5

    @cached_property
    def segment_lengths(self):
        return np.hypot(*np.diff(self.closed_vertices, axis=0).T)

    @property
    def arclength(self):
        """Cumulative arclength at every vertex, including the closing one."""
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths)])

    @property
    def length(self):
        return float(np.sum(self.segment_lengths))

    @property
    def winds(self):
        return self.wrap != (0, 0)

    def neighbours(self, X=None):
        """Previous and next vertices (periodic along the curve, unwrapped)."""
        X = self.vertices if X is None else X
        shift = np.asarray(self.wrap, dtype=float)
        prev = np.vstack([X[-1:] - shift, X[:-1]])
        nxt = np.vstack([X[1:], X[:1] + shift])
        return prev, nxt

    @cached_property
    def tangent(self):
        prev, nxt = self.neighbours()
        t = nxt - prev
        return t / np.hypot(*t.T)[:, None]

    @property
    def normal(self):
        """Outward unit normal of the det-positive region (right of the direction of travel)."""
        t = self.tangent
        return np.column_stack([t[:, 1], -t[:, 0]])

    @cached_property
    def curvature(self):
        return curvature_of(self)

    def total_turning(self):
        d = np.diff(self.closed_vertices, axis=0)
        phi = np.arctan2(d[:, 1], d[:, 0])
        return float(np.sum(wrap_angle(np.diff(phi, append=phi[:1]))))

    def area(self):
        """Signed shoelace area (positive counterclockwise); NaN for curves that wind."""
        if self.winds:
            return float("nan")
        x, y = self.vertices.T
        return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def centroid(self):
        """Length-weighted centroid, mapped into the torus."""
        X = self.closed_vertices
        mid = 0.5 * (X[1:] + X[:-1])
        c = np.sum(mid * self.segment_lengths[:, None], axis=0) / self.length
        return np.mod(c + 0.5, 1.0) - 0.5

    def mean_radius(self):
        if self.winds:
            return float("nan")
        X = self.closed_vertices
        mid = 0.5 * (X[1:] + X[:-1])
        c = np.sum(mid * self.segment_lengths[:, None], axis=0) / self.length
        return float(np.sum(np.hypot(*(mid - c).T) * self.segment_lengths) / self.length)

    def mean_position(self):
        """Mean x2 for curves winding along x1, mean x1 for curves winding along x2."""
        X = self.closed_vertices
        mid = 0.5 * (X[1:] + X[:-1])
        axis = 1 if self.wrap[0] != 0 else 0
        return float(np.sum(mid[:, axis] * self.segment_lengths) / self.length)


# -- extraction ---------------------------------------------------------------

def majority_filter(sign):
    """One pass of the periodic 3x3 majority vote on a +1/-1 field."""
    s = np.where(np.asarray(sign) > 0, 1.0, -1.0)
    tot = sum(np.roll(np.roll(s, a, axis=0), b, axis=1) for a in (-1, 0, 1) for b in (-1, 0, 1))
    return np.where(tot > 0, 1.0, -1.0)


def _is_two_valued(f):
    return bool(np.all(np.abs(np.abs(f) - 1.0) == 0.0))


def _presmooth(f, width):
    ws = SpectralWorkspace(grid_of(f))
    h = ws.grid.spacing
    return ws.apply(f, ws.heat_multiplier(0.5 * (width * h) ** 2))


def extract_interface(values, denoise: bool = False, smoothing: float | None = SIGN_SMOOTHING):
    """Zero level set of ``values`` (an (N, N) array) as oriented closed curves.

    Two-valued (+1/-1) input optionally gets one majority pass (``denoise``) and is
    then convolved with a Gaussian of width ``smoothing`` grid cells, which turns
    the pixel staircase into a sub-cell accurate contour.  Smooth input is
    contoured as is.  Saddle cells use the average-corner rule.
    """
    f = np.asarray(values, dtype=float)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise BadParameter(f"expected an (N, N) scalar field, got shape {f.shape}")
    pos = f > 0
    if np.all(pos) or not np.any(pos):
        raise EmptyInterface("only one phase present")
    if _is_two_valued(f):
        if denoise:
            f = majority_filter(f)
            pos = f > 0
            if np.all(pos) or not np.any(pos):
                raise EmptyInterface("only one phase present after denoising")
        if smoothing:
            f = _presmooth(f, smoothing)
    f = np.where(f == 0.0, np.finfo(float).tiny, f)
    return _march(f)


def _march(f):
    N = f.shape[0]
    h = 1.0 / N
    g = np.roll(f, -1, axis=0)          # f(i+1, j)
    k = np.roll(f, -1, axis=1)          # f(i, j+1)
    pos = f > 0
    # edge a(i,j): (i,j)-(i+1,j); edge b(i,j): (i,j)-(i,j+1)
    cut_a = pos != (g > 0)
    cut_b = pos != (k > 0)
    ta = np.where(cut_a, f / np.where(cut_a, f - g, 1.0), 0.0)
    tb = np.where(cut_b, f / np.where(cut_b, f - k, 1.0), 0.0)

    def point(key):
        kind, i, j = key
        if kind == 0:
            return np.array([i + ta[i, j], j], dtype=float)
        return np.array([i, j + tb[i, j]], dtype=float)

    # corners of cell (i, j) counterclockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1)
    nxt = {}
    n_saddle = 0
    ci, cj = np.nonzero(cut_a | cut_b | np.roll(cut_a, -1, axis=1) | np.roll(cut_b, -1, axis=0))
    for i, j in zip(ci.tolist(), cj.tolist()):
        i1, j1 = (i + 1) % N, (j + 1) % N
        corner = (pos[i, j], pos[i1, j], pos[i1, j1], pos[i, j1])
        edges = ((0, i, j), (1, i1, j), (0, i, j1), (1, i, j))
        cross = [e for e in range(4) if corner[e] != corner[(e + 1) % 4]]
        if not cross:
            continue
        if len(cross) == 4:
            n_saddle += 1
            centre = 0.25 * (f[i, j] + f[i1, j] + f[i1, j1] + f[i, j1])
            step = 1 if centre > 0 else -1
        else:
            step = 1
        for c, e in enumerate(cross):
            if corner[e] and not corner[(e + 1) % 4]:      # boundary walk leaves the positive set
                end = cross[(c + step) % len(cross)]
                nxt[edges[e]] = edges[end]
    if n_saddle:
        log.info("marching squares: %d saddle cells resolved by the average-corner rule", n_saddle)

    curves = []
    seen = set()
    for start in nxt:
        if start in seen:
            continue
        pts = []
        key = start
        cur = point(key)
        while key not in seen:
            seen.add(key)
            if pts:
                p = point(key)
                p -= N * np.round((p - cur) / N)
                cur = p
            pts.append(cur)
            key = nxt[key]
        if key != start:
            raise RuntimeError("marching squares produced an open chain")
        first = point(start)
        close = first - N * np.round((first - cur) / N)
        wrap = np.round((close - pts[0]) / N).astype(int)
        V = -0.5 + np.array(pts) * h
        curves.append(InterfaceCurve(_dedupe(V, wrap), tuple(wrap), h))
    return curves


def _dedupe(V, wrap, tol=1e-12):
    shift = np.asarray(wrap, dtype=float)
    d = np.hypot(*(np.vstack([V[1:], V[:1] + shift]) - V).T)
    keep = d > tol
    if not np.any(keep):
        return V[:1]
    return V[keep]


# -- curvature ----------------------------------------------------------------

def smooth_vertices(curve: InterfaceCurve) -> np.ndarray:
    """One pass of (x_{i-1} + 2 x_i + x_{i+1}) / 4."""
    prev, nxt = curve.neighbours()
    return 0.25 * (prev + 2 * curve.vertices + nxt)


def resample(curve: InterfaceCurve, ds: float) -> InterfaceCurve:
    """Polyline through points equally spaced in arclength (about ``ds`` apart)."""
    X = curve.closed_vertices
    s = curve.arclength
    L = curve.length
    M = max(8, int(round(L / ds)))
    t = np.linspace(0.0, L, M, endpoint=False)
    Y = np.column_stack([np.interp(t, s, X[:, 0]), np.interp(t, s, X[:, 1])])
    return InterfaceCurve(Y, curve.wrap, curve.spacing)


def curvature_of(curve: InterfaceCurve, ds: float | None = None) -> np.ndarray:
    """Per-vertex curvature by centred differences in arclength after one smoothing pass.

    The curve is first resampled uniformly in arclength with step ``ds``
    (default 2h for grid-derived curves, the mean segment length otherwise);
    marching-squares vertices are unevenly spaced and carry O(h^2 kappa) normal
    errors that a one-cell stencil would amplify to O(kappa).  Values are
    interpolated back to the original vertices.
    """
    if len(curve) < 8:
        raise BadParameter("curvature needs at least 8 vertices")
    if ds is None:
        ds = 2 * curve.spacing if curve.spacing > 0 else curve.length / len(curve)
    u = resample(curve, ds)
    X = smooth_vertices(u)
    prev, nxt = u.neighbours(X)
    step = curve.length / len(u)
    d1 = (nxt - prev) / (2 * step)
    d2 = (nxt - 2 * X + prev) / step ** 2
    speed = np.hypot(*d1.T)
    k = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed ** 3
    t = np.arange(len(u)) * step
    return np.interp(curve.arclength[:-1], t, k, period=curve.length)


# -- sampling and phases ----------------------------------------------------

def sample_bilinear(values, points) -> np.ndarray:
    """Periodic bilinear interpolation of grid data (leading axes (N, N)) at physical points."""
    values = np.asarray(values)
    N = values.shape[0]
    p = (np.asarray(points, dtype=float) + 0.5) * N
    i0 = np.floor(p[:, 0]).astype(int)
    j0 = np.floor(p[:, 1]).astype(int)
    fx = p[:, 0] - i0
    fy = p[:, 1] - j0
    i0 %= N
    j0 %= N
    i1, j1 = (i0 + 1) % N, (j0 + 1) % N
    ex = (slice(None),) + (None,) * (values.ndim - 2)
    fx, fy = fx[ex], fy[ex]
    return ((1 - fx) * (1 - fy) * values[i0, j0] + fx * (1 - fy) * values[i1, j0]
            + (1 - fx) * fy * values[i0, j1] + fx * fy * values[i1, j1])


def default_offset(h: float, epsilon: float | None = None) -> float:
    return max(3 * h, 3 * epsilon) if epsilon else 3 * h


def side_phases(A, curve: InterfaceCurve, delta: float):
    """First-column angle sampled at delta on the det-positive (-n) and det-negative (+n) sides."""
    A = np.asarray(A, dtype=float)
    col = np.stack([A[..., 0, 0], A[..., 1, 0]], axis=-1)
    n = curve.normal
    plus = sample_bilinear(col, curve.vertices - delta * n)
    minus = sample_bilinear(col, curve.vertices + delta * n)
    return np.arctan2(plus[:, 1], plus[:, 0]), np.arctan2(minus[:, 1], minus[:, 0])


def _tangential_derivative(theta, curve):
    s = curve.arclength
    L = curve.length
    s_prev = np.concatenate([[s[-2] - L], s[:-2]])
    s_next = s[1:]
    return wrap_angle(np.roll(theta, -1) - np.roll(theta, 1)) / (s_next - s_prev)


def phase_jump(A, curve: InterfaceCurve, delta: float | None = None, epsilon: float | None = None):
    """Per-vertex (d_s eta_+)^2 - (d_s eta_-)^2, eta_+ on the det-positive side."""
    if delta is None:
        delta = default_offset(curve.spacing or grid_of(A).spacing, epsilon)
    tp, tm = side_phases(A, curve, delta)
    curve.eta_plus, curve.eta_minus = tp, tm
    return _tangential_derivative(tp, curve) ** 2 - _tangential_derivative(tm, curve) ** 2


# -- motion laws ----------------------------------------------------------------

def predict_velocity(curve: InterfaceCurve, jump=None, scale: str = "fast", epsilon: float | None = None,
                     tension: float = SURFACE_TENSION) -> np.ndarray:
    """Predicted normal velocity along ``curve.normal``.

    fast: -kappa.  slow: -kappa - eps * jump / tension, the O(eps) law in the
    original time units (kappa is the total measured curvature).
    """
    kappa = curve.curvature
    if scale == "fast":
        return -kappa
    if scale != "slow":
        raise BadParameter(f"scale must be 'fast' or 'slow', got {scale!r}")
    if jump is None or epsilon is None:
        raise BadParameter("slow scale needs the phase jump and epsilon")
    return -kappa - epsilon * np.asarray(jump, dtype=float) / tension


@dataclass
class MotionSample:
    time: float
    dt: float
    velocity: list                        # per curve: per-vertex measured v.n (NaN where unmatched)
    radius: list = field(default_factory=list)
    position: list = field(default_factory=list)
    predicted: list | None = None

    @property
    def valid(self):
        return [np.isfinite(v) for v in self.velocity]

    def mean_velocity(self):
        v = np.concatenate(self.velocity) if self.velocity else np.array([])
        v = v[np.isfinite(v)]
        return float(np.mean(v)) if v.size else float("nan")


def _closest_on_segments(P, curves):
    """Closest point on any of ``curves`` for every row of P, with periodic wrap."""
    best_d = np.full(len(P), np.inf)
    best_q = np.zeros_like(P)
    for c in curves:
        X = c.closed_vertices
        a, b = X[:-1], X[1:]
        for lo in range(0, len(P), 256):
            p = P[lo:lo + 256, None, :]
            # shift each segment next to the query point
            off = np.round(p - a[None])
            aa = a[None] + off
            bb = b[None] + off
            ab = bb - aa
            t = np.clip(np.sum((p - aa) * ab, axis=-1) / np.maximum(np.sum(ab * ab, axis=-1), 1e-300), 0, 1)
            q = aa + t[..., None] * ab
            d = np.hypot(*(q - p).transpose(2, 0, 1))
            k = np.argmin(d, axis=1)
            rows = np.arange(len(k))
            dk = d[rows, k]
            better = dk < best_d[lo:lo + 256]
            best_d[lo:lo + 256] = np.where(better, dk, best_d[lo:lo + 256])
            best_q[lo:lo + 256] = np.where(better[:, None], q[rows, k], best_q[lo:lo + 256])
    return best_q, best_d


def measure_velocity(curves_a, curves_b, dt: float, time: float = 0.0, spacing: float | None = None):
    """Normal velocity of every vertex of ``curves_a`` from closest points on ``curves_b``.

    Matches farther than MATCH_LIMIT * h are marked NaN.  A change in the number
    of curves raises CorrespondenceFailure.
    """
    if not dt > 0:
        raise BadParameter("dt must be positive")
    if len(curves_a) != len(curves_b):
        raise CorrespondenceFailure(f"curve count changed from {len(curves_a)} to {len(curves_b)}")
    h = spacing or (curves_a[0].spacing if curves_a else 0.0)
    vel = []
    for c in curves_a:
        q, d = _closest_on_segments(c.vertices, curves_b)
        v = np.sum((q - c.vertices) * c.normal, axis=1) / dt
        v[d >= MATCH_LIMIT * h] = np.nan
        vel.append(v)
    return MotionSample(time=time, dt=dt, velocity=vel,
                        radius=[c.mean_radius() for c in curves_a],
                        position=[c.mean_position() if c.winds else c.mean_radius() for c in curves_a])


def _curve_centre(c: InterfaceCurve):
    X = c.closed_vertices
    mid = 0.5 * (X[1:] + X[:-1])
    return np.sum(mid * c.segment_lengths[:, None], axis=0) / c.length


def displacement_velocity(curves_a, curves_b, dt: float):
    """Mean normal velocity of each curve from the shift of its length-weighted centre.

    Meant for rigidly translating interfaces (flat lines) whose per-step motion is
    beyond the closest-point match limit.  Curves are paired by nearest centre on
    the torus along the mean outward normal of the earlier curve, which the shift is projected on.
    """
    if not dt > 0:
        raise BadParameter("dt must be positive")
    if len(curves_a) != len(curves_b):
        raise CorrespondenceFailure(f"curve count changed from {len(curves_a)} to {len(curves_b)}")
    cb = [_curve_centre(c) for c in curves_b]
    out = []
    for c in curves_a:
        ca = _curve_centre(c)
        n = np.mean(c.normal, axis=0)
        if np.hypot(*n) < 0.5:
            raise BadParameter("displacement velocity needs nearly flat curves")
        n /= np.hypot(*n)
        proj = [float(np.dot(d - np.round(d), n)) for d in (x - ca for x in cb)]
        out.append(min(proj, key=abs) / dt)
    return out


# -- global shape measures --------------------------------------------------------

def total_area(curves) -> float:
    """Area enclosed by non-winding curves (positive for det-positive islands)."""
    return float(sum(c.area() for c in curves if not c.winds))


def angular_mode_amplitude(curve: InterfaceCurve, mode: int, samples: int = 2048) -> float:
    """Amplitude of cos/sin(mode * theta) in r(theta) about the centroid (star-shaped curves)."""
    X = curve.closed_vertices
    mid = 0.5 * (X[1:] + X[:-1])
    c = np.sum(mid * curve.segment_lengths[:, None], axis=0) / curve.length
    d = curve.vertices - c
    th = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    r = np.hypot(*d.T)
    if th[-1] < th[0]:
        th, r = th[::-1], r[::-1]
    grid = th[0] + np.linspace(0, 2 * np.pi, samples, endpoint=False)
    rr = np.interp(grid, th, r, period=2 * np.pi)
    coef = np.fft.rfft(rr) / samples
    return float(2 * np.abs(coef[mode]))


def fit_motion_law(velocity, kappa, jump, epsilon: float, tension: float = SURFACE_TENSION):
    """Least-squares v = a * (-kappa) + b * (-eps * jump / tension); returns (a, b, r2)."""
    v = np.asarray(velocity, dtype=float)
    X = np.column_stack([-np.asarray(kappa, dtype=float), -epsilon * np.asarray(jump, dtype=float) / tension])
    ok = np.all(np.isfinite(X), axis=1) & np.isfinite(v)
    coef, *_ = np.linalg.lstsq(X[ok], v[ok], rcond=None)
    resid = v[ok] - X[ok] @ coef
    ss = float(np.sum((v[ok] - v[ok].mean()) ** 2))
    r2 = 1 - float(np.sum(resid ** 2)) / ss if ss > 0 else float("nan")
    return float(coef[0]), float(coef[1]), r2


def sign_field_interfaces(A, **kw):
    """Interfaces of the det-sign field of an (N, N, n, n) field; empty list when one phase is absent."""
    det = determinant(A)
    try:
        return extract_interface(np.sign(det) if _near_orthogonal(A) else det, **kw)
    except EmptyInterface:
        return []


def _near_orthogonal(A, tol=1e-8):
    return float(np.max(orthogonality_defect(A))) <= tol

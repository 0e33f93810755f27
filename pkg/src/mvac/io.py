"""Snapshot files, metrics tables and PPM rasters.

Snapshot layout (all little-endian)::

    magic  4s   b"MVAC"
    version u32
    N      u32
    n      u32
    time   f64
    eps    f64  (NaN for threshold runs)
    scheme u8
    payload N*N*n*n f64, grid points row-major, each matrix row-major
"""
from dataclasses import dataclass, field, fields
import csv
import io as _io
import math
import os
import struct

import numpy as np

from .errors import (BadMagic, BadParameter, HeaderMismatch, TruncatedPayload,
                     UnsupportedN, VersionMismatch)
from .field import determinant

MAGIC = b"MVAC"
VERSION = 1
HEADER = struct.Struct("<4sIIIddB")
SCHEMES = {"init": 0, "mbo": 1, "pde": 2, "ondiff": 3}
SCHEME_NAMES = {v: k for k, v in SCHEMES.items()}

YELLOW = (255, 221, 0)
GREEN = (0, 150, 70)
INK = (20, 20, 20)


@dataclass
class Snapshot:
    field: np.ndarray
    time: float = 0.0
    epsilon: float = float("nan")
    scheme: str = "init"
    version: int = VERSION

    @property
    def N(self):
        return self.field.shape[0]

    @property
    def n(self):
        return self.field.shape[2]

    def same_geometry(self, other):
        return self.field.shape == other.field.shape


def snapshot_bytes(s: Snapshot) -> bytes:
    A = np.asarray(s.field)
    if A.ndim != 4 or A.shape[0] != A.shape[1] or A.shape[2] != A.shape[3]:
        raise BadParameter(f"snapshot field must have shape (N, N, n, n), got {A.shape}")
    if s.scheme not in SCHEMES:
        raise BadParameter(f"unknown scheme tag {s.scheme!r}")
    head = HEADER.pack(MAGIC, s.version, A.shape[0], A.shape[2], float(s.time), float(s.epsilon),
                       SCHEMES[s.scheme])
    return head + np.ascontiguousarray(A, dtype="<f8").tobytes()


def snapshot_from_bytes(buf: bytes) -> Snapshot:
    if len(buf) < HEADER.size:
        raise TruncatedPayload(f"{len(buf)} bytes is shorter than the {HEADER.size}-byte header")
    magic, version, N, n, t, eps, tag = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatch(f"format version {version}, expected {VERSION}")
    if tag not in SCHEME_NAMES:
        raise BadParameter(f"unknown scheme tag {tag}")
    need = N * N * n * n * 8
    body = buf[HEADER.size:]
    if len(body) != need:
        raise TruncatedPayload(f"payload has {len(body)} bytes, header implies {need}")
    A = np.frombuffer(body, dtype="<f8").reshape(N, N, n, n).astype(float)
    return Snapshot(A, t, eps, SCHEME_NAMES[tag], version)


def write_snapshot(path, s: Snapshot):
    data = snapshot_bytes(s)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        return snapshot_from_bytes(fh.read())


def check_geometry(snaps):
    """Raise HeaderMismatch unless all snapshots share N and n."""
    if not snaps:
        return
    ref = snaps[0]
    for s in snaps[1:]:
        if not ref.same_geometry(s):
            raise HeaderMismatch(f"snapshot shape {s.field.shape} differs from {ref.field.shape}")


# -- metrics ------------------------------------------------------------------

NAN = float("nan")


@dataclass
class MetricsRecord:
    step: int
    time: float
    increment: float = NAN
    lyapunov: float = NAN
    dirichlet: float = NAN
    potential: float = NAN
    energy: float = NAN
    interfaces: int = -1          # -1 when not analysed
    index_m: float = NAN          # NaN when the field has both det signs
    index_k: float = NAN
    radii: list = field(default_factory=list)


_INT_FIELDS = {"step", "interfaces"}


def _fmt(v):
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def metrics_csv_text(records) -> str:
    names = [f.name for f in fields(MetricsRecord)]
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(names)
    for r in records:
        if not isinstance(r, MetricsRecord):
            raise BadParameter("metrics rows must be MetricsRecord instances")
        w.writerow([_fmt(getattr(r, k)) for k in names])
    return out.getvalue()


def write_metrics_csv(path, records):
    with open(path, "w", newline="") as fh:
        fh.write(metrics_csv_text(records))


def parse_metrics_csv(text: str):
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        return []
    names = rows[0]
    out = []
    for row in rows[1:]:
        kw = {}
        for k, v in zip(names, row):
            if k == "radii":
                kw[k] = [float(x) for x in v.split(";")] if v else []
            elif k in _INT_FIELDS:
                kw[k] = int(v)
            else:
                kw[k] = float(v)
        out.append(MetricsRecord(**kw))
    return out


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        return parse_metrics_csv(fh.read())


def write_table_csv(path, header, rows):
    """Generic table writer with the same 17-digit float format."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


# -- rasters --------------------------------------------------------------------

def _draw_segment(img, p0, p1, color):
    H, W = img.shape[:2]
    n = int(max(abs(p1[0] - p0[0]), abs(p1[1] - p0[1]))) * 2 + 2
    rr = np.rint(np.linspace(p0[0], p1[0], n)).astype(int)
    cc = np.rint(np.linspace(p0[1], p1[1], n)).astype(int)
    ok = (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W)
    img[rr[ok], cc[ok]] = color


def render_image(A, size=None, glyph_spacing: int | None = 16) -> np.ndarray:
    """RGB raster (H, W, 3) uint8: det sign background and first-column glyphs.

    Columns run along x1 and rows run down in x2 (x2 increases upward).
    ``glyph_spacing=None`` or 0 draws the background only.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 4 or A.shape[-1] != 2 or A.shape[-2] != 2:
        raise UnsupportedN(f"rendering needs n = 2, got shape {A.shape}")
    N = A.shape[0]
    W, H = (N, N) if size is None else (int(size[0]), int(size[1]))
    if W < 1 or H < 1:
        raise BadParameter("raster size must be positive")
    ci = (np.arange(W) * N) // W                    # x1 index per column
    rj = N - 1 - (np.arange(H) * N) // H            # x2 index per row (top row = largest x2)
    det = determinant(A)
    pos = det[np.ix_(ci, rj)].T >= 0                # (H, W)
    img = np.empty((H, W, 3), dtype=np.uint8)
    img[pos] = YELLOW
    img[~pos] = GREEN
    if glyph_spacing:
        g = int(glyph_spacing)
        half = 0.4 * g
        for r in range(g // 2, H, g):
            for c in range(g // 2, W, g):
                a = A[ci[c], rj[r]]
                v = np.array([a[0, 0], a[1, 0]])
                nv = np.hypot(*v)
                if nv == 0:
                    continue
                dr, dc = -v[1] / nv * half, v[0] / nv * half
                tail = (r - dr, c - dc)
                head = (r + dr, c + dc)
                _draw_segment(img, tail, head, INK)
                # arrow head: two short barbs
                for rot in (2.6, -2.6):
                    cr, sr = math.cos(rot), math.sin(rot)
                    br = dr * cr - dc * sr
                    bc = dr * sr + dc * cr
                    _draw_segment(img, head, (head[0] + 0.4 * br, head[1] + 0.4 * bc), INK)
    return img


def ppm_bytes(img: np.ndarray) -> bytes:
    img = np.asarray(img, dtype=np.uint8)
    H, W = img.shape[:2]
    return b"P6\n%d %d\n255\n" % (W, H) + img.tobytes()


def render_ppm(A, size=None, glyph_spacing: int | None = 16) -> bytes:
    return ppm_bytes(render_image(A, size, glyph_spacing))


def write_ppm(path, A, size=None, glyph_spacing: int | None = 16):
    with open(path, "wb") as fh:
        fh.write(render_ppm(A, size, glyph_spacing))


def read_ppm(data: bytes) -> np.ndarray:
    """Parse a binary P6 image written by :func:`ppm_bytes`."""
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise BadMagic("not a P6 image")
    W, H = (int(x) for x in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(H, W, 3)

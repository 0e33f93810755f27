"""Command line driver: ``mvac init | run | analyze | render``.

Exit codes: 0 success, 1 runtime error, 2 configuration error.  Errors are
reported on stderr as one JSON object ``{"error", "message", "field"}``.
"""
import argparse
import glob
import hashlib
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .asymptotics import run_on_diffusion
from .config import RunConfig, load_config
from .errors import (BadParameter, ConfigError, CorrespondenceFailure, MaxItersExceeded, MvacError,
                     UnknownGenerator, UnsupportedN)
from .field import det_sign_field, dirichlet_energy, energy, index_pair, project_to_On
from .initial import generate_initial
from .interface import (displacement_velocity, measure_velocity, phase_jump, predict_velocity,
                        sign_field_interfaces)
from .io import (MetricsRecord, Snapshot, check_geometry, read_snapshot, write_metrics_csv,
                 write_ppm, write_snapshot, write_table_csv)
from .mbo import MboConfig, effective_epsilon, run_mbo
from .pde import PdeConfig, run_pde
from .grid import Grid
from .spectral import SpectralWorkspace

log = logging.getLogger("mvac")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


# -- helpers ------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Outputs:
    """Tracks files written under one output directory for the manifest."""

    def __init__(self, root):
        self.root = root
        self.files = []
        os.makedirs(root, exist_ok=True)

    def path(self, *parts):
        p = os.path.join(self.root, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        self.files.append(os.path.relpath(p, self.root))
        return p

    def manifest(self, extra):
        entries = [{"path": f, "sha256": _sha256(os.path.join(self.root, f))} for f in sorted(set(self.files))]
        doc = dict(extra)
        doc["version"] = __version__
        doc["outputs"] = entries
        with open(os.path.join(self.root, "manifest.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
            fh.write("\n")


def _index_or_nan(A):
    if A.shape[-1] != 2:
        return float("nan"), float("nan")
    try:
        s = det_sign_field(A)
        if not (np.all(s > 0) or np.all(s < 0)):
            return float("nan"), float("nan")
        m, k = index_pair(A)
        return float(m), float(k)
    except MvacError:
        return float("nan"), float("nan")


def field_metrics(A, step, time, *, epsilon=None, increment=float("nan"), lyapunov=float("nan"),
                  interface=True, index=True, with_energy=True):
    """One MetricsRecord for a field, plus its interface curves."""
    rec = MetricsRecord(step=int(step), time=float(time), increment=float(increment), lyapunov=float(lyapunov))
    if with_energy:
        if epsilon is not None and math.isfinite(epsilon):
            rep = energy(A, epsilon)
            rec.dirichlet, rec.potential, rec.energy = rep.dirichlet, rep.potential, rep.total
        else:
            rec.dirichlet = dirichlet_energy(A)
    curves = []
    if interface and A.shape[-1] == 2:
        curves = sign_field_interfaces(A)
        rec.interfaces = len(curves)
        rec.radii = [c.mean_radius() for c in curves]
    if index:
        rec.index_m, rec.index_k = _index_or_nan(A)
    return rec, curves


def _curve_rows(step, time, curves):
    rows = []
    for ci, c in enumerate(curves):
        kappa = c.curvature if len(c) >= 8 else np.array([np.nan])
        rows.append([step, time, ci, len(c), c.length, c.area(), c.mean_radius(),
                     c.mean_position() if c.winds else float("nan"), float(np.mean(kappa)),
                     c.wrap[0], c.wrap[1]])
    return rows


CURVE_HEADER = ["step", "time", "curve", "vertices", "length", "area", "mean_radius", "position",
                "mean_curvature", "wrap_x1", "wrap_x2"]
VELOCITY_HEADER = ["pair", "time", "dt", "curve", "vertex", "x1", "x2", "v_measured", "v_shift", "v_fast",
                   "jump", "v_slow"]


# -- subcommands -----------------------------------------------------------------

def _resolve(args):
    if not args.config:
        raise ConfigError("--config", "a config file is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or cfg.output
    if not out:
        raise ConfigError("output", "no output directory (use --out or 'output')")
    cfg.output = out
    return cfg


def _initial(cfg: RunConfig):
    try:
        return generate_initial(cfg.initial_condition, cfg.N, cfg.n, seed=cfg.seed)
    except (BadParameter, UnknownGenerator, UnsupportedN) as e:
        raise ConfigError("initial_condition", str(e)) from None


def cmd_init(args):
    cfg = _resolve(args)
    A = _initial(cfg)
    out = _Outputs(cfg.output)
    write_snapshot(out.path("initial.mvac"), Snapshot(A, 0.0, float("nan"), "init"))
    if cfg.n == 2:
        write_ppm(out.path("initial.ppm"), A, glyph_spacing=cfg.glyph_spacing)
    out.manifest({"command": "init", "config": cfg.to_dict(), "status": "ok"})
    return EXIT_OK


def cmd_run(args):
    cfg = _resolve(args)
    A0 = _initial(cfg)
    # scheme parameter checks are configuration errors
    try:
        if cfg.scheme == "mbo":
            scheme_cfg = MboConfig(cfg.tau, cfg.tol, cfg.max_iters, cfg.record_every)
        elif cfg.scheme == "pde":
            scheme_cfg = PdeConfig(cfg.epsilon, cfg.dt, cfg.t_end, cfg.record_every, cfg.reaction,
                                   unsafe=cfg.unsafe, allow_coarse_grid=cfg.allow_coarse_grid)
            scheme_cfg.check_resolution(Grid(cfg.N))
        else:
            scheme_cfg = None
    except BadParameter as e:
        raise ConfigError(cfg.scheme, str(e)) from None

    out = _Outputs(cfg.output)
    eps = cfg.epsilon if cfg.scheme == "pde" else float("nan")
    records, curve_rows = [], []
    written = set()
    toggles = dict(interface=cfg.analyze_interface, index=cfg.analyze_index, with_energy=cfg.analyze_energy)

    def emit(step, t, A, **kw):
        if step in written:
            return
        written.add(step)
        write_snapshot(out.path("snapshots", f"snap_{step:06d}.mvac"), Snapshot(A, t, eps, cfg.scheme))
        rec, curves = field_metrics(A, step, t, epsilon=cfg.epsilon if cfg.scheme == "pde" else None,
                                    **kw, **toggles)
        records.append(rec)
        curve_rows.extend(_curve_rows(step, t, curves))
        if cfg.render_every and step % cfg.render_every == 0 and A.shape[-1] == 2:
            write_ppm(out.path("frames", f"frame_{step:06d}.ppm"), A, glyph_spacing=cfg.glyph_spacing)
        if not args.quiet:
            log.info("step %d  t = %.6g", step, t)

    summary = {"command": "run", "config": cfg.to_dict()}
    status = EXIT_OK
    try:
        if cfg.scheme == "mbo":
            A_start = project_to_On(A0)
            ws = SpectralWorkspace(Grid(cfg.N), cfg.tau)

            def cb(s, A, inc, _lyap):
                if s % cfg.record_every == 0:
                    emit(s, s * cfg.tau, A, increment=inc)

            emit(0, 0.0, A_start)
            try:
                traj = run_mbo(A_start, scheme_cfg, ws, callback=cb, keep_snapshots=False)
            except MaxItersExceeded as e:
                traj = e.trajectory
                status = EXIT_RUNTIME
                summary["error"] = str(e)
            last = traj.iterations
            emit(last, last * cfg.tau, traj.final, increment=traj.increments[-1] if traj.increments else float("nan"))
            by_step = {r.step: r for r in records}
            for s, val in enumerate(traj.lyapunov):
                if s in by_step:
                    by_step[s].lyapunov = val
            summary.update(iterations=last, converged=traj.converged)
        elif cfg.scheme == "pde":
            emit(0, 0.0, A0)
            traj = run_pde(A0, scheme_cfg, callback=lambda s, t, A: (s % cfg.record_every == 0) and emit(s, t, A),
                           keep_snapshots=False)
            emit(traj.steps[-1], traj.times[-1], traj.final)
            summary.update(steps=traj.steps[-1], final_energy=traj.energies[-1].total)
        else:
            emit(0, 0.0, A0)
            traj = run_on_diffusion(A0, cfg.dt, cfg.t_end, record_every=cfg.record_every, project=cfg.project,
                                    callback=lambda s, t, A: (s % cfg.record_every == 0) and emit(s, t, A),
                                    keep_snapshots=False)
            emit(traj.steps[-1], traj.times[-1], traj.final)
            summary.update(steps=traj.steps[-1], final_drift=traj.drift[-1])
    finally:
        records.sort(key=lambda r: r.step)
        write_metrics_csv(out.path("metrics.csv"), records)
        if cfg.analyze_interface:
            write_table_csv(out.path("curves.csv"), CURVE_HEADER, sorted(curve_rows, key=lambda r: (r[0], r[2])))
        summary["status"] = "ok" if status == EXIT_OK else "error"
        out.manifest(summary)
    return status


def analyze_snapshots(snaps, epsilon=None, toggles=None):
    """Metrics records, per-curve rows and per-pair velocity rows for time-ordered snapshots."""
    toggles = toggles or {}
    check_geometry(snaps)
    records, curve_rows, vel_rows = [], [], []
    prev = None
    for k, s in enumerate(snaps):
        eps = s.epsilon if math.isfinite(s.epsilon) else epsilon
        rec, curves = field_metrics(s.field, k, s.time, epsilon=s.epsilon if math.isfinite(s.epsilon) else None,
                                    interface=toggles.get("interface", True), index=toggles.get("index", True),
                                    with_energy=toggles.get("energy", True))
        records.append(rec)
        curve_rows.extend(_curve_rows(k, s.time, curves))
        if prev is not None and curves and prev[1]:
            A_prev, c_prev, t_prev = prev
            dt = s.time - t_prev
            try:
                if dt <= 0:
                    raise BadParameter("snapshot times are not increasing")
                ms = measure_velocity(c_prev, curves, dt, time=t_prev)
            except (CorrespondenceFailure, BadParameter) as e:
                log.info("pair %d skipped: %s", k - 1, e)
            else:
                # flat fronts may outrun the closest-point match; their centre shift still gives a speed
                shift = [float("nan")] * len(c_prev)
                if all(c.winds for c in c_prev):
                    try:
                        shift = displacement_velocity(c_prev, curves, dt)
                    except BadParameter as e:
                        log.info("centre-shift speed unavailable: %s", e)
                for ci, (c, v) in enumerate(zip(c_prev, ms.velocity)):
                    fast = predict_velocity(c, scale="fast") if len(c) >= 8 else np.full(len(c), np.nan)
                    jump = np.full(len(c), np.nan)
                    slow = np.full(len(c), np.nan)
                    if eps is not None and math.isfinite(eps) and len(c) >= 8:
                        try:
                            jump = phase_jump(A_prev, c, epsilon=eps)
                            slow = predict_velocity(c, jump, "slow", eps)
                        except MvacError as e:
                            log.info("phase jump unavailable: %s", e)
                    for vi in range(len(c)):
                        x1, x2 = c.wrapped_vertices[vi]
                        vel_rows.append([k - 1, t_prev, dt, ci, vi, x1, x2, v[vi], shift[ci], fast[vi], jump[vi],
                                         slow[vi]])
        prev = (s.field, curves, s.time)
    return records, curve_rows, vel_rows


def cmd_analyze(args):
    paths = []
    for p in args.inputs:
        if os.path.isdir(p):
            paths.extend(sorted(glob.glob(os.path.join(p, "*.mvac"))))
        else:
            paths.append(p)
    if not paths:
        raise ConfigError("inputs", "no snapshot files given")
    snaps = [read_snapshot(p) for p in paths]
    order = np.argsort([s.time for s in snaps], kind="stable")
    snaps = [snaps[i] for i in order]
    eps = None
    toggles = {}
    if args.config:
        cfg = load_config(args.config)
        if cfg.scheme == "mbo":
            eps = effective_epsilon(cfg.tau)
        elif cfg.scheme == "pde":
            eps = cfg.epsilon
        toggles = dict(interface=cfg.analyze_interface, index=cfg.analyze_index, energy=cfg.analyze_energy)
    if not args.out:
        raise ConfigError("--out", "an output directory is required")
    records, curve_rows, vel_rows = analyze_snapshots(snaps, eps, toggles)
    out = _Outputs(args.out)
    write_metrics_csv(out.path("analysis_metrics.csv"), records)
    write_table_csv(out.path("analysis_curves.csv"), CURVE_HEADER, curve_rows)
    write_table_csv(out.path("analysis_velocity.csv"), VELOCITY_HEADER, vel_rows)
    out.manifest({"command": "analyze", "inputs": [os.path.abspath(p) for p in paths], "status": "ok"})
    return EXIT_OK


def cmd_render(args):
    if not args.inputs:
        raise ConfigError("inputs", "no snapshot files given")
    if not args.out:
        raise ConfigError("--out", "an output path is required")
    size = tuple(args.size) if args.size else None
    if len(args.inputs) == 1 and args.out.endswith(".ppm"):
        s = read_snapshot(args.inputs[0])
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        write_ppm(args.out, s.field, size, args.glyph_spacing)
        return EXIT_OK
    os.makedirs(args.out, exist_ok=True)
    for p in args.inputs:
        s = read_snapshot(p)
        name = os.path.splitext(os.path.basename(p))[0] + ".ppm"
        write_ppm(os.path.join(args.out, name), s.field, size, args.glyph_spacing)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (or .ppm file for render)")
    common.add_argument("--seed", type=_u64, help="seed for the random generator")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")

    p = argparse.ArgumentParser(prog="mvac", description="Matrix-valued Allen-Cahn experiments")
    p.add_argument("--version", action="version", version=f"mvac {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("init", parents=[common], help="write the initial field")
    sub.add_parser("run", parents=[common], help="run a scheme and write snapshots and metrics")
    a = sub.add_parser("analyze", parents=[common], help="interface and velocity tables from snapshots")
    a.add_argument("inputs", nargs="+", help="snapshot files or directories")
    r = sub.add_parser("render", parents=[common], help="PPM images of snapshots")
    r.add_argument("inputs", nargs="+", help="snapshot files")
    r.add_argument("--size", type=int, nargs=2, metavar=("W", "H"))
    r.add_argument("--glyph-spacing", type=int, default=16)
    return p


COMMANDS = {"init": cmd_init, "run": cmd_run, "analyze": cmd_analyze, "render": cmd_render}


def _report(exc, field=None):
    doc = {"error": type(exc).__name__, "message": str(exc)}
    if field is not None:
        doc["field"] = field
    sys.stderr.write(json.dumps(doc) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        _report(e, e.field)
        return EXIT_CONFIG
    except (MvacError, OSError, ArithmeticError, ValueError) as e:
        _report(e)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

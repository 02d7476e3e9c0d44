"""Experiment drivers and the ``helmrom`` command-line interface.

``helmrom run`` sweeps a preset problem over a frequency window with the
adaptive solver, builds the requested rational surrogates, and writes the
results as CSV files into an output directory:

``sweep.csv``
    one row per snapshot: ``z, dofs, eta, status, wallclock``
``surrogate_<method>.csv``
    surrogate magnitude on the validation grid and, where a reference
    exists, the relative error: ``z, y_abs, rel_err``
``poles_<method>.csv``
    surrogate poles: ``re, im``
``timings.csv``
    ``phase, seconds`` per pipeline stage

plus a reloadable ``surrogate_<method>.json`` per method.  With a fixed
seed every value column is reproducible bit for bit; only the wallclock
and timing columns vary between runs.

``helmrom validate`` reloads a saved surrogate and tabulates its error
against a reference: the closed-form series of the triangle preset, or a
CSV of reference values (``z, re, im``).

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 insufficient usable snapshots.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, fields

import numpy as np

from . import analytic
from .adaptive import AdaptiveConfig, InsufficientSnapshotsError, sample_sweep
from .fem import (apply_linear_functional, apply_quadratic_functional,
                  load_snapshot)
from .mesh import create_initial_mesh
from .overlay import InnerProductSpec, assemble_gramian, assemble_qoi_gramian
from .problems import BENCHMARKS, get_benchmark
from .rational import (BarycentricRational, PoleEvaluationError,
                       QuadraticSurrogate, TooFewSamplesError, build_mri,
                       build_quadratic_surrogate, build_sri, build_vsri,
                       evaluate, evaluate_quadratic,
                       extract_functional_surrogate, load_surrogate, poles,
                       save_surrogate)

__all__ = ["ConfigError", "ExperimentConfig", "run_experiment",
           "validate_surrogate", "main"]

logger = logging.getLogger(__name__)

_METHODS = ("sri", "vsri", "mri")

# per-preset defaults: sample counts, degrees, windows and solver knobs
_PRESET_DEFAULTS = {
    "triangle": dict(methods=("sri", "mri"), samples=29, degree=14,
                     z_min=1.0, z_max=100.0, theta=0.1, tol_h=5e-2),
    "plate": dict(methods=("vsri", "mri"), samples=29, degree=14,
                  z_min=10.0, z_max=200.0, theta=0.1, tol_h=5e-2),
    "cavity": dict(methods=("vsri", "mri"), samples=19, degree=9,
                   z_min=10.0, z_max=30.0, theta=0.1, tol_h=0.5),
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one experiment run.

    ``degree`` applies to the least-squares methods; ``mri`` always uses
    every sample as a support point (degree ``samples - 1``).
    """

    preset: str
    methods: tuple = ()
    samples: int = 0
    degree: int = 0
    z_min: float = 0.0
    z_max: float = 0.0
    theta: float = 0.1
    tol_h: float = 5e-2
    n_max: int | None = None
    retry: bool = True
    validation_points: int = 500
    out_dir: str = "."
    seed: int = 0

    @classmethod
    def from_mapping(cls, mapping) -> "ExperimentConfig":
        """Build a config from a dict, filling preset defaults."""
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError("unknown config keys: %s" % ", ".join(sorted(unknown)))
        preset = mapping.get("preset")
        if preset not in BENCHMARKS:
            raise ConfigError("preset must be one of %s, got %r"
                              % ("/".join(BENCHMARKS), preset))
        merged = dict(_PRESET_DEFAULTS[preset])
        merged.update({k: v for k, v in mapping.items() if v is not None})
        merged["methods"] = tuple(merged["methods"])
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        methods = tuple(self.methods)
        if not methods:
            raise ConfigError("no surrogate method requested")
        for m in methods:
            if m not in _METHODS:
                raise ConfigError("unknown method %r" % (m,))
        bench = get_benchmark(self.preset)
        if "sri" in methods and bench.output_kind != "linear":
            raise ConfigError(
                "sri fits a scalar linear output; preset %r has a %s output"
                % (self.preset, bench.output_kind))
        if self.samples < 2:
            raise ConfigError("need at least two samples")
        if self.degree < 0:
            raise ConfigError("degree must be nonnegative")
        need_ls = [m for m in methods if m in ("sri", "vsri")]
        if need_ls and self.samples < 2 * self.degree + 1:
            raise ConfigError(
                "%s of degree %d needs at least %d samples, got %d"
                % ("/".join(need_ls), self.degree, 2 * self.degree + 1,
                   self.samples))
        if not self.z_min < self.z_max:
            raise ConfigError("need z_min < z_max")
        if self.validation_points < 2:
            raise ConfigError("validation grid needs at least two points")


def _fmt(x) -> str:
    return format(float(x), ".17e")


def _write_csv(path, header, rows, written) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    written.append(path)


def validation_grid(z_min, z_max, count, train_points, seed) -> np.ndarray:
    """Jittered uniform grid avoiding the training samples.

    The jitter is at most half a grid step, seeded for reproducibility;
    points closer than ``1e-3 (z_max - z_min)`` to a training sample are
    dropped so collocation zeros do not mask the true error level.
    """
    rng = np.random.default_rng(seed)
    base = np.linspace(z_min, z_max, count)
    step = (z_max - z_min) / (count - 1)
    pts = np.clip(base + rng.uniform(-0.5, 0.5, count) * step, z_min, z_max)
    train = np.asarray(train_points, dtype=float)
    keep = np.abs(pts[:, None] - train[None, :]).min(axis=1) \
        >= 1e-3 * (z_max - z_min)
    return pts[keep]


def _evaluate_scalar(surrogate, grid):
    """Magnitudes of a scalar or quadratic surrogate, NaN at poles."""
    out = np.empty(len(grid))
    for idx, z in enumerate(grid):
        try:
            if isinstance(surrogate, QuadraticSurrogate):
                out[idx] = evaluate_quadratic(surrogate, z)
            else:
                out[idx] = abs(evaluate(surrogate, z))
        except PoleEvaluationError:
            out[idx] = np.nan
    return out


def _reference_values(bench, grid):
    """Closed-form reference outputs where available (triangle only)."""
    if bench.name != "triangle":
        return None
    return np.abs([analytic.triangle_exact_qoi(z) for z in grid])


def _build_method(method, bench, usable, degree, timings):
    """Build the scalar output surrogate of one method.

    Returns ``(surrogate, pole_list)`` where the surrogate is either a
    scalar :class:`BarycentricRational` or a :class:`QuadraticSurrogate`.
    """
    curve = bench.output_curve
    quadratic = bench.output_kind == "quadratic"

    t0 = time.perf_counter()
    if method == "sri":
        samples = [(s.z.real, apply_linear_functional(s, curve))
                   for s in usable]
    elif method == "vsri":
        # trace-space Gramian doubles as the quadratic-output Gramian
        gy = assemble_qoi_gramian(usable, curve)
    else:
        gx = assemble_gramian(usable, InnerProductSpec("h1_full"))
        gy = assemble_qoi_gramian(usable, curve) if quadratic else None
    timings.append(("gramian_" + method, time.perf_counter() - t0))

    t0 = time.perf_counter()
    if method == "sri":
        vector = None
        scalar = build_sri(samples, degree)
    else:
        vector = (build_vsri(usable, gy, degree) if method == "vsri"
                  else build_mri(usable, gx))
        if quadratic:
            scalar = build_quadratic_surrogate(vector, gy)
        else:
            scalar = extract_functional_surrogate(vector, curve)
    pole_list = poles(vector if vector is not None else scalar)
    timings.append(("assemble_" + method, time.perf_counter() - t0))
    return scalar, pole_list


def run_experiment(config: ExperimentConfig) -> list:
    """Run one experiment and write its report files.

    Returns the list of written paths.  Any failure removes the files
    written so far and re-raises.
    """
    bench = get_benchmark(config.preset)
    mesh0 = create_initial_mesh(bench.problem.geometry)
    points = np.linspace(config.z_min, config.z_max, config.samples)
    acfg = AdaptiveConfig(theta=config.theta, tol_h=config.tol_h,
                          n_max=config.n_max,
                          retry_factor=10.0 if config.retry else 1.0)
    os.makedirs(config.out_dir, exist_ok=True)
    out = lambda name: os.path.join(config.out_dir, name)

    written = []
    try:
        timings = []
        t0 = time.perf_counter()
        sweep = sample_sweep(mesh0, bench.problem, points, acfg)
        timings.append(("snapshots", time.perf_counter() - t0))

        _write_csv(out("sweep.csv"), ["z", "dofs", "eta", "status", "wallclock"],
                   [[_fmt(s.z.real), s.num_dofs, _fmt(s.estimator), s.status,
                     _fmt(s.history[-1][3] / 1e3)] for s in sweep], written)

        usable = [s for s in sweep if s.status != "discarded"]
        logger.info("%d of %d snapshots usable", len(usable), len(sweep))
        grid = validation_grid(config.z_min, config.z_max,
                               config.validation_points,
                               [s.z.real for s in usable], config.seed)
        y_ref = _reference_values(bench, grid)

        for method in config.methods:
            if method in ("sri", "vsri") \
                    and len(usable) < 2 * config.degree + 1:
                raise InsufficientSnapshotsError(
                    "%s of degree %d needs %d usable snapshots, got %d"
                    % (method, config.degree, 2 * config.degree + 1,
                       len(usable)))
            scalar, pole_list = _build_method(method, bench, usable,
                                              config.degree, timings)

            t0 = time.perf_counter()
            y_abs = _evaluate_scalar(scalar, grid)
            timings.append(("evaluate_" + method, time.perf_counter() - t0))

            rows = []
            for idx, z in enumerate(grid):
                if np.isnan(y_abs[idx]):
                    continue
                err = ("" if y_ref is None
                       else _fmt(abs(y_abs[idx] - y_ref[idx]) / abs(y_ref[idx])))
                rows.append([_fmt(z), _fmt(y_abs[idx]), err])
            _write_csv(out("surrogate_%s.csv" % method),
                       ["z", "y_abs", "rel_err"], rows, written)

            for p in pole_list:
                if abs(p.imag) < 1e-2:
                    logger.info("%s pole %s lies within 1e-2 of the real axis",
                                method, p)
            _write_csv(out("poles_%s.csv" % method), ["re", "im"],
                       [[_fmt(p.real), _fmt(p.imag)] for p in pole_list],
                       written)

            spec = {"sri": None,
                    "vsri": InnerProductSpec("l2_curve", bench.output_curve),
                    "mri": InnerProductSpec("h1_full")}[method]
            save_surrogate(out("surrogate_%s.json" % method), scalar,
                           inner_product=spec)
            written.append(out("surrogate_%s.json" % method))

        _write_csv(out("timings.csv"), ["phase", "seconds"],
                   [[phase, _fmt(sec)] for phase, sec in timings], written)
        return written
    except BaseException:
        for path in written:
            try:
                os.unlink(path)
            except OSError:
                pass
        raise


def _reference_from_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:3]] != ["z", "re", "im"]:
        raise ConfigError("reference CSV must have columns z, re, im")
    data = np.asarray([[float(c) for c in r[:3]] for r in rows[1:]])
    if len(data) == 0:
        raise ConfigError("reference CSV holds no rows")
    return data[:, 0], data[:, 1] + 1j * data[:, 2]


def _reference_from_snapshots(directory, preset):
    """Reference outputs from a directory of saved validation snapshots."""
    if preset is None:
        raise ConfigError("snapshot references need --preset for the "
                          "geometry and output functional")
    bench = get_benchmark(preset)
    paths = sorted(p for p in os.listdir(directory)
                   if p.endswith(".json") and not p.endswith(".mesh.json"))
    if not paths:
        raise ConfigError("no snapshot files in %r" % (directory,))
    zs, ys = [], []
    for name in paths:
        snap = load_snapshot(os.path.join(directory, name),
                             bench.problem.geometry)
        zs.append(snap.z.real)
        if bench.output_kind == "quadratic":
            ys.append(apply_quadratic_functional(snap, bench.output_curve))
        else:
            ys.append(apply_linear_functional(snap, bench.output_curve))
    order = np.argsort(zs)
    return np.asarray(zs)[order], np.asarray(ys, dtype=complex)[order]


def _load_reference(reference, preset):
    """``analytic``, a CSV of values, or a directory of snapshots."""
    if reference == "analytic":
        return "analytic"
    if os.path.isdir(reference):
        csv_path = os.path.join(reference, "reference.csv")
        if os.path.isfile(csv_path):
            return _reference_from_csv(csv_path)
        return _reference_from_snapshots(reference, preset)
    if not os.path.isfile(reference):
        raise ConfigError("reference %r not found" % (reference,))
    return _reference_from_csv(reference)


def validate_surrogate(surrogate_path, reference, out_dir,
                       points: int = 500, seed: int = 0,
                       preset=None) -> list:
    """Tabulate the error of a saved surrogate against a reference.

    ``reference`` is ``"analytic"`` (triangle series), a CSV of reference
    values, or a directory of saved snapshots (which needs ``preset`` to
    recover the geometry and output functional); writes ``errors.csv``
    and ``summary.csv`` quantiles into ``out_dir`` and returns the
    written paths.
    """
    surrogate = load_surrogate(surrogate_path)
    if isinstance(surrogate, BarycentricRational) and not surrogate.is_scalar:
        raise ConfigError("validation needs a scalar or quadratic surrogate")
    ref = _load_reference(reference, preset)
    if ref == "analytic":
        sp = getattr(surrogate, "sample_points", None)
        train = surrogate.supports.real if sp is None else sp.real
        grid = validation_grid(train.min(), train.max(), points, train, seed)
        y_ref = np.asarray([analytic.triangle_exact_qoi(z) for z in grid])
    else:
        grid, y_ref = ref

    y_sur = np.empty(len(grid), dtype=complex)
    for idx, z in enumerate(grid):
        try:
            y_sur[idx] = (evaluate_quadratic(surrogate, z)
                          if isinstance(surrogate, QuadraticSurrogate)
                          else evaluate(surrogate, z))
        except PoleEvaluationError:
            y_sur[idx] = np.nan
    if isinstance(surrogate, QuadraticSurrogate):
        y_ref = np.abs(y_ref)  # quadratic outputs are real magnitudes

    ok = ~np.isnan(y_sur)
    rel = np.abs(y_sur[ok] - y_ref[ok]) / np.abs(y_ref[ok])

    os.makedirs(out_dir, exist_ok=True)
    written = []
    _write_csv(os.path.join(out_dir, "errors.csv"),
               ["z", "y_abs", "ref_abs", "rel_err"],
               [[_fmt(z), _fmt(abs(ys)), _fmt(abs(yr)), _fmt(e)]
                for z, ys, yr, e in zip(grid[ok], y_sur[ok], y_ref[ok], rel)],
               written)
    qs = np.quantile(rel, [0.0, 0.25, 0.5, 0.75, 1.0]) if len(rel) else \
        np.full(5, np.nan)
    _write_csv(os.path.join(out_dir, "summary.csv"), ["quantile", "rel_err"],
               [[q, _fmt(v)] for q, v in
                zip(["min", "q25", "median", "q75", "max"], qs)], written)
    return written


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="helmrom",
        description="Adaptive-FEM rational surrogates for Helmholtz "
                    "frequency responses")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep and build surrogates")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--preset", choices=sorted(BENCHMARKS))
    run.add_argument("--method", action="append", choices=_METHODS,
                     dest="methods", help="may be repeated")
    run.add_argument("--samples", type=int)
    run.add_argument("--degree", type=int)
    run.add_argument("--zmin", type=float, dest="z_min")
    run.add_argument("--zmax", type=float, dest="z_max")
    run.add_argument("--theta", type=float)
    run.add_argument("--tolh", type=float, dest="tol_h")
    run.add_argument("--nmax", type=int, dest="n_max")
    run.add_argument("--no-retry", action="store_true")
    run.add_argument("--points", type=int, dest="validation_points",
                     help="validation grid size")
    run.add_argument("--out", default=None, dest="out_dir")
    run.add_argument("--seed", type=int)

    val = sub.add_parser("validate", help="compare a saved surrogate "
                                          "against a reference")
    val.add_argument("--surrogate", required=True)
    val.add_argument("--reference", required=True,
                     help="'analytic', a CSV of z, re, im values, or a "
                          "directory of saved snapshots")
    val.add_argument("--preset", choices=sorted(BENCHMARKS),
                     help="needed for snapshot references")
    val.add_argument("--points", type=int, default=500)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--out", default=".", dest="out_dir")
    return p


def _run_command(args) -> int:
    mapping = {}
    if args.config:
        try:
            with open(args.config) as fh:
                mapping.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            print("helmrom: cannot read config: %s" % exc, file=sys.stderr)
            return 2
    for key in ("preset", "methods", "samples", "degree", "z_min", "z_max",
                "theta", "tol_h", "n_max", "validation_points", "out_dir",
                "seed"):
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = value
    if args.no_retry:
        mapping["retry"] = False
    try:
        config = ExperimentConfig.from_mapping(mapping)
    except ConfigError as exc:
        print("helmrom: %s" % exc, file=sys.stderr)
        return 2
    try:
        written = run_experiment(config)
    except (InsufficientSnapshotsError, TooFewSamplesError) as exc:
        print("helmrom: %s" % exc, file=sys.stderr)
        return 4
    except ConfigError as exc:
        print("helmrom: %s" % exc, file=sys.stderr)
        return 2
    except Exception as exc:
        print("helmrom: solver failure: %s" % exc, file=sys.stderr)
        return 3
    for path in written:
        print(path)
    return 0


def _validate_command(args) -> int:
    try:
        written = validate_surrogate(args.surrogate, args.reference,
                                     args.out_dir, points=args.points,
                                     seed=args.seed, preset=args.preset)
    except ConfigError as exc:
        print("helmrom: %s" % exc, file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print("helmrom: %s" % exc, file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("HELMROM_LOGLEVEL", "WARNING"))
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _run_command(args)
    return _validate_command(args)


if __name__ == "__main__":
    sys.exit(main())

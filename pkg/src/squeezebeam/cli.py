"""Command-line interface.

Subcommands: run, sweep, moments, estimate.  Exit codes: 0 success,
1 validation error, 2 runtime/numerical error.  SQUEEZEBEAM_WORKERS is the
fallback for --workers.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np
from scipy.constants import hbar as HBAR

from . import __version__
from .config import (ConfigDocument, ConfigError, parse_config, parse_optical_state,
                     serialize, to_scenario, to_sweep_spec)
from .dynamics import NonFiniteFieldError
from .experiment import ScenarioError, ScenarioResult, run_scenario, sweep
from .model import build_model, optimal_pump_rabi_estimate
from .observables import fano, optical_moments
from .svgplot import emit_plot
from .tables import (ResultBundle, Table, densities_table, sweep_table,
                     timeseries_table, write_tables)

VFOCK_FLOOR = 1e-6


def format_vfock(v: float) -> str:
    """Summary formatting; raw values still go to the data files."""
    if v < VFOCK_FLOOR:
        return "<= 1e-06 (floor)"
    return f"{v:.6g}"


def _read_config(path: str) -> ConfigDocument:
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    return parse_config(text)


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("SQUEEZEBEAM_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError([f"SQUEEZEBEAM_WORKERS={env!r} is not an integer"]) from None
    return 1


def _manifest(doc: ConfigDocument, t0: float, diagnostics: dict, error: str | None) -> dict:
    return {
        "tool": "squeezebeam",
        "version": __version__,
        "config": json.loads(serialize(doc)),
        "wall_time_s": time.perf_counter() - t0,
        "diagnostics": diagnostics,
        "error": error,
    }


def _snapshot_residuals(result: ScenarioResult) -> np.ndarray:
    res = result.trajectory.flux_residual
    log_t = result.trajectory.log_t
    out = []
    for t in result.times:
        step = int(round(t / log_t[1])) if len(log_t) > 1 else 0
        idx = min(max(step, 1), len(res)) - 1
        out.append(res[idx] if len(res) else 0.0)
    return np.asarray(out)


def _run_tables(result: ScenarioResult, grid_x: np.ndarray) -> list[Table]:
    stats = result.stats
    return [
        densities_table(grid_x, result.final_atom_density, result.final_photon_density,
                        result.condensate_density),
        timeseries_table(result.times,
                         [s.N_g for s in stats],
                         [s.v_fock for s in stats],
                         [s.v for s in stats],
                         result.attenuation,
                         _snapshot_residuals(result)),
    ]


def cmd_run(args) -> int:
    doc = _read_config(args.config)
    if doc.experiment.mode != "run":
        raise ConfigError([f"experiment.mode is {doc.experiment.mode!r}; use the sweep command"])
    outdir = args.out or doc.output.directory
    t0 = time.perf_counter()
    scenario = to_scenario(doc)
    try:
        result = run_scenario(scenario)
    except (ScenarioError, NonFiniteFieldError) as exc:
        bundle = ResultBundle(manifest=_manifest(doc, t0, {}, str(exc)))
        write_tables(bundle, outdir)
        raise
    model = build_model(doc.physical, doc.grid, doc.detector)
    tables = _run_tables(result, model.grid.x())
    plots = {}
    if args.plots or "svg" in doc.output.formats:
        # photons rescaled to atom-equivalent flux density so the two beams
        # share an axis; condensate in arbitrary units scaled to the atom peak
        stretch = doc.physical.m * doc.physical.c / (HBAR * model.k)
        atom = np.asarray(tables[0].columns[1])
        cond = np.asarray(tables[0].columns[3])
        cond_scale = atom.max() / cond.max() if cond.max() > 0 else 1.0
        plot_tbl = Table("densities",
                         ("x_m", "atom_density", "photon_density_atom_equiv",
                          "condensate_arb"),
                         (tables[0].columns[0], tables[0].columns[1],
                          np.asarray(tables[0].columns[2]) * stretch,
                          cond * cond_scale))
        plots["densities"] = emit_plot(plot_tbl, title="final densities")
        vfock_tbl = Table("vfock", ("t_s", "v_fock"),
                          (tables[1].columns[0], tables[1].columns[2]))
        log_ok = bool(np.any(np.asarray(vfock_tbl.columns[1]) > 0))
        plots["vfock"] = emit_plot(vfock_tbl, log_y=log_ok, title="v_fock vs time")
    bundle = ResultBundle(manifest=_manifest(doc, t0, result.diagnostics, None),
                          tables=tables, plots=plots)
    paths = write_tables(bundle, outdir)
    if not args.quiet:
        vf = result.v_fock
        print(f"scenario {result.label}: final N_g = {result.final_N_g:.6g}, "
              f"min v_fock = {format_vfock(float(vf.min()))}, "
              f"attenuation = {result.attenuation[-1]:.6g}, "
              f"max flux residual = {result.diagnostics['max_flux_residual']:.3g}")
        if result.diagnostics.get("boundary_contact"):
            print("warning: atomic density reached the grid boundary")
        print("wrote: " + ", ".join(paths))
    return 0


def cmd_sweep(args) -> int:
    doc = _read_config(args.config)
    spec = to_sweep_spec(doc)
    outdir = args.out or doc.output.directory
    workers = _workers(args)
    t0 = time.perf_counter()
    try:
        result = sweep(spec, workers=workers)
    except Exception as exc:
        write_tables(ResultBundle(manifest=_manifest(doc, t0, {}, str(exc))), outdir)
        raise
    recs = result.records
    table = sweep_table([r.value for r in recs], [r.min_vfock for r in recs],
                        [r.t_min for r in recs], [r.final_N_g for r in recs],
                        [r.attenuation for r in recs])
    plots = {}
    if args.plots or "svg" in doc.output.formats:
        ok = [r for r in recs if r.error is None]
        if ok:
            plot_tbl = Table("sweep", ("param_value", "min_vfock"),
                             (np.array([r.value for r in ok]),
                              np.array([r.min_vfock for r in ok])))
            plots["sweep"] = emit_plot(plot_tbl, title=f"min v_fock vs {result.parameter}")
    failures = {f"{r.value:g}": r.error for r in recs if r.error is not None}
    diagnostics = {"parameter": result.parameter, "points": len(recs),
                   "failures": failures, "workers": workers}
    bundle = ResultBundle(manifest=_manifest(doc, t0, diagnostics, None),
                          tables=[table], plots=plots)
    paths = write_tables(bundle, outdir)
    if not args.quiet:
        best = result.argmin
        if best is None:
            print("sweep finished with no successful points")
        else:
            print(f"sweep over {result.parameter}: argmin at {best.value:g} with "
                  f"min v_fock = {format_vfock(best.min_vfock)} "
                  f"(t = {best.t_min:.6g} s, attenuation = {best.attenuation:.6g})")
        if failures:
            print(f"{len(failures)} point(s) failed: {sorted(failures)}")
        print("wrote: " + ", ".join(paths))
    return 0


def cmd_moments(args) -> int:
    text = args.state_spec
    if not text.lstrip().startswith("{"):
        try:
            with open(text) as fh:
                text = fh.read()
        except FileNotFoundError:
            raise ConfigError([f"state spec file not found: {args.state_spec}"]) from None
    spec = parse_optical_state(text)
    moments = optical_moments(spec)
    print(f"n_bar    = {moments.n_bar:.12g}")
    print(f"bdag2b2  = {moments.bdag2b2:.12g}")
    if moments.n_bar > 0:
        print(f"fano v0  = {fano(moments):.12g}")
    else:
        print("fano v0  = undefined (vacuum)")
    return 0


def cmd_estimate(args) -> int:
    doc = _read_config(args.config)
    model = build_model(doc.physical, doc.grid, doc.detector)
    det = model.detuning
    est = optimal_pump_rabi_estimate(doc.physical, doc.grid, model.phi0,
                                     kappa_value=model.kappa_value)
    print(f"momentum transfer k   = {model.k:.6g} 1/m")
    print(f"recoil velocity       = {model.v_recoil:.6g} m/s")
    print(f"condensate width      = {model.sigma:.6g} m")
    print(f"T_leave               = {model.t_leave:.6g} s")
    print(f"delta0                = {det.total:.6g} rad/s")
    print(f"  kinetic term        = {det.kinetic:.6g} rad/s")
    print(f"  condensate term     = {det.condensate:.6g} rad/s (subtracted)")
    print(f"  light-shift term    = {det.light_shift:.6g} rad/s (subtracted)")
    print(f"  trap term           = {det.trap:.6g} rad/s (subtracted)")
    print(f"resolved delta        = {model.delta:.6g} rad/s")
    print(f"optimal Omega23 est.  = {est:.6g} rad/s "
          f"({doc.physical.rabi_balance_mode} balance)")
    print(f"kappa calibration     = {model.kappa_value:.6g}"
          + (" (auto)" if doc.physical.kappa == "auto" else ""))
    print(f"probe input amplitude = {model.p_in:.6g} m^-1/2")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squeezebeam",
        description="1-D coupled-mode simulator of squeezed-light atom-laser outcoupling")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--plots", action="store_true", help="emit SVG plots")
        p.add_argument("--workers", type=int, default=None,
                       help="sweep worker processes (default: SQUEEZEBEAM_WORKERS or 1)")
        p.add_argument("--quiet", action="store_true", help="suppress the summary line")

    p_run = sub.add_parser("run", help="run one scenario from a config file")
    p_run.add_argument("config")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    p_sweep.add_argument("config")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_mom = sub.add_parser("moments", help="print number moments of an optical state spec")
    p_mom.add_argument("state_spec", help="JSON file path or inline JSON object")
    p_mom.set_defaults(func=cmd_moments)

    p_est = sub.add_parser("estimate", help="print derived quantities and the coupling estimate")
    p_est.add_argument("config")
    common(p_est)
    p_est.set_defaults(func=cmd_estimate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ScenarioError, NonFiniteFieldError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

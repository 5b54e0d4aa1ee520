"""Command-line entry point.

Exit codes
    0  success
    1  ``rerun --verify`` found differing output digests
    2  usage, configuration or input-format error
    3  model error at runtime
    4  fit failure (flat trace or no convergence)
    5  measured rate change outside the calibrated range
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from . import config as cfgmod
from . import fileio
from . import kinetics as kin
from .errors import ConfigError, FlatTrace, NoConvergence, OutOfRange, ToolkitError
from .inversion import CalibrationCurve, build_calibration, invert_concentration
from .relaxfit import DeltaGamma, FitResult, delta_gamma, fit_decay, synthesize_trace
from .simulate import (PopulationSpec, SweepSpec, draw_sample, histogram, simulate_population,
                       sweep_concentration, time_profile)

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_MODEL, EXIT_FIT, EXIT_RANGE = 0, 1, 2, 3, 4, 5


class UsageError(ConfigError):
    pass


# ---------------------------------------------------------------- command bodies
# Each stochastic command maps (config, options, seed, threads) to
# {file name: text} plus text for standard output.  Nothing touches the
# file system here, which keeps reruns and partial-failure handling simple.

def _population(cfg, opts, seed, threads):
    model = cfg.model()
    spec = PopulationSpec.for_catalyst(
        opts["n"], seed, model, opts["catalyst_m"], mode=opts["mode"],
        photons_per_point=opts["photons_per_point"], n_tau=cfg.simulation["n_tau"],
        tau_span_t1=cfg.simulation["tau_span_t1"],
    )
    records = simulate_population(spec, threads)
    text = fileio.csv_text(fileio.POPULATION_HEADER, fileio.population_rows(records))
    return records, text


def run_simulate_t1(cfg, opts, seed, threads):
    records, text = _population(cfg, opts, seed, threads)
    t1 = np.array([r.t1_before_us for r in records])
    sd = t1.std(ddof=1) if t1.size > 1 else 0.0
    summary = f"particles={len(records)} mean_t1_before_us={t1.mean():.6g} sd_t1_before_us={sd:.6g}\n"
    return {"population.csv": text}, summary


def run_population(cfg, opts, seed, threads):
    records, text = _population(cfg, opts, seed, threads)
    dg = np.array([r.dgamma_per_s for r in records])
    counts, edges = histogram(dg, opts["bins"])
    hist = fileio.csv_text(fileio.HISTOGRAM_HEADER, zip(edges[:-1], edges[1:], counts))
    frac = float(np.mean(dg > 0))
    summary = (f"particles={len(records)} fraction_positive={frac:.4f} "
               f"mean_dgamma_per_s={dg.mean():.6g} median_dgamma_per_s={np.median(dg):.6g}\n")
    return {"population.csv": text, "histogram.csv": hist}, summary


def run_sweep(cfg, opts, seed, threads):
    spec = SweepSpec(tuple(opts["grid_m"]), opts["n_mc"], seed, cfg.model())
    rows = sweep_concentration(spec, "catalyst", threads)
    return {"sweep.csv": fileio.csv_text(fileio.SWEEP_HEADER, fileio.sweep_rows(rows))}, ""


def run_calibrate(cfg, opts, seed, threads):
    curve = build_calibration(cfg.model(), opts["grid_m"], opts["n_mc"], seed, opts["axis"], threads)
    return {"calibration.json": None, "_curve": curve}, ""


def run_profile(cfg, opts, seed, threads):
    model = cfg.model()
    samples = [draw_sample(model, seed, j) for j in range(opts["n_mc"])]
    t = np.linspace(0.0, opts["t_max_s"], opts["n_t"])
    rows = time_profile(model, opts["catalyst_m"], t, samples, opts["baseline"])
    return {"profile.csv": fileio.csv_text(fileio.PROFILE_HEADER, fileio.profile_rows(rows))}, ""


def run_synth(cfg, opts, seed, threads):
    tau = np.linspace(0.0, opts["span_t1"] * opts["t1_us"], opts["n_tau"])
    trace = synthesize_trace(opts["i0"], opts["c"], opts["t1_us"], tau, opts["photons_per_point"], seed)
    return {"trace.csv": fileio.trace_to_csv(trace)}, ""


STOCHASTIC = {
    "simulate-t1": run_simulate_t1,
    "population": run_population,
    "sweep": run_sweep,
    "calibrate": run_calibrate,
    "profile": run_profile,
    "synth": run_synth,
}


def execute(command, cfg, opts, seed, threads=1):
    """Run a stochastic command and return ({file name: text}, stdout text)."""
    outputs, stdout = STOCHASTIC[command](cfg, opts, seed, threads)
    if command == "calibrate":
        curve = outputs.pop("_curve")
        curve.manifest = fileio.build_manifest(__version__, command, opts, seed, cfg.data, {}, {})
        outputs["calibration.json"] = fileio.json_text(curve.to_dict())
    return outputs, stdout


def _manifest(command, cfg, opts, seed, outputs, inputs=None):
    digests = {name: fileio.sha256_bytes(text) for name, text in sorted(outputs.items())}
    return fileio.build_manifest(__version__, command, opts, seed, cfg.data, inputs or {}, digests)


def write_outputs(out_dir, outputs, manifest):
    for name, text in outputs.items():
        fileio.atomic_write(os.path.join(out_dir, name), text)
    fileio.atomic_write(os.path.join(out_dir, "manifest.json"), fileio.json_text(manifest))


# ---------------------------------------------------------------- option resolution

def _command_options(args, cfg):
    sim = cfg.simulation
    c = args.command
    if c in ("simulate-t1", "population"):
        opts = {
            "n": args.n if args.n is not None else sim["n_particles"],
            "mode": args.mode or sim["mode"],
            "catalyst_m": args.catalyst if args.catalyst is not None else cfg.data["kinetics"]["c_cat_m"],
            "photons_per_point": args.photons if args.photons is not None else sim["photons_per_point"],
        }
        if c == "population":
            opts["bins"] = args.bins if args.bins is not None else sim["histogram_bins"]
        return opts
    if c in ("sweep", "calibrate"):
        opts = {"grid_m": [float(x) for x in (args.grid or sim["sweep_grid_m"])],
                "n_mc": args.n_mc if args.n_mc is not None else sim["n_mc"]}
        if c == "calibrate":
            opts["axis"] = args.axis
        return opts
    if c == "profile":
        return {
            "catalyst_m": args.catalyst if args.catalyst is not None else cfg.data["kinetics"]["c_cat_m"],
            "t_max_s": args.t_max if args.t_max is not None else sim["profile_t_max_s"],
            "n_t": args.n_t if args.n_t is not None else sim["profile_n_t"],
            "baseline": args.baseline,
            "n_mc": args.n_mc if args.n_mc is not None else sim["n_mc"],
        }
    if c == "synth":
        return {"i0": args.i0, "c": args.contrast, "t1_us": args.t1, "photons_per_point": args.photons or 1e4,
                "n_tau": args.n_tau, "span_t1": args.span}
    raise UsageError(f"no options for {c}")


# ---------------------------------------------------------------- deterministic commands

def cmd_fit(args):
    traces = [fileio.read_trace_csv(p) for p in args.traces]
    fits = [fit_decay(t, strict=True) for t in traces]
    if len(fits) == 1:
        out = fits[0].to_dict()
    else:
        dg = delta_gamma(fits[0], fits[1])
        out = {"before": fits[0].to_dict(), "after": fits[1].to_dict(), "delta_gamma": dg.to_dict()}
    text = fileio.json_text(out)
    if args.out:
        fileio.atomic_write(os.path.join(args.out, "fit.json"), text)
    sys.stdout.write(text)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _load_fit(path):
    d = _read_json(path)
    try:
        return FitResult.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: not a fit result: {exc}") from exc


def cmd_invert(args):
    try:
        curve = CalibrationCurve.from_dict(_read_json(args.calibration))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.calibration}: invalid calibration file: {exc}") from exc
    if args.fits:
        dg = delta_gamma(_load_fit(args.fits[0]), _load_fit(args.fits[1]))
    elif args.dgamma is not None:
        dg = DeltaGamma(args.dgamma, args.sigma)
    else:
        raise UsageError("invert needs --dgamma or --fits")
    res = invert_concentration(dg, curve, extrapolate=args.extrapolate,
                               subtract_background=args.subtract_background, background=args.background)
    out = {"axis": curve.axis, "dgamma_per_s": dg.value, "uncertainty_per_s": dg.uncertainty, **res.to_dict()}
    sys.stdout.write(fileio.json_text(out))


def cmd_kinetics(args, cfg):
    params = kin.KineticsParams.from_dict(cfg.data["kinetics"])
    temp = args.temp if args.temp is not None else params.temperature_k
    if args.ratio:
        e = params.energies
        rr = kin.rate_ratio(e.dissociation(args.ratio[0]), e.dissociation(args.ratio[1]), temp)
        ratio = "overflow (log form only)" if rr.overflow else f"{rr.value:.4g}"
        sys.stdout.write(f"pathways={args.ratio[0]}->{args.ratio[1]} temperature_k={temp:g} "
                         f"log_ratio={rr.log:.4f} ratio={ratio}\n")
        return
    params = replace(params, temperature_k=temp)
    grid = args.grid or cfgmod.FIG4A_GRID_M
    ss = fileio.csv_text(("c_cat_m", "c_radical_ss_m"),
                         ((c, kin.steady_state_concentration(params.with_catalyst(c))) for c in grid))
    t_max = args.t_max if args.t_max is not None else cfg.simulation["profile_t_max_s"]
    t = np.linspace(0.0, t_max, args.n_t or cfg.simulation["profile_n_t"])
    c_cat = args.catalyst if args.catalyst is not None else params.c_cat_m
    ct = kin.transient_concentration(t, params.with_catalyst(c_cat))
    tr = fileio.csv_text(("t_s", "c_radical_m"), zip(t, np.atleast_1d(ct)))
    if args.out:
        fileio.atomic_write(os.path.join(args.out, "kinetics_ss.csv"), ss)
        fileio.atomic_write(os.path.join(args.out, "kinetics_transient.csv"), tr)
    else:
        sys.stdout.write(ss)
        sys.stdout.write("\n")
        sys.stdout.write(tr)


def cmd_rerun(args):
    manifest = _read_json(args.manifest)
    try:
        command = manifest["command"]
        cfg = cfgmod.RunConfig(cfgmod.resolve(manifest["config"]))
        opts, seed = manifest["options"], manifest["seed"]
    except KeyError as exc:
        raise UsageError(f"{args.manifest}: missing manifest field {exc}") from exc
    if command not in STOCHASTIC:
        raise UsageError(f"cannot rerun command {command!r}")
    outputs, stdout = execute(command, cfg, opts, seed, args.threads)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.manifest))
    new_manifest = _manifest(command, cfg, opts, seed, outputs, manifest.get("inputs"))
    write_outputs(out_dir, outputs, new_manifest)
    sys.stdout.write(stdout)
    if args.verify:
        bad = [n for n, d in new_manifest["outputs"].items() if manifest["outputs"].get(n) != d]
        if bad:
            sys.stderr.write(f"digest mismatch: {', '.join(bad)}\n")
            return EXIT_MISMATCH
        sys.stdout.write("digests match\n")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults are built in)")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads; outputs do not depend on it")

    p = argparse.ArgumentParser(prog="fndrelax", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    for name, help_ in (("simulate-t1", "single-particle T1 population"),
                        ("population", "population rate-change histogram")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--n", type=int)
        s.add_argument("--mode", choices=["analytic", "measurement"])
        s.add_argument("--catalyst", type=float, help="catalyst concentration after the switch [M]")
        s.add_argument("--photons", type=float, help="photons per point in measurement mode")
        if name == "population":
            s.add_argument("--bins", type=int)

    for name in ("sweep", "calibrate"):
        s = sub.add_parser(name, parents=[common], help=f"{name} over catalyst concentrations")
        s.add_argument("--grid", type=float, nargs="+", help="concentration grid [M]")
        s.add_argument("--n-mc", type=int, dest="n_mc")
        if name == "calibrate":
            s.add_argument("--axis", default="catalyst_concentration",
                           choices=["catalyst_concentration", "radical_concentration"])

    s = sub.add_parser("profile", parents=[common], help="rate change versus time")
    s.add_argument("--catalyst", type=float)
    s.add_argument("--t-max", type=float, dest="t_max")
    s.add_argument("--n-t", type=int, dest="n_t")
    s.add_argument("--n-mc", type=int, dest="n_mc")
    s.add_argument("--baseline", choices=["immersed", "milliq"], default="immersed")

    s = sub.add_parser("synth", parents=[common], help="synthesize a shot-noise decay trace")
    s.add_argument("--t1", type=float, default=255.2, help="T1 [us]")
    s.add_argument("--contrast", type=float, default=0.1)
    s.add_argument("--i0", type=float, default=1.0)
    s.add_argument("--photons", type=float, default=1e4)
    s.add_argument("--n-tau", type=int, default=50, dest="n_tau")
    s.add_argument("--span", type=float, default=5.0, help="tau range in units of T1")

    s = sub.add_parser("fit", parents=[common], help="fit one trace, or two for a rate change")
    s.add_argument("traces", nargs="+")

    s = sub.add_parser("kinetics", parents=[common], help="rate ratios and radical concentrations")
    s.add_argument("--ratio", nargs=2, metavar=("FROM", "TO"), choices=list(kin.PATHWAYS))
    s.add_argument("--temp", type=float)
    s.add_argument("--grid", type=float, nargs="+")
    s.add_argument("--catalyst", type=float)
    s.add_argument("--t-max", type=float, dest="t_max")
    s.add_argument("--n-t", type=int, dest="n_t")

    s = sub.add_parser("invert", parents=[common], help="rate change to concentration")
    s.add_argument("calibration")
    s.add_argument("--dgamma", type=float, help="measured rate change [s^-1]")
    s.add_argument("--sigma", type=float, default=0.0)
    s.add_argument("--fits", nargs=2, metavar=("BEFORE", "AFTER"))
    s.add_argument("--extrapolate", action="store_true")
    s.add_argument("--subtract-background", action="store_true", dest="subtract_background")
    s.add_argument("--background", type=float)

    s = sub.add_parser("rerun", parents=[common], help="replay a run manifest")
    s.add_argument("manifest")
    s.add_argument("--verify", action="store_true", help="compare output digests with the manifest")
    return p


def _load_config(args):
    if args.config:
        return cfgmod.load(args.config)
    return cfgmod.RunConfig(cfgmod.resolve())


def run(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    if args.command == "fit":
        cmd_fit(args)
        return EXIT_OK
    if args.command == "invert":
        cmd_invert(args)
        return EXIT_OK
    if args.command == "rerun":
        return cmd_rerun(args)
    cfg = _load_config(args)
    if args.command == "kinetics":
        cmd_kinetics(args, cfg)
        return EXIT_OK
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None:
        raise UsageError(f"{args.command} is stochastic and needs --seed or a config seed")
    if not 0 <= seed < 2 ** 64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    cfg.data["seed"] = seed
    opts = _command_options(args, cfg)
    outputs, stdout = execute(args.command, cfg, opts, seed, args.threads)
    inputs = {args.config: fileio.sha256_file(args.config)} if args.config else {}
    out_dir = args.out or cfg.data.get("output_dir") or "."
    write_outputs(out_dir, outputs, _manifest(args.command, cfg, opts, seed, outputs, inputs))
    sys.stdout.write(stdout)
    return EXIT_OK


def main(argv=None):
    try:
        return run(argv)
    except (ConfigError, fileio.FormatError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (FlatTrace, NoConvergence) as exc:
        sys.stderr.write(f"fit failed: {exc}\n")
        return EXIT_FIT
    except OutOfRange as exc:
        sys.stderr.write(f"out of range: {exc}\n")
        return EXIT_RANGE
    except (ToolkitError, ValueError) as exc:
        sys.stderr.write(f"model error: {exc}\n")
        return EXIT_MODEL
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``measphase <command> [--config FILE] [options]``.

Any output file can be passed back as ``--config``; its embedded echo
reproduces the run.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import io
from .errors import NoTransitionError, NonQuantizedWarning
from .gafit import evolve, genome_pairs, records_from_genome
from .optics import default_delta_grid, fringe_fit, ideal_setup, interference_readout
from .oracles import run_all
from .phase import ProtocolFamily, chi_of_theta, critical_strength
from .scan import chi_curve_vs_alpha, locate_transition, phase_diagram, scan_w0

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _set(raw: dict, path: str, value) -> None:
    node = raw
    keys = path.split(".")
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value


def _common(p: argparse.ArgumentParser, seed_required: bool = False) -> None:
    p.add_argument("--config", help="JSON config, or any output file of a previous run")
    p.add_argument("--output-dir", help="overrides output_dir")
    p.add_argument("--threads", type=int, help="worker cap (overrides threads)")
    p.add_argument("--seed", type=int, required=seed_required, help="overrides seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="measphase", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chi-curve", help="chi(alpha) at one waist")
    _common(p)
    p.add_argument("--w0", type=float, help="waist in mm (overrides optics.w0_mm)")
    p.add_argument("--gamma", type=float, help="residual retardance in rad (overrides optics.gamma_rad)")

    p = sub.add_parser("scan-w0", help="index and minimum contrast over the waist grid, plus the transition")
    _common(p)

    p = sub.add_parser("phase-diagram", help="index on the (w0, gamma) grid")
    _common(p)

    p = sub.add_parser("fit", help="GA fit of per-stage (nu, beta) to an experiment CSV")
    _common(p, seed_required=True)
    p.add_argument("--data", help="CSV with header w0_mm,alpha_rad,chi_rad,contrast[,weight]")
    p.add_argument("--generations", type=int, help="overrides ga.generations")

    p = sub.add_parser("synthesize", help="write experiment-style CSV simulated from the configured stages")
    _common(p)

    p = sub.add_parser("fringe", help="interferometer power vs reference phase and fitted chi")
    _common(p)
    p.add_argument("--w0", type=float, help="waist in mm (overrides optics.w0_mm)")
    p.add_argument("--alpha", type=float, help="plate angle in rad (overrides fringe.alpha_rad)")
    p.add_argument("--noise", type=float, help="additive Gaussian noise std (overrides fringe.noise)")

    p = sub.add_parser("oracle-suite", help="cross-validation batteries; exit 1 on any failure")
    _common(p)
    p.add_argument("--quick", action="store_true", help="fewer random cases")

    p = sub.add_parser("critical-strength", help="qubit-level critical measurement strength")
    _common(p)
    p.add_argument("--n", type=int, help="number of measurements (overrides protocol.n_measurements)")
    p.add_argument("--zeta", type=float, help="also write chi(theta) at this strength")
    return parser


_OVERRIDES = {
    "output_dir": "output_dir",
    "threads": "threads",
    "seed": "seed",
    "w0": "optics.w0_mm",
    "gamma": "optics.gamma_rad",
    "data": "ga.data",
    "generations": "ga.generations",
    "alpha": "fringe.alpha_rad",
    "noise": "fringe.noise",
    "n": "protocol.n_measurements",
    "zeta": "protocol.zeta",
}


def resolve_args(args: argparse.Namespace) -> dict:
    raw = cfgmod.load(args.config) if args.config else {}
    for attr, path in _OVERRIDES.items():
        value = getattr(args, attr, None)
        if value is not None:
            _set(raw, path, value)
    return cfgmod.resolve(raw)


def cmd_chi_curve(raw: dict) -> int:
    run = cfgmod.RunConfig(raw)
    w0 = raw["optics"]["w0_mm"]
    ac = chi_curve_vs_alpha(w0, run.template, run.alpha_grid)
    c = ac.curve
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonQuantizedWarning)
        top = c.topology
    path = io.write_csv(
        run.output_dir / f"chi_curve_w0_{w0:g}mm.csv",
        ("alpha_rad", "chi_rad", "chi_unwrapped_rad", "contrast", "valid", "w0_mm"),
        zip(c.x, c.chi_raw, c.chi_unwrapped, c.contrast, c.valid, np.full(c.x.shape, w0)),
        raw,
    )
    print(f"w0_mm={w0:g} delta_chi={top.delta_chi:.12g} m={top.m} min_contrast={c.min_contrast:.3e} -> {path}")
    return EXIT_OK


def cmd_scan_w0(raw: dict) -> int:
    run = cfgmod.RunConfig(raw)
    rows = scan_w0(run.template, run.scan.w0_values, run.alpha_grid)
    path = io.write_csv(
        run.output_dir / "scan_w0.csv",
        ("w0_mm", "delta_chi_rad", "m", "min_contrast"),
        ((r.w0, r.delta_chi, r.m, r.min_contrast) for r in rows),
        raw,
    )
    print(f"{len(rows)} waists -> {path}")
    try:
        t = locate_transition(run.template, tuple(raw["scan"]["bracket_mm"]), raw["scan"]["tol_mm"], run.alpha_grid)
    except NoTransitionError as exc:
        print(f"no transition: {exc}")
        return EXIT_OK
    payload = {
        "w0_star_mm": t.value,
        "bracket_mm": [t.lo, t.hi],
        "m_lo": t.m_lo,
        "m_hi": t.m_hi,
        "min_contrast": t.min_contrast,
        "alpha_at_min_rad": t.argmin,
    }
    out = io.write_json(run.output_dir / "transition.json", payload, raw)
    print(f"w0*={t.value:.6g} mm (m {t.m_lo}->{t.m_hi}, min contrast {t.min_contrast:.3e}) -> {out}")
    return EXIT_OK


def cmd_phase_diagram(raw: dict) -> int:
    run = cfgmod.RunConfig(raw)
    diagram = phase_diagram(run.scan, run.template, threads=raw["threads"])
    path = io.write_csv(
        run.output_dir / "phase_diagram.csv",
        ("w0_mm", "gamma_rad", "m", "min_contrast", "resolved"),
        diagram.rows(),
        raw,
    )
    print(f"{diagram.m.size} cells, {diagram.trivial_count()} trivial -> {path}")
    return EXIT_OK


def cmd_fit(raw: dict) -> int:
    if "data" not in raw["ga"]:
        print("error: fit needs --data (or ga.data in the config)", file=sys.stderr)
        return EXIT_USAGE
    data = io.read_experiment_csv(raw["ga"]["data"])
    run = cfgmod.RunConfig(raw)
    template = run.template.with_imperfections([(0.0, 0.0)] * run.n_stages)
    weight = raw["ga"]["contrast_weight"]
    result = evolve(run.ga, data, template, workers=raw["threads"], contrast_weight=weight)
    pairs = genome_pairs(result.best)
    payload = {
        "genome": [float(g) for g in result.best],
        "stages": [{"nu_rad": nu, "beta_rad": beta} for nu, beta in pairs],
        "loss": result.best_loss,
        "initial_loss": result.history[0],
        "evaluations": result.evaluations,
    }
    gpath = io.write_json(run.output_dir / "best_genome.json", payload, raw)
    hpath = io.write_csv(
        run.output_dir / "loss_history.csv", ("generation", "best_loss"), enumerate(result.history), raw
    )
    ratio = result.best_loss / result.history[0] if result.history[0] > 0 else 0.0
    print(f"loss {result.history[0]:.6g} -> {result.best_loss:.6g} (ratio {ratio:.3e}) -> {gpath}, {hpath}")
    return EXIT_OK


def cmd_synthesize(raw: dict) -> int:
    run = cfgmod.RunConfig(raw)
    genome = np.array([v for pair in run.imperfections for v in pair])
    template = run.template.with_imperfections([(0.0, 0.0)] * run.n_stages)
    records = records_from_genome(genome, template, run.scan.w0_values, run.alpha_grid)
    path = io.write_experiment_csv(run.output_dir / "experiment.csv", records, raw)
    print(f"{len(records)} records -> {path}")
    return EXIT_OK


def cmd_fringe(raw: dict) -> int:
    run = cfgmod.RunConfig(raw)
    fr = raw["fringe"]
    setup = ideal_setup(fr["alpha_rad"], run.n_stages, run.optics.d_x_mm, run.optics.gamma_rad,
                        [tuple(p) for p in run.imperfections])
    delta = default_delta_grid(fr["points"])
    readout = interference_readout(setup, run.optics, delta)
    power = np.asarray(readout.power, dtype=float)
    if fr["noise"] > 0:
        power = power + np.random.default_rng(raw["seed"]).normal(0.0, fr["noise"], power.shape)
    fit = fringe_fit(delta, power)
    path = io.write_csv(run.output_dir / "fringe.csv", ("delta_rad", "power"), zip(delta, power), raw)
    print(
        f"chi={readout.chi:.12g} contrast={readout.contrast:.6g}; "
        f"fit chi={fit.chi:.12g} contrast={fit.contrast:.6g} -> {path}"
    )
    return EXIT_OK


def cmd_oracle_suite(raw: dict, quick: bool = False) -> int:
    run = cfgmod.RunConfig(raw)
    results = run_all(run.optics, raw["seed"], quick=quick)
    for r in results:
        print(r.line())
    io.write_csv(
        run.output_dir / "oracle_suite.csv",
        ("battery", "passed", "max_residual", "tolerance", "cases"),
        ((r.name, r.passed, r.max_residual, r.tolerance, r.cases) for r in results),
        raw,
    )
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_critical_strength(raw: dict) -> int:
    run = cfgmod.RunConfig(raw)
    pr = raw["protocol"]
    b = critical_strength(pr["n_measurements"], pr["resolution"], pr["theta_points"])
    payload = {
        "n_measurements": pr["n_measurements"],
        "zeta_c": b.value,
        "bracket": [b.lo, b.hi],
        "m_lo": b.m_lo,
        "m_hi": b.m_hi,
        "min_contrast": b.min_contrast,
        "theta_at_min_rad": b.argmin,
    }
    path = io.write_json(run.output_dir / "critical_strength.json", payload, raw)
    print(f"zeta_c={b.value:.9g} in [{b.lo:.9g}, {b.hi:.9g}], min contrast {b.min_contrast:.3e} -> {path}")
    if "zeta" in pr:
        grid = tuple(np.linspace(0.0, np.pi, pr["theta_points"]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonQuantizedWarning)
            points = chi_of_theta(ProtocolFamily(pr["n_measurements"], pr["zeta"], grid))
        cpath = io.write_csv(
            run.output_dir / f"chi_theta_zeta_{pr['zeta']:g}.csv",
            ("theta_rad", "chi_raw", "chi_unwrapped", "contrast", "valid"),
            ((p.theta, p.chi_raw, p.chi_unwrapped, p.contrast, p.valid) for p in points),
            raw,
        )
        print(f"chi(theta) at zeta={pr['zeta']:g} -> {cpath}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = resolve_args(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (cfgmod.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "chi-curve":
            return cmd_chi_curve(raw)
        if args.command == "scan-w0":
            return cmd_scan_w0(raw)
        if args.command == "phase-diagram":
            return cmd_phase_diagram(raw)
        if args.command == "fit":
            return cmd_fit(raw)
        if args.command == "synthesize":
            return cmd_synthesize(raw)
        if args.command == "fringe":
            return cmd_fringe(raw)
        if args.command == "oracle-suite":
            return cmd_oracle_suite(raw, args.quick)
        return cmd_critical_strength(raw)
    except (FileNotFoundError, io.DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

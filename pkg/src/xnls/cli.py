"""Command-line driver.

Verbs: run, sweep-omega, sweep-sigma, sweep-eta, trap, td, lattice,
ground-state, compare.  A config argument may be a file path or the name of
a shipped preset (ex1_omega40, ex1_sweep, ex2_blowup, ex3_trap, ex4_td,
ex5_lattice, ex5_lattice_1d).

Exit codes: 0 ok (including expected blow-up), 2 configuration error,
3 numerical breakdown, 4 unexpected blow-up, 5 suite trend assertion failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import spectral
from .errors import XnlsError
from . import scenarios
from .groundstate import imaginary_time_ground_state
from . import io as run_io

log = logging.getLogger("xnls")


def _add_common(parser: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        parser.add_argument("config", help="scenario file or preset name")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="FFT worker threads")
    parser.add_argument("--log-level", default="info",
                        choices=("debug", "info", "warning", "error"))


def _load(args) -> scenarios.ScenarioConfig:
    cfg = scenarios.load_scenario(scenarios.resolve_config_path(args.config))
    if args.out:
        cfg = replace(cfg, output=replace(cfg.output, directory=args.out))
    return cfg


def _out_dir(cfg) -> Path | None:
    return Path(cfg.output.directory) if cfg.output.directory else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xnls",
        description="Time-splitting spectral solver for nonlinear Schrodinger "
                    "models with rapidly oscillating Coulomb potentials")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run the scenario's model(s)")
    _add_common(p)

    p = sub.add_parser("sweep-omega", help="fast-vs-averaged frequency sweep")
    _add_common(p)
    p.add_argument("--omegas", default=None,
                   help="comma-separated list, default 5,10,20,40")

    p = sub.add_parser("sweep-sigma", help="blow-up ordering across exponents")
    _add_common(p)
    p.add_argument("--sigmas", default=None,
                   help="comma-separated list, default 2,1.5,1,0.75")
    p.add_argument("--omega", type=float, default=None,
                   help="fast-model frequency override")

    p = sub.add_parser("sweep-eta", help="mollification stability sweep")
    _add_common(p)
    p.add_argument("--etas", default=None,
                   help="comma-separated widths, default 4h^2,h^2,h^2/4")

    for verb, helptext in (("trap", "trap + Coulomb scattering scenario"),
                           ("td", "slowly time-dependent drive scenario"),
                           ("lattice", "periodic-lattice scenario")):
        p = sub.add_parser(verb, help=helptext)
        _add_common(p)
        if verb == "lattice":
            p.add_argument("--export-bands", action="store_true",
                           help="write the band table CSV")

    p = sub.add_parser("ground-state", help="prepare and store a ground state")
    _add_common(p)

    p = sub.add_parser("compare", help="distances between two run directories")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.add_argument("--window", type=float, default=None,
                   help="energy averaging window")
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--log-level", default="info",
                   choices=("debug", "info", "warning", "error"))
    return parser


def _csv_floats(text):
    return [float(v) for v in text.split(",")] if text else None


def _dispatch(args) -> int:
    if args.verb == "compare":
        report = scenarios.compare_run_dirs(args.dir_a, args.dir_b,
                                            window=args.window)
        print(f"l2_final={report['l2_final']:.6e}  "
              f"l2_sup={report['l2_sup']:.6e}  "
              f"energy_l1={report['energy_l1']:.6e}")
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            run_io.write_distance_series_csv(out / "distance.csv",
                                             report["times"], report["l2"],
                                             report["rel_l2"])
        return 0

    cfg = _load(args)
    out_dir = _out_dir(cfg)

    if args.verb == "run":
        result = scenarios.run_scenario(cfg, out_dir)
        for label, rec in result.runs.items():
            tail = rec.records[-1]
            flag = (f"  [blow-up at t={rec.blowup.time:.5g}]"
                    if rec.blowup else "")
            print(f"{label}: t={tail.t:g} mass={tail.mass:.9g} "
                  f"E={tail.total:.9g}{flag}")
        return 0

    if args.verb == "sweep-omega":
        report = scenarios.run_convergence_suite(cfg, omegas=_csv_floats(args.omegas),
                                                 out_dir=out_dir)
        print("omega  l2_final      l2_sup        energy_l1     rate")
        for i, w in enumerate(report.omegas):
            rate = f"{report.u_rates[i-1]:.2f}" if i else "-"
            print(f"{w:<6g} {report.l2_final[i]:<13.4e} {report.l2_sup[i]:<13.4e} "
                  f"{report.energy_l1[i]:<13.4e} {rate}")
        print(f"suite: {report.message}")
        return 0 if report.ok else 5

    if args.verb == "sweep-sigma":
        report = scenarios.run_blowup_suite(cfg, sigmas=_csv_floats(args.sigmas),
                                            omega=args.omega, out_dir=out_dir)
        for label, t in sorted(report.blowup_times.items()):
            print(f"{label}: " + (f"blow-up at t={t:.5g}" if t is not None
                                  else "no blow-up"))
        print(f"suite: {report.message}")
        return 0 if report.ok else 5

    if args.verb == "sweep-eta":
        report = scenarios.run_stability_sweep(cfg, etas=_csv_floats(args.etas),
                                               out_dir=out_dir)
        for i, (d, s) in enumerate(zip(report.pair_distances,
                                       report.potential_sup_diffs)):
            print(f"eta {report.etas[i]:.4g} -> {report.etas[i+1]:.4g}: "
                  f"|du|_L2={d:.4e}  |dV|_sup={s:.4e}")
        print(f"suite: {report.message}")
        return 0 if report.ok else 5

    if args.verb == "trap":
        result = scenarios.run_trap_scenario(cfg, out_dir)
        moved = result.extras.get("max_centroid_displacement")
        if moved is not None:
            print(f"max centroid displacement: {moved:.4g}")
        return 0

    if args.verb == "td":
        result = scenarios.run_td_scenario(cfg, out_dir)
        dist = result.extras.get("distance")
        if dist is not None:
            print(f"fast-vs-averaged: l2_final={dist.l2_final:.4e} "
                  f"l2_sup={dist.l2_sup:.4e} energy_l1={dist.energy_l1:.4e}")
        return 0

    if args.verb == "lattice":
        report = scenarios.run_lattice_scenario(cfg, out_dir)
        if args.export_bands and out_dir is not None:
            from .bloch import build_band_table, write_band_csv
            lattice = [m for m in cfg.potential.members()
                       if m.kind in ("lattice", "averaged_lattice")][0]
            table = build_band_table(cfg.grid, lattice.lattice_freqs)
            write_band_csv(table, out_dir / "bands.csv")
        if report.coarse_plain_error is not None:
            print(f"coarse plain error:      {report.coarse_plain_error:.4e}")
            print(f"coarse band-basis error: {report.coarse_bloch_error:.4e}")
            print(f"comparison: {report.message}")
            return 0 if report.ok else 5
        return 0

    if args.verb == "ground-state":
        gs_cfg = replace(cfg.evolution_config("averaged"),
                         sigma=cfg.initial.gs_sigma)
        result = imaginary_time_ground_state(
            cfg.grid, gs_cfg, target_mass=cfg.initial.target_mass,
            tol=cfg.initial.gs_tol, tau=cfg.initial.gs_tau,
            max_iter=cfg.initial.gs_max_iter)
        print(f"energy={result.energy:.10g} mu={result.chemical_potential:.10g} "
              f"residual={result.residual:.3e} iterations={result.iterations}")
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            run_io.write_field_slice(out_dir / "ground_state", cfg.grid,
                                     result.field, 0.0, full_volume=True)
            print(f"wrote {out_dir / 'ground_state.bin'}")
        return 0

    raise AssertionError(f"unhandled verb {args.verb}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    spectral.FFT_WORKERS = max(1, args.threads)
    try:
        return _dispatch(args)
    except XnlsError as exc:
        log.error("%s", exc)
        return getattr(exc, "exit_code", 1)


if __name__ == "__main__":
    sys.exit(main())

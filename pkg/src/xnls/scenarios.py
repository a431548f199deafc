"""Scenario configuration, experiment drivers, and file output.

A scenario file is a nested key-value (YAML) document declaring the grid,
the model(s) to run, the potential family, nonlinearity constants, the
initial datum, and the evolution parameters.  The potential family may be
written in fast or averaged form; each model run converts it to the form it
needs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, SuiteFailure, UnexpectedBlowupError
from .grid import Grid
from . import io as run_io
from . import spectral
from .diagnostics import (DistanceReport, RunRecord, convergence_rates,
                          run_distance)
from .groundstate import imaginary_time_ground_state
from .potentials import (PotentialSpec, ShiftSpec, averaged_counterpart,
                         fast_counterpart)
from .propagator import EvolutionConfig, evolve

log = logging.getLogger(__name__)

MODELS = ("fast", "averaged", "both")
DEFAULT_SWEEP_OMEGAS = (5.0, 10.0, 20.0, 40.0)
DEFAULT_BLOWUP_SIGMAS = (2.0, 1.5, 1.0, 0.75)


@dataclass(frozen=True)
class InitialSpec:
    type: str = "gaussian"              # gaussian | ground_state | file
    center: tuple[float, ...] = (0.0, 0.0, 0.0)
    width: float = 0.35355339059327373  # exp(-|x|^2/(2 w^2)) == exp(-4|x|^2)
    wavevector: tuple[float, ...] = (0.0, 0.0, 0.0)
    target_mass: float = 1.0
    gs_sigma: float = 2.0 / 3.0
    gs_tol: float = 1e-8
    gs_tau: float = 1e-3
    gs_max_iter: int = 100_000
    path: str = ""

    def __post_init__(self):
        if self.type not in ("gaussian", "ground_state", "file"):
            raise ConfigError(f"unknown initial datum type {self.type!r}")
        if self.type == "gaussian" and not self.width > 0:
            raise ConfigError("gaussian width must be positive")
        if self.type == "file" and not self.path:
            raise ConfigError("file initial datum needs a path")


@dataclass(frozen=True)
class EvolutionBlock:
    dt: float = 1e-3
    t_end: float = 1.0
    splitting: str = "strang"
    step_mode: str = "plain_spectral"
    n_sub: int = 8
    n_quad: int = 64
    snapshot_stride: int = 100
    window: float = 0.1


@dataclass(frozen=True)
class BlowupBlock:
    expected: bool = False
    factor: float = 50.0
    growth_window: float = 0.0


@dataclass(frozen=True)
class OutputBlock:
    directory: str = ""
    full_volume: bool = False
    write_initial_slice: bool = False


@dataclass(frozen=True)
class LatticeBlock:
    omegas: tuple[float, ...] = (80.0, 160.0)
    compare: bool = False
    fine_factor: int = 8
    dt_refine: int = 4
    compare_t_end: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    grid: Grid
    model: str
    potential: PotentialSpec | None
    a: float
    sigma: float
    C1: float
    c: float
    initial: InitialSpec
    evolution: EvolutionBlock
    sweep_omegas: tuple[float, ...] | None = None
    blowup: BlowupBlock = BlowupBlock()
    output: OutputBlock = OutputBlock()
    lattice: LatticeBlock = LatticeBlock()
    double_c_energy: bool = False
    hartree_convention: str = "continuum"

    def fast_potential(self) -> PotentialSpec | None:
        return None if self.potential is None else fast_counterpart(self.potential)

    def averaged_potential(self) -> PotentialSpec | None:
        return None if self.potential is None else averaged_counterpart(self.potential)

    def evolution_config(self, model: str, omega: float | None = None,
                         dt: float | None = None, t_end: float | None = None,
                         sigma: float | None = None,
                         grid: Grid | None = None,
                         step_mode: str | None = None) -> EvolutionConfig:
        if model == "fast":
            pot = self.fast_potential()
            if omega is not None and pot is not None:
                pot = pot.with_omega(omega)
        elif model == "averaged":
            pot = self.averaged_potential()
        else:
            raise ConfigError(f"evolution config needs a single model, got {model!r}")
        ev = self.evolution
        return EvolutionConfig(
            dt=ev.dt if dt is None else dt,
            t_end=ev.t_end if t_end is None else t_end,
            splitting=ev.splitting,
            a=self.a, sigma=self.sigma if sigma is None else sigma, C1=self.C1,
            potential=pot,
            step_mode=ev.step_mode if step_mode is None else step_mode,
            n_sub=ev.n_sub, n_quad=ev.n_quad,
            snapshot_stride=ev.snapshot_stride,
            double_c_energy=self.double_c_energy,
            hartree_convention=self.hartree_convention,
            blowup_factor=self.blowup.factor,
            blowup_growth_window=self.blowup.growth_window,
        )


# ---------------------------------------------------------------------------
# parsing


def _floats(value, n=None) -> tuple[float, ...]:
    if isinstance(value, (int, float, str)):
        value = [value]
    out = tuple(float(v) for v in value)
    if n is not None and len(out) == 1:
        out = out * n
    return out


def _parse_shift(block) -> ShiftSpec:
    block = block or {}
    return ShiftSpec(e0=_floats(block.get("e0", (0.0, 0.0, 0.0))),
                     omega=float(block.get("omega", 0.0)),
                     e_law=str(block.get("e_law", "constant")))


def _parse_potential(block, c_default: float) -> PotentialSpec | None:
    if block is None:
        return None
    kind = str(block.get("kind", ""))
    if kind == "composite":
        children = tuple(_parse_potential(ch, c_default)
                         for ch in block.get("children", ()))
        return PotentialSpec(kind="composite", children=children)
    spec = PotentialSpec(
        kind=kind,
        c=float(block.get("c", c_default)),
        shift=_parse_shift(block.get("shift")),
        eta=None if block.get("eta") is None else float(block["eta"]),
        trap_strength=float(block.get("trap_strength", 0.0)),
        lattice_freqs=_floats(block.get("lattice_freqs", ()), None)
        if block.get("lattice_freqs") is not None else (),
    )
    return spec


def _shift_dict(s: ShiftSpec) -> dict:
    return {"e0": list(s.e0), "omega": s.omega, "e_law": s.e_law}


def _potential_dict(p: PotentialSpec | None):
    if p is None:
        return None
    if p.kind == "composite":
        return {"kind": "composite",
                "children": [_potential_dict(ch) for ch in p.children]}
    out = {"kind": p.kind, "shift": _shift_dict(p.shift), "eta": p.eta}
    if p.kind in ("fast_coulomb", "averaged_coulomb"):
        out["c"] = p.c
    if p.kind in ("trap", "averaged_trap"):
        out["trap_strength"] = p.trap_strength
    if p.kind in ("lattice", "averaged_lattice"):
        out["lattice_freqs"] = list(p.lattice_freqs)
    return out


def parse_scenario(data: dict, name: str = "scenario") -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario file must hold a mapping")
    try:
        grid_block = data.get("grid", {})
        dim = int(grid_block.get("dim", 3))
        lengths = _floats(grid_block.get("lengths", grid_block.get("length", 16.0)), dim)
        counts = tuple(int(v) for v in
                       (grid_block["counts"] if "counts" in grid_block
                        else [grid_block.get("n", 64)] * dim))
        if len(counts) == 1:
            counts = counts * dim
        grid = Grid(lengths=lengths, counts=counts,
                    epsilon=float(grid_block.get("epsilon", 1.0)))

        model = str(data.get("model", "averaged"))
        if model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {model!r}")

        nl = data.get("nonlinearity", {}) or {}
        a = float(nl.get("a", 0.0))
        sigma = float(nl.get("sigma", 2.0 / 3.0))
        C1 = float(nl.get("C1", 0.0))
        c = float(nl.get("c", 0.0))
        hartree_convention = str(nl.get("hartree_convention", "continuum"))
        if sigma <= 0:
            raise ConfigError(f"nonlinearity exponent must be positive, got {sigma}")

        potential = _parse_potential(data.get("potential"), c)

        ini = data.get("initial", {}) or {}
        initial = InitialSpec(
            type=str(ini.get("type", "gaussian")),
            center=_floats(ini.get("center", (0.0,) * dim), dim),
            width=float(ini.get("width", InitialSpec.width)),
            wavevector=_floats(ini.get("wavevector", (0.0,) * dim), dim),
            target_mass=float(ini.get("target_mass", 1.0)),
            gs_sigma=float(ini.get("sigma", 2.0 / 3.0)),
            gs_tol=float(ini.get("tol", 1e-8)),
            gs_tau=float(ini.get("tau", 1e-3)),
            gs_max_iter=int(ini.get("max_iter", 100_000)),
            path=str(ini.get("path", "")),
        )

        ev = data.get("evolution", {}) or {}
        evolution = EvolutionBlock(
            dt=float(ev.get("dt", 1e-3)), t_end=float(ev.get("t_end", 1.0)),
            splitting=str(ev.get("splitting", "strang")),
            step_mode=str(ev.get("step_mode", "plain_spectral")),
            n_sub=int(ev.get("n_sub", 8)), n_quad=int(ev.get("n_quad", 64)),
            snapshot_stride=int(ev.get("snapshot_stride", 100)),
            window=float(ev.get("window", 0.1)),
        )

        sweep = data.get("sweep") or {}
        sweep_omegas = (tuple(float(v) for v in sweep["omegas"])
                        if "omegas" in sweep else None)

        bu = data.get("blowup", {}) or {}
        blowup = BlowupBlock(expected=bool(bu.get("expected", False)),
                             factor=float(bu.get("factor", 50.0)),
                             growth_window=float(bu.get("growth_window", 0.0)))

        out = data.get("output", {}) or {}
        output = OutputBlock(directory=str(out.get("directory", "") or ""),
                             full_volume=bool(out.get("full_volume", False)),
                             write_initial_slice=bool(out.get("write_initial_slice",
                                                              False)))

        lat = data.get("lattice", {}) or {}
        lattice = LatticeBlock(
            omegas=_floats(lat.get("omegas", (80.0, 160.0))),
            compare=bool(lat.get("compare", False)),
            fine_factor=int(lat.get("fine_factor", 8)),
            dt_refine=int(lat.get("dt_refine", 4)),
            compare_t_end=(None if lat.get("compare_t_end") is None
                           else float(lat["compare_t_end"])),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario configuration: {exc}") from exc

    cfg = ScenarioConfig(name=str(data.get("name", name)), grid=grid, model=model,
                         potential=potential, a=a, sigma=sigma, C1=C1, c=c,
                         initial=initial, evolution=evolution,
                         sweep_omegas=sweep_omegas, blowup=blowup, output=output,
                         lattice=lattice,
                         double_c_energy=bool(data.get("double_c_energy", False)),
                         hartree_convention=hartree_convention)
    validate_scenario(cfg)
    return cfg


def validate_scenario(cfg: ScenarioConfig) -> None:
    if cfg.model in ("fast", "both") and cfg.potential is not None:
        cfg.evolution_config("fast").validate(cfg.grid)
    if cfg.model in ("averaged", "both") and cfg.potential is not None:
        cfg.evolution_config("averaged").validate(cfg.grid)
    if cfg.potential is None:
        cfg.evolution_config("averaged").validate(cfg.grid)
    if cfg.sweep_omegas is not None:
        if cfg.model == "averaged":
            raise ConfigError("an omega sweep needs model 'fast' or 'both'")
        if list(cfg.sweep_omegas) != sorted(cfg.sweep_omegas) or \
                len(set(cfg.sweep_omegas)) != len(cfg.sweep_omegas):
            raise ConfigError("sweep omegas must be strictly increasing")


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "name": cfg.name,
        "grid": {"dim": cfg.grid.dim, "lengths": list(cfg.grid.lengths),
                 "counts": list(cfg.grid.counts), "epsilon": cfg.grid.epsilon},
        "model": cfg.model,
        "potential": _potential_dict(cfg.potential),
        "nonlinearity": {"a": cfg.a, "sigma": cfg.sigma, "C1": cfg.C1, "c": cfg.c,
                         "hartree_convention": cfg.hartree_convention},
        "initial": {
            "type": cfg.initial.type, "center": list(cfg.initial.center),
            "width": cfg.initial.width,
            "wavevector": list(cfg.initial.wavevector),
            "target_mass": cfg.initial.target_mass,
            "sigma": cfg.initial.gs_sigma, "tol": cfg.initial.gs_tol,
            "tau": cfg.initial.gs_tau, "max_iter": cfg.initial.gs_max_iter,
            "path": cfg.initial.path,
        },
        "evolution": {
            "dt": cfg.evolution.dt, "t_end": cfg.evolution.t_end,
            "splitting": cfg.evolution.splitting,
            "step_mode": cfg.evolution.step_mode, "n_sub": cfg.evolution.n_sub,
            "n_quad": cfg.evolution.n_quad,
            "snapshot_stride": cfg.evolution.snapshot_stride,
            "window": cfg.evolution.window,
        },
        "sweep": ({"omegas": list(cfg.sweep_omegas)}
                  if cfg.sweep_omegas is not None else None),
        "blowup": {"expected": cfg.blowup.expected, "factor": cfg.blowup.factor,
                   "growth_window": cfg.blowup.growth_window},
        "output": {"directory": cfg.output.directory,
                   "full_volume": cfg.output.full_volume,
                   "write_initial_slice": cfg.output.write_initial_slice},
        "lattice": {"omegas": list(cfg.lattice.omegas),
                    "compare": cfg.lattice.compare,
                    "fine_factor": cfg.lattice.fine_factor,
                    "dt_refine": cfg.lattice.dt_refine,
                    "compare_t_end": cfg.lattice.compare_t_end},
        "double_c_energy": cfg.double_c_energy,
    }


def load_scenario(path: Path | str) -> ScenarioConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_scenario(data, name=path.stem)


def preset_path(name: str) -> Path:
    base = Path(__file__).parent / "presets"
    candidate = base / (name if name.endswith(".yaml") else f"{name}.yaml")
    return candidate


def resolve_config_path(spec: str) -> Path:
    p = Path(spec)
    if p.exists():
        return p
    preset = preset_path(spec)
    if preset.exists():
        return preset
    raise ConfigError(f"no such config file or preset: {spec}")


# ---------------------------------------------------------------------------
# initial data


def gaussian_field(grid: Grid, center, width: float, wavevector) -> np.ndarray:
    center = tuple(center)[: grid.dim]
    k = tuple(wavevector)[: grid.dim]
    envelope = np.exp(-grid.radius_squared(center) / (2.0 * width ** 2))
    coords = grid.coordinates()
    phase = np.zeros(grid.shape)
    for d in range(grid.dim):
        phase = phase + k[d] * coords[d]
    return envelope * np.exp(1j * phase)


def build_initial(cfg: ScenarioConfig) -> np.ndarray:
    ini = cfg.initial
    if ini.type == "gaussian":
        return gaussian_field(cfg.grid, ini.center, ini.width, ini.wavevector)
    if ini.type == "ground_state":
        gs_cfg = replace(
            cfg.evolution_config("averaged"),
            a=cfg.a, sigma=ini.gs_sigma, C1=cfg.C1,
        )
        result = imaginary_time_ground_state(
            cfg.grid, gs_cfg, target_mass=ini.target_mass, tol=ini.gs_tol,
            tau=ini.gs_tau, max_iter=ini.gs_max_iter)
        log.info("ground state ready: E=%.8g, residual=%.2e, %d iterations",
                 result.energy, result.residual, result.iterations)
        return result.field
    if ini.type == "file":
        meta, data = run_io.read_field_slice(Path(ini.path).with_suffix(""))
        if tuple(meta["counts"]) != cfg.grid.counts:
            raise ConfigError(
                f"initial field file grid {meta['counts']} does not match "
                f"scenario grid {cfg.grid.counts}")
        return data.astype(complex)
    raise ConfigError(f"unknown initial type {ini.type!r}")


# ---------------------------------------------------------------------------
# scenario runner


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    runs: dict[str, RunRecord]
    out_dir: Path | None = None
    extras: dict = field(default_factory=dict)


def _model_labels(cfg: ScenarioConfig) -> list[str]:
    return ["averaged", "fast"] if cfg.model == "both" else [cfg.model]


def _run_one(cfg: ScenarioConfig, label: str, initial: np.ndarray,
             out_dir: Path | None, ev_cfg: EvolutionConfig | None = None,
             collect_snapshots: bool = True) -> RunRecord:
    ev_cfg = ev_cfg or cfg.evolution_config(label)
    observers = []
    writers = []
    if out_dir is not None:
        run_dir = out_dir / label
        run_dir.mkdir(parents=True, exist_ok=True)
        csv_writer = run_io.DiagnosticsCsvWriter(run_dir / "diagnostics.csv")
        slice_writer = run_io.SliceWriter(
            run_dir, cfg.grid, dt=ev_cfg.dt,
            full_volume=cfg.output.full_volume,
            write_initial=cfg.output.write_initial_slice)
        observers = [csv_writer, slice_writer]
        writers = [csv_writer]
    try:
        record = evolve(cfg.grid, initial, ev_cfg, observers=observers,
                        collect_snapshots=collect_snapshots, label=label)
    finally:
        for w in writers:
            w.close()
    if record.blowup is not None:
        log.info("%s run flagged blow-up at t=%.6g (threshold h1=%.4g)", label,
                 record.blowup.time, record.blowup.h1_threshold)
    return record


def run_scenario(cfg: ScenarioConfig, out_dir: Path | str | None = None,
                 collect_snapshots: bool = True) -> ScenarioResult:
    """Run the configured model(s), writing diagnostics CSV, slice files and
    the resolved configuration under ``out_dir``."""
    out_dir = Path(out_dir) if out_dir else (Path(cfg.output.directory)
                                             if cfg.output.directory else None)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.yaml").write_text(
            yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False))
    initial = build_initial(cfg)
    runs: dict[str, RunRecord] = {}
    for label in _model_labels(cfg):
        runs[label] = _run_one(cfg, label, initial, out_dir,
                               collect_snapshots=collect_snapshots)
    result = ScenarioResult(config=cfg, runs=runs, out_dir=out_dir)
    blown = [lbl for lbl, r in runs.items() if r.blowup is not None]
    if blown and not cfg.blowup.expected:
        raise UnexpectedBlowupError(
            f"run(s) {blown} terminated by blow-up but the scenario does not "
            "declare blow-up expected")
    return result


# ---------------------------------------------------------------------------
# suites


@dataclass
class ConvergenceReport:
    omegas: list[float]
    l2_final: list[float]
    l2_sup: list[float]
    energy_l1: list[float]
    u_rates: np.ndarray
    energy_rates: np.ndarray
    ok: bool
    message: str
    distances: list[DistanceReport]


def run_convergence_suite(cfg: ScenarioConfig, omegas=None,
                          out_dir: Path | str | None = None) -> ConvergenceReport:
    """Fast-versus-averaged sweep over oscillation frequencies (Table-1 shape).

    Runs the averaged model once, one fast run per omega, reports sup/final
    L2 and windowed-energy L1 distances plus per-doubling rates, and flags
    non-monotone error columns as a suite failure (in the report, not as an
    exception).
    """
    if cfg.model != "both":
        raise ConfigError("convergence suite needs model 'both'")
    omegas = list(omegas if omegas is not None
                  else (cfg.sweep_omegas or DEFAULT_SWEEP_OMEGAS))
    if omegas != sorted(omegas):
        raise ConfigError("sweep omegas must be increasing")
    out_dir = Path(out_dir) if out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.yaml").write_text(
            yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False))

    initial = build_initial(cfg)
    averaged = _run_one(cfg, "averaged", initial, out_dir)

    rows, distances = [], []
    for w in omegas:
        ev_cfg = cfg.evolution_config("fast", omega=w)
        label = f"fast_w{w:g}"
        fast = _run_one(cfg, label, initial, out_dir, ev_cfg=ev_cfg)
        dist = run_distance(fast, averaged, window=cfg.evolution.window)
        distances.append(dist)
        rows.append((w, dist.l2_final, dist.l2_sup, dist.energy_l1))
        if out_dir is not None:
            run_io.write_distance_series_csv(out_dir / f"distance_w{w:g}.csv",
                                             dist.rel_times, dist.abs_l2,
                                             dist.rel_l2)
        fast.snapshots.clear()

    l2_final = [r[1] for r in rows]
    l2_sup = [r[2] for r in rows]
    energy_l1 = [r[3] for r in rows]
    u_rates = convergence_rates(l2_sup, omegas)
    energy_rates = convergence_rates(energy_l1, omegas)

    problems = []
    if not all(b < a for a, b in zip(l2_sup, l2_sup[1:])):
        problems.append(f"sup-in-time L2 errors not strictly decreasing: {l2_sup}")
    if not all(b < a for a, b in zip(energy_l1, energy_l1[1:])):
        problems.append(f"windowed-energy L1 errors not strictly decreasing: "
                        f"{energy_l1}")
    ok = not problems
    message = "ok" if ok else "; ".join(problems)

    if out_dir is not None:
        csv_rows = []
        for i, w in enumerate(omegas):
            rate = float(u_rates[i - 1]) if i > 0 else None
            csv_rows.append((w, l2_final[i], l2_sup[i], energy_l1[i], rate))
        run_io.write_comparison_csv(out_dir / "comparison.csv", csv_rows)

    return ConvergenceReport(omegas=omegas, l2_final=l2_final, l2_sup=l2_sup,
                             energy_l1=energy_l1, u_rates=u_rates,
                             energy_rates=energy_rates, ok=ok, message=message,
                             distances=distances)


@dataclass
class BlowupSuiteReport:
    sigmas: list[float]
    blowup_times: dict[str, float | None]   # key "<model>:s<sigma>"
    h1_curves: dict[str, tuple[np.ndarray, np.ndarray]]
    ok: bool
    message: str


def run_blowup_suite(cfg: ScenarioConfig, sigmas=None, omega: float | None = None,
                     out_dir: Path | str | None = None) -> BlowupSuiteReport:
    """Blow-up time ordering across nonlinearity exponents for both models.

    The initial datum must be a prepared ground state; each exponent is run
    with blow-up detection, expecting earlier blow-up for larger sigma and
    none below the mass-critical exponent 4/3.
    """
    if cfg.initial.type != "ground_state":
        raise ConfigError("blow-up suite needs a ground_state initial datum")
    sigmas = sorted([float(s) for s in (sigmas or DEFAULT_BLOWUP_SIGMAS)],
                    reverse=True)
    out_dir = Path(out_dir) if out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    initial = build_initial(cfg)
    cfg = replace(cfg, blowup=replace(cfg.blowup, expected=True))

    times: dict[str, float | None] = {}
    curves: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for s in sigmas:
        for model in ("averaged", "fast"):
            ev = cfg.evolution_config(model, sigma=s, omega=omega)
            label = f"{model}_s{s:g}"
            rec = _run_one(cfg, label, initial, out_dir, ev_cfg=ev,
                           collect_snapshots=False)
            times[label] = rec.blowup.time if rec.blowup else None
            curves[label] = (rec.times, rec.series("h1"))

    problems = []
    super_sigmas = [s for s in sigmas if s > 4.0 / 3.0]
    for model in ("averaged", "fast"):
        tb = [times[f"{model}_s{s:g}"] for s in super_sigmas]
        if any(t is None for t in tb):
            problems.append(f"{model}: no blow-up detected for a supercritical "
                            f"exponent (times {tb})")
        elif not all(t0 < t1 for t0, t1 in zip(tb, tb[1:])):
            problems.append(f"{model}: blow-up times not increasing as sigma "
                            f"decreases: {tb}")
        for s in sigmas:
            if s < 4.0 / 3.0 and times[f"{model}_s{s:g}"] is not None:
                problems.append(f"{model}: unexpected blow-up at subcritical "
                                f"sigma={s}")
    ok = not problems
    return BlowupSuiteReport(sigmas=sigmas, blowup_times=times, h1_curves=curves,
                             ok=ok, message="ok" if ok else "; ".join(problems))


def h1_agreement_until(curve_a, curve_b, growth_factor: float = 10.0) -> float:
    """Max relative H1 deviation |a-b|/b while b stays under growth_factor
    times its initial value (curves sampled on their own time grids)."""
    ta, ha = curve_a
    tb, hb = curve_b
    t_hi = tb[-1]
    above = np.nonzero(hb > growth_factor * hb[0])[0]
    if above.size:
        t_hi = tb[above[0]]
    mask = (ta <= t_hi) & np.isfinite(ha)
    ref = np.interp(ta[mask], tb, hb)
    return float(np.max(np.abs(ha[mask] - ref) / ref))


def _first_crossing_time(t: np.ndarray, h: np.ndarray, level: float) -> float | None:
    above = np.nonzero(h >= level)[0]
    if above.size == 0:
        return None
    i = int(above[0])
    if i == 0 or h[i] == h[i - 1]:
        return float(t[i])
    frac = (level - h[i - 1]) / (h[i] - h[i - 1])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def h1_growth_agreement(curve_a, curve_b, growth_factor: float = 10.0,
                        n_levels: int = 24) -> float:
    """Max relative difference of the times at which two runs reach matched
    H1 levels up to growth_factor times the initial value.

    Near blow-up h1(t) steepens without bound, so comparing values at fixed
    times diverges for any nonzero blow-up-time offset; comparing the level-
    crossing times is the stable reading of "the curves grow alike".
    """
    ta, ha = curve_a
    tb, hb = curve_b
    h0 = hb[0]
    levels = h0 * np.geomspace(1.5, growth_factor, n_levels)
    worst = 0.0
    for level in levels:
        t1 = _first_crossing_time(np.asarray(ta), np.asarray(ha), level)
        t2 = _first_crossing_time(np.asarray(tb), np.asarray(hb), level)
        if t1 is None and t2 is None:
            continue
        if t1 is None or t2 is None:
            return math.inf
        worst = max(worst, abs(t1 - t2) / max(t2, 1e-300))
    return worst


@dataclass
class StabilityReport:
    etas: list[float]
    pair_distances: list[float]       # successive-run final-time L2 distances
    potential_sup_diffs: list[float]
    ok: bool
    message: str


def run_stability_sweep(cfg: ScenarioConfig, etas=None,
                        out_dir: Path | str | None = None) -> StabilityReport:
    """Rerun one configuration at decreasing mollification widths and check
    the solution distance shrinks along with the potential perturbation."""
    if cfg.potential is None:
        raise ConfigError("stability sweep needs a potential")
    h = max(cfg.grid.spacing)
    etas = sorted([float(e) for e in (etas or (4 * h * h, h * h, h * h / 4))],
                  reverse=True)
    if len(etas) < 3:
        raise ConfigError("stability sweep needs at least three widths")
    model = "fast" if cfg.model == "both" else cfg.model
    initial = build_initial(cfg)

    finals = []
    from .potentials import PotentialEvaluator  # local to avoid cycle at import
    pot_fields = []
    for eta in etas:
        pot = (cfg.fast_potential() if model == "fast"
               else cfg.averaged_potential())
        pot = _override_eta(pot, eta)
        ev = replace(cfg.evolution_config(model), potential=pot)
        rec = _run_one(cfg, f"eta_{eta:g}", initial, None, ev_cfg=ev,
                       collect_snapshots=False)
        finals.append(rec.final_state)
        pot_fields.append(PotentialEvaluator(cfg.grid, pot, n_sub=cfg.evolution.n_sub,
                                             n_quad=cfg.evolution.n_quad)
                          .instantaneous(0.0))

    pair_distances = [spectral.l2_norm(cfg.grid, a - b)
                      for a, b in zip(finals, finals[1:])]
    sup_diffs = [float(np.max(np.abs(va - vb)))
                 for va, vb in zip(pot_fields, pot_fields[1:])]
    ok = all(d1 > d2 for d1, d2 in zip(pair_distances, pair_distances[1:]))
    report = StabilityReport(etas=etas, pair_distances=pair_distances,
                             potential_sup_diffs=sup_diffs, ok=ok,
                             message="ok" if ok else
                             f"distances not decreasing: {pair_distances}")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "stability.csv", "w") as fh:
            fh.write("eta_coarse,eta_fine,l2_distance,potential_sup_diff\n")
            for i, (d, s) in enumerate(zip(pair_distances, sup_diffs)):
                fh.write(f"{etas[i]!r},{etas[i+1]!r},{d!r},{s!r}\n")
    return report


def _override_eta(spec: PotentialSpec, eta: float) -> PotentialSpec:
    if spec.kind == "composite":
        return replace(spec, children=tuple(_override_eta(ch, eta)
                                            for ch in spec.children))
    return replace(spec, eta=eta)


def _pin_etas(spec: PotentialSpec | None, grid: Grid) -> PotentialSpec | None:
    """Replace grid-derived mollification defaults by their value on ``grid``."""
    if spec is None:
        return None
    if spec.kind == "composite":
        return replace(spec, children=tuple(_pin_etas(ch, grid)
                                            for ch in spec.children))
    return replace(spec, eta=spec.resolved_eta(grid))


# ---------------------------------------------------------------------------
# named scenario drivers


def density_centroid(grid: Grid, u: np.ndarray) -> np.ndarray:
    rho = np.abs(u) ** 2
    total = float(np.sum(rho))
    coords = grid.coordinates()
    return np.array([float(np.sum(coords[d] * rho)) / total
                     for d in range(grid.dim)])


def run_trap_scenario(cfg: ScenarioConfig,
                      out_dir: Path | str | None = None) -> ScenarioResult:
    """Fast model in a composite trap + Coulomb potential; tracks the packet
    centroid across snapshots."""
    kinds = {m.kind for m in cfg.potential.members()} if cfg.potential else set()
    if not {"trap", "averaged_trap"} & kinds:
        raise ConfigError("trap scenario needs a trap member in the potential")
    result = run_scenario(cfg, out_dir)
    label = "fast" if "fast" in result.runs else next(iter(result.runs))
    run = result.runs[label]
    centroids = np.array([density_centroid(cfg.grid, u)
                          for _, u in run.snapshots])
    result.extras["centroid_times"] = run.snapshot_times
    result.extras["centroids"] = centroids
    if len(centroids) >= 2:
        result.extras["max_centroid_displacement"] = float(
            np.max(np.linalg.norm(centroids - centroids[0], axis=1)))
    return result


def run_td_scenario(cfg: ScenarioConfig,
                    out_dir: Path | str | None = None) -> ScenarioResult:
    """Fast and averaged runs with the slowly time-dependent drive e(t)."""
    shifts = [m.shift.e_law for m in cfg.potential.members()] if cfg.potential else []
    if "sinusoidal" not in shifts:
        raise ConfigError("time-dependent scenario needs a sinusoidal e_law")
    result = run_scenario(cfg, out_dir)
    if cfg.model == "both":
        dist = run_distance(result.runs["fast"], result.runs["averaged"],
                            window=cfg.evolution.window)
        result.extras["distance"] = dist
    return result


@dataclass
class LatticeReport:
    result: ScenarioResult
    coarse_plain_error: float | None = None
    coarse_bloch_error: float | None = None
    ok: bool = True
    message: str = "ok"


def _subsample_to(grid_fine: Grid, u_fine: np.ndarray, grid_coarse: Grid) -> np.ndarray:
    factors = [nf // nc for nf, nc in zip(grid_fine.counts, grid_coarse.counts)]
    if any(nf != f * nc for nf, f, nc in
           zip(grid_fine.counts, factors, grid_coarse.counts)):
        raise ConfigError("fine grid is not a refinement of the coarse grid")
    slices = tuple(slice(None, None, f) for f in factors)
    return u_fine[slices]


def run_lattice_scenario(cfg: ScenarioConfig,
                         out_dir: Path | str | None = None) -> LatticeReport:
    """Band-basis lattice runs per drive frequency, plus (optionally) the
    coarse-versus-fine efficiency comparison of band-basis and plain modes."""
    kinds = {m.kind for m in cfg.potential.members()} if cfg.potential else set()
    if not {"lattice", "averaged_lattice"} & kinds:
        raise ConfigError("lattice scenario needs a lattice member")
    out_dir = Path(out_dir) if out_dir else (Path(cfg.output.directory)
                                             if cfg.output.directory else None)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.yaml").write_text(
            yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False))

    initial = build_initial(cfg)
    runs: dict[str, RunRecord] = {}
    if cfg.model in ("averaged", "both"):
        runs["averaged"] = _run_one(cfg, "averaged", initial, out_dir)
    if cfg.model in ("fast", "both"):
        for w in cfg.lattice.omegas:
            label = f"fast_w{w:g}"
            ev = cfg.evolution_config("fast", omega=w)
            runs[label] = _run_one(cfg, label, initial, out_dir, ev_cfg=ev)
    result = ScenarioResult(config=cfg, runs=runs, out_dir=out_dir)
    report = LatticeReport(result=result)

    if cfg.lattice.compare:
        w_ref = max(cfg.lattice.omegas)
        t_end = cfg.lattice.compare_t_end or cfg.evolution.t_end
        fine_grid = Grid(lengths=cfg.grid.lengths,
                         counts=tuple(n * cfg.lattice.fine_factor
                                      for n in cfg.grid.counts),
                         epsilon=cfg.grid.epsilon)
        # the three runs must see the same potential: freeze any grid-derived
        # mollification widths at their coarse-grid values
        cfg = replace(cfg, potential=_pin_etas(cfg.potential, cfg.grid))
        fine_cfg = replace(cfg, grid=fine_grid)
        fine_initial = build_initial(fine_cfg)
        ev_fine = fine_cfg.evolution_config(
            "fast", omega=w_ref, dt=cfg.evolution.dt / cfg.lattice.dt_refine,
            t_end=t_end, step_mode="plain_spectral")
        fine = _run_one(fine_cfg, "reference_fine_plain", fine_initial, None,
                        ev_cfg=ev_fine, collect_snapshots=False)
        reference = _subsample_to(fine_grid, fine.final_state, cfg.grid)

        errors = {}
        for mode in ("plain_spectral", "bloch"):
            ev = cfg.evolution_config("fast", omega=w_ref, t_end=t_end,
                                      step_mode=mode)
            rec = _run_one(cfg, f"coarse_{mode}", initial, None, ev_cfg=ev,
                           collect_snapshots=False)
            errors[mode] = spectral.l2_norm(cfg.grid,
                                            rec.final_state - reference)
        report.coarse_plain_error = errors["plain_spectral"]
        report.coarse_bloch_error = errors["bloch"]
        report.ok = errors["bloch"] < errors["plain_spectral"]
        report.message = ("ok" if report.ok else
                          f"band-basis coarse error {errors['bloch']:.3e} not "
                          f"below plain coarse error {errors['plain_spectral']:.3e}")
        if out_dir is not None:
            with open(out_dir / "efficiency.csv", "w") as fh:
                fh.write("mode,final_l2_error_vs_fine\n")
                fh.write(f"plain_spectral,{errors['plain_spectral']!r}\n")
                fh.write(f"bloch,{errors['bloch']!r}\n")
    return report


# ---------------------------------------------------------------------------
# run-directory comparison (CLI `compare`)


def compare_run_dirs(dir_a: Path | str, dir_b: Path | str,
                     window: float | None = None) -> dict:
    """Distance metrics between two completed run directories, computed from
    their diagnostics CSV and matching slice files."""
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    recs_a = run_io.read_diagnostics_csv(dir_a / "diagnostics.csv")
    recs_b = run_io.read_diagnostics_csv(dir_b / "diagnostics.csv")
    slices_a = sorted(dir_a.glob("slice_*.bin"))
    slices_b = sorted(dir_b.glob("slice_*.bin"))
    names_a = [p.stem for p in slices_a]
    names_b = [p.stem for p in slices_b]
    if names_a != names_b:
        raise ConfigError("run directories hold different slice sets")
    abs_l2, rel_l2, times = [], [], []
    for name in names_a:
        meta_a, ua = run_io.read_field_slice(dir_a / name)
        meta_b, ub = run_io.read_field_slice(dir_b / name)
        if meta_a["counts"] != meta_b["counts"] or \
                meta_a["lengths"] != meta_b["lengths"]:
            raise ConfigError(f"slice {name} grids differ between runs")
        g = Grid(lengths=meta_a["lengths"], counts=meta_a["counts"])
        d = spectral.l2_norm(g, ua - ub)
        n = spectral.l2_norm(g, ub)
        times.append(meta_a["t"])
        abs_l2.append(d)
        rel_l2.append(d / n if n > 0 else 0.0)

    t_a = np.array([r.t for r in recs_a])
    e_a = np.array([r.total for r in recs_a])
    t_b = np.array([r.t for r in recs_b])
    e_b = np.array([r.total for r in recs_b])
    if window and t_a.size >= 2 and t_a[0] + window <= t_a[-1]:
        from .diagnostics import window_average
        t_w, e_w = window_average(t_a, e_a, window)
    else:
        t_w, e_w = t_a, e_a
    e_b_w = np.interp(t_w, t_b, e_b)
    energy_l1 = float(np.trapezoid(np.abs(e_w - e_b_w), t_w)) if t_w.size >= 2 else 0.0
    return {
        "times": times,
        "l2": abs_l2,
        "rel_l2": rel_l2,
        "l2_final": abs_l2[-1] if abs_l2 else 0.0,
        "l2_sup": max(abs_l2) if abs_l2 else 0.0,
        "energy_l1": energy_l1,
    }

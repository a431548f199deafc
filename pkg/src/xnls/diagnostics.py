"""Observables: mass, energy decomposition, H1 seminorm, windowed averages,
run-to-run distances, convergence rates, and blow-up detection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .grid import Grid
from . import spectral
from .potentials import PotentialSpec

CSV_COLUMNS = ("t", "mass", "kinetic", "hartree", "potential", "nonlinear",
               "total", "h1", "max_density")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-time-sample observables; ``total`` is the sum of the four energy
    components by construction."""

    t: float
    mass: float
    kinetic: float
    hartree: float
    potential: float
    nonlinear: float
    total: float
    h1: float
    max_density: float

    def row(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


def mass(grid: Grid, u: np.ndarray) -> float:
    """Int |u|^2 with the grid quadrature weight."""
    u = grid.check_field(u)
    return float(grid.cell_volume * np.sum(np.abs(u) ** 2))


def h1_seminorm(grid: Grid, u: np.ndarray) -> float:
    """(Int |grad u|^2)^(1/2), evaluated spectrally."""
    u_hat = spectral.fft_forward(grid, u)
    return math.sqrt(float(grid.cell_volume
                           * np.sum(grid.k_squared() * np.abs(u_hat) ** 2)))


def energy_spec(spec: PotentialSpec | None, double_c: bool) -> PotentialSpec | None:
    """Potential spec used for the energy's V|u|^2 term.

    Default: V enters once and already carries its strength c.  The literal
    double-c reading squares the Coulomb strength for comparison runs.
    """
    if spec is None or not double_c:
        return spec
    if spec.kind == "composite":
        return replace(spec, children=tuple(energy_spec(ch, True)
                                            for ch in spec.children))
    if spec.kind in ("fast_coulomb", "averaged_coulomb"):
        return replace(spec, c=spec.c * spec.c)
    return spec


def compute_diagnostics(grid: Grid, u: np.ndarray, t: float, *, a: float,
                        sigma: float, C1: float,
                        v_field: np.ndarray | None = None,
                        hartree_field: np.ndarray | None = None) -> DiagnosticsRecord:
    """Evaluate all observables at one time sample.

    ``v_field`` is the external potential V(t, x) including its strength;
    ``hartree_field`` may pass a precomputed self-consistent potential to
    avoid a redundant solve.
    """
    u = grid.check_field(u)
    w = grid.cell_volume
    with np.errstate(invalid="ignore", over="ignore"):
        rho = np.abs(u) ** 2
        m = float(w * np.sum(rho))

        u_hat = spectral.fft_forward(grid, u)
        kinetic = float(w * np.sum(grid.k_squared() * np.abs(u_hat) ** 2))

        hartree_energy = 0.0
        if C1 != 0.0:
            vh = hartree_field if hartree_field is not None \
                else spectral.hartree_potential(grid, rho)
            # (C1/2) Int V_H rho == the self-interaction term whose variation
            # is C1*V_H*u; written via grad V_H it would need a 1/(4 pi) under
            # our 4*pi/|k|^2 multiplier, so the density form is used directly.
            hartree_energy = float(0.5 * C1 * w * np.sum(vh * rho))

        potential_energy = 0.0
        if v_field is not None:
            potential_energy = float(w * np.sum(v_field * rho))

        nonlinear = 0.0
        if a != 0.0:
            nonlinear = float(-2.0 * a / (sigma + 2.0) * w
                              * np.sum(rho ** (sigma / 2.0 + 1.0)))

        total = kinetic + hartree_energy + potential_energy + nonlinear
        h1 = math.sqrt(max(kinetic, 0.0)) if math.isfinite(kinetic) else kinetic
        return DiagnosticsRecord(
            t=t, mass=m, kinetic=kinetic, hartree=hartree_energy,
            potential=potential_energy, nonlinear=nonlinear, total=total,
            h1=h1, max_density=float(np.max(rho)),
        )


# ---------------------------------------------------------------------------
# series utilities


def window_average(times, values, window: float):
    """Trapezoid average of a sampled series over [t, t+window].

    Returns (times', averages') for every t with t + window <= t_end.  The
    right endpoint of each window is linearly interpolated, so the result is
    exact for piecewise-linear series.
    """
    if window <= 0:
        raise ConfigError("window must be positive")
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != v.shape or t.size < 2:
        raise ConfigError("series must be two 1D arrays of equal length >= 2")
    if np.any(np.diff(t) <= 0):
        raise ConfigError("series times must be strictly increasing")
    t_end = t[-1]
    out_t, out_v = [], []
    eps = 1e-12 * max(1.0, abs(t_end))
    for i in range(t.size):
        hi = t[i] + window
        if hi > t_end + eps:
            break
        hi = min(hi, t_end)
        j = int(np.searchsorted(t, hi - eps, side="left"))
        seg_t = np.concatenate([t[i:j], [hi]])
        seg_v = np.concatenate([v[i:j], [np.interp(hi, t, v)]])
        out_t.append(t[i])
        out_v.append(float(np.trapezoid(seg_v, seg_t) / window))
    return np.asarray(out_t), np.asarray(out_v)


def convergence_rates(errors, omegas) -> np.ndarray:
    """Observed rates err ~ omega^(-rate) between successive sweep members."""
    errors = np.asarray(errors, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    if errors.shape != omegas.shape or errors.ndim != 1 or errors.size < 2:
        raise ConfigError("need matching 1D error/omega lists with >= 2 entries")
    if np.any(np.diff(omegas) <= 0):
        raise ConfigError("omegas must be strictly increasing")
    ratios = omegas[1:] / omegas[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.allclose(ratios, 2.0, rtol=1e-12):
            return np.log2(errors[:-1] / errors[1:])
        return np.log(errors[:-1] / errors[1:]) / np.log(ratios)


# ---------------------------------------------------------------------------
# blow-up detection


@dataclass
class BlowupReport:
    time: float            # estimated blow-up time (threshold crossing)
    last_time: float       # last time observed before aborting
    h1_threshold: float
    h1_history: list = field(default_factory=list)  # (t, h1) pairs
    reason: str = "h1_threshold"


class BlowupDetector:
    """Signals blow-up when the H1 seminorm crosses a threshold or NaN appears.

    The threshold defaults to ``factor`` times the first observed H1 value;
    ``growth_window`` > 0 additionally requires h1 to have been increasing
    over that trailing time span before signaling.
    """

    def __init__(self, h1_threshold: float | None = None, factor: float = 50.0,
                 growth_window: float = 0.0):
        if (h1_threshold is not None and h1_threshold <= 0) or factor <= 0:
            raise ConfigError("blow-up thresholds must be positive")
        self.h1_threshold = h1_threshold
        self.factor = factor
        self.growth_window = growth_window
        self.history: list[tuple[float, float]] = []

    def observe(self, record: DiagnosticsRecord) -> BlowupReport | None:
        if not np.isfinite(record.h1) or not np.isfinite(record.mass):
            return BlowupReport(time=record.t, last_time=record.t,
                                h1_threshold=self.h1_threshold or math.inf,
                                h1_history=list(self.history), reason="nan")
        if self.h1_threshold is None:
            if record.h1 > 0:
                self.h1_threshold = self.factor * record.h1
            else:
                self.history.append((record.t, record.h1))
                return None
        self.history.append((record.t, record.h1))
        if record.h1 <= self.h1_threshold:
            return None
        if self.growth_window > 0 and not self._grew_over_window(record.t):
            return None
        return BlowupReport(time=self._crossing_time(), last_time=record.t,
                            h1_threshold=self.h1_threshold,
                            h1_history=list(self.history))

    def _grew_over_window(self, t_now: float) -> bool:
        recent = [h for (t, h) in self.history if t >= t_now - self.growth_window]
        return len(recent) < 2 or all(b >= a for a, b in zip(recent, recent[1:]))

    def _crossing_time(self) -> float:
        (t0, h0), (t1, h1) = (self.history[-2:] if len(self.history) >= 2
                              else (self.history[-1], self.history[-1]))
        if h1 == h0:
            return t1
        frac = (self.h1_threshold - h0) / (h1 - h0)
        return float(t0 + min(max(frac, 0.0), 1.0) * (t1 - t0))


# ---------------------------------------------------------------------------
# run records and distances


@dataclass
class RunRecord:
    """Everything one evolution produced: per-step observables, strided field
    snapshots, and the blow-up flag if the run was truncated."""

    grid: Grid
    records: list[DiagnosticsRecord] = field(default_factory=list)
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)
    blowup: BlowupReport | None = None
    final_state: np.ndarray | None = None
    label: str = ""

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def series(self, column: str) -> np.ndarray:
        return np.array([getattr(r, column) for r in self.records])

    @property
    def snapshot_times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])


@dataclass(frozen=True)
class DistanceReport:
    l2_final: float
    l2_sup: float
    energy_l1: float
    rel_times: np.ndarray
    rel_l2: np.ndarray
    abs_l2: np.ndarray


def run_distance(run_a: RunRecord, run_b: RunRecord,
                 window: float | None = None) -> DistanceReport:
    """L2 and energy distances between two runs on the same grid and snapshot
    grid; ``run_b`` is the reference in the relative series.

    ``energy_l1`` integrates |E_a - E_b| in time with E_a window-averaged
    first (E_a is the oscillatory run when comparing fast vs averaged).
    """
    if run_a.grid != run_b.grid:
        raise ConfigError("runs live on different grids")
    ta, tb = run_a.snapshot_times, run_b.snapshot_times
    if ta.shape != tb.shape or (ta.size and np.max(np.abs(ta - tb)) > 1e-9):
        raise ConfigError("runs have mismatched snapshot times")
    grid = run_a.grid
    abs_l2, rel_l2 = [], []
    for (t, ua), (_, ub) in zip(run_a.snapshots, run_b.snapshots):
        d = spectral.l2_norm(grid, ua - ub)
        n = spectral.l2_norm(grid, ub)
        abs_l2.append(d)
        rel_l2.append(d / n if n > 0 else math.inf if d > 0 else 0.0)
    abs_l2 = np.asarray(abs_l2)

    t_a, e_a = run_a.times, run_a.series("total")
    t_b, e_b = run_b.times, run_b.series("total")
    if window and t_a.size >= 2 and t_a[0] + window <= t_a[-1]:
        t_w, e_w = window_average(t_a, e_a, window)
    else:
        t_w, e_w = t_a, e_a
    e_b_on_w = np.interp(t_w, t_b, e_b)
    energy_l1 = float(np.trapezoid(np.abs(e_w - e_b_on_w), t_w)) if t_w.size >= 2 else 0.0

    return DistanceReport(
        l2_final=float(abs_l2[-1]) if abs_l2.size else 0.0,
        l2_sup=float(np.max(abs_l2)) if abs_l2.size else 0.0,
        energy_l1=energy_l1,
        rel_times=ta, rel_l2=np.asarray(rel_l2), abs_l2=abs_l2,
    )

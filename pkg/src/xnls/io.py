"""File formats: field slices (raw float64 pairs + text header), diagnostics
CSV, and comparison CSV.  Floats are written with repr so identical runs
produce bit-identical files and values round-trip exactly."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import Grid
from .diagnostics import CSV_COLUMNS, DiagnosticsRecord

COMPARISON_COLUMNS = ("omega", "l2_final", "l2_sup", "energy_l1", "rate")


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# field slices: <base>.bin holds little-endian (re, im) float64 pairs in
# row-major order; <base>.txt is the sidecar header with dims, L, N, t.


def slice_plane(grid: Grid, u: np.ndarray) -> tuple[np.ndarray, Grid]:
    """The z=0 plane of a 3D field (or the field itself below 3D)."""
    u = grid.check_field(u)
    if grid.dim < 3:
        return u, grid
    z_index = grid.counts[2] // 2  # x_j = -L/2 + j*h hits 0 at j = N/2
    plane = u[:, :, z_index]
    plane_grid = Grid(lengths=grid.lengths[:2], counts=grid.counts[:2],
                      epsilon=grid.epsilon)
    return plane, plane_grid


def write_field_slice(base: Path | str, grid: Grid, u: np.ndarray, t: float,
                      full_volume: bool = False) -> tuple[Path, Path]:
    base = Path(base)
    if full_volume:
        data, meta_grid = grid.check_field(u), grid
    else:
        data, meta_grid = slice_plane(grid, u)
    bin_path = base.with_suffix(".bin")
    txt_path = base.with_suffix(".txt")
    np.ascontiguousarray(data, dtype="<c16").tofile(bin_path)
    lines = [
        f"dims={meta_grid.dim}",
        "lengths=" + " ".join(_fmt(L) for L in meta_grid.lengths),
        "counts=" + " ".join(str(n) for n in meta_grid.counts),
        f"t={_fmt(t)}",
    ]
    txt_path.write_text("\n".join(lines) + "\n")
    return bin_path, txt_path


def read_field_slice(base: Path | str) -> tuple[dict, np.ndarray]:
    base = Path(base)
    txt_path = base.with_suffix(".txt")
    bin_path = base.with_suffix(".bin")
    if not txt_path.exists() or not bin_path.exists():
        raise ConfigError(f"missing slice file pair at {base}")
    meta = {}
    for line in txt_path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"corrupt slice header line: {line!r}")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    try:
        dims = int(meta["dims"])
        lengths = tuple(float(v) for v in meta["lengths"].split())
        counts = tuple(int(v) for v in meta["counts"].split())
        t = float(meta["t"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"corrupt slice header {txt_path}: {exc}") from exc
    if len(lengths) != dims or len(counts) != dims:
        raise ConfigError(f"slice header {txt_path} is inconsistent")
    data = np.fromfile(bin_path, dtype="<c16")
    if data.size != math.prod(counts):
        raise ConfigError(f"slice payload {bin_path} has {data.size} values, "
                          f"header promises {math.prod(counts)}")
    return ({"dims": dims, "lengths": lengths, "counts": counts, "t": t},
            data.reshape(counts))


# ---------------------------------------------------------------------------
# CSV


def write_diagnostics_csv(path: Path | str, records) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(v) for v in rec.row()])
    return path


def read_diagnostics_csv(path: Path | str) -> list[DiagnosticsRecord]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ConfigError(f"{path} does not carry the diagnostics schema "
                              f"{CSV_COLUMNS}")
        return [DiagnosticsRecord(*(float(v) for v in row)) for row in reader]


class DiagnosticsCsvWriter:
    """Observer streaming per-step records straight to disk."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(CSV_COLUMNS)

    def on_record(self, rec: DiagnosticsRecord) -> None:
        self._writer.writerow([_fmt(v) for v in rec.row()])

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SliceWriter:
    """Observer writing a field slice per emitted snapshot.

    Skips the t=0 snapshot unless asked for it, so short scenario runs emit
    exactly one slice pair at the final time.
    """

    def __init__(self, directory: Path | str, grid: Grid, dt: float,
                 full_volume: bool = False, write_initial: bool = False):
        self.directory = Path(directory)
        self.grid = grid
        self.dt = dt
        self.full_volume = full_volume
        self.write_initial = write_initial
        self.written: list[Path] = []

    def on_snapshot(self, t: float, u: np.ndarray) -> None:
        if t == 0.0 and not self.write_initial:
            return
        step = int(round(t / self.dt))
        base = self.directory / f"slice_{step:08d}"
        bin_path, _ = write_field_slice(base, self.grid, u, t,
                                        full_volume=self.full_volume)
        self.written.append(bin_path)


def write_comparison_csv(path: Path | str, rows) -> Path:
    """rows: iterables (omega, l2_final, l2_sup, energy_l1, rate-or-None)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARISON_COLUMNS)
        for row in rows:
            writer.writerow(["" if v is None else _fmt(v) for v in row])
    return path


def write_distance_series_csv(path: Path | str, times, abs_l2, rel_l2) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", "l2", "rel_l2"))
        for t, d, r in zip(times, abs_l2, rel_l2):
            writer.writerow([_fmt(t), _fmt(d), _fmt(r)])
    return path

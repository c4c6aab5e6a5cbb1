"""Parameter sweeps over the closed-form bounds and the OL recursion.

Outputs are lists of small row records in a fixed order, so that rerunning a
sweep produces byte-identical CSV.  Closed-form cells cost microseconds, so
grids are evaluated sequentially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import bounds as bd
from .model import DomainError, SystemParams, check_distortion
from .olscheme import run_to_distortion

__all__ = [
    "GAP_KINDS",
    "SweepSpec",
    "CurveRow",
    "GapGrid",
    "ConvergenceRow",
    "log_grid",
    "curve_sweep",
    "gap_surface",
    "convergence_study",
    "format_number",
    "write_csv",
]

GAP_KINDS = ("ol_minus_sep_rho_s", "sep_rho_z_minus_ol")


def log_grid(d_min: float, d_max: float, n: int) -> list[float]:
    """``n`` logarithmically spaced points from ``d_min`` to ``d_max`` inclusive."""
    if n < 1:
        raise DomainError("d_points", f"need at least one grid point, got {n}")
    if n == 1:
        return [float(d_max)]
    if not (0.0 < d_min < d_max):
        raise DomainError("d_min", f"need 0 < d_min < d_max, got {d_min!r}, {d_max!r}")
    grid = np.geomspace(d_min, d_max, n)
    grid[-1] = d_max
    return [float(v) for v in grid]


def _check_grid(name: str, values: Sequence[float]) -> list[float]:
    values = [float(v) for v in values]
    if not values:
        raise DomainError(name, "grid must be nonempty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise DomainError(name, "grid must be strictly increasing")
    return values


@dataclass(frozen=True)
class SweepSpec:
    base: SystemParams
    d_grid: tuple[float, ...]
    rho_s_grid: tuple[float, ...] | None = None
    rho_z_grid: tuple[float, ...] | None = None

    def __post_init__(self):
        d_grid = _check_grid("d_grid", self.d_grid)
        for d in d_grid:
            check_distortion(self.base, d)
        object.__setattr__(self, "d_grid", tuple(d_grid))
        for name in ("rho_s_grid", "rho_z_grid"):
            grid = getattr(self, name)
            if grid is not None:
                grid = _check_grid(name, grid)
                for rho in grid:
                    self.base.replace(**{name.removesuffix("_grid"): rho})
                object.__setattr__(self, name, tuple(grid))

    def instances(self) -> list[SystemParams]:
        rho_s = self.rho_s_grid or (self.base.rho_s,)
        rho_z = self.rho_z_grid or (self.base.rho_z,)
        return [self.base.replace(rho_s=a, rho_z=b) for a in rho_s for b in rho_z]

    @property
    def multi(self) -> bool:
        return self.rho_s_grid is not None or self.rho_z_grid is not None


@dataclass(frozen=True)
class CurveRow:
    rho_s: float
    rho_z: float
    d: float
    e_lb: float
    e_sep_rho_s: float
    e_sep_rho_z: float
    e_ol: float


def curve_sweep(spec: SweepSpec) -> list[CurveRow]:
    rows = []
    for p in spec.instances():
        for d in spec.d_grid:
            b = bd.bounds_bundle(p, d)
            rows.append(
                CurveRow(p.rho_s, p.rho_z, d, b.e_lb, b.e_sep_rho_s, b.e_sep_rho_z, b.e_ol)
            )
    return rows


@dataclass
class GapGrid:
    """Energy gap per cell; ``values[i, j]`` belongs to ``d_axis[i]`` and ``abs_rho_s_axis[j]``."""

    kind: str
    rho_z: float
    d_axis: np.ndarray
    abs_rho_s_axis: np.ndarray
    values: np.ndarray

    def rows(self) -> Iterable[tuple[float, float, float]]:
        for i, d in enumerate(self.d_axis):
            for j, r in enumerate(self.abs_rho_s_axis):
                yield float(d), float(r), float(self.values[i, j])


def gap_surface(
    rho_z: float,
    d_grid: Sequence[float],
    rho_s_grid: Sequence[float],
    kind: str = "ol_minus_sep_rho_s",
    sigma_s2: float = 1.0,
    sigma_z2: float = 1.0,
) -> GapGrid:
    if kind not in GAP_KINDS:
        raise DomainError("kind", f"unknown gap kind {kind!r}; expected one of {GAP_KINDS}")
    d_grid = _check_grid("d_grid", d_grid)
    rho_s_grid = _check_grid("rho_s_grid", rho_s_grid)
    params = [SystemParams(sigma_s2, r, sigma_z2, rho_z) for r in rho_s_grid]
    values = np.empty((len(d_grid), len(rho_s_grid)))
    for i, d in enumerate(d_grid):
        for j, p in enumerate(params):
            ol = bd.energy_ol_closed(p, d)
            if kind == "ol_minus_sep_rho_s":
                values[i, j] = ol - bd.energy_sscc_rho_s(p, d)
            else:
                values[i, j] = bd.energy_sscc_rho_z(p, d) - ol
    return GapGrid(
        kind=kind,
        rho_z=float(rho_z),
        d_axis=np.array(d_grid),
        abs_rho_s_axis=np.abs(np.array(rho_s_grid)),
        values=values,
    )


@dataclass(frozen=True)
class ConvergenceRow:
    power: float
    k: int
    energy: float
    e_ol_closed: float
    rel_gap: float
    terminated: bool


def convergence_study(
    p: SystemParams, d, power_grid: Sequence[float], max_steps: int | None = None
) -> list[ConvergenceRow]:
    """``P * K_OL(P, d)`` against the closed-form limit for each power.

    ``rel_gap`` is NaN when the closed form is zero (``d = sigma_s2``).
    """
    d = check_distortion(p, d)
    powers = [float(v) for v in power_grid]
    if not powers:
        raise DomainError("powers", "power grid must be nonempty")
    if any(v <= 0.0 for v in powers):
        raise DomainError("powers", "powers must be > 0")
    if any(b >= a for a, b in zip(powers, powers[1:])):
        raise DomainError("powers", "power grid must be strictly decreasing")
    closed = bd.energy_ol_closed(p, d)
    rows = []
    for power in powers:
        run = run_to_distortion(p, power, d, max_steps, keep_trace=False)
        gap = run.total_energy / closed - 1.0 if closed > 0.0 else math.nan
        rows.append(ConvergenceRow(power, run.k_ol, run.total_energy, closed, gap, run.terminated))
    return rows


def format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def write_csv(stream, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a header and rows, numbers at 12 significant digits, LF line endings."""
    stream.write(",".join(columns) + "\n")
    for row in rows:
        stream.write(",".join(format_number(v) for v in row) + "\n")


def row_values(row, columns: Sequence[str]) -> tuple:
    return tuple(getattr(row, c) for c in columns)


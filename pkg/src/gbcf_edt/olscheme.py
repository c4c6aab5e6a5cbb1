"""Second-moment recursion of the symmetric Ozarow-Leung feedback scheme.

The transmitter knows both receivers' estimation errors ``e1, e2`` through
the feedback links.  At every channel use it sends

    X = sqrt(P / (2 alpha (1 + |r|))) * (e1 + sel * e2),

with ``alpha = Var(e_i)``, ``r = E[e1 e2] / alpha`` and ``sel = sign(r)``
(``+1`` at ``r = 0``), so that ``E[X^2] = P`` exactly.  Receiver ``i``
applies the scalar LMMSE correction ``e_i <- e_i - g_i Y_i`` with
``g_1 = g`` and ``g_2 = sel * g``, ``g = gamma / (P + sigma_z2)`` and
``gamma^2 = P alpha (1 + |r|) / 2``.  The resulting moments are

    alpha' = alpha - gamma^2 / (P + sigma_z2)
    c'     = c - sel * gamma^2 * (P + (2 - rho_z) sigma_z2) / (P + sigma_z2)^2

Estimates start at zero, so ``alpha_0 = sigma_s2`` and ``c_0 = rho_s sigma_s2``.
As ``P -> 0`` the total energy ``P * K`` to reach ``alpha <= D`` tends to
:func:`gbcf_edt.bounds.energy_ol_closed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .model import DomainError, SystemParams, check_distortion

__all__ = [
    "DegeneracyError",
    "OlState",
    "TraceRecord",
    "OlRun",
    "GainEntry",
    "init_state",
    "step",
    "default_max_steps",
    "run_to_distortion",
    "gain_schedule",
    "threshold_crossing",
]

_CS_SLACK = 1e-12


class DegeneracyError(ArithmeticError):
    """The recursion left the region where its moments are a valid covariance."""


@dataclass(frozen=True)
class OlState:
    alpha: float
    cross_cov: float
    step: int = 0
    energy_used: float = 0.0

    @property
    def rho_tilde(self) -> float:
        return self.cross_cov / self.alpha


class TraceRecord(NamedTuple):
    step: int
    alpha: float
    rho_tilde: float
    cum_energy: float


@dataclass(frozen=True)
class GainEntry:
    """Receiver gain ``g``, combining sign ``sel`` and transmit scale for one step."""

    g: float
    sel: int
    scale: float


@dataclass
class OlRun:
    power: float
    k_ol: int
    total_energy: float
    terminated: bool
    final: OlState
    trace: list[TraceRecord] = field(default_factory=list)


def init_state(p: SystemParams) -> OlState:
    return OlState(alpha=p.sigma_s2, cross_cov=p.rho_s * p.sigma_s2)


def _check_power(power: float) -> float:
    power = float(power)
    if not (math.isfinite(power) and power > 0.0):
        raise DomainError("power", f"power must be finite and > 0, got {power!r}")
    return power


def _gain(s: OlState, p: SystemParams, power: float) -> tuple[GainEntry, float]:
    rt = s.rho_tilde
    sel = 1 if rt >= 0.0 else -1
    spread = 1.0 + abs(rt)
    gamma2 = power * s.alpha * spread / 2.0
    g = math.sqrt(gamma2) / (power + p.sigma_z2)
    scale = math.sqrt(power / (2.0 * s.alpha * spread))
    return GainEntry(g=g, sel=sel, scale=scale), gamma2


def step(s: OlState, p: SystemParams, power: float) -> OlState:
    """One channel use of the recursion."""
    power = _check_power(power)
    entry, gamma2 = _gain(s, p, power)
    total = power + p.sigma_z2
    alpha = s.alpha - gamma2 / total
    if not (alpha > 0.0 and math.isfinite(alpha)):
        raise DegeneracyError(f"error variance collapsed to {alpha!r} at step {s.step + 1}")
    cross = s.cross_cov - entry.sel * gamma2 * (power + (2.0 - p.rho_z) * p.sigma_z2) / total**2
    excess = abs(cross) - alpha
    if excess > 0.0:
        if excess > _CS_SLACK * alpha:
            raise DegeneracyError(
                f"cross covariance {cross!r} exceeds error variance {alpha!r} at step {s.step + 1}"
            )
        cross = math.copysign(alpha, cross)
    n = s.step + 1
    return OlState(alpha=alpha, cross_cov=cross, step=n, energy_used=n * power)


def default_max_steps(p: SystemParams, power: float, d) -> int:
    d = check_distortion(p, d)
    return max(1, math.ceil(8.0 * p.sigma_z2 * math.log(p.sigma_s2 / d) / power))


def _record(s: OlState, power: float) -> TraceRecord:
    return TraceRecord(s.step, s.alpha, s.rho_tilde, s.step * power)


def run_to_distortion(
    p: SystemParams, power: float, d, max_steps: int | None = None, keep_trace: bool = True
) -> OlRun:
    """Iterate until ``alpha <= d`` or ``max_steps`` channel uses.

    Non-termination is reported through ``OlRun.terminated``, not raised.
    """
    power = _check_power(power)
    d = check_distortion(p, d)
    if max_steps is None:
        max_steps = default_max_steps(p, power, d)
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")

    s = init_state(p)
    trace = [_record(s, power)] if keep_trace else []
    while s.alpha > d and s.step < max_steps:
        s = step(s, p, power)
        if keep_trace:
            trace.append(_record(s, power))
    terminated = s.alpha <= d
    return OlRun(
        power=power,
        k_ol=s.step,
        total_energy=s.step * power,
        terminated=terminated,
        final=s,
        trace=trace,
    )


def gain_schedule(p: SystemParams, power: float, steps: int) -> list[GainEntry]:
    """Gains used at steps ``0 .. steps-1`` of the recursion from :func:`init_state`."""
    power = _check_power(power)
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    s = init_state(p)
    schedule = []
    for _ in range(steps):
        entry, _ = _gain(s, p, power)
        schedule.append(entry)
        s = step(s, p, power)
    return schedule


def threshold_crossing(trace) -> TraceRecord | None:
    """First record whose error correlation is ``<= 0``.

    Only meaningful for runs started with ``rho_s > 0``; with ``rho_s < 0``
    use the mirrored parameters (the recursion is symmetric in the sign).
    """
    for rec in trace:
        if rec.rho_tilde <= 0.0:
            return rec
    return None

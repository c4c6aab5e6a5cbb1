"""Sample-path simulation of the OL scheme over the broadcast channel.

Each source pair ``j`` owns the stream ``mix_seed(seed, j)`` (see
:mod:`gbcf_edt.model`).  Draw order inside a stream: normals 0 and 1 give
the source pair, normals ``2 + 2k`` and ``3 + 2k`` give the noise pair of
channel use ``k``.  Gains and transmit scaling come from the deterministic
recursion (:func:`gbcf_edt.olscheme.gain_schedule`), so samples are
independent and are split into fixed-size chunks for the worker threads.
Chunk boundaries never depend on the thread count, each chunk reduces its
samples with numpy's pairwise summation, and chunk partials are combined with
the exactly rounded ``math.fsum``, so results are bit-identical for any
number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .model import DomainError, SystemParams, check_distortion, chol2, mix_seed, stream_normals
from .olscheme import DegeneracyError, GainEntry, gain_schedule, run_to_distortion

__all__ = [
    "NonTerminationError",
    "McConfig",
    "McReport",
    "TrajectoryRow",
    "simulate",
    "mse_trajectory",
    "default_threads",
]

CHUNK = 8192
THREADS_ENV = "GBCF_EDT_THREADS"


class NonTerminationError(RuntimeError):
    """The deterministic recursion did not reach the target within max_steps."""


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise DomainError("threads", f"{THREADS_ENV} must be an integer, got {env!r}")
        if n >= 1:
            return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class McConfig:
    params: SystemParams
    power: float
    distortion: float
    n_samples: int
    seed: int = 0
    max_steps: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "distortion", check_distortion(self.params, self.distortion))
        if not (math.isfinite(self.power) and self.power > 0.0):
            raise DomainError("power", f"power must be finite and > 0, got {self.power!r}")
        if int(self.n_samples) < 1:
            raise DomainError("samples", f"n_samples must be >= 1, got {self.n_samples!r}")
        if self.max_steps is not None and int(self.max_steps) < 1:
            raise DomainError("max_steps", f"max_steps must be >= 1, got {self.max_steps!r}")


@dataclass
class McReport:
    k_used: int
    n_samples: int
    power: float
    analytic_alpha: float
    empirical_mse_1: float
    empirical_mse_2: float
    empirical_power_per_step: float
    total_energy_per_sample: float
    ci_halfwidth_mse: float
    feedback_consistent: bool
    seed_echo: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrajectoryRow:
    step: int
    empirical_alpha: float
    analytic_alpha: float
    empirical_alpha_1: float
    empirical_alpha_2: float
    empirical_rho: float
    analytic_rho: float
    empirical_power: float


@dataclass
class _Sums:
    """Per-step moment sums over one chunk of samples; index 0 is before transmission."""

    count: int
    e11: np.ndarray
    e22: np.ndarray
    e12: np.ndarray
    x2: np.ndarray
    final_e1_4: float
    final_e2_4: float
    consistent: bool


def _simulate_chunk(cfg: McConfig, schedule: list[GainEntry], lo: int, hi: int) -> _Sums:
    p = cfg.params
    k_used = len(schedule)
    keys = mix_seed(cfg.seed, np.arange(lo, hi, dtype=np.uint64))
    src, noise = chol2(p.sigma_s2, p.rho_s), chol2(p.sigma_z2, p.rho_z)

    u = stream_normals(keys, 0, 2)
    s1 = src.l11 * u[:, 0]
    s2 = src.l21 * u[:, 0] + src.l22 * u[:, 1]
    rx1 = np.zeros_like(s1)
    rx2 = np.zeros_like(s2)
    tx1 = np.zeros_like(s1)
    tx2 = np.zeros_like(s2)

    e11 = np.zeros(k_used + 1)
    e22 = np.zeros(k_used + 1)
    e12 = np.zeros(k_used + 1)
    x2 = np.zeros(k_used + 1)
    e1, e2 = s1, s2
    e11[0], e22[0], e12[0] = np.sum(e1 * e1), np.sum(e2 * e2), np.sum(e1 * e2)
    consistent = True
    for k, entry in enumerate(schedule):
        # transmitter works from its feedback-reconstructed copy of the receiver estimates
        x = entry.scale * ((s1 - tx1) + entry.sel * (s2 - tx2))
        w = stream_normals(keys, 2 + 2 * k, 2)
        y1 = x + noise.l11 * w[:, 0]
        y2 = x + (noise.l21 * w[:, 0] + noise.l22 * w[:, 1])
        g2 = entry.sel * entry.g
        rx1 = rx1 + entry.g * y1
        rx2 = rx2 + g2 * y2
        tx1 = tx1 + entry.g * y1
        tx2 = tx2 + g2 * y2
        consistent = consistent and np.array_equal(rx1, tx1) and np.array_equal(rx2, tx2)
        e1, e2 = s1 - rx1, s2 - rx2
        e11[k + 1], e22[k + 1], e12[k + 1] = np.sum(e1 * e1), np.sum(e2 * e2), np.sum(e1 * e2)
        x2[k + 1] = np.sum(x * x)
    return _Sums(
        count=hi - lo,
        e11=e11,
        e22=e22,
        e12=e12,
        x2=x2,
        final_e1_4=float(np.sum(e1**4)),
        final_e2_4=float(np.sum(e2**4)),
        consistent=bool(consistent),
    )


def _fsum_columns(rows: list[np.ndarray]) -> np.ndarray:
    # exactly rounded, hence independent of chunk order
    stacked = np.stack(rows)
    return np.array([math.fsum(stacked[:, j]) for j in range(stacked.shape[1])])


def _run_sums(cfg: McConfig, threads: int | None):
    p = cfg.params
    run = run_to_distortion(p, cfg.power, cfg.distortion, cfg.max_steps)
    if not run.terminated:
        raise NonTerminationError(
            f"recursion did not reach d={cfg.distortion!r} within {run.k_ol} steps"
        )
    schedule = gain_schedule(p, cfg.power, run.k_ol)
    m = int(cfg.n_samples)
    bounds = [(lo, min(lo + CHUNK, m)) for lo in range(0, m, CHUNK)]
    threads = max(1, threads or default_threads())
    if threads == 1 or len(bounds) == 1:
        parts = [_simulate_chunk(cfg, schedule, lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _simulate_chunk(cfg, schedule, *b), bounds))
    moments = {
        name: _fsum_columns([getattr(q, name) for q in parts]) / m
        for name in ("e11", "e22", "e12", "x2")
    }
    moments["e1_4"] = math.fsum(q.final_e1_4 for q in parts) / m
    moments["e2_4"] = math.fsum(q.final_e2_4 for q in parts) / m
    consistent = all(q.consistent for q in parts)
    return run, moments, consistent


def simulate(cfg: McConfig, threads: int | None = None) -> McReport:
    """Run ``cfg.n_samples`` independent source pairs through ``K_OL`` channel uses."""
    run, mom, consistent = _run_sums(cfg, threads)
    m = int(cfg.n_samples)
    k = run.k_ol
    mse1, mse2 = float(mom["e11"][k]), float(mom["e22"][k])
    var4 = max(mom["e1_4"] - mse1**2, mom["e2_4"] - mse2**2, 0.0)
    power = math.fsum(mom["x2"][1:]) / k if k > 0 else 0.0
    energy = k * power
    if not all(math.isfinite(v) for v in (mse1, mse2, var4, power, energy)):
        raise DegeneracyError("non-finite empirical moment")
    return McReport(
        k_used=k,
        n_samples=m,
        power=cfg.power,
        analytic_alpha=run.final.alpha,
        empirical_mse_1=mse1,
        empirical_mse_2=mse2,
        empirical_power_per_step=power,
        total_energy_per_sample=energy,
        ci_halfwidth_mse=3.0 * math.sqrt(var4 / m),
        feedback_consistent=consistent,
        seed_echo=int(cfg.seed),
    )


def mse_trajectory(cfg: McConfig, threads: int | None = None) -> list[TrajectoryRow]:
    """Empirical error moments at every step next to the deterministic trace."""
    run, mom, _ = _run_sums(cfg, threads)
    a1, a2, cross, power = mom["e11"], mom["e22"], mom["e12"], mom["x2"]
    rows = []
    for rec in run.trace:
        k = rec.step
        rows.append(
            TrajectoryRow(
                step=k,
                empirical_alpha=float(0.5 * (a1[k] + a2[k])),
                analytic_alpha=rec.alpha,
                empirical_alpha_1=float(a1[k]),
                empirical_alpha_2=float(a2[k]),
                empirical_rho=float(cross[k] / math.sqrt(a1[k] * a2[k])),
                analytic_rho=rec.rho_tilde,
                empirical_power=float(power[k]),
            )
        )
    return rows

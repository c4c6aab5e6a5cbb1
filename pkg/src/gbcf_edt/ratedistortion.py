"""Rate-distortion functions of the correlated Gaussian source pair, in bits.

``rate_single`` is the scalar Gaussian function ``0.5 * log2(sigma_s2 / D)``.
``rate_joint`` is the rate needed to describe both sources with one stream so
that each is recovered at distortion ``D``.  It has two regimes, split at
``D = sigma_s2 * (1 - |rho_s|)``; the boundary point belongs to the
low-distortion regime.
"""

from __future__ import annotations

import math

from .model import SystemParams, check_distortion

__all__ = ["rate_single", "rate_joint", "joint_branch_point"]


def rate_single(p: SystemParams, d) -> float:
    d = check_distortion(p, d)
    return 0.5 * math.log2(p.sigma_s2 / d)


def joint_branch_point(p: SystemParams) -> float:
    return p.sigma_s2 * (1.0 - abs(p.rho_s))


def _joint_high(p: SystemParams, d: float) -> float:
    a = abs(p.rho_s)
    return 0.5 * math.log2(p.sigma_s2 * (1.0 + a) / (2.0 * d - p.sigma_s2 * (1.0 - a)))


def _joint_low(p: SystemParams, d: float) -> float:
    return 0.5 * math.log2(p.sigma_s2**2 * (1.0 - p.rho_s**2) / (d * d))


def rate_joint(p: SystemParams, d) -> float:
    d = check_distortion(p, d)
    if d > joint_branch_point(p):
        rate = _joint_high(p, d)
    else:
        rate = _joint_low(p, d)
    # log of a ratio that is 1 in exact arithmetic at d = sigma_s2
    return 0.0 if -1e-12 <= rate < 0.0 else rate

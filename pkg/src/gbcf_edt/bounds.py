"""Closed-form energy-distortion tradeoff bounds.

Energies are per source-pair sample.  Natural logarithms are used
throughout; bit rates from :mod:`gbcf_edt.ratedistortion` are converted
with the explicit constant ``LN2``.

* ``energy_lower_bound``: cut-set converse, max of the single-receiver bound
  and the merged two-output receiver bound.
* ``energy_sscc_rho_s``: joint compression into one stream sent as a common
  message at the minimum energy per bit ``2 sigma_z2 ln 2``.
* ``energy_sscc_rho_z``: separate compression, two streams over the LQG
  channel code; does not depend on either correlation.
* ``energy_ol_closed``: the small-power limit of the Ozarow-Leung linear
  feedback scheme, with a phase change at ``distortion_threshold``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from . import ratedistortion as rd
from .model import SystemParams, check_distortion

__all__ = [
    "LN2",
    "EnergyBounds",
    "min_energy_per_bit_common",
    "min_energy_per_bit_lqg",
    "energy_lower_bound",
    "energy_sscc_rho_s",
    "energy_sscc_rho_z",
    "distortion_threshold",
    "energy_ol_closed",
    "bounds_bundle",
]

LN2 = math.log(2.0)


def _nonneg(e: float) -> float:
    # cancellation noise near d = sigma_s2
    if -1e-12 <= e < 0.0:
        return 0.0
    return e


@dataclass(frozen=True)
class EnergyBounds:
    e_lb: float
    e_sep_rho_s: float
    e_sep_rho_z: float
    e_ol: float
    d_th: float

    def as_dict(self) -> dict:
        return asdict(self)


def min_energy_per_bit_common(sigma_z2: float) -> float:
    """Minimum energy per reliably delivered bit on the Gaussian channel."""
    return 2.0 * float(sigma_z2) * LN2


def min_energy_per_bit_lqg(sigma_z2: float) -> float:
    """Minimum energy per *pair* of bits for the LQG code, symmetric case."""
    return 2.0 * float(sigma_z2) * LN2


def energy_lower_bound(p: SystemParams, d) -> float:
    d = check_distortion(p, d)
    single = 2.0 * rd.rate_single(p, d)
    merged = (1.0 + p.rho_z) * rd.rate_joint(p, d)
    return _nonneg(p.sigma_z2 * LN2 * max(single, merged))


def _sep_high(p: SystemParams, d: float) -> float:
    a = abs(p.rho_s)
    return p.sigma_z2 * math.log(p.sigma_s2 * (1.0 + a) / (2.0 * d - p.sigma_s2 * (1.0 - a)))


def _sep_low(p: SystemParams, d: float) -> float:
    return p.sigma_z2 * math.log(p.sigma_s2**2 * (1.0 - p.rho_s**2) / (d * d))


def energy_sscc_rho_s(p: SystemParams, d) -> float:
    d = check_distortion(p, d)
    if d > rd.joint_branch_point(p):
        e = _sep_high(p, d)
    else:
        e = _sep_low(p, d)
    return _nonneg(e)


def energy_sscc_rho_z(p: SystemParams, d) -> float:
    d = check_distortion(p, d)
    return _nonneg(2.0 * p.sigma_z2 * math.log(p.sigma_s2 / d))


def distortion_threshold(p: SystemParams) -> float:
    """Distortion at which the OL error correlation reaches zero (small-power limit)."""
    return p.sigma_s2 * (2.0 - p.rho_z - abs(p.rho_s)) / (2.0 - p.rho_z)


def _ol_high(p: SystemParams, d: float) -> float:
    a, rz, s = abs(p.rho_s), p.rho_z, p.sigma_s2
    denom = d + (2.0 - rz) * (d - s) + s * a
    return 2.0 * p.sigma_z2 / (3.0 - rz) * math.log(s * (1.0 + a) / denom)


def _ol_low(p: SystemParams, d: float) -> float:
    a, rz, s = abs(p.rho_s), p.rho_z, p.sigma_s2
    phase2 = math.log((2.0 - rz - a) * s / ((2.0 - rz) * d))
    phase1 = math.log((2.0 - rz) * (1.0 + a) / (2.0 - rz - a)) / (3.0 - rz)
    return 2.0 * p.sigma_z2 * (phase2 + phase1)


def energy_ol_closed(p: SystemParams, d) -> float:
    d = check_distortion(p, d)
    if d >= distortion_threshold(p):
        e = _ol_high(p, d)
    else:
        e = _ol_low(p, d)
    return _nonneg(e)


def bounds_bundle(p: SystemParams, d) -> EnergyBounds:
    d = check_distortion(p, d)
    return EnergyBounds(
        e_lb=energy_lower_bound(p, d),
        e_sep_rho_s=energy_sscc_rho_s(p, d),
        e_sep_rho_z=energy_sscc_rho_z(p, d),
        e_ol=energy_ol_closed(p, d),
        d_th=distortion_threshold(p),
    )

"""System parameters, distortion targets and correlated Gaussian sampling.

The symmetric two-user broadcast channel with feedback is fixed by four
numbers: source variance and correlation ``(sigma_s2, rho_s)`` and noise
variance and correlation ``(sigma_z2, rho_z)``.  Both pairs describe a 2x2
covariance ``variance * [[1, rho], [rho, 1]]``.

Random numbers
--------------
All randomness comes from counter-based SplitMix64 streams.  A stream is a
64-bit key; its ``j``-th output is ``splitmix64(key + (j + 1) * GOLDEN)``,
so any draw of any stream can be computed directly without stepping through
the ones before it.  Uniforms take the top 53 bits, offset by half an ulp so
they lie strictly inside (0, 1), and normals are produced by the inverse
normal CDF (``scipy.special.ndtri``).  Per-sample streams use the key
``mix_seed(master_seed, sample_index)``, which makes Monte-Carlo results
independent of how samples are split between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = [
    "DomainError",
    "SystemParams",
    "DistortionTarget",
    "Cholesky2",
    "validate_params",
    "check_distortion",
    "chol2",
    "splitmix64",
    "mix_seed",
    "stream_normals",
    "NormalStream",
    "sample_pair",
    "sample_pairs",
]

_MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


class DomainError(ValueError):
    """A parameter lies outside the model's admissible region.

    ``field`` names the offending quantity so callers (the CLI in
    particular) can report it without parsing the message.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _require_variance(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0.0):
        raise DomainError(name, f"variance must be finite and > 0, got {value!r}")
    return value


def _require_correlation(name: str, value: float) -> float:
    value = float(value)
    if not abs(value) < 1.0:
        raise DomainError(name, f"correlation must satisfy |rho| < 1, got {value!r}")
    return value


@dataclass(frozen=True)
class SystemParams:
    """Symmetric GBCF instance ``(sigma_s2, rho_s, sigma_z2, rho_z)``."""

    sigma_s2: float
    rho_s: float
    sigma_z2: float
    rho_z: float

    def __post_init__(self):
        object.__setattr__(self, "sigma_s2", _require_variance("sigma_s2", self.sigma_s2))
        object.__setattr__(self, "rho_s", _require_correlation("rho_s", self.rho_s))
        object.__setattr__(self, "sigma_z2", _require_variance("sigma_z2", self.sigma_z2))
        object.__setattr__(self, "rho_z", _require_correlation("rho_z", self.rho_z))

    def replace(self, **changes) -> "SystemParams":
        fields = dict(
            sigma_s2=self.sigma_s2, rho_s=self.rho_s, sigma_z2=self.sigma_z2, rho_z=self.rho_z
        )
        fields.update(changes)
        return SystemParams(**fields)


def validate_params(sigma_s2, rho_s, sigma_z2, rho_z) -> SystemParams:
    """Build a :class:`SystemParams` from raw numbers, raising DomainError on failure."""
    return SystemParams(sigma_s2, rho_s, sigma_z2, rho_z)


@dataclass(frozen=True)
class DistortionTarget:
    """Per-user mean-square error target, ``0 < d <= sigma_s2``."""

    d: float

    @classmethod
    def for_params(cls, params: SystemParams, d: float) -> "DistortionTarget":
        return cls(check_distortion(params, d))


def check_distortion(params: SystemParams, d) -> float:
    """Return ``d`` as a float after checking ``0 < d <= sigma_s2``.

    Accepts either a bare number or a :class:`DistortionTarget`.
    """
    if isinstance(d, DistortionTarget):
        d = d.d
    d = float(d)
    if not (d > 0.0 and d <= params.sigma_s2):
        raise DomainError(
            "d", f"distortion must satisfy 0 < d <= sigma_s2 = {params.sigma_s2!r}, got {d!r}"
        )
    return d


@dataclass(frozen=True)
class Cholesky2:
    """Lower-triangular factor ``[[l11, 0], [l21, l22]]`` of a 2x2 covariance."""

    l11: float
    l21: float
    l22: float

    def covariance(self) -> np.ndarray:
        lower = np.array([[self.l11, 0.0], [self.l21, self.l22]])
        return lower @ lower.T

    @classmethod
    def identity(cls) -> "Cholesky2":
        return cls(1.0, 0.0, 1.0)


def chol2(variance: float, rho: float) -> Cholesky2:
    """Cholesky factor of ``variance * [[1, rho], [rho, 1]]``."""
    variance = _require_variance("variance", variance)
    rho = _require_correlation("rho", rho)
    scale = math.sqrt(variance)
    return Cholesky2(scale, scale * rho, scale * math.sqrt(1.0 - rho * rho))


def splitmix64(x) -> np.ndarray:
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z ^ (z >> np.uint64(30))
        z = z * np.uint64(0xBF58476D1CE4E5B9)
        z = z ^ (z >> np.uint64(27))
        z = z * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def mix_seed(master_seed: int, index) -> np.ndarray:
    """Stream key for sample ``index`` under ``master_seed``.

    ``key = splitmix64(splitmix64(seed) ^ splitmix64(index + GOLDEN))``;
    vectorized over ``index``.
    """
    seed = np.array([int(master_seed) & _MASK64], dtype=np.uint64)
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return splitmix64(splitmix64(seed)[0] ^ splitmix64(idx + np.uint64(GOLDEN)))


def stream_normals(keys, start: int, count: int) -> np.ndarray:
    """Standard normals ``start .. start+count-1`` of every stream in ``keys``.

    Returns an array of shape ``keys.shape + (count,)``.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    offsets = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = keys[..., None] + offsets * np.uint64(GOLDEN)
    bits = splitmix64(state) >> np.uint64(11)
    uniforms = (bits.astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)
    return ndtri(uniforms)


class NormalStream:
    """Sequential view of one SplitMix64 stream of standard normals.

    A stream belongs to a single worker; it is not thread-safe.
    """

    def __init__(self, key: int):
        self.key = int(key) & _MASK64
        self.position = 0

    @classmethod
    def from_seed(cls, seed: int) -> "NormalStream":
        return cls(int(mix_seed(seed, 0)))

    def standard_normal(self, size: int = 1) -> np.ndarray:
        out = stream_normals(np.array(self.key, dtype=np.uint64), self.position, size)
        self.position += size
        return out


def sample_pair(generator, factor: Cholesky2) -> tuple[float, float]:
    """Draw one zero-mean pair with covariance ``factor * factor.T``.

    ``generator`` is anything with a ``standard_normal(size)`` method: a
    :class:`NormalStream` or a ``numpy.random.Generator``.
    """
    n1, n2 = generator.standard_normal(2)
    return float(factor.l11 * n1), float(factor.l21 * n1 + factor.l22 * n2)


def sample_pairs(generator, factor: Cholesky2, n: int) -> np.ndarray:
    """``n`` pairs as an ``(n, 2)`` array; row ``i`` equals the ``i``-th :func:`sample_pair` call."""
    u = np.asarray(generator.standard_normal(2 * n), dtype=float).reshape(n, 2)
    out = np.empty_like(u)
    out[:, 0] = factor.l11 * u[:, 0]
    out[:, 1] = factor.l21 * u[:, 0] + factor.l22 * u[:, 1]
    return out

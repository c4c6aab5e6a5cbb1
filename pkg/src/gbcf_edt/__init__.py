"""Energy-distortion tradeoff for correlated Gaussian sources over the
two-user Gaussian broadcast channel with feedback."""

from .bounds import (
    EnergyBounds,
    bounds_bundle,
    distortion_threshold,
    energy_lower_bound,
    energy_ol_closed,
    energy_sscc_rho_s,
    energy_sscc_rho_z,
    min_energy_per_bit_common,
)
from .model import Cholesky2, DistortionTarget, DomainError, SystemParams, chol2, validate_params
from .olscheme import OlRun, OlState, run_to_distortion
from .ratedistortion import rate_joint, rate_single

__version__ = "0.1.0"

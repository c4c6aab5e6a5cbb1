import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbcf_edt.model import SystemParams
from gbcf_edt.ratedistortion import _joint_high, _joint_low, joint_branch_point, rate_joint, rate_single

RHO_GRID = [-0.9, -0.5, -0.1, 0.1, 0.5, 0.9]


@pytest.mark.parametrize(
    "sigma_s2, d, expected", [(1.0, 1.0, 0.0), (1.0, 0.5, 0.5), (4.0, 1.0, 1.0)]
)
def test_rate_single(sigma_s2, d, expected):
    assert rate_single(SystemParams(sigma_s2, 0.3, 1.0, 0.0), d) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("rho_s", [-0.9, 0.0, 0.4, 0.99])
def test_rate_joint_vanishes_at_source_variance(rho_s):
    assert rate_joint(SystemParams(1.0, rho_s, 1.0, 0.0), 1.0) == 0.0


def test_rate_joint_upper_branch():
    p = SystemParams(1.0, 0.9, 1.0, 0.0)
    assert rate_joint(p, 0.5) == pytest.approx(0.5 * math.log2(1.9 / 0.9), rel=1e-14)
    assert rate_joint(p, 0.5) == pytest.approx(0.539, abs=5e-4)


def test_rate_joint_lower_branch():
    p = SystemParams(1.0, 0.9, 1.0, 0.0)
    assert rate_joint(p, 0.05) == pytest.approx(0.5 * math.log2(0.19 / 0.0025), rel=1e-14)
    assert rate_joint(p, 0.05) == pytest.approx(3.124, abs=5e-4)


def test_branch_point_belongs_to_lower_branch():
    p = SystemParams(1.0, 0.6, 1.0, 0.0)
    b = joint_branch_point(p)
    assert rate_joint(p, b) == _joint_low(p, b)


@pytest.mark.parametrize("rho_s", RHO_GRID)
def test_continuity_at_branch_point(rho_s):
    p = SystemParams(1.0, rho_s, 1.0, 0.0)
    b = joint_branch_point(p)
    a = abs(rho_s)
    both = 0.5 * math.log2((1 + a) / (1 - a))
    assert _joint_high(p, b) == pytest.approx(both, abs=1e-12)
    assert _joint_low(p, b) == pytest.approx(both, abs=1e-12)
    eps = 1e-12
    assert abs(rate_joint(p, b * (1 - eps)) - rate_joint(p, b * (1 + eps))) <= 1e-9


@pytest.mark.parametrize("rho_s", RHO_GRID + [0.0])
@pytest.mark.parametrize("d", [0.02, 0.05, 0.1, 0.3, 0.5, 0.8, 0.95, 1.0])
def test_joint_rate_sandwich(rho_s, d):
    p = SystemParams(1.0, rho_s, 1.0, 0.0)
    single, joint = rate_single(p, d), rate_joint(p, d)
    assert single - 1e-12 <= joint <= 2 * single + 1e-12


@given(
    st.floats(0.1, 10.0),
    st.floats(-0.99, 0.99),
    st.floats(0.01, 0.98),
    st.floats(0.001, 0.5),
)
def test_monotone_in_d_and_sign_symmetric(sigma_s2, rho_s, frac, step):
    p = SystemParams(sigma_s2, rho_s, 1.0, 0.0)
    mirror = p.replace(rho_s=-rho_s)
    d1 = frac * sigma_s2
    d2 = min(sigma_s2, d1 * (1 + step))
    assert rate_single(p, d2) < rate_single(p, d1)
    assert rate_joint(p, d2) < rate_joint(p, d1)
    assert rate_joint(p, d1) == rate_joint(mirror, d1)
    assert rate_single(p, d1) == rate_single(mirror, d1)

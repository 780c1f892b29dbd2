import math

import pytest
from scipy import optimize

from blindspot.analytic import BlindSpotParams, b_2plus, g
from blindspot.design import DesignError, required_anchor_intensity
from blindspot.geometry import EnvParams


def z_of(lr, mean=8.0):
    return EnvParams.normalized(mean, lr)


def test_no_obstacles_closed_form():
    z = EnvParams(0.0, 0.5, 1.0)
    res = required_anchor_intensity(z, 0.1)
    root = optimize.brentq(lambda lam: g(math.pi, lam) - 0.1, 1e-9, 100.0, xtol=1e-15)
    assert abs(res.lambda_star - root) / root <= 1e-4


def test_threshold_met():
    z = z_of(0.5)
    res = required_anchor_intensity(z, 0.1)
    assert 0.1 - 1e-3 <= res.achieved <= 0.1
    assert res.achieved == pytest.approx(b_2plus(BlindSpotParams(res.lambda_star, z)), abs=1e-9)
    assert res.mean_anchors(z) == pytest.approx(res.lambda_star * math.pi)
    assert res.history and res.iterations > 0


def test_near_one():
    res = required_anchor_intensity(z_of(0.5), 0.999999)
    assert res.lambda_star < 0.05
    assert required_anchor_intensity(z_of(0.5), 1.0).lambda_star == 0.0


def test_monotone():
    lam = lambda z, mu: required_anchor_intensity(z, mu, tol=1e-4).lambda_star
    assert lam(z_of(0.5), 0.1) > lam(z_of(0.5), 0.5)
    assert lam(z_of(1.0), 0.1) >= lam(z_of(0.5), 0.1)
    assert lam(z_of(0.5, mean=12.0), 0.1) >= lam(z_of(0.5), 0.1)


def test_invalid():
    with pytest.raises(ValueError):
        required_anchor_intensity(z_of(0.5), 0.0)
    with pytest.raises(ValueError):
        required_anchor_intensity(z_of(0.5), 0.1, tol=0.0)


def test_budget():
    with pytest.raises(DesignError):
        required_anchor_intensity(z_of(0.5), 1e-12, max_doublings=1)

"""Key rates, threshold searches, and the device-angle optimizer."""

import math

import numpy as np
import pytest

from diqkd.entropy import binary_entropy
from diqkd.errors import BracketError, DomainError
from diqkd.keyrate import (ProtocolConfig, RateResult, bias_threshold,
                           optimize_implementation, optimize_q, rate_bias,
                           rate_two_basis, threshold_search)
from diqkd.models import Implementation

SQRT2 = math.sqrt(2.0)


def _cfg(q=0.0, p_prime=0.5):
    return ProtocolConfig(variant="two-basis", q=q, p_prime=p_prime)


# ------------------------------------------------------------------ two-basis

def test_rate_two_basis_noiseless_anchor():
    # noiseless, q=0: one certified bit, halved by sifting at p' = 1/2
    # (up to the lower-vertex discretization of the tradeoff curve)
    res = rate_two_basis(0.0, _cfg())
    assert isinstance(res, RateResult)
    assert res.rate == pytest.approx(0.5, abs=2e-3)
    assert res.H_cond == 0.0
    assert res.certified
    assert res.meta["sift"] == pytest.approx(0.5)


def test_rate_two_basis_preprocessing_anchor():
    res = rate_two_basis(0.0, _cfg(q=0.3))
    assert res.rate == pytest.approx(0.5 * (1.0 - binary_entropy(0.3)),
                                     abs=2e-3)


def test_rate_two_basis_finer_curve_tightens():
    coarse = rate_two_basis(0.0, _cfg(), curve_resolution=500).rate
    fine = rate_two_basis(0.0, _cfg(), curve_resolution=5000).rate
    assert fine >= coarse - 1e-12
    assert fine == pytest.approx(0.5, abs=3e-4)


def test_rate_two_basis_nonincreasing_in_delta():
    rates = [rate_two_basis(d, _cfg()).rate for d in np.linspace(0.0, 0.12, 25)]
    assert all(b <= a + 1e-12 for a, b in zip(rates, rates[1:]))


def test_rate_two_basis_full_sift_at_extreme_weight():
    res = rate_two_basis(0.02, _cfg(p_prime=1.0))
    assert res.meta["sift"] == 1.0
    assert res.meta["p"] == 1.0


def test_rate_two_basis_rejects_wrong_variant():
    cfg = ProtocolConfig(variant="single-basis-bias", q=0.0, p_prime=0.5)
    with pytest.raises(DomainError):
        rate_two_basis(0.0, cfg)


def test_protocol_config_validation():
    with pytest.raises(DomainError):
        ProtocolConfig(variant="nope", q=0.0, p_prime=0.5)
    with pytest.raises(DomainError):
        ProtocolConfig(variant="two-basis", q=0.7, p_prime=0.5)
    with pytest.raises(DomainError):
        ProtocolConfig(variant="two-basis", q=0.0, p_prime=1.2)


# ------------------------------------------------------------------ bias rate

def _symmetric_impl(eta=1.0, v=1.0):
    return Implementation(theta=math.pi / 2, phi_a=(0.0, math.pi / 2),
                          phi_b=(math.pi / 4, -math.pi / 4, 0.0), v=v, eta=eta)


def test_rate_bias_ideal_devices_reduce_to_entropy_difference():
    # maximally entangled state, perfect detectors: S = 2 sqrt(2), a1 = 0,
    # envelope = 1 and H(A|B) = h(q), so the rate is exactly 1 - h(q)
    for q in (0.0, 0.2):
        res = rate_bias(_symmetric_impl(), q)
        assert res.rate == pytest.approx(1.0 - binary_entropy(q), abs=1e-9)
        assert not res.certified


def test_rate_bias_certified_sits_epsilon_below_conjectured():
    impl = _symmetric_impl(eta=0.93)
    q = 0.3
    conj = rate_bias(impl, q)
    cert = rate_bias(impl, q, mode="certified", epsilon=1e-6)
    assert cert.certified
    assert cert.rate == pytest.approx(conj.rate - 1e-6, abs=1e-9)
    assert cert.meta["achieved_epsilon"] == 1e-6
    assert cert.meta["covering_size"] > 0


def test_rate_bias_rejects_unknown_mode():
    with pytest.raises(DomainError):
        rate_bias(_symmetric_impl(), 0.0, mode="exact")


# ----------------------------------------------------------------- searches

def test_threshold_search_linear_toy():
    for fn in (lambda e: 0.3 - e, lambda e: e - 0.3):
        found = threshold_search(fn, 0.0, 1.0, tol=1e-9)
        assert found == pytest.approx(0.3, abs=1e-8)


def test_threshold_search_respects_tolerance():
    crossing = 1.0 / 3.0
    for tol in (1e-3, 1e-6):
        found = threshold_search(lambda e: crossing - e, 0.0, 1.0, tol=tol)
        assert abs(found - crossing) <= tol


def test_threshold_search_needs_a_bracket():
    with pytest.raises(BracketError):
        threshold_search(lambda e: 1.0 + e, 0.0, 1.0)


def test_optimize_q_quadratic_toy():
    q_star, val = optimize_q(lambda q: -(q - 0.2) ** 2,
                             np.linspace(0.0, 0.5, 11))
    assert q_star == pytest.approx(0.2, abs=1e-6)
    assert val == pytest.approx(0.0, abs=1e-12)


def test_optimize_q_empty_grid():
    with pytest.raises(DomainError):
        optimize_q(lambda q: q, [])


# ----------------------------------------------------------------- optimizer

def test_optimize_implementation_recovers_ideal_at_unit_efficiency():
    impl, res = optimize_implementation(1.0, 0.0, 0.0, n_starts=4, seed=1)
    assert res.rate == pytest.approx(1.0, abs=1e-6)
    assert res.meta["converged"]
    # the optimal state at eta = 1 is (close to) maximally entangled
    assert impl.theta == pytest.approx(math.pi / 2, abs=5e-3)


def test_optimize_implementation_beats_symmetric_at_low_efficiency():
    eta = 0.9
    impl, res = optimize_implementation(eta, 0.0, 0.0, n_starts=6, seed=0)
    symmetric = rate_bias(_symmetric_impl(eta=eta), 0.0)
    assert res.rate > symmetric.rate + 1e-3
    assert impl.theta < math.pi / 2 - 0.1  # partial entanglement pays off

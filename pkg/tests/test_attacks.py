"""Explicit eavesdropping strategies and their induced rate upper bounds."""

import math

import numpy as np
import pytest

from conftest import random_quantum_points

from diqkd.attacks import (AttackValue, bias_attack,
                           conjectured_rate_upper_bound, two_basis_attack)
from diqkd.correlations import CHSH_MAX
from diqkd.entropy import binary_entropy
from diqkd.errors import DomainError
from diqkd.keyrate import ProtocolConfig, rate_two_basis, rate_bias, \
    threshold_search
from diqkd.models import Implementation
from diqkd.tradeoff import qubit_bound_bias, qubit_bound_two_basis


def test_two_basis_attack_anchors():
    assert two_basis_attack(0.5, 2.3).entropy == 1.0
    # maximal violation leaves the eavesdropper nothing beyond preprocessing
    assert two_basis_attack(0.0, CHSH_MAX).entropy == pytest.approx(1.0,
                                                                    abs=1e-9)
    val = two_basis_attack(0.2, 2.4)
    assert isinstance(val, AttackValue)
    assert {"x_star", "slope", "E"} <= set(val.params)


def test_two_basis_attack_domain():
    with pytest.raises(DomainError):
        two_basis_attack(0.1, 1.9)
    with pytest.raises(DomainError):
        two_basis_attack(0.1, 2.9)


def test_two_basis_attack_dominates_certified_bound():
    # an explicit attack can never dip below the certified entropy bound
    for q in (0.0, 0.2, 0.45):
        for S in np.linspace(2.0 + 1e-9, CHSH_MAX - 1e-9, 30):
            att = two_basis_attack(q, float(S)).entropy
            assert att >= qubit_bound_two_basis(q, 0.5, float(S)) - 1e-9


def test_two_basis_attack_rides_entropy_kernel_above_tangency():
    # beyond the tangency point the attack entropy is the bare kernel
    # evaluated at the white-noise correlator S / (2 sqrt(2))
    from diqkd.entropy import f_q

    for q in (0.05, 0.3):
        att = two_basis_attack(q, 2.8)
        assert att.params["E"] > att.params["x_star"]
        assert att.entropy == pytest.approx(
            f_q(q, 2.8 / (2.0 * math.sqrt(2.0))), abs=1e-12)
    # at maximal violation both correlators coincide and attack == bound
    for q in (0.05, 0.3):
        assert two_basis_attack(q, CHSH_MAX).entropy == pytest.approx(
            qubit_bound_two_basis(q, 0.5, CHSH_MAX), abs=1e-9)


def test_bias_attack_extremal_points():
    for q in (0.0, 0.15, 0.4):
        assert bias_attack(q, (1.0, 2.0)).entropy == pytest.approx(
            binary_entropy(q), abs=1e-9)
        assert bias_attack(q, (0.0, CHSH_MAX)).entropy == pytest.approx(
            1.0, abs=1e-9)


def test_bias_attack_saturates_entropy_bound():
    """The qubit strategy reproduces the bias bound exactly: the bound is
    tight, and the attack certifies that on random quantum points."""
    for a1, S in random_quantum_points(60, seed=41):
        for q in (0.0, 0.25):
            att = bias_attack(q, (a1, S)).entropy
            assert att == pytest.approx(qubit_bound_bias(q, (a1, S)),
                                        abs=1e-9)


def test_bias_attack_rejects_nonquantum_point():
    with pytest.raises(DomainError):
        bias_attack(0.1, (0.9, 2.7))


def test_upper_bound_two_basis_noiseless():
    assert conjectured_rate_upper_bound(0.0, 0.0) == pytest.approx(0.5,
                                                                   abs=1e-12)


def test_upper_bound_dominates_lower_bound_two_basis():
    for q in (0.0, 0.3):
        cfg = ProtocolConfig(variant="two-basis", q=q, p_prime=0.5)
        for d in np.linspace(0.0, 0.12, 20):
            ub = conjectured_rate_upper_bound(float(d), q)
            lb = rate_two_basis(float(d), cfg).rate
            assert ub >= lb - 1e-9


def test_upper_bound_coarse_noise_threshold():
    # the attack's rate crossing sits near delta = 8.4447% for q = 0
    d_star = threshold_search(lambda d: conjectured_rate_upper_bound(d, 0.0),
                              0.0, 0.2, tol=1e-7)
    assert d_star == pytest.approx(0.084447, abs=1e-4)


def test_upper_bound_bias_variant_saturates_ideal_devices():
    impl = Implementation(theta=math.pi / 2, phi_a=(0.0, math.pi / 2),
                          phi_b=(math.pi / 4, -math.pi / 4, 0.0))
    for q in (0.0, 0.2):
        ub = conjectured_rate_upper_bound(impl, q,
                                          variant="single-basis-bias")
        assert ub == pytest.approx(1.0 - binary_entropy(q), abs=1e-9)
        lb = rate_bias(impl, q).rate
        assert ub >= lb - 1e-9


def test_upper_bound_bias_variant_dominates_optimized_rate():
    impl = Implementation(theta=1.1, phi_a=(0.2, 1.3), phi_b=(0.8, -0.55, 0.1),
                          v=1.0, eta=0.92)
    ub = conjectured_rate_upper_bound(impl, 0.0, variant="single-basis-bias")
    assert ub >= rate_bias(impl, 0.0).rate - 1e-9


def test_upper_bound_unknown_variant():
    with pytest.raises(DomainError):
        conjectured_rate_upper_bound(0.0, 0.0, variant="ternary")

"""Entropy kernels: closed-form anchors, independent oracles, derivatives."""

import math

import numpy as np
import pytest
from scipy.special import entr

from diqkd.entropy import (binary_entropy, f_q, f_q_slope, g_q, g_q_gradient,
                           phi, phi_slope)
from diqkd.errors import DomainError

LOG2 = math.log(2.0)


def scipy_h(p):
    # independent path: scipy's elementwise -p ln p
    return (entr(p) + entr(1.0 - p)) / LOG2


def test_binary_entropy_anchors():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.25) == pytest.approx(0.8112781244591328, abs=1e-15)


def test_binary_entropy_matches_scipy_grid():
    p = np.linspace(0.0, 1.0, 1001)
    np.testing.assert_allclose(binary_entropy(p), scipy_h(p), atol=1e-13)


def test_binary_entropy_symmetry_and_concavity():
    p = np.linspace(0.0, 0.5, 400)
    np.testing.assert_allclose(binary_entropy(p), binary_entropy(1.0 - p),
                               atol=1e-15)
    h = binary_entropy(np.linspace(0.01, 0.99, 300))
    assert np.all(np.diff(h, 2) < 1e-12)  # concave


def test_phi_is_entropy_of_shifted_argument():
    x = np.linspace(0.0, 1.0, 500)
    np.testing.assert_allclose(phi(x), binary_entropy((1.0 + x) / 2.0),
                               atol=1e-13)
    assert phi(0.0) == 1.0
    assert phi(1.0) == 0.0


def test_phi_near_one_is_stable():
    # the log1p form must not lose digits where h() would cancel
    x = 1.0 - np.logspace(-15, -3, 25)  # x decreasing toward 0.999
    vals = phi(x)
    assert np.all(vals >= 0.0)
    assert np.all(np.diff(vals) >= 0.0)  # phi decreasing in x


def test_phi_slope_matches_finite_differences():
    xs = np.linspace(0.05, 0.95, 19)
    step = 1e-7
    fd = (phi(xs + step) - phi(xs - step)) / (2.0 * step)
    np.testing.assert_allclose(phi_slope(xs), fd, atol=1e-6)
    assert phi_slope(0.0) == 0.0


def test_f_q_anchors():
    for q in (0.0, 0.1, 0.3, 0.5):
        assert f_q(q, 1.0) == pytest.approx(1.0, abs=1e-12)
    # q=0 reduces to 1 - phi(x)
    x = np.linspace(0.0, 1.0, 200)
    np.testing.assert_allclose(f_q(0.0, x), 1.0 - phi(x), atol=1e-13)
    # q=1/2 is identically 1
    np.testing.assert_allclose(f_q(0.5, x), 1.0, atol=1e-13)
    # x=0 gives the preprocessing entropy h(q)
    assert f_q(0.3, 0.0) == pytest.approx(binary_entropy(0.3), abs=1e-13)


def test_f_q_monotone_grids():
    xs = np.linspace(0.0, 1.0, 301)
    for q in (0.0, 0.15, 0.3, 0.45):
        vals = f_q(q, xs)
        assert np.all(np.diff(vals) >= -1e-12)  # nondecreasing in x
    qs = np.linspace(0.0, 0.5, 101)
    for x in (0.2, 0.6, 0.9):
        vals = np.array([f_q(qv, x) for qv in qs])
        assert np.all(np.diff(vals) >= -1e-12)  # noise only adds entropy


def test_f_q_convex_in_x_squared():
    # f_q(sqrt(u)) is convex in u: second differences nonnegative
    u = np.linspace(0.0, 1.0, 401)
    for q in (0.0, 0.2, 0.45):
        vals = np.array([f_q(q, math.sqrt(ui)) for ui in u])
        assert np.all(np.diff(vals, 2) >= -1e-10)


def test_f_q_slope_matches_finite_differences():
    xs = np.linspace(0.05, 0.95, 31)
    step = 1e-7
    for q in (0.0, 0.1, 0.3, 0.49):
        fd = (f_q(q, xs + step) - f_q(q, xs - step)) / (2.0 * step)
        got = np.array([f_q_slope(q, x) for x in xs])
        np.testing.assert_allclose(got, fd, atol=1e-6)
    assert f_q_slope(0.5, 0.3) == pytest.approx(0.0, abs=1e-12)


def test_g_q_reduces_to_f_q_at_zero_marginal():
    xs = np.linspace(0.0, 1.0, 200)
    for q in (0.0, 0.2, 0.35, 0.5):
        got = np.array([g_q(q, 0.0, x) for x in xs])
        want = f_q(q, xs)
        np.testing.assert_allclose(got, want, atol=1e-11)


def test_g_q_corner_values():
    # full correlation: entropy saturates at 1 regardless of q
    assert g_q(0.3, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    # deterministic marginal: only the preprocessing noise is uncertain
    assert g_q(0.3, 1.0, 0.0) == pytest.approx(binary_entropy(0.3), abs=1e-12)
    assert g_q(0.0, 1.0, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_g_q_monotone_in_both_arguments():
    zs = np.linspace(0.0, 0.7, 51)
    for q in (0.0, 0.25, 0.49):
        vals = [g_q(q, z, 0.5) for z in zs]
        assert np.all(np.diff(vals) >= -1e-11)  # increasing in z
        vals = [g_q(q, 0.3, x) for x in np.linspace(0.0, 0.9, 51)]
        assert np.all(np.diff(vals) >= -1e-11)  # increasing in x


def test_g_q_domain_error_outside_disc():
    with pytest.raises(DomainError):
        g_q(0.1, 0.9, 0.9)


def test_g_q_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    step = 1e-7
    for _ in range(60):
        z = rng.uniform(0.05, 0.6)
        x = rng.uniform(0.05, 0.6)
        q = rng.uniform(0.0, 0.49)
        gz, gx = g_q_gradient(q, z, x)
        fz = (g_q(q, z + step, x) - g_q(q, z - step, x)) / (2.0 * step)
        fx = (g_q(q, z, x + step) - g_q(q, z, x - step)) / (2.0 * step)
        assert gz == pytest.approx(fz, abs=2e-6)
        assert gx == pytest.approx(fx, abs=2e-6)


def test_scalar_in_scalar_out():
    assert isinstance(binary_entropy(0.25), float)
    assert isinstance(phi(0.5), float)
    assert isinstance(f_q(0.2, 0.5), float)

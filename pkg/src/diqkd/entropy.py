"""Scalar entropy functions and qubit entropy bounds.

Everything here is in bits (log base 2) and pure: no state, no I/O.

The two workhorses are ``f_q`` and ``g_q``, lower bounds on the conditional
von Neumann entropy H(A|E) of Alice's noisy key bit given Eve, as a function
of correlators that can be estimated device-independently:

* ``f_q(q, x)``  — bound from a single correlator ``x``, with noisy
  preprocessing (Alice flips her bit with probability ``q``);
* ``g_q(q, z, x)`` — refinement that also uses Alice's marginal ``z``,
  reducing to ``f_q`` at ``z = 0``.

Both are evaluated through ``phi(u) = h(1/2 + u/2)``, where ``h`` is the
binary entropy.  Near ``|u| = 1`` the naive formula loses precision, so
``phi`` is computed via ``log1p`` of ``±u`` directly.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

_LOG2E = float(np.log2(np.e))
# Tolerated overshoot past a mathematical boundary before raising DomainError.
BOUNDARY_TOL = 1e-12


def _clip_unit(x, name: str, lo: float = -1.0, hi: float = 1.0):
    """Clamp x into [lo, hi]; raise DomainError if it overshoots past tolerance."""
    x = np.asarray(x, dtype=float)
    if np.any(x < lo - BOUNDARY_TOL) or np.any(x > hi + BOUNDARY_TOL):
        bad = x[(x < lo - BOUNDARY_TOL) | (x > hi + BOUNDARY_TOL)]
        raise DomainError(f"{name}={np.ravel(bad)[0]!r} outside [{lo}, {hi}]")
    return np.clip(x, lo, hi)


def _maybe_scalar(x: np.ndarray, scalar: bool):
    return float(x) if scalar else x


def binary_entropy(x):
    """Binary entropy h(x) = -x log2 x - (1-x) log2 (1-x), with 0 log 0 = 0.

    Accepts scalars or arrays; x must lie in [0, 1] up to a 1e-12 tolerance.
    """
    scalar = np.isscalar(x) or np.ndim(x) == 0
    x = _clip_unit(x, "x", lo=0.0, hi=1.0)
    y = 1.0 - x
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(x * np.log2(np.where(x > 0.0, x, 1.0))
                + y * np.log2(np.where(y > 0.0, y, 1.0)))
    out = np.clip(out, 0.0, 1.0)
    return _maybe_scalar(out, scalar)


def phi(x):
    """phi(x) = h(1/2 + x/2) for |x| <= 1; even in x, phi(0)=1, phi(+-1)=0.

    Uses log1p(+-x) so precision is kept as |x| -> 1, where the naive
    h(1/2 + x/2) would cancel.
    """
    scalar = np.isscalar(x) or np.ndim(x) == 0
    x = np.abs(_clip_unit(x, "x"))
    # 1 - [(1+x)log(1+x) + (1-x)log(1-x)] / (2 ln 2); log1p(-1) is -inf but
    # gets multiplied by 0, so mask that endpoint explicitly.
    near_one = x >= 1.0 - 1e-15
    xs = np.where(near_one, 0.0, x)
    out = 1.0 - 0.5 * _LOG2E * ((1.0 + xs) * np.log1p(xs)
                                + (1.0 - xs) * np.log1p(-xs))
    out = np.where(near_one, 0.0, np.clip(out, 0.0, 1.0))
    return _maybe_scalar(out, scalar)


def phi_slope(x):
    """Derivative phi'(x) = (1/2) log2((1-x)/(1+x)) for |x| < 1.

    Odd in x, nonpositive for x >= 0, and divergent as x -> 1; callers that
    may hit the endpoint are expected to clamp (see f_q_slope).
    """
    scalar = np.isscalar(x) or np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = 0.5 * (np.log2(1.0 - x) - np.log2(1.0 + x))
    out = np.where(x == 0.0, 0.0, out)  # exact zero, not -0.0 noise
    return _maybe_scalar(out, scalar)


def _check_q(q: float) -> float:
    if not 0.0 - BOUNDARY_TOL <= q <= 0.5 + BOUNDARY_TOL:
        raise DomainError(f"flip probability q={q!r} outside [0, 1/2]")
    return min(max(float(q), 0.0), 0.5)


def f_q(q, x):
    """Entropy bound from one correlator: 1 + phi(sqrt((1-2q)^2 + 4q(1-q)x^2)) - phi(x).

    Nondecreasing in |x|; f_q(0) = h(q), f_q(1) = 1 for every q, and q = 1/2
    gives the constant 1.
    """
    q = _check_q(q)
    scalar = np.isscalar(x) or np.ndim(x) == 0
    x = np.abs(_clip_unit(x, "x"))
    kappa = 4.0 * q * (1.0 - q)
    r = np.sqrt((1.0 - 2.0 * q) ** 2 + kappa * x * x)
    out = 1.0 + phi(np.minimum(r, 1.0)) - phi(x)
    return _maybe_scalar(np.clip(out, 0.0, 1.0), scalar)


def g_q(q, z, x):
    """Entropy bound from a correlator x and Alice's marginal z.

    With R(+-) = sqrt((1 - 2q +- z)^2 + 4q(1-q) x^2) the bound is

        phi((R+ + R-)/2) + phi((R+ - R-)/2) - phi(sqrt(z^2 + x^2)),

    valid for z^2 + x^2 <= 1.  Even in both arguments, nondecreasing in each
    of |z| and |x|, and g_q(q, 0, x) = f_q(q, x).
    """
    q = _check_q(q)
    scalar = (np.isscalar(z) or np.ndim(z) == 0) and (np.isscalar(x) or np.ndim(x) == 0)
    z = np.abs(_clip_unit(z, "z"))
    x = np.abs(_clip_unit(x, "x"))
    r2 = z * z + x * x
    if np.any(r2 > 1.0 + BOUNDARY_TOL):
        bad = np.ravel(np.asarray(r2)[np.asarray(r2) > 1.0 + BOUNDARY_TOL])[0]
        raise DomainError(f"z^2 + x^2 = {bad!r} exceeds 1")
    r = np.sqrt(np.minimum(r2, 1.0))
    kappa = 4.0 * q * (1.0 - q)
    rp = np.sqrt((1.0 - 2.0 * q + z) ** 2 + kappa * x * x)
    rm = np.sqrt((1.0 - 2.0 * q - z) ** 2 + kappa * x * x)
    m_plus = np.minimum(0.5 * (rp + rm), 1.0)  # <= 1 whenever z^2+x^2 <= 1
    m_minus = 0.5 * (rp - rm)
    out = phi(m_plus) + phi(m_minus) - phi(r)
    return _maybe_scalar(np.clip(out, 0.0, 1.0), scalar)


def f_q_slope(q, x):
    """Derivative of f_q with respect to x.

    Analytic form: phi'(r) * 4q(1-q) x / r - phi'(x) with
    r = sqrt((1-2q)^2 + 4q(1-q)x^2).  phi' diverges at 1, so inputs within
    1e-9 of |x| = 1 (or of 0) are evaluated at the clamped interior point
    x = 1 - 1e-9 (resp. 1e-9); the returned value is that one-sided limit.
    """
    q = _check_q(q)
    scalar = np.isscalar(x) or np.ndim(x) == 0
    x = np.abs(_clip_unit(x, "x"))
    x = np.clip(x, 1e-9, 1.0 - 1e-9)
    kappa = 4.0 * q * (1.0 - q)
    r = np.sqrt((1.0 - 2.0 * q) ** 2 + kappa * x * x)
    # q = 1/2 makes r = x and the two phi' terms cancel exactly: slope 0.
    out = phi_slope(np.minimum(r, 1.0 - 1e-15)) * kappa * x / r - phi_slope(x)
    return _maybe_scalar(out, scalar)


def g_q_gradient(q: float, z: float, x: float) -> tuple[float, float]:
    """Analytic gradient (dg/dz, dg/dx) of g_q at an interior point.

    Used by the tangent-plane construction, where finite differences are not
    accurate enough to locate contact points at 1e-12 scales.  Requires
    z, x >= 0 and z^2 + x^2 < 1; the x -> 0 limit of dg/dx is 0 for z < 1.
    """
    q = _check_q(q)
    z = float(z)
    x = float(x)
    if z < 0.0 or x < 0.0:
        raise DomainError("gradient expects z, x >= 0")
    r2 = z * z + x * x
    if r2 >= 1.0:
        raise DomainError("gradient defined only strictly inside z^2 + x^2 < 1")
    r = np.sqrt(r2)
    dphir_dz = 0.0 if r == 0.0 else phi_slope(r) * z / r
    dphir_dx = 0.0 if r == 0.0 else phi_slope(r) * x / r
    if q < 1e-14:
        # R(+-) = 1 +- z exactly: the m_minus term is phi(z) and the kappa
        # terms vanish; avoids 0 * inf from phi'(1).
        return (phi_slope(z) - dphir_dz, -dphir_dx)
    kappa = 4.0 * q * (1.0 - q)
    rp = np.sqrt((1.0 - 2.0 * q + z) ** 2 + kappa * x * x)
    rm = np.sqrt((1.0 - 2.0 * q - z) ** 2 + kappa * x * x)
    m_plus = 0.5 * (rp + rm)
    m_minus = 0.5 * (rp - rm)
    dmp_dz = 0.5 * ((1.0 - 2.0 * q + z) / rp - (1.0 - 2.0 * q - z) / rm)
    dmm_dz = 0.5 * ((1.0 - 2.0 * q + z) / rp + (1.0 - 2.0 * q - z) / rm)
    dmp_dx = 0.5 * kappa * x * (1.0 / rp + 1.0 / rm)
    dmm_dx = 0.5 * kappa * x * (1.0 / rp - 1.0 / rm)
    pp = phi_slope(min(m_plus, 1.0 - 1e-15))
    pm = phi_slope(m_minus)
    dz = pp * dmp_dz + pm * dmm_dz - dphir_dz
    dx = pp * dmp_dx + pm * dmm_dx - dphir_dx
    return (float(dz), float(dx))

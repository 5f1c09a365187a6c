"""Explicit eavesdropping strategies: upper bounds on achievable key rates.

Two attacks are implemented.  For the two-basis protocol, Eve prepares a
symmetric BB84-type attack whose average conditional entropy is the
piecewise function fbar_q evaluated at S/sqrt(8): f_q itself above a
tangency point x_star, and below it the tangent line through
(1/sqrt(2), h(q)) — the straight stretch reflects Eve mixing the tangency
strategy with an intercept-resend one.  For the single-basis protocol, any
statistics (a1, S) inside the quantum boundary are reproduced by an
explicit two-qubit strategy built from a pair of partially overlapping
conditional states for Bob-plus-Eve; Eve's conditional entropy for it
exactly saturates the bias entropy bound, which is what makes that bound
conjecturally optimal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .correlations import CHSH_MAX
from .entropy import binary_entropy, f_q, f_q_slope
from .errors import BracketError, DomainError
from .models import detection_stats, white_noise_stats
from .tradeoff import _point_coords

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class AttackValue:
    """Eve's conditional entropy under an explicit attack, plus its parameters."""

    entropy: float
    params: dict = field(default_factory=dict)


def _tangency_point(q: float) -> float:
    """x_star in (1/sqrt2, 1): where the tangent of f_q through (1/sqrt2, h(q)) touches.

    The residual N(x) = h(q) + f_q'(x)(x - 1/sqrt2) - f_q(x) is negative just
    above 1/sqrt2 (the chord lies under the curve) and grows without bound as
    x -> 1 where the slope diverges; bisection on the sign change."""
    hq = binary_entropy(q)

    def resid(x: float) -> float:
        return hq + f_q_slope(q, x) * (x - _INV_SQRT2) - f_q(q, x)

    lo, hi = _INV_SQRT2 + 1e-9, 1.0 - 1e-9
    r_lo, r_hi = resid(lo), resid(hi)
    if not (r_lo < 0.0 < r_hi):
        raise BracketError(
            f"tangency residual does not change sign on (1/sqrt2, 1) for q={q!r}")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if resid(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def two_basis_attack(q: float, S: float) -> AttackValue:
    """Average conditional entropy granted by the conjectured two-basis attack."""
    if not 0.0 <= q <= 0.5:
        raise DomainError(f"flip probability q={q!r} outside [0, 1/2]")
    if not 2.0 - 1e-12 <= S <= CHSH_MAX + 1e-12:
        raise DomainError(f"CHSH value S={S!r} outside [2, 2*sqrt(2)]")
    x = S / math.sqrt(8.0)
    if 0.5 - q < 1e-12:  # f_q is identically 1: any strategy gives full entropy
        return AttackValue(entropy=1.0, params={"x_star": 1.0, "slope": 0.0, "E": x})
    x_star = _tangency_point(q)
    slope = f_q_slope(q, x_star)
    if x >= x_star:
        entropy = f_q(q, x)
    else:
        entropy = binary_entropy(q) + slope * (x - _INV_SQRT2)
    return AttackValue(entropy=float(min(max(entropy, 0.0), 1.0)),
                       params={"x_star": x_star, "slope": slope, "E": x})


def _vn_entropy(m: np.ndarray) -> float:
    """-sum lam log2 lam over eigenvalues of a PSD matrix (unnormalized ok)."""
    lam = np.linalg.eigvalsh(m)
    lam = lam[lam > 1e-300]
    return float(-(lam * np.log2(lam)).sum())


def bias_attack(q: float, point) -> AttackValue:
    """Eve's conditional entropy for the explicit bias-bound-saturating attack.

    The source emits cos(theta/2)|00>|psi0> + sin(theta/2)|11>|psi1> with
    cos(theta) = a1 and sin(theta) <psi0|psi1> = sqrt(S^2/4 - 1); Bob's Bell
    measurements use cos(phi_B/2) = 2/S.  Alice's key bit then flags which of
    the two conditional states Bob and Eve jointly hold, and Eve's entropy
    about the flipped bit reduces to a three-term difference of von Neumann
    entropies of explicit 2x2 matrices.
    """
    if not 0.0 <= q <= 0.5:
        raise DomainError(f"flip probability q={q!r} outside [0, 1/2]")
    a1, S = _point_coords(point)
    if a1 * a1 + S * S / 4.0 > 2.0 + 1e-12:
        raise DomainError(
            f"(a1={a1!r}, S={S!r}) violates the quantum boundary a1^2 + S^2/4 <= 2")
    S = min(max(S, 2.0), CHSH_MAX)  # S < 2: no violation, unentangled attack
    x2 = max(S * S / 4.0 - 1.0, 0.0)
    a1c = min(max(a1, -1.0), 1.0)
    theta = math.acos(a1c)
    sin_theta = math.sqrt(max(1.0 - a1c * a1c, 0.0))
    overlap = 0.0 if sin_theta < 1e-15 else min(math.sqrt(x2) / sin_theta, 1.0)
    ortho = math.sqrt(max(1.0 - overlap**2, 0.0))
    psi0 = np.array([[1.0, 0.0], [0.0, 0.0]])
    psi1 = np.array([[overlap**2, overlap * ortho], [overlap * ortho, ortho**2]])
    p0, p1 = (1.0 + a1c) / 2.0, (1.0 - a1c) / 2.0
    qb = 1.0 - q
    entropy = (_vn_entropy(qb * p0 * psi0 + q * p1 * psi1)
               + _vn_entropy(q * p0 * psi0 + qb * p1 * psi1)
               - _vn_entropy(p0 * psi0 + p1 * psi1))
    phi_b = 2.0 * math.acos(min(2.0 / S, 1.0))
    return AttackValue(entropy=float(min(max(entropy, 0.0), 1.0)),
                       params={"theta": theta, "phi_b": phi_b, "overlap": overlap})


def conjectured_rate_upper_bound(setting, q: float, variant: str = "two-basis",
                                 p_prime: float = 0.5) -> float:
    """Attack entropy minus the honest parties' H_cond: a rate upper bound.

    For variant 'two-basis', setting is the channel error rate delta and the
    sifting factor is included; for 'single-basis-bias' it is an
    Implementation and the rate is the plain entropy difference.
    """
    if variant == "two-basis":
        delta = float(setting)
        S, H_cond, sift = white_noise_stats(delta, q, p_prime)
        S = min(max(S, 2.0), CHSH_MAX)  # no violation => attack entropy h(q)
        return sift * (two_basis_attack(q, S).entropy - H_cond)
    if variant == "single-basis-bias":
        stats = detection_stats(setting, q)
        attack = bias_attack(q, (abs(stats.a1), min(stats.S, CHSH_MAX)))
        return attack.entropy - stats.H_A_given_B
    raise DomainError(f"unknown protocol variant {variant!r}")

"""Channel models that turn protocol parameters into observable statistics.

Two models feed the entropy machinery:

* ``white_noise_stats`` — the idealized two-basis protocol where a fraction
  ``delta`` of rounds flips the outcomes (no detection losses);
* ``detection_stats`` — a photonic-style model: a partially entangled
  two-qubit state with visibility ``v``, planar measurements, detection
  efficiency ``eta``, and nondetections during Bell-test rounds binned to +1.

All measurements live in the Z-X plane of the Bloch sphere, so a measurement
is a single angle: A(phi) = cos(phi) Z + sin(phi) X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import binary_entropy
from .errors import DomainError

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Implementation:
    """A concrete device strategy for the detection-efficiency protocol.

    theta parameterizes the state cos(theta/2)|00> + sin(theta/2)|11>;
    phi_a are Alice's two measurement angles (the first generates the key),
    phi_b Bob's three (the first two for the Bell test, the third for the
    key); v is the visibility of the state (white-noise mixing), eta the
    detection efficiency applied to every measurement.
    """

    theta: float
    phi_a: tuple[float, float]
    phi_b: tuple[float, float, float]
    v: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        angles = (self.theta, *self.phi_a, *self.phi_b)
        if not all(math.isfinite(a) for a in angles):
            raise DomainError("implementation angles must be finite")
        if len(self.phi_a) != 2 or len(self.phi_b) != 3:
            raise DomainError("need 2 Alice angles and 3 Bob angles")
        if not 0.0 <= self.v <= 1.0:
            raise DomainError(f"visibility v={self.v!r} outside [0, 1]")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"efficiency eta={self.eta!r} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class Statistics:
    """Observable statistics of one protocol round.

    key_joint is the 2x3 joint distribution p(a, b) of Alice's processed key
    bit a in {+1, -1} (binned and flipped with probability q) against Bob's
    key measurement outcome b in {+1, -1, no-detect}.
    """

    S: float
    a1: float
    key_joint: np.ndarray = field(repr=False)
    H_A_given_B: float

    def __post_init__(self):
        kj = np.asarray(self.key_joint, dtype=float)
        if kj.shape != (2, 3):
            raise DomainError("key_joint must be a 2x3 table")
        if np.any(kj < -1e-12) or abs(kj.sum() - 1.0) > 1e-9:
            raise DomainError("key_joint must be a probability table")
        if abs(self.S) > 2.0 * SQRT2 + 1e-9:
            raise DomainError(f"S={self.S!r} outside [-2*sqrt(2), 2*sqrt(2)]")


def quantum_boundary(a1: float, S: float) -> bool:
    """Whether (a1, S) satisfies the quantum-set constraint a1^2 + S^2/4 <= 2."""
    return a1 * a1 + S * S / 4.0 <= 2.0 + 1e-12


def white_noise_stats(delta: float, q: float, p_prime: float) -> tuple[float, float, float]:
    """Statistics of the two-basis protocol under white noise.

    Returns (S, H_cond, sift): the CHSH value 2 sqrt(2) (1 - 2 delta), the
    conditional entropy h(q + delta (1 - 2q)) of Alice's flipped bit given
    Bob's matching outcome, and the sifting factor p'^2 + (1-p')^2 for basis
    probability p'.
    """
    if not 0.0 <= delta <= 0.5:
        raise DomainError(f"error rate delta={delta!r} outside [0, 1/2]")
    if not 0.0 <= q <= 0.5:
        raise DomainError(f"flip probability q={q!r} outside [0, 1/2]")
    if not 0.0 <= p_prime <= 1.0:
        raise DomainError(f"basis probability p'={p_prime!r} outside [0, 1]")
    S = 2.0 * SQRT2 * (1.0 - 2.0 * delta)
    H_cond = binary_entropy(q + delta * (1.0 - 2.0 * q))
    sift = p_prime**2 + (1.0 - p_prime) ** 2
    return S, float(H_cond), sift


def _pure_state_correlators(theta: float, phi_alice: float, phi_bob: float) -> tuple[float, float, float]:
    """(<A>, <B>, <A x B>) on cos(theta/2)|00> + sin(theta/2)|11>, planar angles."""
    ca, sa = math.cos(phi_alice), math.sin(phi_alice)
    cb, sb = math.cos(phi_bob), math.sin(phi_bob)
    ct, st = math.cos(theta), math.sin(theta)
    return ct * ca, ct * cb, ca * cb + st * sa * sb


def _binned_correlator(eta: float, mean_a: float, mean_b: float, corr: float) -> float:
    # nondetections (prob 1-eta on each side, independent) mapped to +1
    return (eta * eta * corr + eta * (1.0 - eta) * (mean_a + mean_b)
            + (1.0 - eta) ** 2)


def detection_stats(impl: Implementation, q: float) -> Statistics:
    """Observable statistics of an Implementation with noisy preprocessing q.

    Bell-test rounds use binned two-outcome measurements (A1, A2) x (B1, B2);
    S is the CHSH combination of the four binned correlators and a1 the
    binned marginal of A1.  Key rounds pair binned A1 (flipped with
    probability q) against Bob's three-outcome B3, whose nondetection column
    keeps probability 1 - eta.
    """
    if not 0.0 <= q <= 0.5:
        raise DomainError(f"flip probability q={q!r} outside [0, 1/2]")
    v, eta = impl.v, impl.eta

    def corr(phi_alice: float, phi_bob: float) -> tuple[float, float, float]:
        ma, mb, cab = _pure_state_correlators(impl.theta, phi_alice, phi_bob)
        return v * ma, v * mb, v * cab  # identity/4 mixes all three toward 0

    sign = [+1.0, +1.0, +1.0, -1.0]
    S = 0.0
    for (i, j), sgn in zip(((0, 0), (0, 1), (1, 0), (1, 1)), sign):
        ma, mb, cab = corr(impl.phi_a[i], impl.phi_b[j])
        S += sgn * _binned_correlator(eta, ma, mb, cab)
    ma1 = v * math.cos(impl.theta) * math.cos(impl.phi_a[0])
    a1 = eta * ma1 + (1.0 - eta)

    # key rounds: binned Alice A1 against three-outcome Bob B3
    ma, mb, cab = corr(impl.phi_a[0], impl.phi_b[2])
    joint = np.zeros((2, 3))
    for ai, a in enumerate((+1.0, -1.0)):
        for bi, b in enumerate((+1.0, -1.0)):
            p2 = 0.25 * (1.0 + a * ma + b * mb + a * b * cab)
            pb = 0.5 * (1.0 + b * mb)
            joint[ai, bi] = eta * eta * p2 + (1.0 - eta) * eta * pb * (a > 0)
        pa = 0.5 * (1.0 + a * ma)
        joint[ai, 2] = eta * (1.0 - eta) * pa + (1.0 - eta) ** 2 * (a > 0)
    joint = np.clip(joint, 0.0, 1.0)
    flipped = (1.0 - q) * joint + q * joint[::-1, :]

    p_bob = flipped.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(flipped > 0.0, np.log2(np.where(flipped > 0.0, flipped, 1.0)), 0.0)
        logb = np.where(p_bob > 0.0, np.log2(np.where(p_bob > 0.0, p_bob, 1.0)), 0.0)
    h_cond = float(-(flipped * logs).sum() + (p_bob * logb).sum())
    return Statistics(S=float(S), a1=float(a1), key_joint=flipped,
                      H_A_given_B=max(h_cond, 0.0))

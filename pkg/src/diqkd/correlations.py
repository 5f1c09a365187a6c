"""Device-independent lower bounds on Bob-side correlators.

Given a Bell expectation (CHSH ``S`` or its asymmetric variant), these
functions bound from below the correlation Bob can guarantee with Alice's
key-generating measurement, assuming only that the devices are qubit
strategies.  The two-basis quantity ``E_p(S)^2`` bounds the weighted average
``p <A1 B>^2 + (1-p) <A2 B'>^2`` and is available through an analytic path
(p = 1/2, root of a quartic) and a numeric multistart path (any p).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import DomainError

SQRT2 = float(np.sqrt(2.0))
CHSH_MAX = 2.0 * SQRT2


@dataclass(frozen=True)
class MinimizerPoint:
    """Feasible point of the two-basis minimization in its five variables.

    c and s are cos/sin of half of Alice's measurement angle; lam and mu are
    the lengths of Bob's two Bloch-plane correlation vectors; delta is the
    cosine of the angle between them.
    """

    lam: float
    mu: float
    c: float
    s: float
    delta: float

    def feasible(self, S: float, tol: float = 1e-9) -> bool:
        ok = abs(self.c**2 + self.s**2 - 1.0) <= tol
        ok &= self.lam**2 <= 1.0 + tol and self.mu**2 <= 1.0 + tol
        ok &= self.delta**2 <= 1.0 + tol
        ok &= self.c * self.lam + self.s * self.mu >= S / 2.0 - tol
        ok &= ((1.0 - self.lam**2) * (1.0 - self.mu**2)
               >= self.lam**2 * self.mu**2 * self.delta**2 - tol)
        return bool(ok)

    def objective(self, p: float) -> float:
        return (self.s**2 * self.lam**2 + self.c**2 * self.mu**2
                + 2.0 * (2.0 * p - 1.0) * self.s * self.c
                * self.lam * self.mu * self.delta)


def _check_chsh(S: float) -> float:
    if not 2.0 - 1e-9 <= S <= CHSH_MAX + 1e-9:
        raise DomainError(f"CHSH value S={S!r} outside quantum range [2, 2*sqrt(2)]")
    return min(max(float(S), 2.0), CHSH_MAX)


def chsh_corr_bound(S: float) -> float:
    """Correlator bound sqrt(S^2/4 - 1) from the CHSH expectation alone."""
    S = _check_chsh(S)
    return float(np.sqrt(max(S * S / 4.0 - 1.0, 0.0)))


def asym_chsh_corr_bound(alpha: float, S_alpha: float) -> float:
    """Correlator bound E_alpha from the asymmetric CHSH expectation.

    The quantum range of S_alpha is [2 max(1,|alpha|), 2 sqrt(1+alpha^2)].
    For |alpha| >= 1, or above the switchover value 2 sqrt(1+alpha^2-alpha^4),
    the bound is sqrt(S_alpha^2/4 - alpha^2); below it (only reachable for
    |alpha| < 1) the second branch applies.  Both branches agree at the
    switchover.
    """
    alpha = float(alpha)
    S_alpha = abs(float(S_alpha))
    a2 = alpha * alpha
    lo = 2.0 * max(1.0, abs(alpha))
    hi = 2.0 * np.sqrt(1.0 + a2)
    if not lo - 1e-9 <= S_alpha <= hi + 1e-9:
        raise DomainError(
            f"S_alpha={S_alpha!r} outside quantum range [{lo}, {hi}] for alpha={alpha!r}")
    S_alpha = min(max(S_alpha, lo), hi)
    switch = 2.0 * np.sqrt(max(1.0 + a2 - a2 * a2, 0.0))
    if abs(alpha) >= 1.0 or S_alpha >= switch:
        return float(np.sqrt(max(S_alpha * S_alpha / 4.0 - a2, 0.0)))
    inner = 1.0 - np.sqrt(max((1.0 - a2) * (S_alpha * S_alpha / 4.0 - 1.0), 0.0)) / abs(alpha)
    return float(np.sqrt(max(1.0 - inner * inner, 0.0)))


def solve_quartic_in_range(S: float) -> float:
    """Root x* of 4x(2-x) + 2(S^2+2) + S(x-5) sqrt(2(1+x)) = 0 with
    |x| <= (S/4) sqrt(8-S^2).

    Isolating the radical and squaring gives a quartic; of its real roots we
    keep those in range whose unsquared residual is below 1e-9 (squaring
    introduces spurious roots).  Of the admissible roots we return the one
    minimizing the closed-form objective: every admissible root is a
    stationary point of the exact minimization, so taking the valuewise
    smallest reproduces the true minimum.  (Away from S = 2 only one root
    survives the filters and this is also the numerically smallest root; at
    the near-degenerate end the quartic's other branch -- a stationary point
    with objective 1 at x near -1 -- drifts inside the range tolerance, and
    positional selection would unsoundly pick it.)
    """
    S = _check_chsh(S)
    s2 = S * S
    # [2(S^2+2) + 4x(2-x)]^2 - 2 S^2 (5-x)^2 (1+x), expanded in x.
    coeffs = [16.0,
              -(64.0 + 2.0 * s2),
              32.0 + 2.0 * s2,
              2.0 * s2 + 64.0,
              4.0 * s2 * s2 - 34.0 * s2 + 16.0]
    roots = np.roots(coeffs)
    lim = (S / 4.0) * np.sqrt(max(8.0 - s2, 0.0))

    def residual(x: float) -> float:
        return (4.0 * x * (2.0 - x) + 2.0 * (s2 + 2.0)
                + S * (x - 5.0) * math.sqrt(2.0 * max(1.0 + x, 0.0)))

    def residual_slope(x: float) -> float:
        rt = math.sqrt(2.0 * max(1.0 + x, 0.0))
        if rt < 1e-12:
            return math.inf
        return 8.0 - 8.0 * x + S * rt + S * (x - 5.0) / rt

    admissible = []
    for r in roots:
        if abs(r.imag) > 1e-7:
            continue
        x = float(r.real)
        if abs(x) > lim + 1e-7:
            continue
        for _ in range(3):  # polish on the unsquared equation
            slope = residual_slope(x)
            if not math.isfinite(slope) or abs(slope) < 1e-12:
                break
            x -= residual(x) / slope
        if abs(x) <= lim + 1e-9 and abs(residual(x)) <= 1e-9:
            admissible.append(min(max(x, -lim), lim))
    if not admissible:
        raise DomainError(f"no admissible quartic root for S={S!r}; should not happen "
                          "for S in the quantum range")
    return min(admissible, key=lambda x: _two_basis_value(S, x))


def _two_basis_value(S: float, x: float) -> float:
    """Closed-form E_{1/2}^2 at a stationary-point coordinate x."""
    one_minus = 1.0 - x
    if one_minus < 1e-300:
        return math.inf
    return float((1.0 + x * x) / one_minus
                 + (S * S / 4.0) * (1.0 + x) / one_minus
                 - (S / SQRT2) * (1.0 + x) ** 1.5 / one_minus)


def two_basis_bound_analytic(S: float) -> float:
    """E_{1/2}(S)^2: analytic two-basis correlation bound for equal weights.

    Evaluates the closed form at the admissible quartic root; see
    solve_quartic_in_range.  Returns the squared bound in [0, 1].
    """
    S = _check_chsh(S)
    if S <= 2.0 + 1e-7:
        # degenerate strip: the bound vanishes linearly (~1.62 (S-2)), below
        # any tolerance we quote, and the quartic roots coalesce numerically
        return 0.0
    x = solve_quartic_in_range(S)
    return float(min(max(_two_basis_value(S, x), 0.0), 1.0))


def _delta_optimal(p: float, lam: float, mu: float, c: float, s: float) -> float:
    """Cross-term-minimizing delta at fixed (lam, mu, c, s), kept feasible."""
    prod = lam * mu
    if prod <= 1e-15:
        return 0.0
    dmax = min(1.0, np.sqrt(max((1.0 - lam * lam) * (1.0 - mu * mu), 0.0)) / prod)
    sign = -np.sign((2.0 * p - 1.0) * s * c * prod)
    return float(sign * dmax)


def two_basis_bound_numeric(p: float, S: float,
                            n_starts: int = 64, seed: int = 0,
                            return_point: bool = False):
    """E_p(S)^2 by multistart local minimization (numerically tight, not certified).

    Minimizes s^2 lam^2 + c^2 mu^2 + 2(2p-1) s c lam mu delta over feasible
    MinimizerPoints with c lam + s mu >= S/2.  Starts are a seeded
    Latin-hypercube over (phi_A, lam, mu, delta) plus deterministic seeds on
    the lam=1 / mu=1 faces (where the optimum lives for S near 2).  Each
    start runs a short Nelder-Mead on a penalized objective; the best few
    repaired candidates then get an SLSQP polish on the exactly-constrained
    problem.  The reported value is the true objective at a repaired
    (exactly feasible) point, hence a valid upper bound on the minimum.
    Symmetric in p <-> 1-p.
    """
    if not -1e-12 <= p <= 1.0 + 1e-12:
        raise DomainError(f"basis weight p={p!r} outside [0, 1]")
    p = min(max(float(p), 0.0), 1.0)
    S = _check_chsh(S)
    if S >= CHSH_MAX - 1e-12:
        point = MinimizerPoint(1.0, 1.0, 1.0 / SQRT2, 1.0 / SQRT2, 0.0)
        return (1.0, point) if return_point else 1.0

    two_p = 2.0 * (2.0 * p - 1.0)
    # the cross term vanishes at p = 1/2: delta drops out of the objective
    # and delta = 0 loosens every constraint, so the search runs in 3-D
    symmetric = abs(two_p) < 1e-14

    def unpack(vec) -> tuple[float, float, float, float]:
        if symmetric:
            ang, lam, mu = (float(v) for v in vec)
            return ang, lam, mu, 0.0
        ang, lam, mu, delta = (float(v) for v in vec)
        return ang, lam, mu, delta

    def penalized(vec) -> float:
        ang, lam, mu, delta = unpack(vec)
        c, s = math.cos(ang), math.sin(ang)
        obj = (s * s * lam * lam + c * c * mu * mu
               + two_p * s * c * lam * mu * delta)
        pen = max(0.0, S / 2.0 - (c * lam + s * mu)) ** 2
        pen += max(0.0, lam * lam - 1.0) ** 2 + max(0.0, mu * mu - 1.0) ** 2
        pen += max(0.0, delta * delta - 1.0) ** 2
        pen += max(0.0, lam * lam * mu * mu * delta * delta
                   - (1.0 - lam * lam) * (1.0 - mu * mu)) ** 2
        return obj + 1e4 * pen

    def repair(vec) -> MinimizerPoint:
        """Project a near-feasible vector onto the exact constraint set.

        Meets a CHSH-constraint deficit by raising a single coordinate
        (whichever admissible raise costs less): scaling both would clamp at
        lam = 1 on the face optima and stall below the constraint.
        """
        ang, lam, mu, delta = unpack(vec)
        ang = min(max(ang, 1e-9), np.pi / 2.0 - 1e-9)
        c, s = math.cos(ang), math.sin(ang)
        lam, mu = min(abs(lam), 1.0), min(abs(mu), 1.0)
        need = S / 2.0
        cands = []
        if c * lam + s * mu >= need:
            cands.append((lam, mu))
        else:
            mu_min = (need - c * lam) / s
            if mu_min <= 1.0:
                cands.append((lam, mu_min))
            lam_min = (need - s * mu) / c
            if lam_min <= 1.0:
                cands.append((lam_min, mu))
            if not cands:
                t = min(need / (c + s), 1.0)
                cands.append((t, t))
        best = None
        for la, m in cands:
            pt = MinimizerPoint(la, m, c, s, _delta_optimal(p, la, m, c, s))
            if best is None or pt.objective(p) < best.objective(p):
                best = pt
        return best

    def exact_objective(vec) -> float:
        ang, lam, mu, delta = unpack(vec)
        c, s = math.cos(ang), math.sin(ang)
        return (s * s * lam * lam + c * c * mu * mu
                + two_p * s * c * lam * mu * delta)

    polish_constraints = [
        {"type": "ineq",
         "fun": lambda v: (math.cos(v[0]) * v[1] + math.sin(v[0]) * v[2]
                           - S / 2.0)},
    ]
    if not symmetric:
        # with delta live the minimizer rides the correlation ellipse
        polish_constraints.append(
            {"type": "ineq",
             "fun": lambda v: ((1.0 - v[1] * v[1]) * (1.0 - v[2] * v[2])
                               - (v[1] * v[2] * v[3]) ** 2)})
    polish_bounds = [(1e-9, np.pi / 2.0 - 1e-9), (0.0, 1.0), (0.0, 1.0),
                     (-1.0, 1.0)]
    dim = 3 if symmetric else 4
    polish_bounds = polish_bounds[:dim]

    sampler = qmc.LatinHypercube(d=dim, seed=seed)
    starts = sampler.random(n_starts)
    lo = np.array([0.0, 0.0, 0.0, -1.0])[:dim]
    hi = np.array([np.pi / 2.0, 1.0, 1.0, 1.0])[:dim]
    starts = lo + starts * (hi - lo)
    # always include the symmetric feasible start: c=s=1/sqrt(2), lam=mu=S/(2 sqrt(2))
    extra = [[np.pi / 4.0, S / (2.0 * SQRT2), S / (2.0 * SQRT2), 0.0][:dim]]
    # near S=2 the optimum sits on a lam=1 or mu=1 face at a small mixing
    # angle, a basin random starts reach unreliably: seed the faces exactly
    for ang in np.linspace(0.04, np.pi / 2.0 - 0.04, 9):
        c, s = float(np.cos(ang)), float(np.sin(ang))
        mu_face = (S / 2.0 - c) / s
        if 0.0 <= mu_face <= 1.0:
            extra.append([ang, 1.0, mu_face, 0.0][:dim])
        lam_face = (S / 2.0 - s) / c
        if 0.0 <= lam_face <= 1.0:
            extra.append([ang, lam_face, 1.0, 0.0][:dim])
    starts = np.vstack([starts, extra])

    # Rank every start by the objective at its repaired (feasible) image and
    # run the local stage only on the most promising ones; the repaired raw
    # starts still enter the candidate pool so no basin seed is lost outright.
    ranked = []
    for x0 in starts:
        point = repair(x0)
        if point is None or not point.feasible(S):
            ranked.append((np.inf, x0, None))
            continue
        ang = math.atan2(point.s, point.c)
        ranked.append((point.objective(p), x0,
                       [ang, point.lam, point.mu, point.delta][:dim]))
    ranked.sort(key=lambda r: r[0])

    candidates = []  # (value, [ang, lam, mu, delta]) at exactly feasible points
    for idx, (val, x0, vec) in enumerate(ranked):
        if vec is not None:
            candidates.append((val, vec))
        if idx >= 24:
            continue
        res = minimize(penalized, x0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 300})
        point = repair(res.x)
        if point is None or not point.feasible(S):
            continue
        ang = math.atan2(point.s, point.c)
        candidates.append((point.objective(p),
                           [ang, point.lam, point.mu, point.delta][:dim]))
    if not candidates:
        raise DomainError(f"no feasible start found for p={p!r}, S={S!r}")
    candidates.sort(key=lambda c: c[0])

    best_val, best_point = np.inf, None
    seen = set()
    polished = 0
    for val, vec in candidates:
        key = tuple(round(v, 3) for v in vec)
        if key in seen:
            continue
        seen.add(key)
        with warnings.catch_warnings():
            # SLSQP logs a RuntimeWarning when it clips an iterate back into
            # the box; that clipping is exactly the behaviour we want here
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(exact_objective, vec, method="SLSQP",
                           bounds=polish_bounds,
                           constraints=polish_constraints,
                           options={"ftol": 1e-14, "maxiter": 300})
        for cand_vec in (res.x, vec):
            point = repair(cand_vec)
            if point is None or not point.feasible(S):
                continue
            cand_val = point.objective(p)
            if cand_val < best_val:
                best_val, best_point = cand_val, point
        polished += 1
        if polished >= 6:
            break
    best_val = float(min(max(best_val, 0.0), 1.0))
    return (best_val, best_point) if return_point else best_val

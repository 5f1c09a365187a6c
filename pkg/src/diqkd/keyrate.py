"""Asymptotic key rates, parameter optimization, and threshold searches.

Rates are one-way Devetak-Winter differences: a certified or conjectured
lower bound on Eve's conditional entropy of Alice's (possibly flipped) key
bit, minus the entropy of that bit given Bob's matching outcome, times the
sifting probability where bases are chosen at random.

Threshold machinery comes in two strengths:

* ``threshold_search`` — plain bisection for the boundary of
  ``rate > rate_floor``; right tool when the rate crosses zero transversally
  (the two-basis error-rate thresholds).
* ``bias_threshold`` — a continuation engine for the detection-efficiency
  protocol, where the optimal implementation collapses toward a product
  state as eta drops and the rate vanishes with a high-order tangency.
  It re-optimizes angles while walking eta downward in rescaled coordinates,
  fits the rate tail r = C (eta - eta*)^p to locate the conjectured
  threshold, and in certified mode inverts the conjectured rate at the
  certification slack epsilon and confirms with one rigorous covering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import least_squares, minimize, minimize_scalar

from .correlations import CHSH_MAX, chsh_corr_bound, two_basis_bound_analytic
from .entropy import f_q
from .errors import BracketError, DomainError
from .models import Implementation, detection_stats, quantum_boundary, white_noise_stats
from .tradeoff import (certified_envelope_bias, conjectured_envelope_bias,
                       convexify_1d, qubit_bound_two_basis)


@dataclass(frozen=True)
class ProtocolConfig:
    """Which protocol a rate refers to, and its fixed parameters."""

    variant: str = "two-basis"  # or "single-basis-bias"
    q: float = 0.0
    p_prime: float = 0.5  # basis-choice probability; two-basis variant only

    def __post_init__(self):
        if self.variant not in ("two-basis", "single-basis-bias"):
            raise DomainError(f"unknown protocol variant {self.variant!r}")
        if not 0.0 <= self.q <= 0.5:
            raise DomainError(f"flip probability q={self.q!r} outside [0, 1/2]")
        if not 0.0 <= self.p_prime <= 1.0:
            raise DomainError(f"basis probability p'={self.p_prime!r} outside [0, 1]")


@dataclass(frozen=True)
class RateResult:
    """One rate evaluation, kept decomposed for reporting.

    rate = sift * (entropy_bound - H_cond) for the two-basis variant and
    entropy_bound - H_cond for the single-basis one; negative rates are
    reported as-is.  meta carries achieved epsilon / covering size for
    certified evaluations and optimizer diagnostics."""

    rate: float
    entropy_bound: float
    H_cond: float
    certified: bool = False
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# two-basis (error-rate) protocol


@lru_cache(maxsize=32)
def _two_basis_curve(q: float, p: float, resolution: int):
    """Convexified entropy curve S -> bits for the two-basis bound (cached).

    p = 1/2 and p in {0, 1} evaluate their closed forms vectorized over the
    grid; other weights fall back to the per-point numeric minimizer, which
    is accurate but slow at high resolutions."""
    if abs(p - 0.5) < 1e-12:
        def bound(S):
            S = np.atleast_1d(S)
            corr2 = np.array([two_basis_bound_analytic(s) for s in S])
            return f_q(q, np.sqrt(np.maximum(corr2, 0.0)))
    elif p < 1e-12 or p > 1.0 - 1e-12:
        # the single-basis extreme reduces to the CHSH correlator bound
        def bound(S):
            S = np.atleast_1d(S)
            corr = np.array([chsh_corr_bound(s) for s in S])
            return f_q(q, corr)
    else:
        def bound(S):
            S = np.atleast_1d(S)
            return np.array([qubit_bound_two_basis(q, p, s) for s in S])
    return convexify_1d(bound, (2.0, CHSH_MAX), resolution)


def rate_two_basis(delta: float, config: ProtocolConfig,
                   curve_resolution: int = 2000) -> RateResult:
    """Key rate of the two-basis protocol at channel error rate delta.

    Builds (or reuses) the convexified tradeoff curve at the requested
    resolution, evaluates it at S = 2 sqrt(2) (1 - 2 delta), subtracts the
    conditional entropy h(q + delta(1-2q)), and applies the sifting factor.
    The effective entropy weight is p = p'^2 / (p'^2 + (1-p')^2).
    """
    if config.variant != "two-basis":
        raise DomainError("rate_two_basis needs a two-basis ProtocolConfig")
    S, H_cond, sift = white_noise_stats(delta, config.q, config.p_prime)
    pp2 = config.p_prime**2
    p = pp2 / (pp2 + (1.0 - config.p_prime) ** 2)
    curve = _two_basis_curve(config.q, p, curve_resolution)
    entropy = curve.value(S)
    return RateResult(rate=sift * (entropy - H_cond), entropy_bound=entropy,
                      H_cond=H_cond, certified=True,
                      meta={"S": S, "sift": sift, "p": p,
                            "curve_resolution": curve_resolution})


# ---------------------------------------------------------------------------
# single-basis protocol with marginal information (detection-efficiency model)


def rate_bias(impl: Implementation, q: float, mode: str = "conjectured",
              epsilon: float = 1e-8, leaf_budget: float = 10_000_000) -> RateResult:
    """Key rate of the single-basis protocol for a concrete Implementation.

    mode 'conjectured' uses the two-point envelope of the bias bound; mode
    'certified' certifies the envelope tangent at slack epsilon first and
    returns the certified (smaller) value.
    """
    if mode not in ("conjectured", "certified"):
        raise DomainError(f"unknown rate mode {mode!r}")
    stats = detection_stats(impl, q)
    a1, S = abs(stats.a1), stats.S
    if not quantum_boundary(a1, S):
        raise DomainError(
            f"model produced (a1={a1!r}, S={S!r}) outside the quantum set; "
            "this indicates a bug, not a valid implementation")
    S = min(max(S, 2.0), CHSH_MAX)  # no violation => only the trivial bound h(q)
    meta: dict = {"S": stats.S, "a1": stats.a1}
    if mode == "conjectured":
        entropy, _tangent = conjectured_envelope_bias(q, (a1, S))
        certified = False
    else:
        entropy, outcome = certified_envelope_bias(
            q, (a1, S), epsilon=epsilon, leaf_budget=leaf_budget, full=True)
        certified = True
        meta.update({"achieved_epsilon": outcome.epsilon,
                     "covering_size": outcome.covering_size,
                     "max_depth_reached": outcome.max_depth_reached})
    return RateResult(rate=entropy - stats.H_A_given_B, entropy_bound=float(entropy),
                      H_cond=stats.H_A_given_B, certified=certified, meta=meta)


# internal rescaled coordinates: near threshold the optimal state collapses
# (theta -> small) and key angles shrink like theta, partner angles like
# sqrt(theta); dividing them out keeps the optimizer landscape well scaled.

def _impl_from_scaled(y, eta: float, v: float) -> Implementation | None:
    theta = y[0]
    if not 1e-8 < theta < math.pi / 2.0:
        return None
    root = math.sqrt(theta)
    return Implementation(theta=theta,
                         phi_a=(y[1] * theta, y[2] * root),
                         phi_b=(y[3] * theta, y[4] * root, y[5] * theta),
                         v=v, eta=eta)


def _scaled_from_impl(impl: Implementation) -> np.ndarray:
    theta = impl.theta
    root = math.sqrt(theta)
    return np.array([theta, impl.phi_a[0] / theta, impl.phi_a[1] / root,
                     impl.phi_b[0] / theta, impl.phi_b[1] / root,
                     impl.phi_b[2] / theta])


def _rate_scaled(y, eta: float, q: float, v: float) -> float:
    impl = _impl_from_scaled(y, eta, v)
    if impl is None:
        return -1.0
    stats = detection_stats(impl, q)
    if stats.S <= 2.0:
        return -1e-3 + (stats.S - 2.0)  # graded penalty guides back to violation
    entropy, _ = conjectured_envelope_bias(q, (abs(stats.a1), min(stats.S, CHSH_MAX)),
                                           n_scan=64, polish=False)
    return entropy - stats.H_A_given_B


def _polish_scaled(y0, eta: float, q: float, v: float, rounds: int = 4):
    y = np.asarray(y0, dtype=float)
    best = -np.inf
    for _ in range(rounds):
        res = minimize(lambda y_: -_rate_scaled(y_, eta, q, v), y,
                       method="Nelder-Mead",
                       options={"maxiter": 4000, "xatol": 1e-13, "fatol": 1e-16})
        y = res.x
        val = -res.fun
        if val <= best + 1e-18:
            best = val
            break
        best = val
    return y, best


def optimize_implementation(eta: float, delta: float, q: float,
                            config: ProtocolConfig | None = None, *,
                            n_starts: int = 16, seed: int = 0,
                            mode: str = "conjectured",
                            epsilon: float = 1e-8) -> tuple[Implementation, RateResult]:
    """Best implementation found for the single-basis protocol at (eta, delta, q).

    Nelder-Mead from n_starts deterministic starting points in rescaled
    coordinates.  Starts cover the symmetric maximally entangled point, the
    weakly entangled small-theta region (near threshold the optimum lives
    there), and seeded perturbations of both.  Returns the best
    implementation with its rate evaluated in the requested mode; meta
    records whether any start converged.
    """
    del config  # reserved; the op is specific to the single-basis variant
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"efficiency eta={eta!r} outside [0, 1]")
    if not 0.0 <= delta <= 0.5:
        raise DomainError(f"error rate delta={delta!r} outside [0, 1/2]")
    v = 1.0 - 2.0 * delta
    rng = np.random.default_rng(seed)
    # theta just inside pi/2: the rescaled coordinates need theta < pi/2 strictly
    symmetric = _scaled_from_impl(Implementation(
        theta=1.5, phi_a=(0.0, math.pi / 2.0),
        phi_b=(math.pi / 4.0, -math.pi / 4.0, 0.0), v=v, eta=eta))
    eberhard = np.array([0.3, -0.05, 1.7, 0.1, -1.1, -0.01])
    base = [symmetric, eberhard]
    while len(base) < n_starts:
        ref = base[len(base) % 2]
        base.append(ref + rng.normal(scale=0.25, size=6))

    best_y, best_rate = symmetric, -np.inf
    for y0 in base[:max(n_starts, 2)]:
        y, r = _polish_scaled(y0, eta, q, v, rounds=2)
        if r > best_rate:
            best_rate, best_y = r, y
    y, best_rate = _polish_scaled(best_y, eta, q, v, rounds=4)
    impl = _impl_from_scaled(y, eta, v)
    if impl is None:  # optimizer left the valid region: fall back to symmetric
        impl = Implementation(theta=1.5, phi_a=(0.0, math.pi / 2.0),
                              phi_b=(math.pi / 4.0, -math.pi / 4.0, 0.0), v=v, eta=eta)
    result = rate_bias(impl, q, mode=mode, epsilon=epsilon)
    # converged == a positive-rate implementation was actually found
    result.meta["converged"] = bool(best_rate > 0.0)
    return impl, result


# ---------------------------------------------------------------------------
# threshold searches


def threshold_search(rate_fn, lo: float, hi: float, tol: float = 1e-6, *,
                     rate_floor: float = 1e-10) -> float:
    """Bisection for the boundary of {rate_fn > rate_floor} on [lo, hi].

    rate_fn must be monotone in its parameter; the endpoints must straddle
    the decision (one side above the floor, the other not), else a
    BracketError is raised.  Returns the boundary to absolute tolerance tol.
    """
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    above_lo = rate_fn(lo) > rate_floor
    above_hi = rate_fn(hi) > rate_floor
    if above_lo == above_hi:
        raise BracketError(
            f"rate_fn does not straddle the rate floor on [{lo!r}, {hi!r}]")
    a, b = float(lo), float(hi)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if (rate_fn(mid) > rate_floor) == above_lo:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def optimize_q(rate_fn, q_grid) -> tuple[float, float]:
    """Grid scan plus golden-section refinement of rate_fn over q."""
    qs = np.asarray(list(q_grid), dtype=float)
    if qs.size == 0:
        raise DomainError("q_grid must be nonempty")
    vals = np.array([rate_fn(qv) for qv in qs])
    j = int(np.argmax(vals))
    lo = qs[max(j - 1, 0)]
    hi = qs[min(j + 1, qs.size - 1)]
    if hi > lo:
        res = minimize_scalar(lambda qv: -rate_fn(qv), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-7})
        if -res.fun > vals[j]:
            return float(res.x), float(-res.fun)
    return float(qs[j]), float(vals[j])


def _fit_rate_tail(etas, rates, n_points: int = 8):
    """Fit r = C (eta - eta*)^p to the lowest-rate end of a continuation path."""
    etas = np.asarray(etas, dtype=float)
    rates = np.asarray(rates, dtype=float)
    keep = rates > 0.0
    etas, rates = etas[keep][-n_points:], rates[keep][-n_points:]
    if etas.size < 4:
        raise BracketError("continuation path too short to fit the rate tail")

    def residuals(z):
        eta_star, log_c, p = z
        gap = np.maximum(etas - eta_star, 1e-14)
        return log_c + p * np.log(gap) - np.log(rates)

    start = [etas[-1] - (etas[-2] - etas[-1]), 0.0, 2.0]
    sol = least_squares(residuals, start,
                        bounds=([etas[-1] - 0.05, -40.0, 0.5],
                                [etas[-1] - 1e-9, 40.0, 4.0]))
    eta_star, log_c, p = sol.x
    return float(eta_star), float(math.exp(log_c)), float(p)


def _continuation_path(q: float, v: float, eta_hi: float, stop_rate: float,
                       seed: int = 0, max_steps: int = 80, verbose: bool = False):
    """Walk eta downward, re-polishing the optimal implementation at each step.

    Steps follow a linear secant prediction of the rate zero, damped by 0.55
    (an overestimate of the threshold gap whenever the tail is convex, so the
    walk cannot jump past the threshold); if a step still lands at
    nonpositive rate it backtracks geometrically.
    """
    impl, _ = optimize_implementation(eta_hi, (1.0 - v) / 2.0, q, seed=seed)
    y = _scaled_from_impl(impl)
    y, r = _polish_scaled(y, eta_hi, q, v, rounds=6)
    if r <= 0.0:
        raise BracketError(f"no positive rate at the starting efficiency {eta_hi!r}")
    path = [(eta_hi, r, y.copy())]
    eta = eta_hi
    step = 4e-3
    while r > stop_rate and len(path) < max_steps:
        if len(path) >= 2:
            (e1, r1, _), (e2, r2, _) = path[-2], path[-1]
            slope = (r1 - r2) / (e1 - e2)
            eta_lin = e2 - r2 / slope if slope > 0 else e2 - 4.0 * (e1 - e2)
            step = max(0.55 * (eta - eta_lin), 1e-6)
        candidate = eta - step
        y_prev = y.copy()
        y_new, r_new = _polish_scaled(y.copy(), candidate, q, v, rounds=3)
        if r_new <= 0.0:
            recovered = False
            for _ in range(6):
                step *= 0.4
                candidate = eta - step
                y_new, r_new = _polish_scaled(y_prev.copy(), candidate, q, v, rounds=3)
                if r_new > 0.0:
                    recovered = True
                    break
            if not recovered:
                break
        eta, y, r = candidate, y_new, r_new
        path.append((eta, r, y.copy()))
        if verbose:
            print(f"eta={eta:.8f} rate={r:.4e} theta={y[0]:.5f}")
    return path


def _rate_on_path(path, eta: float, q: float, v: float):
    """Polished conjectured rate at eta, warm-started from the nearest path entry."""
    nearest = min(path, key=lambda entry: abs(entry[0] - eta))
    y, r = _polish_scaled(nearest[2].copy(), eta, q, v, rounds=3)
    return y, r


def bias_threshold(q: float, *, delta: float = 0.0, mode: str = "conjectured",
                   epsilon: float = 1e-8, eta_hi: float = 0.9,
                   rate_floor: float = 3e-13, seed: int = 0,
                   leaf_budget: float = 3e10, max_depth: int = 40,
                   verbose: bool = False) -> dict:
    """Detection-efficiency threshold of the single-basis protocol.

    Conjectured mode: continuation down to rate_floor, then a tail fit
    r = C (eta - eta*)^p; the threshold is the fitted eta*.  Certified mode:
    the continuation stops once the rate drops below epsilon / 5, the
    conjectured rate is inverted at level epsilon (certified rate =
    conjectured - epsilon vanishes there), and one covering run at a
    confirmation point slightly above the threshold proves the certified
    rate is genuinely positive.  Returns a JSON-ready report dict; etas are
    fractions, not percent.
    """
    if mode not in ("conjectured", "certified"):
        raise DomainError(f"unknown threshold mode {mode!r}")
    if mode == "certified" and not epsilon > 0.0:
        raise DomainError("certified mode needs epsilon > 0")
    v = 1.0 - 2.0 * delta
    stop_rate = rate_floor if mode == "conjectured" else min(epsilon / 5.0, 1e-6)
    path = _continuation_path(q, v, eta_hi, stop_rate, seed=seed, verbose=verbose)
    etas = [p[0] for p in path]
    rates = [p[1] for p in path]
    report = {
        "mode": mode, "q": q, "delta": delta,
        "path": [{"eta": e, "rate": r} for e, r in zip(etas, rates)],
    }
    eta_star, c_fit, p_fit = _fit_rate_tail(etas, rates)
    report["tail_fit"] = {"eta_star": eta_star, "C": c_fit, "p": p_fit}
    if mode == "conjectured":
        report["threshold"] = eta_star
        return report

    # certified: invert conjectured rate at the slack level
    target = epsilon
    above = [(e, r, y) for e, r, y in path if r > target]
    below = [(e, r, y) for e, r, y in path if 0.0 < r <= target]
    if not above:
        raise BracketError("continuation never exceeded the certification slack")
    e_hi, r_hi, _ = min(above, key=lambda t: t[1])
    if below:
        e_lo, r_lo, _ = max(below, key=lambda t: t[1])
    else:
        e_lo, r_lo = eta_star, 0.0
    for _ in range(60):
        if r_hi <= 1.02 * target and r_hi > target:
            break
        # secant in cube-root coordinates handles the high-order tangency
        w_hi, w_lo, w_t = r_hi ** (1 / 3), max(r_lo, 0.0) ** (1 / 3), target ** (1 / 3)
        frac = (w_hi - w_t) / max(w_hi - w_lo, 1e-300)
        e_mid = e_hi - (e_hi - e_lo) * min(max(frac, 0.05), 0.95)
        _, r_mid = _rate_on_path(path, e_mid, q, v)
        if r_mid > target:
            e_hi, r_hi = e_mid, r_mid
        else:
            e_lo, r_lo = e_mid, r_mid
        if e_hi - e_lo < 1e-9:
            break
    threshold = e_hi if r_hi <= 1.02 * target else 0.5 * (e_hi + e_lo)
    report["threshold"] = threshold
    report["bracket"] = [e_lo, e_hi]

    # confirmation: certify at a point with ~35% rate margin over epsilon
    confirm_target = 1.35 * target
    e_conf = e_hi
    y_conf, r_conf = _rate_on_path(path, e_conf, q, v)
    for _ in range(40):
        if 1.2 * target <= r_conf <= 1.6 * target:
            break
        # secant in cube-root coordinates handles the high-order tangency
        w_c, w_t = r_conf ** (1 / 3), confirm_target ** (1 / 3)
        w_lo = max(r_lo, 0.0) ** (1 / 3)
        frac = (w_c - w_t) / max(w_c - w_lo, 1e-300)
        e_conf = e_conf - (e_conf - e_lo) * min(max(frac, -0.5), 0.9)
        y_conf, r_conf = _rate_on_path(path, e_conf, q, v)
    impl_conf = _impl_from_scaled(y_conf, e_conf, v)
    if impl_conf is None:
        raise BracketError("confirmation-point polish left the valid angle region")
    cert_result = rate_bias(impl_conf, q, mode="certified", epsilon=epsilon,
                            leaf_budget=leaf_budget)
    report["confirmation"] = {
        "eta": e_conf,
        "conjectured_rate": r_conf,
        "certified_rate": cert_result.rate,
        "achieved_epsilon": cert_result.meta.get("achieved_epsilon"),
        "covering_size": cert_result.meta.get("covering_size"),
        "max_depth_reached": cert_result.meta.get("max_depth_reached"),
        "positive": cert_result.rate > 0.0,
    }
    report["epsilon"] = epsilon
    return report

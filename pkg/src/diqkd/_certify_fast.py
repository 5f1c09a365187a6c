"""Compiled inner loop for certifying affine bounds against the bias surface.

The recursion in ``tradeoff.certify_affine`` visits billions of rectangles at
the epsilon values needed for threshold-scale certifications, so the bias
specialization runs here as a single nopython kernel: an explicit-stack
depth-first traversal with the entropy bound inlined.

Implementation constraints worth knowing:

* fastmath disables NaN checks, so "value not cached yet" is encoded as a
  negative sentinel, never NaN;
* the per-cell lower value is the bound at the lower-left corner in
  (|a1|, S); the child sharing that corner inherits the parent's value, which
  saves ~25% of bound evaluations;
* cells whose lower-left corner violates a1^2 + S^2/4 <= 2 lie wholly
  outside the quantum set (the inside region is downward closed) and are
  discarded as vacuously certified.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_LOG2E = float(np.log2(np.e))


@njit(cache=True, fastmath=True)
def _phi(u: float) -> float:
    if u >= 1.0 - 1e-15:
        return 0.0
    if u < 0.0:
        u = -u
    return 1.0 - 0.5 * _LOG2E * ((1.0 + u) * np.log1p(u) + (1.0 - u) * np.log1p(-u))


@njit(cache=True, fastmath=True)
def _bias_bound(q: float, z: float, x2: float) -> float:
    """g_q at marginal z and squared correlator x2 = S^2/4 - 1."""
    kappa = 4.0 * q * (1.0 - q)
    rp = np.sqrt((1.0 - 2.0 * q + z) ** 2 + kappa * x2)
    rm = np.sqrt((1.0 - 2.0 * q - z) ** 2 + kappa * x2)
    m_plus = 0.5 * (rp + rm)
    if m_plus > 1.0:
        m_plus = 1.0
    r2 = z * z + x2
    if r2 > 1.0:
        r2 = 1.0
    return _phi(m_plus) + _phi(0.5 * (rp - rm)) - _phi(np.sqrt(r2))


@njit(cache=True, fastmath=True)
def certify_bias_kernel(q: float, beta: float, alpha1: float, alpha2: float,
                        eps: float, leaf_budget: float, max_depth: int):
    """Certify beta + alpha . (a1, S) <= bias bound + eps on [0,1] x [2, 2sqrt(2)].

    Returns (status, leaves, tested, discarded, peak_depth, max_margin,
    witness_a1, witness_S, witness_margin) where status is 0 = certified,
    1 = refuted, 2 = leaf budget exhausted, 3 = max depth exceeded.
    max_margin is the largest per-cell test value among passed cells, i.e.
    the tightest epsilon this covering actually establishes.
    """
    width_s = 2.0 * np.sqrt(2.0) - 2.0
    # precomputed cell extents per depth (exact halving, no accumulation)
    ell_at = np.empty(max_depth + 2)
    w_at = np.empty(max_depth + 2)
    for d in range(max_depth + 2):
        ell_at[d] = 2.0 ** (-d)
        w_at[d] = width_s * 2.0 ** (-d)

    cap = 4 * (max_depth + 2) + 8
    st_a = np.empty(cap)
    st_s = np.empty(cap)
    st_f = np.empty(cap)  # cached bound at the cell's lower-left corner; <0 = compute
    st_d = np.empty(cap, dtype=np.int64)
    top = 0
    st_a[0] = 0.0
    st_s[0] = 2.0
    st_f[0] = -1.0
    st_d[0] = 0

    leaves = 0.0
    tested = 0.0
    discarded = 0.0
    peak_depth = 0
    max_margin = -1e300
    status = 0
    wit_a = 0.0
    wit_s = 0.0
    wit_t = 0.0

    while top >= 0:
        a_lo = st_a[top]
        s_lo = st_s[top]
        f_cached = st_f[top]
        depth = st_d[top]
        top -= 1
        if depth > peak_depth:
            peak_depth = depth
        ell = ell_at[depth]
        w = w_at[depth]

        if a_lo * a_lo + s_lo * s_lo / 4.0 > 2.0:
            discarded += 1.0
            leaves += 1.0
            if leaves > leaf_budget:
                status = 2
                break
            continue

        if f_cached < -0.5:
            x2 = s_lo * s_lo / 4.0 - 1.0
            if x2 < 0.0:
                x2 = 0.0
            f_cell = _bias_bound(q, a_lo, x2)
        else:
            f_cell = f_cached
        tested += 1.0

        # plane maximum over the cell: pick the corner per coefficient sign
        xa = a_lo + ell if alpha1 > 0.0 else a_lo
        xs = s_lo + w if alpha2 > 0.0 else s_lo
        t = beta + alpha1 * xa + alpha2 * xs - f_cell

        if t <= eps:
            if t > max_margin:
                max_margin = t
            leaves += 1.0
            if leaves > leaf_budget:
                status = 2
                break
            continue

        # plane minimum over the cell still violates: genuine counterexample
        if t - abs(alpha1) * ell - abs(alpha2) * w > eps:
            status = 1
            wit_a = a_lo
            wit_s = s_lo
            wit_t = t - abs(alpha1) * ell - abs(alpha2) * w
            break

        if depth >= max_depth:
            status = 3
            wit_a = a_lo
            wit_s = s_lo
            wit_t = t
            break

        h_ell = 0.5 * ell
        h_w = 0.5 * w
        # children; the one at (a_lo, s_lo) inherits the corner value
        top += 1
        st_a[top] = a_lo + h_ell
        st_s[top] = s_lo + h_w
        st_f[top] = -1.0
        st_d[top] = depth + 1
        top += 1
        st_a[top] = a_lo
        st_s[top] = s_lo + h_w
        st_f[top] = -1.0
        st_d[top] = depth + 1
        top += 1
        st_a[top] = a_lo + h_ell
        st_s[top] = s_lo
        st_f[top] = -1.0
        st_d[top] = depth + 1
        top += 1
        st_a[top] = a_lo
        st_s[top] = s_lo
        st_f[top] = f_cell
        st_d[top] = depth + 1

    if max_margin < -1e299:
        max_margin = 0.0
    return (status, leaves, tested, discarded, peak_depth, max_margin,
            wit_a, wit_s, wit_t)

"""Entropy bounds, key rates, and certification tools for device-independent
QKD with noisy preprocessing.

The package is organized bottom-up:

* :mod:`diqkd.entropy` — scalar entropy functions and the qubit bound kernels;
* :mod:`diqkd.correlations` — CHSH-constrained correlator bounds (analytic
  and numeric);
* :mod:`diqkd.models` — honest-device statistics under detection inefficiency;
* :mod:`diqkd.tradeoff` — entropy-vs-Bell-value tradeoff curves, conjectured
  envelopes, and rigorous rectangle-covering certification;
* :mod:`diqkd.keyrate` — Devetak-Winter rates, angle optimization, thresholds;
* :mod:`diqkd.attacks` — explicit eavesdropping strategies (rate upper bounds);
* :mod:`diqkd.cli` — the ``diqkd`` command-line front end.
"""

from .attacks import AttackValue, bias_attack, conjectured_rate_upper_bound, two_basis_attack
from .correlations import (CHSH_MAX, asym_chsh_corr_bound, chsh_corr_bound,
                           two_basis_bound_analytic, two_basis_bound_numeric)
from .entropy import binary_entropy, f_q, f_q_slope, g_q, phi
from .errors import BracketError, DiqkdError, DomainError, RefutedError
from .keyrate import (ProtocolConfig, RateResult, bias_threshold, optimize_implementation,
                      optimize_q, rate_bias, rate_two_basis, threshold_search)
from .models import (Implementation, Statistics, detection_stats,
                     quantum_boundary, white_noise_stats)
from .tradeoff import (AffineBound, BellPoint, RectCovering, TradeoffCurve,
                       certified_envelope_bias, certify_affine,
                       conjectured_envelope_bias, convexify_1d,
                       qubit_bound_asym, qubit_bound_bias, qubit_bound_chsh,
                       qubit_bound_two_basis)

__version__ = "0.1.0"

__all__ = [
    "AffineBound", "AttackValue", "BellPoint", "BracketError", "CHSH_MAX",
    "DiqkdError", "DomainError", "Implementation", "ProtocolConfig",
    "RateResult", "RectCovering", "RefutedError", "Statistics",
    "TradeoffCurve", "asym_chsh_corr_bound", "bias_attack", "bias_threshold",
    "binary_entropy", "certified_envelope_bias", "certify_affine",
    "chsh_corr_bound", "conjectured_envelope_bias",
    "conjectured_rate_upper_bound", "convexify_1d", "detection_stats", "f_q",
    "f_q_slope", "g_q", "optimize_implementation", "optimize_q", "phi",
    "quantum_boundary", "qubit_bound_asym", "qubit_bound_bias",
    "qubit_bound_chsh", "qubit_bound_two_basis", "rate_bias",
    "rate_two_basis", "threshold_search", "two_basis_attack",
    "two_basis_bound_analytic", "two_basis_bound_numeric",
    "white_noise_stats", "__version__",
]

"""Log-domain link metrics: SNR, capacity and transmit power.

All functions consume and produce log-domain values (raw SNR spans
hundreds of orders of magnitude along one trajectory) and accept scalars
or numpy arrays.  The same functions fill trajectory columns and recompute
them in tests, so results are bit-stable by construction.
"""
from __future__ import annotations

import numpy as np

# Below this log-SNR, softplus(x) = e^x to double precision and taking its
# log directly avoids the underflow of materializing e^x.
_LOG_CAP_SWITCH = -30.0


def snr_log(log_i_sq, log_n_sq):
    """log SNR = log signal power - log noise power."""
    return np.subtract(log_i_sq, log_n_sq)


def capacity_nats(log_gamma):
    """Capacity log(1 + SNR) in nats from log SNR, stable over all magnitudes.

    softplus via logaddexp: exact for moderate arguments, e^x for very
    negative x (never rounding to zero unless SNR is exactly zero), x for
    very large x.
    """
    return np.logaddexp(0.0, log_gamma)


def log_capacity_nats(log_gamma):
    """log of capacity_nats without underflow.

    For strongly negative log SNR the capacity value itself underflows
    double precision; its log is still ~log_gamma and is what slope fits
    of the capacity decay need.
    """
    x = np.asarray(log_gamma, dtype=float)
    safe = np.where(x < _LOG_CAP_SWITCH, 0.0, x)
    with np.errstate(divide="ignore"):
        moderate = np.log(np.logaddexp(0.0, safe))
    out = np.where(x < _LOG_CAP_SWITCH, x, moderate)
    if np.ndim(log_gamma) == 0:
        return float(out)
    return out


def transmit_power_log(log_i_sq, log_n_sq):
    """log(signal power + noise power) via two-term log-sum-exp."""
    return np.logaddexp(log_i_sq, log_n_sq)

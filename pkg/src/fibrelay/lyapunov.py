"""Monte Carlo estimation of cocycle growth rates.

The top growth rate of the signal recursion is estimated from the log of
the renormalized state along the recursion's own initial vector: for
strictly positive coefficients every nonnegative nonzero start vector
realizes the top exponent.  Replicas run on independent streams and the
point estimate, standard error and confidence interval come from the
replica sample; the reduction is performed in ascending stream-id order so
results do not depend on worker count.

A burn-in prefix (default 100 nodes) is discarded from growth accounting:
the replica value is (log value[n] - log value[burn]) / (n - burn).  With
burn_in=0 nothing is subtracted and the value is the bare growth-rate
formula (1/n) * log value[n], source magnitude included.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._parallel import map_ordered
from .coeffs import (
    CoefficientModel,
    Deterministic,
    GainPolicy,
    RngStream,
    first_hop_coefficient,
    hop_coefficient_chunks,
)
from .cocycle import NetworkConfig, init_info
from .errors import ConfigError, ValidationOnlyModelError

logger = logging.getLogger("fibrelay")

GROWTH_RATE = "growth_rate"
TAIL_RATIO = "tail_ratio"

Z95 = 1.96
DEFAULT_BURN_IN = 100
MIN_GROWTH_STEPS = 1000

_CHUNK_STEPS = 1 << 19
# offset for restarted replicas keeps their stream ids disjoint from all
# ordinary replica ids
_RESTART_STRIDE = 1 << 48
_MAX_RESTARTS = 8


@dataclass(frozen=True)
class LyapunovEstimate:
    """Replica-averaged growth-rate estimate with normal-theory CI."""

    lambda_hat: float
    std_err: float
    n_steps: int
    n_replicas: int
    ci95_lo: float
    ci95_hi: float
    estimator_kind: str
    replica_values: tuple = ()

    def to_report(self, model_spec: str, gain_spec: str, master_seed: int) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "std_err": self.std_err,
            "ci95": [self.ci95_lo, self.ci95_hi],
            "n_steps": self.n_steps,
            "n_replicas": self.n_replicas,
            "estimator_kind": self.estimator_kind,
            "master_seed": master_seed,
            "model_spec": model_spec,
            "gain_spec": gain_spec,
        }


def _reduce(values, n_steps, kind) -> LyapunovEstimate:
    arr = np.asarray(values, dtype=float)
    lam = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return LyapunovEstimate(
        lambda_hat=lam,
        std_err=se,
        n_steps=n_steps,
        n_replicas=len(arr),
        ci95_lo=lam - Z95 * se,
        ci95_hi=lam + Z95 * se,
        estimator_kind=kind,
        replica_values=tuple(float(v) for v in arr),
    )


# ---------------------------------------------------------------------------
# checkpointed recursion runners
# ---------------------------------------------------------------------------


def _info_logs_at(model, gains, n_steps, stream, checkpoints, i0, period):
    """Log magnitudes at the requested node indices (all >= 1)."""
    rng = stream.generator()
    want = sorted(set(checkpoints))
    out = {}
    eta01 = first_hop_coefficient(model, gains, rng)
    state = init_info(i0, eta01)
    a, b, ls, phase = state.u_prev, state.u_cur, state.log_scale, 0
    if want and want[0] == 1:
        out[1] = ls + math.log(b)
        want = want[1:]
    for start, e2, e1 in hop_coefficient_chunks(model, gains, rng, n_steps, _CHUNK_STEPS):
        end = start + len(e2)
        pos = 0
        while want and start <= want[0] < end:
            cnt = want[0] - start + 1 - pos
            a, b, ls, phase = _kernels.info_steps(
                e2[pos:pos + cnt], e1[pos:pos + cnt], a, b, ls, period, phase)
            pos += cnt
            out[want[0]] = ls + math.log(b)
            want = want[1:]
        if pos < len(e2):
            a, b, ls, phase = _kernels.info_steps(
                e2[pos:], e1[pos:], a, b, ls, period, phase)
    return out


def _signed_logs_at(model, gains, n_steps, stream, checkpoints, period):
    """Signed variant: log |value|; -inf marks an exactly-zero checkpoint."""
    rng = stream.generator()
    want = sorted(set(checkpoints))
    out = {}
    coeff01 = first_hop_coefficient(model, gains, rng)
    a, b = 1.0, coeff01
    m = max(abs(a), abs(b))
    a, b, ls, phase = a / m, b / m, math.log(m), 0

    def log_abs():
        return ls + math.log(abs(b)) if b != 0.0 else -math.inf

    if want and want[0] == 1:
        out[1] = log_abs()
        want = want[1:]
    for start, c2, c1 in hop_coefficient_chunks(model, gains, rng, n_steps, _CHUNK_STEPS):
        end = start + len(c2)
        pos = 0
        while want and start <= want[0] < end:
            cnt = want[0] - start + 1 - pos
            a, b, ls, phase = _kernels.signed_steps(
                c2[pos:pos + cnt], c1[pos:pos + cnt], a, b, ls, period, phase)
            pos += cnt
            out[want[0]] = log_abs()
            want = want[1:]
        if pos < len(c2):
            a, b, ls, phase = _kernels.signed_steps(
                c2[pos:], c1[pos:], a, b, ls, period, phase)
    return out


def _noise_logs_at(model, gains, n_steps, stream, checkpoints, n0, period):
    rng = stream.generator()
    want = sorted(set(checkpoints))
    out = {}
    first_hop_coefficient(model, gains, rng)  # keep stream aligned with the signal run
    if want and want[0] == 1:
        out[1] = math.log(n0)
        want = want[1:]
    w0, w1, w2, ls, phase = 0.0, 0.0, 1.0, 0.0, 0
    for start, e2, e1 in hop_coefficient_chunks(model, gains, rng, n_steps, _CHUNK_STEPS):
        end = start + len(e2)
        pos = 0
        q2, q1 = e2 * e2, e1 * e1
        while want and start <= want[0] < end:
            cnt = want[0] - start + 1 - pos
            w0, w1, w2, ls, phase = _kernels.noise_steps(
                q2[pos:pos + cnt], q1[pos:pos + cnt], n0, w0, w1, w2, ls, period, phase)
            pos += cnt
            out[want[0]] = ls + math.log(w1)
            want = want[1:]
        if pos < len(q2):
            w0, w1, w2, ls, phase = _kernels.noise_steps(
                q2[pos:], q1[pos:], n0, w0, w1, w2, ls, period, phase)
    return out


# ---------------------------------------------------------------------------
# replica workers (module-level so they pickle for process pools)
# ---------------------------------------------------------------------------


def _growth_replica(payload):
    model, gains, n, seed, sid, burn, i0, period, signed = payload
    # burn_in = 0 is the bare formula (1/n) * log value[n], source factor kept
    checkpoints = (n,) if burn == 0 else (burn, n)
    attempt = 0
    while True:
        stream = RngStream(seed, sid + attempt * _RESTART_STRIDE)
        if signed:
            logs = _signed_logs_at(model, gains, n, stream, checkpoints, period)
        else:
            logs = _info_logs_at(model, gains, n, stream, checkpoints, i0, period)
        lo, hi = (0.0 if burn == 0 else logs[burn]), logs[n]
        if math.isfinite(lo) and math.isfinite(hi):
            return (hi - lo) / (n - burn)
        attempt += 1
        logger.warning(
            "replica %d hit an exactly-zero value at a checkpoint; restarting "
            "with offset stream (attempt %d)", sid, attempt)
        if attempt > _MAX_RESTARTS:
            raise RuntimeError(f"replica {sid}: degenerate zero values persist")


def _tail_replica(payload):
    model, gains, n, seed, sid, i0, period = payload
    m = math.ceil(n / 2)
    logs = _info_logs_at(model, gains, n, RngStream(seed, sid), (n - m, n), i0, period)
    return (logs[n] - logs[n - m]) / m


def _noise_replica(payload):
    model, gains, n, seed, sid, burn, n0, period = payload
    logs = _noise_logs_at(model, gains, n, RngStream(seed, sid), (burn, n), n0, period)
    return (logs[n] - logs[burn]) / (n - burn)


# ---------------------------------------------------------------------------
# public estimators
# ---------------------------------------------------------------------------


def estimate_lambda(model: CoefficientModel, gains: GainPolicy, n_steps: int,
                    n_replicas: int, master_seed: int, kind: str = GROWTH_RATE,
                    *, burn_in: int | None = None, i0: float = 1.0,
                    validation: bool = False, renorm_period: int = 1,
                    workers: int = 1) -> LyapunovEstimate:
    """Estimate the top growth rate of the signal recursion.

    ``growth_rate`` averages (log value[n] - log value[burn]) / (n - burn)
    over replicas.  ``tail_ratio`` averages the per-step log ratio over the
    last ceil(n/2) steps and is restricted to deterministic models, where
    convergence is exponential.  Signed validation models are accepted only
    with ``validation=True`` (growth_rate kind, signed arithmetic on
    log |value|); a replica whose checkpoint lands on an exact zero is
    restarted on an offset stream with a logged warning.
    """
    if kind not in (GROWTH_RATE, TAIL_RATIO):
        raise ConfigError(f"unknown estimator kind {kind!r}")
    if n_replicas < 1:
        raise ConfigError(f"n_replicas must be >= 1, got {n_replicas}")
    if model.validation_only and not validation:
        raise ValidationOnlyModelError(
            "validation-only model requires validation=True")
    gains.require_length(n_steps)
    signed = model.validation_only
    if kind == TAIL_RATIO:
        if signed or not isinstance(model, Deterministic):
            raise ConfigError("tail_ratio is restricted to deterministic models")
        if n_steps < 4:
            raise ConfigError(f"tail_ratio needs n_steps >= 4, got {n_steps}")
        payloads = [(model, gains, n_steps, master_seed, sid, i0, renorm_period)
                    for sid in range(n_replicas)]
        values = map_ordered(_tail_replica, payloads, workers)
        return _reduce(values, n_steps, kind)

    if n_steps < MIN_GROWTH_STEPS:
        raise ConfigError(
            f"growth_rate needs n_steps >= {MIN_GROWTH_STEPS}, got {n_steps}")
    burn = DEFAULT_BURN_IN if burn_in is None else int(burn_in)
    if not 0 <= burn < n_steps:
        raise ConfigError(f"burn_in must be in [0, n_steps), got {burn}")
    payloads = [(model, gains, n_steps, master_seed, sid, burn, i0,
                 renorm_period, signed) for sid in range(n_replicas)]
    values = map_ordered(_growth_replica, payloads, workers)
    return _reduce(values, n_steps, kind)


def estimate_noise_exponent(config: NetworkConfig, n_steps: int, n_replicas: int,
                            *, burn_in: int | None = None, renorm_period: int = 1,
                            workers: int = 1) -> LyapunovEstimate:
    """Estimate the growth rate of the accumulated noise power.

    Averages (log noise[n] - log noise[burn]) / (n - burn) over replicas of
    the 3x3 cocycle.  Requires a positive noise floor (the zero-noise
    trajectory has no growth rate).
    """
    if not (config.n0 > 0.0):
        raise ConfigError("noise exponent undefined for n0 = 0")
    if n_replicas < 1:
        raise ConfigError(f"n_replicas must be >= 1, got {n_replicas}")
    if n_steps < MIN_GROWTH_STEPS:
        raise ConfigError(
            f"noise exponent needs n_steps >= {MIN_GROWTH_STEPS}, got {n_steps}")
    config.gains.require_length(n_steps)
    burn = DEFAULT_BURN_IN if burn_in is None else int(burn_in)
    if not 1 <= burn < n_steps:
        raise ConfigError(f"burn_in must be in [1, n_steps), got {burn}")
    payloads = [(config.model, config.gains, n_steps, config.master_seed, sid,
                 burn, config.n0, renorm_period) for sid in range(n_replicas)]
    values = map_ordered(_noise_replica, payloads, workers)
    return _reduce(values, n_steps, GROWTH_RATE)


def lambda_deterministic_closed_form(c: float, g: float) -> float:
    """Closed-form growth rate for a constant coefficient c*g.

    Log of the dominant root of x**2 = cg*x + cg; the test oracle for
    every deterministic configuration.
    """
    if not (c > 0.0 and g > 0.0):
        raise ConfigError("c and g must be positive")
    cg = c * g
    return math.log((cg + math.sqrt(cg * cg + 4.0 * cg)) / 2.0)

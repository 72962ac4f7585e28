"""Empirical verification of the capacity and transmit-power scaling laws.

Both laws predict the asymptotic per-node slope of a log series from the
signal growth rate: the capacity series log c_n should slope to
min{0, 2*lambda} and the transmit-power series log X_n^2 to
max{0, 2*lambda}.  Slopes are fit per replica and averaged (pooled OLS
would understate the error given within-trajectory correlation), and a
report is consistent when the measured slope sits within a sigma band of
the prediction, with an absolute floor so exactly-converged deterministic
runs (replica spread zero) are judged at a sane tolerance.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import metrics
from ._parallel import map_ordered
from .cocycle import NetworkConfig, run_trajectory
from .errors import ConfigError
from .lyapunov import LyapunovEstimate, estimate_lambda

CAPACITY = "capacity"
POWER = "power"

DEFAULT_TOLERANCE_SIGMA = 3.0
DEFAULT_SLOPE_TOL = 0.01


def default_burn_in(n: int) -> int:
    """Transient discard for slope fits: max(100, 5% of the series)."""
    return max(100, int(0.05 * n))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    std_err: float
    n_points: int
    burn_in: int

    def to_report(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "std_err": self.std_err,
            "n_points": self.n_points,
            "burn_in": self.burn_in,
        }


def slope_estimate(series, burn_in: int) -> SlopeFit:
    """Ordinary least squares of a per-node series against the node index.

    Fits over node indices strictly greater than ``burn_in``; needs at
    least 10 points after the burn-in.
    """
    y = np.asarray(series, dtype=float)
    n = len(y)
    if n <= burn_in + 10:
        raise ConfigError(
            f"series too short for a slope fit: {n} points, burn_in {burn_in}")
    x = np.arange(burn_in + 1, n + 1, dtype=float)
    y = y[burn_in:]
    m = len(x)
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    slope = float(dx @ (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    rss = float(resid @ resid)
    var = max(rss, 0.0) / (m - 2)
    return SlopeFit(
        slope=slope,
        intercept=intercept,
        std_err=math.sqrt(var / sxx),
        n_points=m,
        burn_in=burn_in,
    )


@dataclass(frozen=True)
class LawReport:
    law: str
    predicted_exponent: float
    measured: SlopeFit
    lambda_estimate: LyapunovEstimate
    verdict: str
    tolerance_sigma: float
    slope_tol: float
    replica_slopes: tuple = ()
    # the laws are read in their probabilistic (in-probability) sense
    order_notation: str = "Theta_P"

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"

    def to_report(self, model_spec: str, gain_spec: str, master_seed: int) -> dict:
        return {
            "law": self.law,
            "predicted_exponent": self.predicted_exponent,
            "measured": self.measured.to_report(),
            "lambda_estimate": self.lambda_estimate.to_report(
                model_spec, gain_spec, master_seed),
            "verdict": self.verdict,
            "tolerance_sigma": self.tolerance_sigma,
            "slope_tol": self.slope_tol,
            "order_notation": self.order_notation,
            "replica_slopes": list(self.replica_slopes),
        }


def _slope_replica(payload):
    config, sid, which, burn, period = payload
    traj = run_trajectory(config, sid, renorm_period=period)
    if which == CAPACITY:
        # log of the capacity via the log-domain helper: the raw capacity
        # column underflows once the SNR exponent is strongly negative
        series = metrics.log_capacity_nats(traj.log_snr)
    else:
        series = traj.log_x_sq
    fit = slope_estimate(series, burn)
    return fit.slope, fit.intercept, fit.n_points


def _series_replica(payload):
    config, sid, which, period = payload
    traj = run_trajectory(config, sid, renorm_period=period)
    if which == CAPACITY:
        return metrics.log_capacity_nats(traj.log_snr)
    return traj.log_x_sq


def capacity_log_series(config: NetworkConfig, stream_id: int = 0,
                        renorm_period: int = 1) -> np.ndarray:
    """Per-node log c_n series for one replica."""
    return _series_replica((config, stream_id, CAPACITY, renorm_period))


def simulate_capacity_ensemble(config: NetworkConfig, n_steps: int, n_replicas: int,
                               *, renorm_period: int = 1, workers: int = 1) -> np.ndarray:
    """Replicas-by-nodes matrix of log c_n, for band checks."""
    cfg = dataclasses.replace(config, n_nodes=int(n_steps))
    payloads = [(cfg, sid, CAPACITY, renorm_period) for sid in range(n_replicas)]
    return np.vstack(map_ordered(_series_replica, payloads, workers))


def _verify_law(config, n_steps, n_replicas, which, tolerance_sigma, slope_tol,
                burn_in, renorm_period, workers):
    n_steps = int(n_steps)
    burn = default_burn_in(n_steps) if burn_in is None else int(burn_in)
    lam = estimate_lambda(config.model, config.gains, n_steps, n_replicas,
                          config.master_seed, i0=config.i0,
                          renorm_period=renorm_period, workers=workers)
    two_lam = 2.0 * lam.lambda_hat
    if which == CAPACITY:
        predicted = min(0.0, two_lam)
        pred_se = 2.0 * lam.std_err if two_lam < 0.0 else 0.0
    else:
        predicted = max(0.0, two_lam)
        pred_se = 2.0 * lam.std_err if two_lam > 0.0 else 0.0

    cfg = dataclasses.replace(config, n_nodes=n_steps)
    payloads = [(cfg, sid, which, burn, renorm_period) for sid in range(n_replicas)]
    fits = map_ordered(_slope_replica, payloads, workers)
    slopes = np.array([f[0] for f in fits])
    slope = float(slopes.mean())
    slope_se = float(slopes.std(ddof=1) / math.sqrt(len(slopes))) if len(slopes) > 1 else 0.0
    measured = SlopeFit(
        slope=slope,
        intercept=float(np.mean([f[1] for f in fits])),
        std_err=slope_se,
        n_points=fits[0][2],
        burn_in=burn,
    )
    combined = math.hypot(slope_se, pred_se)
    band = max(tolerance_sigma * combined, slope_tol)
    verdict = "consistent" if abs(slope - predicted) <= band else "inconsistent"
    return LawReport(
        law=which,
        predicted_exponent=predicted,
        measured=measured,
        lambda_estimate=lam,
        verdict=verdict,
        tolerance_sigma=tolerance_sigma,
        slope_tol=slope_tol,
        replica_slopes=tuple(float(s) for s in slopes),
    )


def verify_capacity_law(config: NetworkConfig, n_steps: int, n_replicas: int,
                        *, tolerance_sigma: float = DEFAULT_TOLERANCE_SIGMA,
                        slope_tol: float = DEFAULT_SLOPE_TOL,
                        burn_in: int | None = None, renorm_period: int = 1,
                        workers: int = 1) -> LawReport:
    """Compare the fitted slope of log c_n with min{0, 2*lambda_hat}."""
    return _verify_law(config, n_steps, n_replicas, CAPACITY, tolerance_sigma,
                       slope_tol, burn_in, renorm_period, workers)


def verify_power_law(config: NetworkConfig, n_steps: int, n_replicas: int,
                     *, tolerance_sigma: float = DEFAULT_TOLERANCE_SIGMA,
                     slope_tol: float = DEFAULT_SLOPE_TOL,
                     burn_in: int | None = None, renorm_period: int = 1,
                     workers: int = 1) -> LawReport:
    """Compare the fitted slope of log X_n^2 with max{0, 2*lambda_hat}."""
    return _verify_law(config, n_steps, n_replicas, POWER, tolerance_sigma,
                       slope_tol, burn_in, renorm_period, workers)


@dataclass(frozen=True)
class ThetaBandCheck:
    """Empirical in-probability band fractions at the largest simulated n."""

    upper_fraction: float
    lower_fraction: float
    n: int
    rate: float
    h_value: float

    def to_report(self) -> dict:
        return {
            "upper_fraction": self.upper_fraction,
            "lower_fraction": self.lower_fraction,
            "n": self.n,
            "rate": self.rate,
            "h_value": self.h_value,
        }


def check_theta_p(ensemble, rate: float, h_exponent: float,
                  c_h: float = 1.0) -> ThetaBandCheck:
    """Fraction of replicas inside the slack envelope rate*n +/- c_h*n^h.

    ``ensemble`` is replicas-by-nodes, in log domain.  The upper fraction
    counts replicas with final value <= rate*n + h(n); the lower fraction
    counts final value >= rate*n - h(n).  Requires h_exponent in (0, 1) so
    the envelope is sublinear.
    """
    ens = np.asarray(ensemble, dtype=float)
    if ens.ndim != 2 or ens.size == 0:
        raise ConfigError("ensemble must be a non-empty replicas-by-nodes array")
    if not 0.0 < h_exponent < 1.0:
        raise ConfigError(f"h_exponent must be in (0, 1), got {h_exponent}")
    if not c_h > 0.0:
        raise ConfigError(f"c_h must be positive, got {c_h}")
    n = ens.shape[1]
    final = ens[:, -1]
    h = c_h * float(n) ** h_exponent
    return ThetaBandCheck(
        upper_fraction=float(np.mean(final <= rate * n + h)),
        lower_fraction=float(np.mean(final >= rate * n - h)),
        n=n,
        rate=rate,
        h_value=h,
    )

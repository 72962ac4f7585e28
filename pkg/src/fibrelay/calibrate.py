"""Zero-growth gain calibration.

Finds the constant amplification gain at which the signal recursion's
growth rate is zero, the operating point with neither exponential capacity
decay nor exponential transmit-power growth.  All growth-rate evaluations
during one calibration reuse identical random streams (common random
numbers): every coefficient is magnitude * gain with the magnitudes fixed
per stream, so the estimated rate is a deterministic, strictly increasing
function of the gain and a plain bisection converges.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .coeffs import CoefficientModel, ConstantGain
from .errors import ConfigError, UnbracketableError, ValidationOnlyModelError
from .lyapunov import Z95, LyapunovEstimate, estimate_lambda

logger = logging.getLogger("fibrelay")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class CalibrationResult:
    g_star: float
    lambda_at_g_star: LyapunovEstimate
    bracket_history: tuple
    evaluations: int
    converged: bool
    # independent confirmation at g_star on fresh streams (None if not run)
    confirmation: LyapunovEstimate | None = None

    def to_report(self, model_spec: str, tol: float, n_replicas: int,
                  master_seed: int) -> dict:
        gain_spec = ConstantGain(self.g_star).spec_string()
        return {
            "g_star": self.g_star,
            "lambda_at_g_star": self.lambda_at_g_star.to_report(
                model_spec, gain_spec, master_seed),
            "bracket_history": [list(b) for b in self.bracket_history],
            "evaluations": self.evaluations,
            "converged": self.converged,
            "confirmation": None if self.confirmation is None
            else self.confirmation.to_report(model_spec, gain_spec,
                                             (master_seed + 1) & _MASK64),
            "tol": tol,
            "n_steps": self.lambda_at_g_star.n_steps,
            "n_replicas": n_replicas,
            "master_seed": master_seed,
        }


class _CrnEvaluator:
    """Memoized growth-rate evaluation at fixed streams (one per replica)."""

    def __init__(self, model, n_steps, n_replicas, master_seed, burn_in,
                 renorm_period, workers):
        self.model = model
        self.n_steps = int(n_steps)
        self.n_replicas = n_replicas
        self.master_seed = master_seed
        self.burn_in = burn_in
        self.renorm_period = renorm_period
        self.workers = workers
        self.evaluations = 0
        self._cache = {}

    def __call__(self, g: float) -> LyapunovEstimate:
        est = self._cache.get(g)
        if est is None:
            est = estimate_lambda(
                self.model, ConstantGain(g), self.n_steps, self.n_replicas,
                self.master_seed, burn_in=self.burn_in,
                renorm_period=self.renorm_period, workers=self.workers)
            self._cache[g] = est
            self.evaluations += 1
        return est

    def boost(self) -> None:
        self.n_steps *= 2
        self._cache.clear()


def _clearly_negative(est) -> bool:
    return est.lambda_hat + 2.0 * est.std_err < 0.0


def _clearly_positive(est) -> bool:
    return est.lambda_hat - 2.0 * est.std_err > 0.0


def bracket_expand(model: CoefficientModel, g_init: float, master_seed: int,
                   *, n_steps: int = 10_000, n_replicas: int = 32,
                   burn_in: int | None = None, renorm_period: int = 1,
                   workers: int = 1, max_doublings: int = 60,
                   _evaluator: _CrnEvaluator | None = None) -> tuple:
    """Geometric expansion from g_init to a sign-changing gain bracket.

    Doubles or halves until the growth rate is clearly negative at the low
    edge and clearly positive at the high edge (two standard errors clear
    of zero), under common random numbers.  Raises UnbracketableError after
    ``max_doublings`` total expansions; that signals a model whose
    log-moment assumptions fail numerically.
    """
    if model.validation_only:
        raise ValidationOnlyModelError("cannot calibrate a validation-only model")
    if not (g_init > 0.0) or not math.isfinite(g_init):
        raise ConfigError(f"g_init must be positive, got {g_init}")
    ev = _evaluator or _CrnEvaluator(model, n_steps, n_replicas, master_seed,
                                     burn_in, renorm_period, workers)
    spent = 0

    def expand(g, factor):
        nonlocal spent
        spent += 1
        if spent > max_doublings:
            raise UnbracketableError(
                f"no growth-rate sign change within {max_doublings} doublings "
                f"from g_init={g_init}")
        return g * factor

    est = ev(g_init)
    if _clearly_negative(est):
        g_lo, g_hi = g_init, expand(g_init, 2.0)
        while not _clearly_positive(ev(g_hi)):
            if _clearly_negative(ev(g_hi)):
                g_lo = g_hi
            g_hi = expand(g_hi, 2.0)
    elif _clearly_positive(est):
        g_hi, g_lo = g_init, expand(g_init, 0.5)
        while not _clearly_negative(ev(g_lo)):
            if _clearly_positive(ev(g_lo)):
                g_hi = g_lo
            g_lo = expand(g_lo, 0.5)
    else:
        # near zero already: push both edges out until they are clear
        g_lo, g_hi = expand(g_init, 0.5), expand(g_init, 2.0)
        while not _clearly_negative(ev(g_lo)):
            g_lo = expand(g_lo, 0.5)
        while not _clearly_positive(ev(g_hi)):
            g_hi = expand(g_hi, 2.0)
    return g_lo, g_hi


def find_zero_lyapunov_gain(model: CoefficientModel, tol: float,
                            n_steps: int = 10_000, n_replicas: int = 32,
                            master_seed: int = 0, *, g_init: float = 1.0,
                            burn_in: int | None = None, renorm_period: int = 1,
                            workers: int = 1, max_doublings: int = 60,
                            max_evaluations: int = 200,
                            n_steps_cap_factor: int = 8) -> CalibrationResult:
    """Bisection for the gain with zero growth rate, on common random numbers.

    Stops once |rate(g)| is within ``tol`` (and, for stochastic models,
    within the replica CI of zero, so zero lies inside the reported
    interval).  If the Monte Carlo CI is too wide to resolve the remaining
    bracket, the step count doubles adaptively up to
    ``n_steps_cap_factor * n_steps``.  After convergence the gain is
    re-validated with fresh streams (master_seed + 1).
    """
    if model.validation_only:
        raise ValidationOnlyModelError("cannot calibrate a validation-only model")
    if not (tol > 0.0):
        raise ConfigError(f"tol must be positive, got {tol}")
    ev = _CrnEvaluator(model, n_steps, n_replicas, master_seed, burn_in,
                       renorm_period, workers)
    steps_cap = n_steps * n_steps_cap_factor

    g_lo, g_hi = bracket_expand(model, g_init, master_seed,
                                max_doublings=max_doublings, _evaluator=ev)
    history = [(g_lo, g_hi)]

    best = None  # (abs rate, gain, estimate)
    converged = False
    g_star, est_star = g_hi, ev(g_hi)
    while ev.evaluations < max_evaluations:
        mid = 0.5 * (g_lo + g_hi)
        est = ev(mid)
        if best is None or abs(est.lambda_hat) < best[0]:
            best = (abs(est.lambda_hat), mid, est)
        target = min(tol, Z95 * est.std_err) if est.std_err > 0.0 else tol
        if abs(est.lambda_hat) <= target:
            g_star, est_star, converged = mid, est, True
            break
        ci_width = est.ci95_hi - est.ci95_lo
        resolution = ev(g_hi).lambda_hat - ev(g_lo).lambda_hat
        if ci_width > resolution and ev.n_steps < steps_cap:
            logger.info("calibration: CI width %.3g exceeds bracket resolution "
                        "%.3g; doubling n_steps to %d", ci_width, resolution,
                        ev.n_steps * 2)
            ev.boost()
            continue
        if est.lambda_hat > 0.0:
            g_hi = mid
        else:
            g_lo = mid
        history.append((g_lo, g_hi))
        if g_hi - g_lo <= 1e-15 * max(1.0, g_hi):
            break
    if not converged and best is not None:
        _, g_star, est_star = best

    confirmation = None
    if converged:
        confirmation = estimate_lambda(
            model, ConstantGain(g_star), ev.n_steps, n_replicas,
            (master_seed + 1) & _MASK64, burn_in=burn_in,
            renorm_period=renorm_period, workers=workers)

    return CalibrationResult(
        g_star=g_star,
        lambda_at_g_star=est_star,
        bracket_history=tuple(history),
        evaluations=ev.evaluations,
        converged=converged,
        confirmation=confirmation,
    )

"""Renormalized cocycle engine for the signal and noise recursions.

The signal magnitude at node n follows the two-term random recursion

    value[n] = coef(n-1,n) * value[n-1] + coef(n-2,n) * value[n-2]

driven by strictly positive hop coefficients; the accumulated noise power
follows the companion 3x3 system acting on (0, 0, 1) with squared
coefficients and a noise-floor injection ``n0`` per step.  Raw values grow
or decay like exp(rate * n) and would leave double range within a few
hundred nodes, so states are kept renormalized: components scaled so the
largest is 1, with the log of the scale accumulated separately.  Recovered
log-magnitudes are exact in exact arithmetic and float-accurate in
practice.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, metrics
from .coeffs import (
    CoefficientModel,
    GainPolicy,
    RngStream,
    first_hop_coefficient,
    hop_coefficient_chunks,
)
from .errors import ConfigError, DegenerateStateError

CSV_HEADER = "n,log_I_sq,log_N_sq,log_snr,capacity_nats,log_X_sq"

_CHUNK_STEPS = 1 << 19


@dataclass(frozen=True)
class NetworkConfig:
    """Full description of one simulated relay chain."""

    model: CoefficientModel
    gains: GainPolicy
    n0: float = 1.0
    i0: float = 1.0
    n_nodes: int = 2
    master_seed: int = 0

    def __post_init__(self):
        if self.model.validation_only:
            raise ConfigError("model: validation-only models cannot drive a network")
        if not (self.n0 > 0.0) or not math.isfinite(self.n0):
            raise ConfigError(f"n0 must be positive, got {self.n0}")
        if not (self.i0 > 0.0) or not math.isfinite(self.i0):
            raise ConfigError(f"i0 must be positive, got {self.i0}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 2:
            raise ConfigError(f"n_nodes must be an integer >= 2, got {self.n_nodes}")
        self.gains.require_length(self.n_nodes)


@dataclass(frozen=True)
class InfoCocycleState:
    """Renormalized (value[n-1], value[n]) pair with accumulated log-scale."""

    u_prev: float
    u_cur: float
    log_scale: float
    n: int = 1

    def log_value(self) -> float:
        """Recovered log of the node-n magnitude."""
        return self.log_scale + math.log(self.u_cur)


@dataclass(frozen=True)
class NoiseCocycleState:
    """Renormalized (noise[n-1], noise[n], const) triple with log-scale.

    The raw third component is identically 1; after renormalization
    ``log_scale + log(w[2])`` stays 0 up to accumulated rounding while the
    scale is within double range.  In a growing cocycle the renormalized
    constant slot eventually underflows, at which point the per-step floor
    injection is hundreds of orders below the resolution of the other
    components and its loss is exact in double arithmetic.
    """

    w: tuple
    log_scale: float
    n: int = 1

    def log_noise_sq(self) -> float:
        if self.w[1] == 0.0:
            return -math.inf
        return self.log_scale + math.log(self.w[1])


def init_info(i0: float, eta01: float) -> InfoCocycleState:
    """State encoding the raw vector (i0, eta01*i0), renormalized."""
    if not (i0 > 0.0):
        raise ConfigError(f"i0 must be positive, got {i0}")
    if not (eta01 > 0.0):
        raise ConfigError(f"eta01 must be positive, got {eta01}")
    a = i0
    b = eta01 * i0
    m = a if a >= b else b
    return InfoCocycleState(a / m, b / m, math.log(m), n=1)


def step_info(state: InfoCocycleState, eta_2: float, eta_1: float) -> InfoCocycleState:
    """Advance one node: new value = eta_2*value[n-2] + eta_1*value[n-1]."""
    if not (eta_2 > 0.0 and eta_1 > 0.0):
        raise ConfigError("hop coefficients must be positive")
    a, b, ls, _ = _kernels.info_steps(
        np.array([eta_2]), np.array([eta_1]),
        state.u_prev, state.u_cur, state.log_scale, 1, 0,
    )
    return InfoCocycleState(a, b, ls, state.n + 1)


def step_noise(state: NoiseCocycleState, eta_2_sq: float, eta_1_sq: float,
               n0: float) -> NoiseCocycleState:
    """Apply the 3x3 noise update verbatim (n0 = 0 degenerates cleanly)."""
    if not (eta_2_sq > 0.0 and eta_1_sq > 0.0):
        raise ConfigError("squared hop coefficients must be positive")
    if n0 < 0.0:
        raise ConfigError(f"n0 must be nonnegative, got {n0}")
    w0, w1, w2 = state.w
    w0, w1, w2, ls, _ = _kernels.noise_steps(
        np.array([eta_2_sq]), np.array([eta_1_sq]), n0,
        w0, w1, w2, state.log_scale, 1, 0,
    )
    return NoiseCocycleState((w0, w1, w2), ls, state.n + 1)


def initial_noise_state() -> NoiseCocycleState:
    return NoiseCocycleState((0.0, 0.0, 1.0), 0.0, n=1)


def renormalize(state):
    """Rescale components by their max; recovered quantities unchanged."""
    if isinstance(state, InfoCocycleState):
        m = max(state.u_prev, state.u_cur)
        if m <= 0.0:
            raise DegenerateStateError("cannot renormalize an all-zero state")
        return InfoCocycleState(state.u_prev / m, state.u_cur / m,
                                state.log_scale + math.log(m), state.n)
    if isinstance(state, NoiseCocycleState):
        m = max(state.w)
        if m <= 0.0:
            raise DegenerateStateError("cannot renormalize an all-zero state")
        return NoiseCocycleState(tuple(w / m for w in state.w),
                                 state.log_scale + math.log(m), state.n)
    raise TypeError(f"not a cocycle state: {type(state).__name__}")


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Trajectory:
    """Per-node log-domain records for nodes 1..n_nodes (index = node - 1)."""

    log_i_sq: np.ndarray
    log_n_sq: np.ndarray
    log_snr: np.ndarray
    capacity_nats: np.ndarray
    log_x_sq: np.ndarray
    config: NetworkConfig
    stream_id: int = 0

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, len(self.log_i_sq) + 1)

    def write_csv(self, file) -> None:
        """Emit rows with full double precision (17 significant digits)."""
        if hasattr(file, "write"):
            self._write(file)
        else:
            with open(file, "w", newline="") as fh:
                self._write(fh)

    def _write(self, fh) -> None:
        fh.write(CSV_HEADER + "\n")
        cols = (self.log_i_sq, self.log_n_sq, self.log_snr,
                self.capacity_nats, self.log_x_sq)
        for idx in range(len(self.log_i_sq)):
            row = ",".join(f"{c[idx]:.17g}" for c in cols)
            fh.write(f"{idx + 1},{row}\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue()


def run_trajectory(config: NetworkConfig, stream_id: int = 0,
                   renorm_period: int = 1) -> Trajectory:
    """Simulate one relay chain end to end.

    Draws one coefficient per hop in the fixed order (two-back hop before
    one-back hop for each node), feeds the identical samples to both
    cocycles (plain to the signal recursion, squared to the noise
    recursion), and fills every per-node column.  Deterministic given
    (config, stream_id).
    """
    if renorm_period < 1:
        raise ConfigError(f"renorm_period must be >= 1, got {renorm_period}")
    n = config.n_nodes
    rng = RngStream(config.master_seed, stream_id).generator()

    log_i = np.empty(n)
    log_n2 = np.empty(n)

    eta01 = first_hop_coefficient(config.model, config.gains, rng)
    state = init_info(config.i0, eta01)
    log_i[0] = state.log_value()
    # verbatim: the first 3x3 application deposits exactly n0 in the
    # node-1 slot
    log_n2[0] = np.log(config.n0)

    a, b, ls, phase = state.u_prev, state.u_cur, state.log_scale, 0
    w0, w1, w2, lsn, phase_n = 0.0, 0.0, 1.0, 0.0, 0

    for start, e2, e1 in hop_coefficient_chunks(config.model, config.gains, rng, n,
                                                _CHUNK_STEPS):
        k = len(e2)
        a, b, ls, phase = _kernels.info_steps_record(
            e2, e1, a, b, ls, renorm_period, phase, log_i[start - 1:start - 1 + k])
        w0, w1, w2, lsn, phase_n = _kernels.noise_steps_record(
            e2 * e2, e1 * e1, config.n0, w0, w1, w2, lsn, renorm_period, phase_n,
            log_n2[start - 1:start - 1 + k])

    log_i_sq = 2.0 * log_i
    log_snr = metrics.snr_log(log_i_sq, log_n2)
    return Trajectory(
        log_i_sq=log_i_sq,
        log_n_sq=log_n2,
        log_snr=log_snr,
        capacity_nats=metrics.capacity_nats(log_snr),
        log_x_sq=metrics.transmit_power_log(log_i_sq, log_n2),
        config=config,
        stream_id=stream_id,
    )

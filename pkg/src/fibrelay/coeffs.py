"""Coefficient models, gain policies and reproducible random streams.

Every stochastic quantity in the package is a deterministic function of a
``(master_seed, stream_id)`` pair.  Streams are counter-keyed Philox
generators: the 128-bit Philox key is ``master_seed + (stream_id << 64)``,
so distinct stream ids give statistically independent streams and the same
pair reproduces the same draws on every platform.

Sampling contract: every coefficient draw consumes exactly one uniform
double from its stream (rejection-free inverse-CDF samplers only), and a
batch of ``k`` draws consumes the same ``k`` uniforms as ``k`` single
draws.  This keeps common-random-number comparisons aligned across gain
values and across model variants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

from .errors import ConfigError, ValidationOnlyModelError

# Half-ulp shift applied before inverting a CDF with a singular endpoint,
# so u=0 (possible: Generator.random() is [0,1)) cannot produce a zero or
# infinite coefficient.
_U_SHIFT = 2.0 ** -54

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Handle for one reproducible random stream.

    ``stream_id`` doubles as the replica index; concurrent workers each own
    one stream and never share generator state.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.stream_id < 0 or self.stream_id > _MASK64:
            raise ConfigError(f"stream_id out of range: {self.stream_id}")

    def generator(self) -> Generator:
        key = (self.master_seed & _MASK64) + (self.stream_id << 64)
        return Generator(Philox(key=key))


# ---------------------------------------------------------------------------
# coefficient models
# ---------------------------------------------------------------------------


class CoefficientModel:
    """Distribution of the channel magnitude factor of a hop coefficient.

    A hop coefficient is ``magnitude * gain`` where the magnitude is drawn
    from one of the concrete subclasses below.  All production variants are
    strictly positive with probability 1 and have a finite log-moment.
    """

    validation_only = False

    def transform_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms from a stream to magnitude draws, one per uniform."""
        raise NotImplementedError

    def expected_log_magnitude(self) -> float:
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Deterministic(CoefficientModel):
    """Constant magnitude ``c``; draws still consume one uniform each."""

    c: float

    def __post_init__(self):
        if not (self.c > 0.0) or not math.isfinite(self.c):
            raise ConfigError(f"deterministic c must be positive, got {self.c}")

    def transform_uniforms(self, u):
        return np.full(u.shape, self.c)

    def expected_log_magnitude(self):
        return math.log(self.c)

    def spec_string(self):
        return f"deterministic:c={self.c:.17g}"


@dataclass(frozen=True)
class Rayleigh(CoefficientModel):
    """Rayleigh magnitude parameterized by its second moment ``mu``.

    The internal scale is sqrt(mu/2), so E[magnitude^2] = mu.
    """

    mu: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0.0) or not math.isfinite(self.mu):
            raise ConfigError(f"rayleigh mu must be positive, got {self.mu}")

    def transform_uniforms(self, u):
        return np.sqrt(-self.mu * np.log1p(-(u + _U_SHIFT)))

    def expected_log_magnitude(self):
        return 0.5 * (math.log(self.mu) - np.euler_gamma)

    def spec_string(self):
        return f"rayleigh:mu={self.mu:.17g}"


@dataclass(frozen=True)
class LogNormal(CoefficientModel):
    """Magnitude with log-magnitude ~ Normal(m, s)."""

    m: float = 0.0
    s: float = 1.0

    def __post_init__(self):
        if not (self.s > 0.0) or not math.isfinite(self.s) or not math.isfinite(self.m):
            raise ConfigError(f"lognormal requires finite m and s > 0, got m={self.m}, s={self.s}")

    def transform_uniforms(self, u):
        return np.exp(self.m + self.s * ndtri(u + _U_SHIFT))

    def expected_log_magnitude(self):
        return self.m

    def spec_string(self):
        return f"lognormal:m={self.m:.17g},s={self.s:.17g}"


@dataclass(frozen=True)
class Uniform(CoefficientModel):
    """Magnitude uniform on [a, b), 0 < a < b."""

    a: float = 0.5
    b: float = 1.5

    def __post_init__(self):
        if not (0.0 < self.a < self.b) or not math.isfinite(self.b):
            raise ConfigError(f"uniform requires 0 < a < b, got a={self.a}, b={self.b}")

    def transform_uniforms(self, u):
        return self.a + (self.b - self.a) * u

    def expected_log_magnitude(self):
        a, b = self.a, self.b
        return (b * math.log(b) - a * math.log(a)) / (b - a) - 1.0

    def spec_string(self):
        return f"uniform:a={self.a:.17g},b={self.b:.17g}"


@dataclass(frozen=True)
class SignedBernoulli(CoefficientModel):
    """Validation-only model: coefficients are +1 with probability p, else -1.

    Exists solely to validate the growth-rate estimator against the known
    signed-recursion growth constant; every other operation rejects it.
    """

    p: float = 0.5
    validation_only = True

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ConfigError(f"signed p must be a probability, got {self.p}")

    def transform_uniforms(self, u):
        return np.where(u < self.p, 1.0, -1.0)

    def expected_log_magnitude(self):
        raise ValidationOnlyModelError("validation-only model has no log-moment")

    def spec_string(self):
        return f"signed:p={self.p:.17g}"


def _reject_validation_only(model: CoefficientModel, op: str) -> None:
    if model.validation_only:
        raise ValidationOnlyModelError(f"validation-only model not accepted by {op}")


# ---------------------------------------------------------------------------
# gain policies
# ---------------------------------------------------------------------------


class GainPolicy:
    """Amplification factor applied at each retransmitting node."""

    def gain_at(self, node: int) -> float:
        raise NotImplementedError

    def node_gains(self, start: int, count: int) -> np.ndarray:
        raise NotImplementedError

    def require_length(self, n_nodes: int) -> None:
        """Raise if the policy cannot cover nodes 1..n_nodes."""

    def spec_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantGain(GainPolicy):
    g: float = 1.0

    def __post_init__(self):
        if not (self.g > 0.0) or not math.isfinite(self.g):
            raise ConfigError(f"gain must be positive, got {self.g}")

    def gain_at(self, node):
        return self.g

    def node_gains(self, start, count):
        return np.full(count, self.g)

    def spec_string(self):
        return f"constant:g={self.g:.17g}"


@dataclass(frozen=True)
class PerNodeGain(GainPolicy):
    gains: tuple

    def __post_init__(self):
        gains = tuple(float(g) for g in self.gains)
        if not gains:
            raise ConfigError("gains list must not be empty")
        if any(not (g > 0.0) or not math.isfinite(g) for g in gains):
            raise ConfigError("gains must all be positive")
        object.__setattr__(self, "gains", gains)

    def gain_at(self, node):
        return self.gains[node - 1]

    def node_gains(self, start, count):
        return np.asarray(self.gains[start - 1:start - 1 + count])

    def require_length(self, n_nodes):
        if len(self.gains) < n_nodes:
            raise ConfigError(
                f"gains list covers {len(self.gains)} nodes, network needs {n_nodes}"
            )

    def spec_string(self):
        return "pernode:g=" + ",".join(f"{g:.17g}" for g in self.gains)


# ---------------------------------------------------------------------------
# sampling operations
# ---------------------------------------------------------------------------


def sample_eta(model: CoefficientModel, gain: float, rng) -> float:
    """Draw one hop coefficient ``magnitude * gain``.

    Consumes exactly one uniform from ``rng`` (an RngStream or a numpy
    Generator), for every model variant.
    """
    _reject_validation_only(model, "sample_eta")
    if not (gain > 0.0):
        raise ConfigError(f"gain must be positive, got {gain}")
    if isinstance(rng, RngStream):
        rng = rng.generator()
    u = rng.random(1)
    return float(model.transform_uniforms(u)[0] * gain)


def sample_eta_batch(model: CoefficientModel, gain: float, rng, size: int) -> np.ndarray:
    """Vectorized sample_eta; consumes ``size`` uniforms in stream order."""
    _reject_validation_only(model, "sample_eta_batch")
    if not (gain > 0.0):
        raise ConfigError(f"gain must be positive, got {gain}")
    if isinstance(rng, RngStream):
        rng = rng.generator()
    return model.transform_uniforms(rng.random(size)) * gain


def expected_log_eta(model: CoefficientModel, gain: float) -> float:
    """Closed-form E[log coefficient] = E[log magnitude] + log(gain)."""
    _reject_validation_only(model, "expected_log_eta")
    if not (gain > 0.0):
        raise ConfigError(f"gain must be positive, got {gain}")
    value = model.expected_log_magnitude() + math.log(gain)
    assert math.isfinite(value)
    return value


def expected_log_eta_mc(model: CoefficientModel, gain: float, n_samples: int,
                        stream: RngStream) -> tuple:
    """Monte Carlo E[log coefficient] with its standard error.

    Independent cross-check of the closed forms; batched so large sample
    counts stay cheap.
    """
    _reject_validation_only(model, "expected_log_eta_mc")
    rng = stream.generator()
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        k = min(1 << 20, n_samples - done)
        logs = np.log(model.transform_uniforms(rng.random(k)) * gain)
        total += float(logs.sum())
        total_sq += float((logs * logs).sum())
        done += k
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / n_samples)


def first_hop_coefficient(model: CoefficientModel, gains: GainPolicy, rng: Generator) -> float:
    """Coefficient of the source-to-node-1 hop; consumes one uniform."""
    u = rng.random(1)
    return float(model.transform_uniforms(u)[0] * gains.gain_at(1))


def hop_coefficient_chunks(model: CoefficientModel, gains: GainPolicy, rng: Generator,
                           n_nodes: int, chunk_steps: int = 1 << 19):
    """Yield per-step coefficient arrays for nodes 2..n_nodes in draw order.

    For each node ``i`` the two-back hop coefficient is drawn before the
    one-back hop coefficient; both carry the receiving node's gain.  Yields
    ``(start_node, two_back, one_back)`` with ``len == count of steps``.
    This generator is the normative draw-order contract: consuming it is
    stream-equivalent to 2*(n_nodes-1) successive single draws.
    """
    i = 2
    while i <= n_nodes:
        count = min(chunk_steps, n_nodes - i + 1)
        u = rng.random(2 * count)
        mags = model.transform_uniforms(u).reshape(count, 2)
        g = gains.node_gains(i, count)
        coef = mags * g[:, None]
        yield i, np.ascontiguousarray(coef[:, 0]), np.ascontiguousarray(coef[:, 1])
        i += count


# ---------------------------------------------------------------------------
# model / gain specification grammar
# ---------------------------------------------------------------------------

_MODEL_KINDS = {
    "deterministic": (Deterministic, ("c",)),
    "rayleigh": (Rayleigh, ("mu",)),
    "lognormal": (LogNormal, ("m", "s")),
    "uniform": (Uniform, ("a", "b")),
    "signed": (SignedBernoulli, ("p",)),
}


def _parse_kv(body: str, spec: str) -> dict:
    out = {}
    if not body:
        return out
    for item in body.split(","):
        if "=" not in item:
            raise ConfigError(f"malformed model spec {spec!r}: expected key=value, got {item!r}")
        key, _, val = item.partition("=")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"malformed model spec {spec!r}: {val!r} is not a number") from None
    return out


def parse_model(spec: str) -> CoefficientModel:
    """Parse a model spec string like ``rayleigh:mu=1.0``."""
    kind, _, body = spec.strip().partition(":")
    kind = kind.strip().lower()
    if kind not in _MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r} in spec {spec!r}")
    cls, names = _MODEL_KINDS[kind]
    kwargs = _parse_kv(body.strip(), spec)
    unknown = set(kwargs) - set(names)
    if unknown:
        raise ConfigError(f"unknown parameter {sorted(unknown)[0]!r} for model {kind!r}")
    try:
        return cls(**kwargs)
    except TypeError:
        missing = [n for n in names if n not in kwargs]
        raise ConfigError(f"model {kind!r} missing parameter {missing[0]!r}") from None


def parse_gains(spec: str) -> GainPolicy:
    """Parse ``constant:g=0.5``, ``pernode:g=1,2,3`` or a bare number."""
    text = spec.strip()
    kind, _, body = text.partition(":")
    kind = kind.strip().lower()
    if kind == "constant":
        kv = _parse_kv(body, spec)
        if set(kv) != {"g"}:
            raise ConfigError(f"constant gain spec needs exactly g=..., got {spec!r}")
        return ConstantGain(kv["g"])
    if kind == "pernode":
        key, _, vals = body.partition("=")
        if key.strip() != "g":
            raise ConfigError(f"pernode gain spec needs g=..., got {spec!r}")
        try:
            return PerNodeGain(tuple(float(v) for v in vals.split(",")))
        except ValueError:
            raise ConfigError(f"malformed pernode gains {spec!r}") from None
    try:
        return ConstantGain(float(text))
    except ValueError:
        raise ConfigError(f"unknown gain spec {spec!r}") from None

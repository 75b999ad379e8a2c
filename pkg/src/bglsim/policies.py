"""Decision rules: best-subcarrier selection, greedy renewable draw, and the
BGL / DOP / COP controllers.

All three controllers put the whole period rate on the subcarrier with the
largest H_i / sigma2_i and draw as much stored energy as the transmission
needs. They differ only in how many packages they schedule:

* DOP sends the whole queue.
* COP sends only what the battery alone can power.
* BGL minimises ``V * xi * [P(R) - W~(R)]^+ - Q * R`` over ``R in [0, Q]``,
  which has a closed-form piecewise solution in terms of ``R_th`` (rate the
  battery can power) and ``R_s`` (stationary point of the penalised cost).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

from bglsim.errors import OutageError, ParameterError
from bglsim.model import Action, ModelParams, SystemState


@dataclass(frozen=True)
class BestCarrier:
    index: int  # zero-based
    eta: float  # sigma2_v / H_v


@dataclass(frozen=True)
class BglConfig:
    V: float

    def __post_init__(self) -> None:
        if not self.V > 0:
            raise ParameterError(f"V must be > 0, got {self.V}")


def best_subcarrier(params: ModelParams, gains) -> BestCarrier:
    """Subcarrier with the smallest sigma2/H; ties go to the lowest index."""
    best = -1
    best_eta = math.inf
    for i, (sigma2, h) in enumerate(zip(params.noise_variances, gains)):
        if h <= 0:
            continue
        eta = sigma2 / h
        if eta < best_eta:  # inf (gain underflow) never qualifies
            best, best_eta = i, eta
    if best < 0:
        raise OutageError("all subcarrier gains are zero")
    return BestCarrier(best, best_eta)


def pack_rate_vector(num_subcarriers: int, index: int, rate: float) -> tuple[float, ...]:
    if not 0 <= index < num_subcarriers:
        raise ParameterError(f"subcarrier index {index} outside [0, {num_subcarriers})")
    if rate < 0:
        raise ParameterError(f"rate must be >= 0, got {rate}")
    rates = [0.0] * num_subcarriers
    rates[index] = float(rate)
    return tuple(rates)


def greedy_renewable(battery: float, period_length: float, power_needed: float) -> float:
    """Draw stored energy up to what is needed, never more."""
    return min(battery / period_length, power_needed)


def bgl_rate_thresholds(
    eta: float,
    theta: float,
    battery: float,
    queue_len: float,
    V: float,
    price: float,
    period_length: float = 1.0,
) -> tuple[float, float]:
    """Return ``(R_th, R_s)``.

    ``R_th = ln(E_b / (tau eta) + 1) / theta`` is the largest rate the
    battery can power on its own. It is nudged down by ulps when rounding
    would make ``eta (e^{theta R_th} - 1)`` exceed the stored energy, so
    transmitting ``R_th`` never buys grid power.

    ``R_s = ln(Q / (theta V eta xi)) / theta`` may be negative or ``-inf``
    (when ``Q == 0``); callers resolve it through the case analysis.
    """
    for name, value in (("eta", eta), ("theta", theta), ("V", V), ("price", price)):
        if not value > 0:
            raise ParameterError(f"{name} must be > 0, got {value}")
    if battery < 0 or queue_len < 0:
        raise ParameterError("battery and queue length must be >= 0")

    available = battery / period_length
    r_th = math.log1p(available / eta) / theta
    while r_th > 0 and eta * math.expm1(theta * r_th) > available:
        r_th = math.nextafter(r_th, 0.0)

    if queue_len == 0:
        r_s = -math.inf
    else:
        r_s = (math.log(queue_len) - math.log(theta) - math.log(V)
               - math.log(eta) - math.log(price)) / theta
    return r_th, r_s


def _finish(
    params: ModelParams, state: SystemState, carrier: BestCarrier, rate: float
) -> Action:
    if params.integer_rates:
        rate = float(math.floor(rate))
    power = carrier.eta * math.expm1(params.theta * rate) if rate > 0 else 0.0
    draw = greedy_renewable(state.battery, params.period_length, power)
    return Action(pack_rate_vector(params.num_subcarriers, carrier.index, rate), draw)


def _zero_action(params: ModelParams) -> Action:
    return Action((0.0,) * params.num_subcarriers, 0.0)


def bgl_rate(
    carrier: BestCarrier, state: SystemState, params: ModelParams, cfg: BglConfig
) -> float:
    """Closed-form minimiser of the drift-plus-penalty objective over [0, Q]."""
    q = state.queue_len
    if q == 0:
        return 0.0
    r_th, r_s = bgl_rate_thresholds(
        carrier.eta, params.theta, state.battery, q, cfg.V, state.price, params.period_length
    )
    if r_th >= q:
        return q
    if r_s < r_th:
        return r_th
    if r_s > q:
        return q
    return r_s


def bgl_decide(state: SystemState, params: ModelParams, cfg: BglConfig) -> Action:
    try:
        carrier = best_subcarrier(params, state.channel_gains)
    except OutageError:
        return _zero_action(params)
    return _finish(params, state, carrier, bgl_rate(carrier, state, params, cfg))


def dop_decide(state: SystemState, params: ModelParams) -> Action:
    """Delay-optimal: empty the queue every period, buying grid power as needed."""
    try:
        carrier = best_subcarrier(params, state.channel_gains)
    except OutageError:
        return _zero_action(params)
    return _finish(params, state, carrier, state.queue_len)


def cop_decide(state: SystemState, params: ModelParams) -> Action:
    """Cost-optimal: send only what the battery can power, never buy grid power."""
    try:
        carrier = best_subcarrier(params, state.channel_gains)
    except OutageError:
        return _zero_action(params)
    if state.queue_len == 0 or state.battery == 0:
        return _finish(params, state, carrier, 0.0)
    # V and price do not affect R_th; any positive placeholder works.
    r_th, _ = bgl_rate_thresholds(
        carrier.eta, params.theta, state.battery, state.queue_len, 1.0, 1.0,
        params.period_length,
    )
    return _finish(params, state, carrier, min(state.queue_len, r_th))


class Policy(Protocol):
    name: str

    def decide(self, state: SystemState, params: ModelParams) -> Action: ...


@dataclass(frozen=True)
class Bgl:
    V: float
    name: str = "bgl"

    def decide(self, state: SystemState, params: ModelParams) -> Action:
        return bgl_decide(state, params, BglConfig(self.V))


@dataclass(frozen=True)
class Dop:
    name: str = "dop"

    def decide(self, state: SystemState, params: ModelParams) -> Action:
        return dop_decide(state, params)


@dataclass(frozen=True)
class Cop:
    name: str = "cop"

    def decide(self, state: SystemState, params: ModelParams) -> Action:
        return cop_decide(state, params)


POLICY_NAMES = ("bgl", "dop", "cop")


def make_policy(name: str, V: float | None = None) -> Policy:
    name = name.lower()
    if name == "bgl":
        if V is None:
            raise ParameterError("policy 'bgl' needs a tradeoff weight V")
        BglConfig(V)
        return Bgl(float(V))
    if name == "dop":
        return Dop()
    if name == "cop":
        return Cop()
    raise ParameterError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")

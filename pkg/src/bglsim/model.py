"""Per-period physics of the renewable-powered multi-carrier transmitter.

Everything here is a pure function over immutable value objects: the
power needed to push a rate vector through the subcarriers, the grid
power and cost that remain once the battery has contributed, and the
state transition of the data queue and the battery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from bglsim.errors import FeasibilityError, InfeasibleRateError, ParameterError

# Relative slack when checking float budgets (W*tau vs E_b, sum(R) vs Q).
FEASIBILITY_RTOL = 1e-12


def derive_theta(bits_per_package: int, channel_uses: int) -> float:
    """Rate exponent in nats per package: 2 ln(2) b / L."""
    if bits_per_package < 1 or channel_uses < 1:
        raise ParameterError(
            f"bits_per_package and channel_uses must be >= 1, "
            f"got b={bits_per_package}, L={channel_uses}"
        )
    return 2.0 * math.log(2.0) * bits_per_package / channel_uses


@dataclass(frozen=True)
class ModelParams:
    """Static physical constants of the link."""

    num_subcarriers: int
    period_length: float = 1.0
    bits_per_package: int = 1
    channel_uses: int = 5
    noise_variances: tuple[float, ...] = ()
    battery_capacity: float = 2500.0
    integer_rates: bool = False
    theta: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        if self.num_subcarriers < 1:
            raise ParameterError(f"num_subcarriers must be >= 1, got {self.num_subcarriers}")
        if not self.period_length > 0:
            raise ParameterError(f"period_length must be > 0, got {self.period_length}")
        if not self.battery_capacity >= 0:
            raise ParameterError(f"battery_capacity must be >= 0, got {self.battery_capacity}")
        noise = self.noise_variances or (1.0,) * self.num_subcarriers
        noise = tuple(float(s) for s in noise)
        if len(noise) != self.num_subcarriers:
            raise ParameterError(
                f"expected {self.num_subcarriers} noise variances, got {len(noise)}"
            )
        if any(not s > 0 for s in noise):
            raise ParameterError(f"noise variances must be > 0, got {noise}")
        object.__setattr__(self, "noise_variances", noise)

        theta = derive_theta(self.bits_per_package, self.channel_uses)
        if not math.isnan(self.theta) and not math.isclose(self.theta, theta, rel_tol=1e-12):
            raise ParameterError(f"theta={self.theta} disagrees with 2 ln2 b/L = {theta}")
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class SystemState:
    """Observable state at the start of period ``period_index``."""

    period_index: int
    channel_gains: tuple[float, ...]
    queue_len: float
    battery: float
    price: float

    def validate(self, params: ModelParams) -> None:
        if len(self.channel_gains) != params.num_subcarriers:
            raise ParameterError(
                f"expected {params.num_subcarriers} gains, got {len(self.channel_gains)}"
            )
        if any(h < 0 for h in self.channel_gains):
            raise ParameterError(f"channel gains must be >= 0, got {self.channel_gains}")
        if self.queue_len < 0:
            raise ParameterError(f"queue length must be >= 0, got {self.queue_len}")
        if not 0 <= self.battery <= params.battery_capacity:
            raise ParameterError(
                f"battery {self.battery} outside [0, {params.battery_capacity}]"
            )
        if not self.price > 0:
            raise ParameterError(f"price must be > 0, got {self.price}")


@dataclass(frozen=True)
class Action:
    """Rate vector (packages per subcarrier) and renewable power draw."""

    rates: tuple[float, ...]
    renewable_draw: float

    @property
    def total_rate(self) -> float:
        return math.fsum(self.rates)


@dataclass(frozen=True)
class PeriodOutcome:
    total_power: float
    grid_power: float
    cost: float
    next_state: SystemState


class Arrivals(NamedTuple):
    """Exogenous quantities revealed at the end of a period."""

    data: float
    energy: float
    next_gains: tuple[float, ...]
    next_price: float


def transmit_power(
    params: ModelParams, gains: Sequence[float], rates: Sequence[float]
) -> float:
    """Power needed to carry ``rates`` reliably: sum of sigma2/H * (e^{theta R} - 1)."""
    if len(gains) != params.num_subcarriers or len(rates) != params.num_subcarriers:
        raise ParameterError("gain and rate vectors must both have num_subcarriers entries")
    theta = params.theta
    total = 0.0
    for sigma2, h, r in zip(params.noise_variances, gains, rates):
        if r < 0:
            raise ParameterError(f"rates must be >= 0, got {r}")
        if r == 0:
            continue
        if h <= 0:
            raise InfeasibleRateError(f"rate {r} scheduled on a subcarrier with gain {h}")
        total += sigma2 / h * math.expm1(theta * r)
    return total


def grid_power(total_power: float, renewable_draw: float) -> float:
    return max(total_power - renewable_draw, 0.0)


def period_cost(grid_power: float, price: float) -> float:
    return grid_power * price


def check_feasible(state: SystemState, action: Action, params: ModelParams) -> None:
    """Raise FeasibilityError unless sum(R) <= Q and W*tau <= E_b."""
    total = action.total_rate
    if total > state.queue_len * (1 + FEASIBILITY_RTOL) + FEASIBILITY_RTOL:
        raise FeasibilityError(
            f"period {state.period_index}: scheduled {total} packages with only "
            f"{state.queue_len} queued"
        )
    drawn = action.renewable_draw * params.period_length
    if action.renewable_draw < 0 or drawn > state.battery * (1 + FEASIBILITY_RTOL) + FEASIBILITY_RTOL:
        raise FeasibilityError(
            f"period {state.period_index}: drew {drawn} energy with only "
            f"{state.battery} stored"
        )


def step(
    params: ModelParams,
    state: SystemState,
    action: Action,
    arrivals: Arrivals,
    check: bool = True,
) -> PeriodOutcome:
    """Apply one period: pay for power, drain the queue and battery, add arrivals.

    With ``check=False`` an over-scheduled action is not rejected; the queue
    and battery are clamped at zero instead.
    """
    if check:
        check_feasible(state, action, params)
    p_total = transmit_power(params, state.channel_gains, action.rates)
    p_grid = grid_power(p_total, action.renewable_draw)
    cost = period_cost(p_grid, state.price)

    next_q = max(state.queue_len - action.total_rate, 0.0) + arrivals.data
    drained = max(state.battery - action.renewable_draw * params.period_length, 0.0)
    next_b = min(drained + arrivals.energy, params.battery_capacity)
    next_state = SystemState(
        period_index=state.period_index + 1,
        channel_gains=tuple(arrivals.next_gains),
        queue_len=next_q,
        battery=next_b,
        price=arrivals.next_price,
    )
    return PeriodOutcome(p_total, p_grid, cost, next_state)

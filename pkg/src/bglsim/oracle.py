"""Brute-force verifiers for the controllers.

These deliberately avoid the closed-form machinery in :mod:`bglsim.policies`
so they can serve as independent checks:

* a grid-search minimiser of the per-period drift-plus-penalty objective,
* a random-split test that no spreading of a rate over subcarriers beats
  putting it all on the best one,
* an exhaustive small-horizon optimiser showing that greedy battery use is
  not optimal over several periods.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from bglsim.errors import InstanceTooLargeError, ParameterError
from bglsim.model import ModelParams, SystemState, transmit_power
from bglsim.policies import BglConfig, best_subcarrier

DEFAULT_LAMBDA = 0.01
DEFAULT_LEAF_BUDGET = 10**7


def bgl_objective(rate, eta, theta, battery, queue_len, V, price, period_length=1.0):
    """``V xi [eta (e^{theta R} - 1) - W~]^+ - Q R`` with ``W~ = min(E_b/tau, power)``.

    Works elementwise on arrays of rates.
    """
    power = eta * np.expm1(theta * np.asarray(rate, dtype=float))
    w = np.minimum(battery / period_length, power)
    return V * price * np.maximum(power - w, 0.0) - queue_len * np.asarray(rate, dtype=float)


@dataclass(frozen=True)
class GridSearchResult:
    argmin_R: float
    min_objective: float
    grid_step: float


def _oracle_eta(params: ModelParams, gains) -> float:
    g = np.asarray(gains, dtype=float)
    ratio = np.full(g.shape, np.inf)
    np.divide(np.asarray(params.noise_variances), g, out=ratio, where=g > 0)
    return float(ratio.min())


def grid_min_bgl_objective(
    state: SystemState, params: ModelParams, cfg: BglConfig, step: float
) -> GridSearchResult:
    """Minimise the per-period objective over ``{0, step, 2 step, ...} U {Q, R_th}``."""
    if not step > 0:
        raise ParameterError(f"grid step must be > 0, got {step}")
    q = state.queue_len
    if q == 0:
        return GridSearchResult(0.0, 0.0, step)
    eta = _oracle_eta(params, state.channel_gains)
    if not math.isfinite(eta):
        return GridSearchResult(0.0, 0.0, step)
    theta = params.theta
    r_th = math.log(state.battery / params.period_length / eta + 1.0) / theta
    grid = np.concatenate([np.arange(0.0, q, step), [q, min(max(r_th, 0.0), q)]])
    values = bgl_objective(grid, eta, theta, state.battery, q, cfg.V, state.price,
                           params.period_length)
    k = int(np.argmin(values))
    return GridSearchResult(float(grid[k]), float(values[k]), step)


def find_dominating_split(
    params: ModelParams,
    gains,
    total_rate: float,
    trials: int,
    rng: np.random.Generator | None = None,
) -> tuple[float, ...] | None:
    """First random split of ``total_rate`` needing less power than the best
    carrier alone (by more than 1e-9), or None if none of ``trials`` does.

    Each trial picks a random non-empty subset of the usable carriers and a
    uniform (Dirichlet) split over it.
    """
    if total_rate < 0 or trials < 1:
        raise ParameterError("need total_rate >= 0 and trials >= 1")
    rng = np.random.default_rng() if rng is None else rng
    m = params.num_subcarriers
    usable = [i for i, h in enumerate(gains) if h > 0]
    best = best_subcarrier(params, gains)
    on_best = [0.0] * m
    on_best[best.index] = total_rate
    reference = transmit_power(params, gains, on_best)

    for _ in range(trials):
        k = int(rng.integers(1, len(usable) + 1))
        support = rng.choice(usable, size=k, replace=False)
        split = [0.0] * m
        for i, w in zip(support, rng.dirichlet(np.ones(k))):
            split[int(i)] = float(w) * total_rate
        if transmit_power(params, gains, split) < reference - 1e-9:
            return tuple(split)
    return None


def random_split_dominance(
    params: ModelParams,
    gains,
    total_rate: float,
    trials: int,
    rng: np.random.Generator | None = None,
) -> bool:
    """True iff no random split of ``total_rate`` needs less power than the best carrier."""
    return find_dominating_split(params, gains, total_rate, trials, rng) is None


def min_split_power(params: ModelParams, gains, total_rate: float) -> tuple[float, ...]:
    """Power-minimising split of ``total_rate`` (water-filling on the exponents).

    Minimises ``sum eta_i (e^{theta R_i} - 1)`` subject to ``sum R_i = total``;
    active carriers satisfy ``eta_i e^{theta R_i} = nu``.
    """
    theta = params.theta
    etas = sorted((s / h, i) for i, (s, h) in enumerate(zip(params.noise_variances, gains)) if h > 0)
    if not etas:
        raise ParameterError("no usable subcarrier")
    rates = [0.0] * params.num_subcarriers
    for k in range(len(etas), 0, -1):
        active = etas[:k]
        # theta * total = sum(ln nu - ln eta_i) over the active set
        log_nu = (theta * total_rate + sum(math.log(e) for e, _ in active)) / k
        alloc = [(log_nu - math.log(e)) / theta for e, _ in active]
        if min(alloc) >= 0:
            for r, (_, i) in zip(alloc, active):
                rates[i] = r
            return tuple(rates)
    raise AssertionError("water-filling found no feasible active set")


@dataclass(frozen=True)
class HorizonInstance:
    """A tiny deterministic multi-period problem on the best subcarrier.

    ``etas[n]`` is the best carrier's sigma2/H in period n. ``rates`` fixes
    the rate sequence when given; otherwise rates are enumerated on the grid.
    """

    etas: tuple[float, ...]
    prices: tuple[float, ...]
    data_arrivals: tuple[float, ...]
    energy_arrivals: tuple[float, ...]
    initial_queue: float
    initial_battery: float
    battery_capacity: float
    theta: float
    rate_step: float = 1.0
    energy_step: float = 1.0
    period_length: float = 1.0
    lam: float = DEFAULT_LAMBDA
    rates: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        T = len(self.etas)
        lengths = {len(self.prices), len(self.data_arrivals), len(self.energy_arrivals)}
        if T < 1 or lengths != {T} or (self.rates is not None and len(self.rates) != T):
            raise ParameterError("all horizon sequences must share one length >= 1")
        if not (self.rate_step > 0 and self.energy_step > 0):
            raise ParameterError("grid steps must be > 0")
        if not 0 <= self.initial_battery <= self.battery_capacity:
            raise ParameterError("initial battery outside [0, capacity]")
        if any(e <= 0 for e in self.etas) or self.theta <= 0 or self.lam < 0:
            raise ParameterError("etas and theta must be > 0, lam >= 0")

    @property
    def horizon(self) -> int:
        return len(self.etas)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> HorizonInstance:
        d = dict(d)
        for key in ("etas", "prices", "data_arrivals", "energy_arrivals", "rates"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def _grid(upper: float, step: float, extra=()) -> list[float]:
    pts = {float(x) for x in np.arange(0.0, upper, step)}
    pts.add(float(upper))
    pts.update(float(x) for x in extra if 0 <= x <= upper)
    return sorted(pts)


def _leaf_bound(inst: HorizonInstance, greedy: bool) -> int:
    q_max = inst.initial_queue + sum(inst.data_arrivals)
    nr = 1 if inst.rates is not None else int(q_max / inst.rate_step) + 2
    nw = 1 if greedy else int(inst.battery_capacity / inst.period_length / inst.energy_step) + 3
    return (nr * nw) ** inst.horizon


def exhaustive_horizon_cost(
    inst: HorizonInstance,
    renewable_policy: str = "exhaustive",
    budget: int = DEFAULT_LEAF_BUDGET,
) -> float:
    """Minimum of ``sum_n xi[n] (P[n] - W[n])^+ + lam Q[n]`` over the horizon.

    ``greedy`` fixes ``W[n] = min(E_b[n]/tau, P[n])`` and searches only the
    rates. ``exhaustive`` searches rates and draws jointly; its draw grid
    always contains the greedy draw, so it can never do worse.
    """
    if renewable_policy not in ("greedy", "exhaustive"):
        raise ParameterError(f"renewable_policy must be 'greedy' or 'exhaustive'")
    greedy = renewable_policy == "greedy"
    if _leaf_bound(inst, greedy) > budget:
        raise InstanceTooLargeError(
            f"enumeration bound {_leaf_bound(inst, greedy)} exceeds budget {budget}"
        )
    T, tau = inst.horizon, inst.period_length
    memo: dict[tuple[int, float, float], float] = {}

    def best_from(n: int, q: float, eb: float) -> float:
        if n == T:
            return 0.0
        key = (n, q, eb)
        if key in memo:
            return memo[key]
        if inst.rates is not None:
            rates = [min(inst.rates[n], q)]
        else:
            rates = _grid(q, inst.rate_step)
        best = math.inf
        for r in rates:
            power = inst.etas[n] * math.expm1(inst.theta * r)
            w_greedy = min(eb / tau, power)
            draws = [w_greedy] if greedy else _grid(eb / tau, inst.energy_step, (w_greedy,))
            for w in draws:
                cost = inst.prices[n] * max(power - w, 0.0) + inst.lam * q
                nq = max(q - r, 0.0) + inst.data_arrivals[n]
                nb = min(max(eb - w * tau, 0.0) + inst.energy_arrivals[n], inst.battery_capacity)
                total = cost + best_from(n + 1, nq, nb)
                if total < best:
                    best = total
        memo[key] = best
        return best

    return best_from(0, float(inst.initial_queue), float(inst.initial_battery))


@dataclass
class CounterexampleReport:
    found: bool
    searched: int
    instance: HorizonInstance | None = None
    greedy_cost: float = math.nan
    exhaustive_cost: float = math.nan
    inconsistencies: list[str] = field(default_factory=list)


def random_horizon_instance(rng: np.random.Generator, theta: float,
                            lam: float = DEFAULT_LAMBDA) -> HorizonInstance:
    """Small instance where batteries are scarce relative to transmit power.

    Ranges are chosen so that sending a few packages is worth paying for at
    ``lam = 0.01``; otherwise the cheapest plan is to idle and every draw
    rule ties.
    """
    T = int(rng.choice([2, 3]))
    capacity = round(float(rng.uniform(0.5, 1.5)), 2)
    return HorizonInstance(
        etas=tuple(float(x) for x in np.round(rng.uniform(0.3, 1.5, T), 2)),
        prices=tuple(float(x) for x in rng.choice([0.02, 0.05], T)),
        data_arrivals=tuple(float(x) for x in rng.integers(0, 4, T)),
        energy_arrivals=tuple(float(x) for x in np.round(rng.uniform(0.0, 0.5, T), 2)),
        initial_queue=float(rng.integers(0, 7)),
        initial_battery=round(float(rng.uniform(0.0, capacity)), 2),
        battery_capacity=capacity,
        theta=theta,
        rate_step=1.0,
        energy_step=capacity / 8,
        lam=lam,
    )


def search_greedy_counterexample(
    budget: int = 500,
    seed: int = 0,
    theta: float = 2 * math.log(2) / 5,
    lam: float = DEFAULT_LAMBDA,
    margin: float = 1e-6,
) -> CounterexampleReport:
    """Random search for a horizon where greedy battery use is strictly worse."""
    rng = np.random.default_rng(seed)
    report = CounterexampleReport(found=False, searched=0)
    for _ in range(budget):
        inst = random_horizon_instance(rng, theta, lam)
        g = exhaustive_horizon_cost(inst, "greedy")
        e = exhaustive_horizon_cost(inst, "exhaustive")
        report.searched += 1
        if e > g + 1e-12:
            report.inconsistencies.append(f"exhaustive {e} > greedy {g} on {inst}")
        if e < g - margin:
            report.found = True
            report.instance, report.greedy_cost, report.exhaustive_cost = inst, g, e
            break
    return report

"""Episode runner, time-average metrics, and parameter sweeps."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from bglsim.errors import BglSimError, ConfigError, InfeasibleDelayError
from bglsim.model import Arrivals, ModelParams, SystemState, step
from bglsim.policies import Policy, make_policy
from bglsim.stochastic import ScenarioConfig, draw_trace

SWEEP_PARAMETERS = ("V", "mean_gain", "battery_B")
SWEEP_COLUMNS = (
    "swept_value", "replication", "avg_cost", "avg_queue",
    "max_queue", "avg_grid_power", "seed",
)


@dataclass(frozen=True)
class TrajectoryRecord:
    period: int
    queue_len: float
    battery: float
    rate: float
    renewable_draw: float
    grid_power: float
    cost: float


@dataclass(frozen=True)
class EpisodeMetrics:
    avg_cost: float
    avg_queue: float
    max_queue: float
    avg_grid_power: float
    n_end: int
    trajectory: tuple[TrajectoryRecord, ...] = field(default=(), repr=False)


def run_episode(
    scenario: ScenarioConfig,
    params: ModelParams,
    policy: Policy,
    *,
    seed: int | None = None,
    initial_queue: float = 0.0,
    initial_battery: float = 0.0,
    record_every: int = 0,
) -> EpisodeMetrics:
    """Simulate ``scenario.n_end`` periods under ``policy``.

    Time averages run over ``n = 0 .. n_end - 1`` and include the initial
    state. ``record_every > 0`` keeps every k-th period in ``trajectory``.
    """
    trace = draw_trace(scenario, params.num_subcarriers, seed)
    gains, prices, data, energy = trace.gains, trace.prices, trace.data, trace.energy

    state = SystemState(0, gains[0], float(initial_queue), float(initial_battery), prices[0])
    state.validate(params)
    decide = policy.decide
    total_cost = 0.0
    total_queue = 0.0
    total_grid = 0.0
    max_queue = 0.0
    records = []
    for n in range(scenario.n_end):
        q = state.queue_len
        total_queue += q
        if q > max_queue:
            max_queue = q
        action = decide(state, params)
        try:
            outcome = step(params, state, action,
                           Arrivals(data[n], energy[n], gains[n + 1], prices[n + 1]))
        except BglSimError as exc:
            raise type(exc)(f"policy {policy.name!r} at period {n}: {exc}") from exc
        total_cost += outcome.cost
        total_grid += outcome.grid_power
        if record_every and n % record_every == 0:
            records.append(TrajectoryRecord(
                n, q, state.battery, action.total_rate, action.renewable_draw,
                outcome.grid_power, outcome.cost,
            ))
        state = outcome.next_state

    n_end = scenario.n_end
    return EpisodeMetrics(
        avg_cost=total_cost / n_end,
        avg_queue=total_queue / n_end,
        max_queue=max_queue,
        avg_grid_power=total_grid / n_end,
        n_end=n_end,
        trajectory=tuple(records),
    )


@dataclass(frozen=True)
class SweepSpec:
    swept_parameter: str
    values: tuple[float, ...]
    scenario: ScenarioConfig
    params: ModelParams
    policy: str
    V: float | None = None
    replications: int = 1

    def __post_init__(self) -> None:
        if self.swept_parameter not in SWEEP_PARAMETERS:
            raise ConfigError(
                f"cannot sweep {self.swept_parameter!r}; expected one of {SWEEP_PARAMETERS}"
            )
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class SweepRow:
    swept_value: float
    replication: int
    seed: int
    metrics: EpisodeMetrics


def replication_seed(base_seed: int, replication: int) -> int:
    """Episode seed for one replication.

    The swept value is deliberately left out so every point of a sweep sees
    the same exogenous draws (common random numbers).
    """
    return int(base_seed) ^ int(replication)


def _configure(spec: SweepSpec, value: float):
    scenario, params, V = spec.scenario, spec.params, spec.V
    if spec.swept_parameter == "V":
        V = value
    elif spec.swept_parameter == "mean_gain":
        scenario = replace(scenario, mean_power_gain=value)
    else:
        params = replace(params, battery_capacity=value)
    return scenario, params, make_policy(spec.policy, V)


def _run_point(args) -> SweepRow:
    spec, value, rep = args
    seed = replication_seed(spec.scenario.seed, rep)
    try:
        scenario, params, policy = _configure(spec, value)
        metrics = run_episode(scenario, params, policy, seed=seed)
    except BglSimError as exc:
        raise type(exc)(f"{spec.swept_parameter}={value!r}, replication {rep}: {exc}") from exc
    return SweepRow(value, rep, seed, metrics)


def run_sweep(spec: SweepSpec, jobs: int | None = None) -> list[SweepRow]:
    """One episode per (value, replication), ordered by value then replication."""
    tasks = [(spec, v, r) for v in spec.values for r in range(spec.replications)]
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(tasks) == 1:
        return [_run_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_run_point, tasks))


def format_float(x: float) -> str:
    return repr(float(x))


def sweep_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        m = row.metrics
        writer.writerow([
            format_float(row.swept_value), row.replication,
            format_float(m.avg_cost), format_float(m.avg_queue),
            format_float(m.max_queue), format_float(m.avg_grid_power), row.seed,
        ])
    return buf.getvalue()


def mean_by_value(rows: Sequence[SweepRow], metric: str) -> list[float]:
    """Replication-averaged ``metric`` for each swept value, in sweep order."""
    order: list[float] = []
    sums: dict[float, list[float]] = {}
    for row in rows:
        if row.swept_value not in sums:
            order.append(row.swept_value)
            sums[row.swept_value] = []
        sums[row.swept_value].append(getattr(row.metrics, metric))
    return [math.fsum(sums[v]) / len(sums[v]) for v in order]


def find_max_V_for_delay(
    spec: SweepSpec, mu: float, rows: Sequence[SweepRow] | None = None
) -> float:
    """Largest swept V whose average queue stays below ``mu``.

    Pass ``rows`` to reuse an existing sweep table instead of re-running it.
    """
    if not mu > 0:
        raise ConfigError(f"mu must be > 0, got {mu}")
    if spec.swept_parameter != "V":
        raise ConfigError("find_max_V_for_delay needs a sweep over V")
    if list(spec.values) != sorted(spec.values):
        raise ConfigError("swept V values must be sorted ascending")
    rows = run_sweep(spec) if rows is None else rows
    queues = mean_by_value(rows, "avg_queue")
    feasible = [v for v, q in zip(spec.values, queues) if q < mu]
    if not feasible:
        raise InfeasibleDelayError(
            f"no swept V meets avg_queue < {mu}; smallest avg_queue is {min(queues)}"
        )
    return max(feasible)


def monotone_violations(
    values: Sequence[float], direction: str, rel_tol: float = 0.0
) -> list[tuple[int, float]]:
    """Adjacent pairs that break the requested monotonicity.

    Returns ``(i, relative_size)`` for every pair ``(values[i], values[i+1])``
    moving the wrong way by more than ``rel_tol``. Relative size is measured
    against ``max(|values[i]|, |values[i+1]|)``.
    """
    if direction not in ("nondecreasing", "nonincreasing"):
        raise ValueError(direction)
    sign = 1.0 if direction == "nondecreasing" else -1.0
    out = []
    for i in range(len(values) - 1):
        delta = sign * (values[i + 1] - values[i])
        if delta < 0:
            scale = max(abs(values[i]), abs(values[i + 1]))
            rel = -delta / scale if scale > 0 else 0.0
            if rel > rel_tol:
                out.append((i, rel))
    return out

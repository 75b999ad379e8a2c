"""Oracle suites behind ``bglsim validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bglsim.model import ModelParams, SystemState, transmit_power
from bglsim.oracle import (
    CounterexampleReport,
    bgl_objective,
    grid_min_bgl_objective,
    find_dominating_split,
    search_greedy_counterexample,
)
from bglsim.policies import BglConfig, best_subcarrier, bgl_decide
from bglsim.stochastic import ScenarioConfig, default_paper_params, default_paper_scenario

CLOSED_FORM_RTOL = 1e-6
RELATIVE_STEP_DIVISOR = 10**4


@dataclass
class SuiteResult:
    name: str
    status: str  # "pass", "fail", "skipped"
    detail: str

    @property
    def ok(self) -> bool:
        return self.status != "fail"


def random_states(
    n: int,
    rng: np.random.Generator,
    scenario: ScenarioConfig | None = None,
    params: ModelParams | None = None,
    max_queue: float = 200.0,
):
    """Yield ``(state, V)`` pairs: channel and price from the scenario, queue
    uniform on ``[0, max_queue]``, battery uniform on ``[0, B]``, and V
    log-uniform on ``[1e-3, 1e4]``."""
    scenario = scenario or default_paper_scenario()
    params = params or default_paper_params()
    for _ in range(n):
        gains = tuple(rng.exponential(scenario.mean_power_gain, params.num_subcarriers).tolist())
        price = float(rng.choice(scenario.prices.values, p=scenario.prices.probs))
        q = float(rng.uniform(0.0, max_queue))
        eb = float(rng.uniform(0.0, params.battery_capacity))
        V = float(10.0 ** rng.uniform(-3, 4))
        yield SystemState(0, gains, q, eb, price), V


def closed_form_suite(
    n_states: int = 10**4, grid_step: float | None = None, seed: int = 0
) -> SuiteResult:
    """Compare the closed-form BGL rate against a grid-search minimiser.

    With ``grid_step=None`` the step is ``Q / 10^4`` and the tolerance is
    ``1e-6 (1 + |grid min|)``. An explicit absolute step widens the
    tolerance by the objective's curvature times ``step^2``.
    """
    params = default_paper_params()
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = 0
    for state, V in random_states(n_states, rng, params=params):
        cfg = BglConfig(V)
        q = state.queue_len
        step = grid_step if grid_step is not None else (q / RELATIVE_STEP_DIVISOR or 1.0)
        action = bgl_decide(state, params, cfg)
        r = action.total_rate
        eta = best_subcarrier(params, state.channel_gains).eta
        closed = float(bgl_objective(r, eta, params.theta, state.battery, q, V, state.price))
        grid = grid_min_bgl_objective(state, params, cfg, step)
        tol = CLOSED_FORM_RTOL * (1 + abs(grid.min_objective))
        if grid_step is not None:
            curvature = V * state.price * eta * params.theta**2 * math.exp(
                params.theta * min(r + step, q))
            tol += 0.5 * curvature * step**2
        gap = grid.min_objective - closed
        if closed > grid.min_objective + tol or gap > tol:
            failures += 1
        worst = max(worst, abs(gap) / tol)
    status = "pass" if failures == 0 else "fail"
    return SuiteResult(
        "closed-form vs grid search", status,
        f"{n_states} states, {failures} outside tolerance, worst gap/tol = {worst:.3g}",
    )


def split_dominance_suite(
    n_cases: int = 10**4, trials: int = 20, seed: int = 0, max_rate: float = 60.0
) -> SuiteResult:
    params = default_paper_params()
    scenario = default_paper_scenario()
    rng = np.random.default_rng(seed)
    failures = 0
    first = None
    for _ in range(n_cases):
        gains = tuple(rng.exponential(scenario.mean_power_gain, params.num_subcarriers).tolist())
        total = float(rng.uniform(0.0, max_rate))
        split = find_dominating_split(params, gains, total, trials, rng)
        if split is not None:
            failures += 1
            if first is None:
                best = [0.0] * params.num_subcarriers
                best[best_subcarrier(params, gains).index] = total
                first = (gains, total, split, transmit_power(params, gains, best),
                         transmit_power(params, gains, split))
    status = "pass" if failures == 0 else "fail"
    detail = f"{n_cases} cases x {trials} splits, {failures} beaten by a split"
    if first is not None:
        gains, total, split, p_best, p_split = first
        detail += (f"; e.g. H={tuple(round(h, 4) for h in gains)}, R={total:.4g}: "
                   f"best-only power {p_best:.6g} > split {tuple(round(r, 3) for r in split)} "
                   f"power {p_split:.6g}")
    return SuiteResult("best-subcarrier split dominance", status, detail)


def counterexample_suite(budget: int = 500, seed: int = 0) -> tuple[SuiteResult, CounterexampleReport | None]:
    if budget <= 0:
        return SuiteResult("greedy counterexample search", "skipped", "budget 0"), None
    report = search_greedy_counterexample(budget=budget, seed=seed)
    if report.inconsistencies:
        return SuiteResult(
            "greedy counterexample search", "fail",
            f"exhaustive worse than greedy on {len(report.inconsistencies)} instance(s)",
        ), report
    if report.found:
        detail = (f"found after {report.searched} instance(s): greedy "
                  f"{report.greedy_cost:.6g} > exhaustive {report.exhaustive_cost:.6g}")
    else:
        detail = f"not found within {report.searched} instance(s)"
    return SuiteResult("greedy counterexample search", "pass", detail), report


def run_all(
    n_states: int = 10**4,
    grid_step: float | None = None,
    split_cases: int = 10**4,
    counterexample_budget: int = 500,
    seed: int = 0,
) -> list[SuiteResult]:
    return [
        closed_form_suite(n_states, grid_step, seed),
        split_dominance_suite(split_cases, seed=seed),
        counterexample_suite(counterexample_budget, seed)[0],
    ]

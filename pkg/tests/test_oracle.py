import json
import math
from pathlib import Path

import numpy as np
import pytest

from bglsim.errors import InstanceTooLargeError, ParameterError
from bglsim.model import ModelParams, SystemState, transmit_power
from bglsim.oracle import (
    HorizonInstance,
    bgl_objective,
    exhaustive_horizon_cost,
    find_dominating_split,
    grid_min_bgl_objective,
    min_split_power,
    random_horizon_instance,
    random_split_dominance,
    search_greedy_counterexample,
)
from bglsim.policies import BglConfig, best_subcarrier, bgl_decide
from bglsim.validation import random_states

FIXTURE = Path(__file__).parent / "fixtures" / "greedy_counterexample.json"
THETA = 2 * math.log(2) / 5
PAPER = ModelParams(num_subcarriers=3)


class TestGridSearch:
    def test_huge_battery_sends_everything(self):
        s = SystemState(0, (0.4, 0.2, 0.1), 37.0, 1e9, 0.05)
        p = ModelParams(num_subcarriers=3, battery_capacity=1e9)
        res = grid_min_bgl_objective(s, p, BglConfig(10.0), 0.37)
        assert res.argmin_R == 37.0
        assert res.min_objective == pytest.approx(-37.0**2)

    def test_empty_queue(self):
        res = grid_min_bgl_objective(SystemState(0, (1, 1, 1), 0.0, 5.0, 0.05), PAPER, BglConfig(1.0), 0.1)
        assert (res.argmin_R, res.min_objective) == (0.0, 0.0)

    def test_rejects_bad_step(self):
        with pytest.raises(ParameterError):
            grid_min_bgl_objective(SystemState(0, (1, 1, 1), 1.0, 5.0, 0.05), PAPER, BglConfig(1.0), 0.0)

    def test_refinement_never_worse(self):
        rng = np.random.default_rng(4)
        for state, V in random_states(200, rng):
            step = max(state.queue_len, 1.0) / 50
            coarse = grid_min_bgl_objective(state, PAPER, BglConfig(V), step)
            fine = grid_min_bgl_objective(state, PAPER, BglConfig(V), step / 2)
            assert fine.min_objective <= coarse.min_objective

    def test_result_invariants(self):
        rng = np.random.default_rng(5)
        for state, V in random_states(200, rng):
            step = max(state.queue_len, 1.0) / 100
            res = grid_min_bgl_objective(state, PAPER, BglConfig(V), step)
            assert 0 <= res.argmin_R <= state.queue_len
            eta = best_subcarrier(PAPER, state.channel_gains).eta
            probe = np.linspace(0, state.queue_len, 17)
            assert res.min_objective <= bgl_objective(
                probe[::4], eta, THETA, state.battery, state.queue_len, V, state.price).min() + 1e-9

    def test_closed_form_within_curvature_bound(self):
        rng = np.random.default_rng(6)
        for state, V in random_states(2000, rng):
            cfg = BglConfig(V)
            step = max(state.queue_len, 1e-9) / 1000
            a = bgl_decide(state, PAPER, cfg)
            eta = best_subcarrier(PAPER, state.channel_gains).eta
            closed = float(bgl_objective(a.total_rate, eta, THETA, state.battery,
                                         state.queue_len, V, state.price))
            grid = grid_min_bgl_objective(state, PAPER, cfg, step)
            scale = 1e-9 * (1 + abs(closed))
            assert closed <= grid.min_objective + scale
            curvature = V * state.price * eta * THETA**2 * math.exp(
                THETA * min(a.total_rate + step, state.queue_len))
            assert grid.min_objective - closed <= 0.5 * curvature * step**2 + scale


class TestSplitDominance:
    def test_single_carrier(self):
        p = ModelParams(num_subcarriers=1)
        assert random_split_dominance(p, (0.3,), 25.0, 100, np.random.default_rng(0))

    def test_zero_rate(self):
        assert random_split_dominance(PAPER, (0.3, 0.9, 0.1), 0.0, 1000, np.random.default_rng(0))

    def test_disparate_gains_small_rate(self):
        # Best-only is optimal while eta_best * e^{theta R} <= eta_other.
        assert random_split_dominance(PAPER, (1.0, 0.01, 0.01), 5.0, 2000, np.random.default_rng(0))

    def test_equal_gains_split_wins(self):
        # Two equal carriers, R=10: all on one needs 2^4 - 1 = 15, halves need 2 (2^2 - 1) = 6.
        p = ModelParams(num_subcarriers=2)
        assert transmit_power(p, (1.0, 1.0), (5.0, 5.0)) == pytest.approx(6.0, rel=1e-14)
        assert transmit_power(p, (1.0, 1.0), (10.0, 0.0)) == pytest.approx(15.0, rel=1e-14)
        assert not random_split_dominance(p, (1.0, 1.0), 10.0, 100, np.random.default_rng(0))

    def test_dominating_split_is_a_valid_split(self):
        split = find_dominating_split(PAPER, (0.3, 0.25, 0.2), 10.0, 1000, np.random.default_rng(1))
        assert split is not None
        assert sum(split) == pytest.approx(10.0)
        assert min(split) >= 0

    def test_water_filling_is_optimal(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            gains = tuple(rng.exponential(0.3, 3))
            total = float(rng.uniform(0, 40))
            opt = min_split_power(PAPER, gains, total)
            assert sum(opt) == pytest.approx(total)
            p_opt = transmit_power(PAPER, gains, opt)
            for _ in range(20):
                w = rng.dirichlet(np.ones(3))
                assert transmit_power(PAPER, gains, tuple(w * total)) >= p_opt * (1 - 1e-12)


class TestHorizon:
    def base(self, **kw):
        d = dict(etas=(1.0, 0.5), prices=(0.02, 0.05), data_arrivals=(2.0, 1.0),
                 energy_arrivals=(0.1, 0.2), initial_queue=3.0, initial_battery=0.5,
                 battery_capacity=1.0, theta=THETA, rate_step=1.0, energy_step=0.125)
        d.update(kw)
        return HorizonInstance(**d)

    def test_single_period_greedy_is_optimal(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            inst = random_horizon_instance(rng, THETA)
            inst = HorizonInstance.from_dict({**inst.to_dict(), **{
                k: inst.to_dict()[k][:1] for k in ("etas", "prices", "data_arrivals", "energy_arrivals")}})
            assert exhaustive_horizon_cost(inst, "exhaustive") == pytest.approx(
                exhaustive_horizon_cost(inst, "greedy"), abs=1e-15)

    def test_zero_prices_zero_penalty(self):
        inst = self.base(prices=(0.0, 0.0), lam=0.0)
        assert exhaustive_horizon_cost(inst, "greedy") == 0.0
        assert exhaustive_horizon_cost(inst, "exhaustive") == 0.0

    def test_zero_prices_with_penalty_tie(self):
        inst = self.base(prices=(0.0, 0.0))
        assert exhaustive_horizon_cost(inst, "greedy") == pytest.approx(
            exhaustive_horizon_cost(inst, "exhaustive"))

    def test_exhaustive_never_worse(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            inst = random_horizon_instance(rng, THETA)
            assert exhaustive_horizon_cost(inst, "exhaustive") <= exhaustive_horizon_cost(inst, "greedy") + 1e-12

    def test_fixed_rate_sequence(self):
        # Given rates: sending in the cheap period from the grid and saving the
        # battery for the expensive one beats drawing greedily.
        inst = self.base(etas=(1.0, 1.0), prices=(0.02, 0.05), energy_arrivals=(0.0, 0.0),
                         initial_queue=10.0, initial_battery=3.0, battery_capacity=3.0,
                         rates=(5.0, 5.0), energy_step=0.5, lam=0.0)
        greedy = exhaustive_horizon_cost(inst, "greedy")
        best = exhaustive_horizon_cost(inst, "exhaustive")
        # Greedy: period 0 covered, period 1 buys 3 at 0.05. Best: buy 3 at 0.02.
        assert greedy == pytest.approx(0.15)
        assert best == pytest.approx(0.06)

    def test_budget(self):
        with pytest.raises(InstanceTooLargeError):
            exhaustive_horizon_cost(self.base(), "exhaustive", budget=10)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            self.base(prices=(0.02,))
        with pytest.raises(ParameterError):
            self.base(rate_step=0.0)

    def test_round_trip(self):
        inst = self.base()
        assert HorizonInstance.from_dict(json.loads(json.dumps(inst.to_dict()))) == inst

    def test_pinned_counterexample(self):
        data = json.loads(FIXTURE.read_text())
        inst = HorizonInstance.from_dict(data["instance"])
        greedy = exhaustive_horizon_cost(inst, "greedy")
        best = exhaustive_horizon_cost(inst, "exhaustive")
        assert best < greedy - 1e-6
        assert greedy == pytest.approx(data["greedy_cost"], rel=1e-12)
        assert best == pytest.approx(data["exhaustive_cost"], rel=1e-12)

    def test_search_is_reproducible(self):
        a = search_greedy_counterexample(budget=50, seed=0)
        b = search_greedy_counterexample(budget=50, seed=0)
        assert a.found and a.instance == b.instance and not a.inconsistencies

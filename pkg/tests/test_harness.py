from dataclasses import dataclass

import pytest

from bglsim.errors import ConfigError, FeasibilityError, InfeasibleDelayError
from bglsim.harness import (
    SWEEP_COLUMNS,
    SweepSpec,
    find_max_V_for_delay,
    mean_by_value,
    monotone_violations,
    replication_seed,
    run_episode,
    run_sweep,
    sweep_csv,
)
from bglsim.model import Action
from bglsim.policies import Bgl, Cop, Dop, make_policy
from bglsim.stochastic import CategoricalDist, default_paper_params, default_paper_scenario, draw_trace

PARAMS = default_paper_params()


def scenario(n_end=5000, seed=0, **kw):
    return default_paper_scenario(n_end=n_end, seed=seed).with_(**kw)


@pytest.mark.parametrize("policy", [Bgl(0.01), Bgl(1e4), Dop(), Cop()])
def test_no_arrivals_means_nothing_happens(policy):
    sc = scenario(data_arrivals=CategoricalDist((0.0,), (1.0,)))
    m = run_episode(sc, PARAMS, policy)
    assert m.avg_queue == 0.0 and m.avg_cost == 0.0 and m.max_queue == 0.0


def test_cop_never_pays():
    m = run_episode(scenario(20000, seed=3), PARAMS, Cop())
    assert m.avg_cost == 0.0 and m.avg_grid_power == 0.0


def test_dop_queue_is_last_arrival():
    m = run_episode(scenario(10**5), PARAMS, Dop())
    assert abs(m.avg_queue - 14.0) < 0.1
    assert m.max_queue == 30.0


def test_metrics_invariants_and_trajectory():
    m = run_episode(scenario(3000), PARAMS, Bgl(10.0), record_every=100)
    assert m.avg_cost >= 0 and m.avg_queue >= 0 and m.n_end == 3000
    assert [r.period for r in m.trajectory] == list(range(0, 3000, 100))
    assert m.trajectory[0].queue_len == 0.0 and m.trajectory[0].battery == 0.0


def test_battery_never_sources_more_than_it_received():
    sc = scenario(2000, seed=5)
    m = run_episode(sc, PARAMS, Dop(), record_every=1)
    trace = draw_trace(sc, PARAMS.num_subcarriers)
    drawn = 0.0
    for rec in m.trajectory:
        drawn += rec.renewable_draw * PARAMS.period_length
        assert drawn <= sum(trace.energy[:rec.period]) + 1e-6
        assert 0 <= rec.battery <= PARAMS.battery_capacity


def test_deterministic():
    sc = scenario(2000, seed=9)
    assert run_episode(sc, PARAMS, Bgl(3.0)) == run_episode(sc, PARAMS, Bgl(3.0))


def test_policy_bug_is_reported():
    @dataclass(frozen=True)
    class Overdraw:
        name: str = "overdraw"

        def decide(self, state, params):
            return Action((0.0, 0.0, 0.0), state.battery + 1.0)

    with pytest.raises(FeasibilityError, match="overdraw"):
        run_episode(scenario(10), PARAMS, Overdraw())


class TestSweep:
    def spec(self, values, parameter="V", policy="bgl", **kw):
        return SweepSpec(parameter, tuple(values), scenario(2000, seed=4), PARAMS, policy, **kw)

    def test_single_value_is_single_episode(self):
        rows = run_sweep(self.spec([7.0]))
        assert len(rows) == 1
        assert rows[0].metrics == run_episode(scenario(2000, seed=4), PARAMS, Bgl(7.0), seed=rows[0].seed)

    def test_rows_ordered_and_seeded(self):
        rows = run_sweep(self.spec([1.0, 10.0], replications=2))
        assert [(r.swept_value, r.replication) for r in rows] == [(1.0, 0), (1.0, 1), (10.0, 0), (10.0, 1)]
        assert [r.seed for r in rows] == [replication_seed(4, 0), replication_seed(4, 1)] * 2

    def test_parallel_matches_serial(self):
        spec = self.spec([0.1, 10.0, 1000.0])
        assert run_sweep(spec, jobs=1) == run_sweep(spec, jobs=2)

    def test_other_parameters(self):
        rows = run_sweep(self.spec([0.2, 0.8], parameter="mean_gain", V=10.0))
        assert rows[0].metrics.avg_queue > rows[1].metrics.avg_queue
        rows = run_sweep(self.spec([500.0, 2500.0], parameter="battery_B", policy="cop"))
        assert all(r.metrics.avg_cost == 0.0 for r in rows)

    def test_dop_ignores_V(self):
        rows = run_sweep(self.spec([1e-3, 1.0, 1e4], policy="dop"))
        assert len({r.metrics for r in rows}) == 1

    @pytest.mark.parametrize("kw", [
        {"swept_parameter": "price"}, {"values": ()}, {"replications": 0},
    ])
    def test_invalid(self, kw):
        args = dict(swept_parameter="V", values=(1.0,), scenario=scenario(10), params=PARAMS, policy="bgl")
        args.update(kw)
        with pytest.raises(ConfigError):
            SweepSpec(**args)

    def test_csv(self):
        rows = run_sweep(self.spec([1.0, 100.0]))
        text = sweep_csv(rows)
        lines = text.split("\n")
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 4 and lines[-1] == ""
        assert "\r" not in text
        assert lines[1].startswith("1.0,0,")

    def test_mean_by_value(self):
        rows = run_sweep(self.spec([1.0, 100.0], replications=2))
        means = mean_by_value(rows, "avg_queue")
        assert means[0] == pytest.approx((rows[0].metrics.avg_queue + rows[1].metrics.avg_queue) / 2)


class TestMaxV:
    values = (1e-3, 1e-1, 10.0, 1e3)

    def spec(self):
        return SweepSpec("V", self.values, scenario(20000, seed=1), PARAMS, "bgl")

    def test_all_feasible(self):
        assert find_max_V_for_delay(self.spec(), 1e9) == 1e3

    def test_none_feasible(self):
        with pytest.raises(InfeasibleDelayError):
            find_max_V_for_delay(self.spec(), 1.0)

    def test_just_above_dop(self):
        spec = self.spec()
        rows = run_sweep(spec)
        dop = run_episode(spec.scenario, PARAMS, make_policy("dop"), seed=rows[0].seed)
        v = find_max_V_for_delay(spec, dop.avg_queue + 1e-3, rows)
        assert v <= 1e-1

    def test_needs_sorted_v_sweep(self):
        with pytest.raises(ConfigError):
            find_max_V_for_delay(SweepSpec("V", (10.0, 1.0), scenario(10), PARAMS, "bgl"), 5.0, [])
        with pytest.raises(ConfigError):
            find_max_V_for_delay(SweepSpec("mean_gain", (0.1,), scenario(10), PARAMS, "bgl", V=1.0), 5.0, [])


@pytest.mark.parametrize("values, direction, tol, expected", [
    ([1, 2, 2, 3], "nondecreasing", 0.0, []),
    ([1, 2, 1.99, 3], "nondecreasing", 0.0, [1]),
    ([1, 2, 1.99, 3], "nondecreasing", 0.01, []),
    ([3, 2, 2.5, 0], "nonincreasing", 0.0, [1]),
    ([0, 0, 0], "nonincreasing", 0.0, []),
])
def test_monotone_violations(values, direction, tol, expected):
    assert [i for i, _ in monotone_violations(values, direction, tol)] == expected

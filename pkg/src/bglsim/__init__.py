"""Delay-aware transmission over a multi-carrier link powered by a renewable
battery and purchasable grid power: simulator, BGL/DOP/COP controllers, and
brute-force oracles."""

from bglsim.harness import EpisodeMetrics, SweepSpec, run_episode, run_sweep
from bglsim.model import Action, Arrivals, ModelParams, PeriodOutcome, SystemState, step
from bglsim.policies import BglConfig, bgl_decide, cop_decide, dop_decide, make_policy
from bglsim.stochastic import ScenarioConfig, default_paper_params, default_paper_scenario

__all__ = [
    "Action", "Arrivals", "BglConfig", "EpisodeMetrics", "ModelParams", "PeriodOutcome",
    "ScenarioConfig", "SweepSpec", "SystemState", "bgl_decide", "cop_decide",
    "default_paper_params", "default_paper_scenario", "dop_decide", "make_policy",
    "run_episode", "run_sweep", "step",
]

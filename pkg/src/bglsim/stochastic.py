"""Seeded exogenous processes: Rayleigh block fading, i.i.d. data and energy
arrivals, and grid prices.

Each process draws from its own generator, keyed by the episode seed and the
process name, so adding a process or lengthening an episode never shifts the
draws of another stream.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from bglsim.errors import ConfigError
from bglsim.model import ModelParams

STREAMS = ("channel", "data", "energy", "price")


@dataclass(frozen=True)
class CategoricalDist:
    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if not values or len(values) != len(probs):
            raise ConfigError(
                f"categorical distribution needs equal-length non-empty values/probs, "
                f"got {len(values)} values and {len(probs)} probs"
            )
        if any(p < 0 for p in probs):
            raise ConfigError(f"probabilities must be >= 0, got {probs}")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ConfigError(f"probabilities must sum to 1, got sum {sum(probs)!r}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # Inverse-CDF on uniforms keeps the stream prefix-stable in ``size``.
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return np.asarray(self.values)[np.minimum(idx, len(self.values) - 1)]


@dataclass(frozen=True)
class ScenarioConfig:
    mean_power_gain: float
    data_arrivals: CategoricalDist
    energy_arrivals: CategoricalDist
    prices: CategoricalDist
    n_end: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_end < 1:
            raise ConfigError(f"n_end must be >= 1, got {self.n_end}")
        if not self.mean_power_gain > 0:
            raise ConfigError(f"mean_power_gain must be > 0, got {self.mean_power_gain}")
        if any(p <= 0 for p in self.prices.values):
            raise ConfigError(f"prices must be > 0, got {self.prices.values}")
        if any(v < 0 for v in self.data_arrivals.values + self.energy_arrivals.values):
            raise ConfigError("arrival values must be >= 0")

    def with_(self, **changes) -> ScenarioConfig:
        return replace(self, **changes)


def stream_rng(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named process of one episode."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


def sample_channel(num_subcarriers: int, mean_gain: float, rng: np.random.Generator,
                   size: int | None = None) -> np.ndarray:
    """Exponential power gains (Rayleigh amplitude) with the given mean.

    Returns shape ``(num_subcarriers,)`` or ``(size, num_subcarriers)``.
    """
    if not mean_gain > 0:
        raise ConfigError(f"mean_gain must be > 0, got {mean_gain}")
    shape = (num_subcarriers,) if size is None else (size, num_subcarriers)
    return rng.exponential(mean_gain, shape)


def sample_categorical(dist: CategoricalDist, rng: np.random.Generator) -> float:
    return float(dist.sample(rng, 1)[0])


@dataclass(frozen=True)
class ExogenousTrace:
    """Pre-drawn exogenous processes for one episode.

    ``gains`` and ``prices`` have ``n_end + 1`` rows (the state after the last
    period needs them); ``data`` and ``energy`` have ``n_end``.
    """

    gains: list = field(repr=False)
    prices: list = field(repr=False)
    data: list = field(repr=False)
    energy: list = field(repr=False)


def draw_trace(scenario: ScenarioConfig, num_subcarriers: int,
               seed: int | None = None) -> ExogenousTrace:
    seed = scenario.seed if seed is None else seed
    n = scenario.n_end
    gains = sample_channel(num_subcarriers, scenario.mean_power_gain,
                           stream_rng(seed, "channel"), size=n + 1)
    prices = scenario.prices.sample(stream_rng(seed, "price"), n + 1)
    data = scenario.data_arrivals.sample(stream_rng(seed, "data"), n)
    energy = scenario.energy_arrivals.sample(stream_rng(seed, "energy"), n)
    return ExogenousTrace(
        gains=[tuple(row) for row in gains.tolist()],
        prices=prices.tolist(),
        data=data.tolist(),
        energy=energy.tolist(),
    )


PAPER_DATA = CategoricalDist((0, 10, 20, 30), (0.1, 0.5, 0.3, 0.1))
PAPER_ENERGY = CategoricalDist((100, 300, 500, 800), (0.1, 0.6, 0.2, 0.1))
PAPER_PRICES = CategoricalDist((0.02, 0.05), (0.3, 0.7))


def default_paper_scenario(n_end: int = 10**6, seed: int = 0) -> ScenarioConfig:
    return ScenarioConfig(
        mean_power_gain=0.3,
        data_arrivals=PAPER_DATA,
        energy_arrivals=PAPER_ENERGY,
        prices=PAPER_PRICES,
        n_end=n_end,
        seed=seed,
    )


def default_paper_params(battery_capacity: float = 2500.0) -> ModelParams:
    return ModelParams(
        num_subcarriers=3,
        period_length=1.0,
        bits_per_package=1,
        channel_uses=5,
        noise_variances=(1.0, 1.0, 1.0),
        battery_capacity=battery_capacity,
    )

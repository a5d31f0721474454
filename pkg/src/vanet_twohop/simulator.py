"""Monte Carlo realisations of the 1D random connection model.

Every run draws from its own generator ``derive(seed, run_index)``, so an
experiment gives bit-identical results whether its runs execute serially or
across worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from vanet_twohop import analytic
from vanet_twohop.analytic import ChannelModel, FiniteInterval, RoadScenario
from vanet_twohop.stats import N2Statistics

DEFAULT_EPSILON = 1e-8
# Half-width, in connection scales, used when no truncation window exists.
FALLBACK_WINDOW = 10.0
SEED_MASK = (1 << 64) - 1


def derive(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the stream at ``path`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Realization:
    positions: np.ndarray
    rsu: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 1:
            raise ValueError("positions must be one-dimensional")
        if pos.size > 1 and not np.all(np.diff(pos) > 0):
            raise ValueError("positions must be strictly increasing")
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return self.positions.size


@dataclass(frozen=True)
class RunOutcome:
    n2_count: int
    vehicles_total: int
    n1_relay_count: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.n2_count <= self.vehicles_total:
            raise ValueError("n2_count must lie in [0, vehicles_total]")


@dataclass(frozen=True)
class SimConfig:
    scenario: RoadScenario
    channel: ChannelModel
    runs: int
    seed: int = 0
    epsilon: float = DEFAULT_EPSILON
    window_scale: float = 1.0

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not self.window_scale > 0:
            raise ValueError("window_scale must be positive")


def sample_ppp(rho: float, interval, rng: np.random.Generator) -> Realization:
    """Homogeneous Poisson points on ``interval = (a, b)``, sorted."""
    a, b = interval
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    if rho < 0:
        raise ValueError("rho must be non-negative")
    n = rng.poisson(rho * (b - a)) if rho > 0 else 0
    pos = np.sort(a + (b - a) * rng.random(n))
    return Realization(pos)


def _link_prob(dist, channel: ChannelModel):
    if channel.eta == 2:
        return np.exp(-channel.beta * dist * dist)
    return np.exp(-channel.beta * dist ** channel.eta)


def two_hop_count(realization: Realization, channel: ChannelModel,
                  rng: np.random.Generator, transpose_draws: bool = False) -> RunOutcome:
    """Count vehicles with a relay ``z`` such that ``x <-> z <-> rsu``.

    Only links touching the RSU or a direct neighbour of it can matter, so
    the draws are an ``n x |X1|`` block; the ``X1 x X1`` sub-block is made
    symmetric from its upper triangle so each unordered pair is drawn once.
    ``transpose_draws`` fills the block column-major instead, which changes
    the pairing of uniforms to links but not the law.
    """
    pos = realization.positions
    n = pos.size
    if n < 2:
        return RunOutcome(0, n)
    links, _ = _relay_links(pos, realization.rsu, channel, rng, transpose_draws)
    return RunOutcome(int(np.count_nonzero(links.any(axis=1))), n)


def _relay_links(pos, rsu, channel, rng, transpose_draws=False):
    """Links from every vehicle to the RSU's direct neighbours (columns)."""
    n = pos.size
    direct = rng.random(n) < _link_prob(np.abs(pos - rsu), channel)
    relays = np.flatnonzero(direct)
    k = relays.size
    prob = _link_prob(np.abs(pos[:, None] - pos[relays][None, :]), channel)
    draws = rng.random((k, n)).T if transpose_draws else rng.random((n, k))
    links = draws < prob
    block = np.triu(links[relays], 1)
    links[relays] = block | block.T
    return links, relays


def two_hop_count_dense(realization: Realization, channel: ChannelModel,
                        rng: np.random.Generator) -> RunOutcome:
    """Reference counter that draws the full graph, RSU included."""
    pos = np.append(realization.positions, realization.rsu)
    n = pos.size - 1
    prob = _link_prob(np.abs(pos[:, None] - pos[None, :]), channel)
    upper = np.triu(rng.random(prob.shape) < prob, 1)
    adj = upper | upper.T
    direct = adj[:n, n]
    # x counted iff some z != x has x <-> z and z <-> rsu.
    via = adj[:n, :n] & direct[None, :]
    return RunOutcome(int(np.count_nonzero(via.any(axis=1))), n)


def n1_relay_count(realization: Realization, probe_x: float, channel: ChannelModel,
                   rng: np.random.Generator) -> int:
    """Number of vehicles relaying between the fixed probe ``probe_x`` and the RSU."""
    pos = realization.positions
    if pos.size == 0:
        return 0
    to_probe = rng.random(pos.size) < _link_prob(np.abs(pos - probe_x), channel)
    to_rsu = rng.random(pos.size) < _link_prob(np.abs(pos - realization.rsu), channel)
    return int(np.count_nonzero(to_probe & to_rsu))


def simulation_window(scenario: RoadScenario, channel: ChannelModel,
                      epsilon: float = DEFAULT_EPSILON, scale: float = 1.0):
    """Interval simulated for a scenario, in the scenario's own units."""
    if isinstance(scenario.domain, FiniteInterval):
        h = scenario.domain.half_width
        return (-h, h)
    u = scenario.rsu_position
    if channel.eta == 2:
        try:
            half = analytic.truncation_window(analytic.effective_intensity(scenario.rho, channel),
                                              epsilon)
        except ValueError:
            half = FALLBACK_WINDOW
    else:
        half = FALLBACK_WINDOW
    half = max(half, 1.0) * scale * channel.length_scale
    return (u - half, u + half)


def _run_chunk(config: SimConfig, window, start: int, stop: int) -> np.ndarray:
    rho = config.scenario.rho
    u = config.scenario.rsu_position
    out = np.empty(stop - start, dtype=np.int64)
    for j, i in enumerate(range(start, stop)):
        rng = derive(config.seed, i)
        real = sample_ppp(rho, window, rng)
        real = Realization(real.positions, u)
        out[j] = two_hop_count(real, config.channel, rng).n2_count
    return out


def _chunks(runs: int, workers: int):
    size = max(1, math.ceil(runs / (4 * workers)))
    return [(s, min(s + size, runs)) for s in range(0, runs, size)]


def map_runs(func, config, args, runs: int, threads: int = 1) -> np.ndarray:
    """Evaluate ``func(config, *args, start, stop)`` over run blocks, in run order."""
    if threads <= 1 or runs < 64:
        return func(config, *args, 0, runs)
    blocks = _chunks(runs, threads)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(func, config, *args, s, e) for s, e in blocks]
        return np.concatenate([f.result() for f in futures])


def run_experiment(config: SimConfig, threads: int = 1) -> N2Statistics:
    """Simulate ``config.runs`` independent snapshots and aggregate N2."""
    window = simulation_window(config.scenario, config.channel, config.epsilon,
                               config.window_scale)
    counts = map_runs(_run_chunk, config, (window,), config.runs, threads)
    return N2Statistics.from_counts(counts)


def _relay_chunk(config: SimConfig, window, probe_x, start, stop):
    out = np.empty(stop - start, dtype=np.int64)
    u = config.scenario.rsu_position
    for j, i in enumerate(range(start, stop)):
        rng = derive(config.seed, i)
        real = Realization(sample_ppp(config.scenario.rho, window, rng).positions, u)
        out[j] = n1_relay_count(real, probe_x, config.channel, rng)
    return out


def run_relay_experiment(config: SimConfig, probe_x: float = 0.0, threads: int = 1) -> np.ndarray:
    """Relay counts ``N1(probe_x, rsu)`` over ``config.runs`` realisations.

    The window covers both endpoints plus ``FALLBACK_WINDOW`` connection scales.
    """
    u = config.scenario.rsu_position
    if isinstance(config.scenario.domain, FiniteInterval):
        h = config.scenario.domain.half_width
        window = (-h, h)
    else:
        pad = FALLBACK_WINDOW * config.channel.length_scale * config.window_scale
        window = (min(u, probe_x) - pad, max(u, probe_x) + pad)
    return map_runs(_relay_chunk, config, (window, probe_x), config.runs, threads)


def _window_pair_chunk(config: SimConfig, inner, outer, start, stop):
    out = np.empty((stop - start, 2), dtype=np.int64)
    u = config.scenario.rsu_position
    for j, i in enumerate(range(start, stop)):
        rng = derive(config.seed, i)
        pos = sample_ppp(config.scenario.rho, outer, rng).positions
        if pos.size < 2:
            out[j] = 0
            continue
        links, relays = _relay_links(pos, u, config.channel, rng)
        keep = (pos >= inner[0]) & (pos <= inner[1])
        sub = links[keep][:, keep[relays]]
        out[j] = (np.count_nonzero(sub.any(axis=1)), np.count_nonzero(links.any(axis=1)))
    return out


def window_sensitivity(config: SimConfig, scale: float = 2.0, threads: int = 1):
    """Paired N2 counts on the configured window and on one ``scale`` times wider.

    Each run samples the wide window once; the narrow count uses the same
    points and link draws restricted to the narrow window, so the paired
    difference isolates what the extra road contributes.
    Returns ``(narrow, wide)`` as ``N2Statistics``.
    """
    if isinstance(config.scenario.domain, FiniteInterval):
        raise ValueError("window sensitivity needs an infinite-line scenario")
    if not scale >= 1:
        raise ValueError("scale must be at least 1")
    inner = simulation_window(config.scenario, config.channel, config.epsilon,
                              config.window_scale)
    outer = simulation_window(config.scenario, config.channel, config.epsilon,
                              config.window_scale * scale)
    pairs = map_runs(_window_pair_chunk, config, (inner, outer), config.runs, threads)
    return N2Statistics.from_counts(pairs[:, 0]), N2Statistics.from_counts(pairs[:, 1])

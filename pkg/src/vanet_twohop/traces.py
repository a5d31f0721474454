"""Vehicle traces: CSV I/O, headway ECDFs, inversion sampling and trace experiments.

Trace files are CSV with header ``time_s,vehicle_id,position_m,lane``, one row
per vehicle per snapshot, UTF-8 with LF line endings.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from vanet_twohop import analytic
from vanet_twohop.analytic import ChannelModel, RoadScenario
from vanet_twohop.simulator import Realization, derive, two_hop_count
from vanet_twohop.stats import N2Statistics

HEADER = ("time_s", "vehicle_id", "position_m", "lane")
DEFAULT_ROAD_LENGTH = 10_000.0
DEFAULT_LANES = 3
DEFAULT_SNAPSHOTS = 1800
DEFAULT_KEEP_LAST = 1200
# Per-lane speeds of the synthetic generator, m/s.
LANE_SPEEDS = (25.0, 30.0, 35.0)


class TraceFormatError(ValueError):
    """Malformed trace input; ``line`` is the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Vehicle:
    id: str
    position: float
    lane: int


@dataclass(frozen=True)
class TraceSnapshot:
    time: float
    vehicles: tuple

    def positions(self) -> np.ndarray:
        return np.array([v.position for v in self.vehicles], dtype=float)


def parse_trace(source, road_length: float = DEFAULT_ROAD_LENGTH,
                lanes: int = DEFAULT_LANES) -> list:
    """Read a trace CSV (text, bytes or a binary/text stream) into snapshots.

    Snapshots come back ordered by time; vehicles keep their file order.
    """
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    if text == "":
        return []
    if "\r" in text:
        raise TraceFormatError("CR line endings are not allowed")
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    if tuple(lines[0].split(",")) != HEADER:
        raise TraceFormatError(f"expected header {','.join(HEADER)!r}", 1)

    groups: dict = {}
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 4:
            raise TraceFormatError(f"expected 4 fields, got {len(fields)}", lineno)
        t_raw, vid, pos_raw, lane_raw = fields
        try:
            t = float(t_raw)
            pos = float(pos_raw)
            lane = int(lane_raw)
        except ValueError as exc:
            raise TraceFormatError(f"non-numeric field ({exc})", lineno) from None
        if not (math.isfinite(t) and math.isfinite(pos)):
            raise TraceFormatError("non-finite value", lineno)
        if vid == "":
            raise TraceFormatError("empty vehicle_id", lineno)
        if not 0 <= pos <= road_length:
            raise TraceFormatError(f"position {pos} outside [0, {road_length}]", lineno)
        if not 1 <= lane <= lanes:
            raise TraceFormatError(f"lane {lane} outside 1..{lanes}", lineno)
        if (t, vid) in seen:
            raise TraceFormatError(f"duplicate vehicle {vid!r} at time {t}", lineno)
        seen.add((t, vid))
        groups.setdefault(t, []).append(Vehicle(vid, pos, lane))
    return [TraceSnapshot(t, tuple(vs)) for t, vs in sorted(groups.items())]


def serialize_trace(snapshots: Iterable[TraceSnapshot]) -> str:
    buf = io.StringIO()
    buf.write(",".join(HEADER) + "\n")
    for snap in snapshots:
        for v in snap.vehicles:
            buf.write(f"{snap.time!r},{v.id},{v.position!r},{v.lane}\n")
    return buf.getvalue()


def project_to_line(snapshot: TraceSnapshot):
    """Drop lanes and sort; returns ``(positions, n_perturbed)``.

    Coincident positions are separated by one ulp each so the result is
    strictly increasing.
    """
    pos = np.sort(snapshot.positions())
    perturbed = 0
    for i in range(1, pos.size):
        if pos[i] <= pos[i - 1]:
            pos[i] = np.nextafter(pos[i - 1], np.inf)
            perturbed += 1
    return pos, perturbed


def estimate_intensity(positions) -> float:
    """Inverse mean headway, the PPP maximum-likelihood intensity."""
    pos = np.asarray(positions, dtype=float)
    if pos.size < 2:
        raise ValueError("need at least 2 positions")
    return float((pos.size - 1) / (pos[-1] - pos[0]))


@dataclass(frozen=True, eq=False)
class HeadwayEcdf:
    """Piecewise-linear CDF through ``(0, 0)`` and ``(g_i, F_n(g_i))``.

    Tied gaps collapse to one knot holding the highest rank, so the knots are
    strictly increasing in both coordinates.
    """

    sorted_gaps: np.ndarray
    cdf_values: np.ndarray
    mean_gap: float = field(default=math.nan, compare=False)

    def __post_init__(self):
        g = np.asarray(self.sorted_gaps, dtype=float)
        c = np.asarray(self.cdf_values, dtype=float)
        if g.size == 0 or g.shape != c.shape:
            raise ValueError("gaps and cdf values must be non-empty and matched")
        if g[0] <= 0 or np.any(np.diff(g) <= 0):
            raise ValueError("gaps must be positive and strictly increasing")
        if c[0] <= 0 or np.any(np.diff(c) <= 0) or c[-1] != 1.0:
            raise ValueError("cdf values must increase to exactly 1")
        object.__setattr__(self, "sorted_gaps", g)
        object.__setattr__(self, "cdf_values", c)
        object.__setattr__(self, "_knots",
                           (np.concatenate([[0.0], g]), np.concatenate([[0.0], c])))

    def cdf(self, x):
        g, c = self._knots
        out = np.interp(x, g, c, left=0.0, right=1.0)
        return float(out) if np.ndim(out) == 0 else out

    def inverse(self, u01):
        g, c = self._knots
        out = np.interp(u01, c, g)
        return float(out) if np.ndim(out) == 0 else out

    def interpolated_mean(self) -> float:
        """Mean of the interpolated distribution (trapezoids between knots)."""
        g, c = self._knots
        return float(np.sum(np.diff(c) * 0.5 * (g[1:] + g[:-1])))


def build_ecdf(positions) -> HeadwayEcdf:
    pos = np.asarray(positions, dtype=float)
    if pos.size < 2:
        raise ValueError("need at least 2 positions")
    gaps = np.diff(pos)
    if np.any(gaps <= 0):
        raise ValueError("positions must be strictly increasing")
    values, counts = np.unique(gaps, return_counts=True)
    cdf = np.cumsum(counts) / gaps.size
    cdf[-1] = 1.0
    return HeadwayEcdf(values, cdf, float(gaps.mean()))


def inverse_sample(ecdf: HeadwayEcdf, u01):
    """Map uniforms on [0, 1] through the inverse of the interpolated ECDF."""
    u = np.asarray(u01, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("u01 must lie in [0, 1]")
    return ecdf.inverse(u01)


def synthesize_road(ecdf: HeadwayEcdf, road_length: float,
                    rng: np.random.Generator) -> Realization:
    """Lay vehicles from 0 with i.i.d. ECDF headways; RSU at the midpoint."""
    if not road_length > 0:
        raise ValueError("road_length must be positive")
    mean = ecdf.interpolated_mean()
    batch = int(road_length / mean * 1.1) + 16
    parts = []
    end = 0.0
    while end <= road_length:
        # 1 - U lies in (0, 1], keeping every headway strictly positive.
        steps = ecdf.inverse(1.0 - rng.random(batch))
        cum = end + np.cumsum(steps)
        parts.append(cum)
        end = cum[-1]
    pos = np.concatenate(parts)
    # Sub-ulp headways (tied trace positions) vanish in the sum; keep such
    # vehicles one ulp apart rather than merging them.
    bad = np.flatnonzero(np.diff(pos) <= 0) + 1
    while bad.size:
        for i in bad:
            if pos[i] <= pos[i - 1]:
                pos[i] = np.nextafter(pos[i - 1], np.inf)
        bad = np.flatnonzero(np.diff(pos) <= 0) + 1
    pos = pos[: np.searchsorted(pos, road_length, side="right")]
    return Realization(pos, road_length / 2.0)


def select_snapshots(snapshots: Sequence, selection) -> list:
    """Pick snapshots by ``int`` index, ``slice``, or a selector string.

    Strings: ``"all"``, ``"last:K"``, ``"I"`` or ``"A:B"`` (half-open).
    """
    if isinstance(selection, str):
        s = selection.strip()
        if s == "all":
            return list(snapshots)
        if s.startswith("last:"):
            k = int(s[5:])
            if k < 1:
                raise ValueError("last:K needs K >= 1")
            return list(snapshots[-k:])
        if ":" in s:
            a, b = s.split(":", 1)
            return list(snapshots[slice(int(a) if a else None, int(b) if b else None)])
        selection = int(s)
    if isinstance(selection, slice):
        return list(snapshots[selection])
    return [snapshots[int(selection)]]


@dataclass(frozen=True)
class TraceExperimentConfig:
    channels: tuple
    snapshots: object = f"last:{DEFAULT_KEEP_LAST}"
    configs_per_snapshot: int = 100
    runs: int = 1
    road_length: float = DEFAULT_ROAD_LENGTH
    seed: int = 0

    def __post_init__(self):
        if not self.road_length > 0:
            raise ValueError("road_length must be positive")
        if self.configs_per_snapshot < 1 or self.runs < 1:
            raise ValueError("configs_per_snapshot and runs must be positive")
        if isinstance(self.channels, ChannelModel):
            object.__setattr__(self, "channels", (self.channels,))
        if not self.channels:
            raise ValueError("at least one channel is required")


@dataclass(frozen=True)
class TraceResult:
    channel: ChannelModel
    stats: N2Statistics
    rho_hat: float
    analytic_mean: float
    intensities: np.ndarray = field(repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"beta": self.channel.beta, "eta": self.channel.eta, "rho_hat": self.rho_hat,
                "analytic_mean": self.analytic_mean, **self.stats.to_dict()}


def trace_experiment(config: TraceExperimentConfig, snapshots: Sequence[TraceSnapshot]) -> list:
    """Inversion-sampled road configurations per snapshot, one result per channel.

    Each selected snapshot yields ``configs_per_snapshot`` synthetic roads, and
    each road gets ``runs`` independent link draws. The analytic mean uses the
    intensity averaged over the selected snapshots.
    """
    chosen = select_snapshots(snapshots, config.snapshots)
    if not chosen:
        raise ValueError("snapshot selection is empty")
    ecdfs = []
    intensities = []
    for snap in chosen:
        pos, _ = project_to_line(snap)
        ecdfs.append(build_ecdf(pos))
        intensities.append(estimate_intensity(pos))
    intensities = np.array(intensities)
    rho_hat = float(intensities.mean())

    total = len(chosen) * config.configs_per_snapshot * config.runs
    counts = np.empty((len(config.channels), total), dtype=np.int64)
    idx = 0
    for s, ecdf in enumerate(ecdfs):
        for j in range(config.configs_per_snapshot):
            road = synthesize_road(ecdf, config.road_length, derive(config.seed, s, j))
            for r in range(config.runs):
                for b, channel in enumerate(config.channels):
                    rng = derive(config.seed, s, j, r + 1, b)
                    counts[b, idx] = two_hop_count(road, channel, rng).n2_count
                idx += 1

    out = []
    for b, channel in enumerate(config.channels):
        mean = analytic.expected_n2(RoadScenario(rho_hat), channel).value
        out.append(TraceResult(channel, N2Statistics.from_counts(counts[b]), rho_hat, mean,
                               intensities))
    return out


def generate_traces(rho: float, n_snapshots: int = DEFAULT_SNAPSHOTS,
                    road_length: float = DEFAULT_ROAD_LENGTH, lanes: int = DEFAULT_LANES,
                    gap_law: str = "exponential", hardcore: float = 0.0, seed: int = 0,
                    decimals: Optional[int] = 2) -> list:
    """Synthetic motorway snapshots at projected intensity ``rho``.

    ``round(rho * road_length)`` vehicles are split uniformly over lanes and
    ride a ring road at a fixed per-lane speed, so every snapshot is a rigid
    per-lane rotation of the first. With ``gap_law="exponential"`` each lane
    holds i.i.d. uniform points (a PPP conditioned on its count); with
    ``"hardcore"`` consecutive vehicles in a lane are at least ``hardcore``
    metres apart.
    """
    if rho <= 0 or road_length <= 0 or lanes < 1 or n_snapshots < 1:
        raise ValueError("rho, road_length, lanes and n_snapshots must be positive")
    if gap_law not in ("exponential", "hardcore"):
        raise ValueError(f"unknown gap law {gap_law!r}")
    rng = derive(seed, 0)
    total = int(round(rho * road_length))
    lane_of = rng.integers(1, lanes + 1, size=total)
    start = np.empty(total)
    for lane in range(1, lanes + 1):
        members = np.flatnonzero(lane_of == lane)
        m = members.size
        if gap_law == "hardcore" and m:
            free = road_length - m * hardcore
            if free <= 0:
                raise ValueError("hardcore distance too large for the lane occupancy")
            base = np.sort(rng.random(m) * free) + hardcore * np.arange(m)
        else:
            base = rng.random(m) * road_length
        start[members] = base
    speeds = np.array([LANE_SPEEDS[(lane - 1) % len(LANE_SPEEDS)] for lane in lane_of])
    ids = [f"v{i}" for i in range(total)]
    snaps = []
    for t in range(n_snapshots):
        pos = np.mod(start + speeds * t, road_length)
        if decimals is not None:
            pos = np.round(pos, decimals)
            pos[pos >= road_length] = 0.0
        vehicles = tuple(Vehicle(ids[i], float(pos[i]), int(lane_of[i])) for i in range(total))
        snaps.append(TraceSnapshot(float(t), vehicles))
    return snaps

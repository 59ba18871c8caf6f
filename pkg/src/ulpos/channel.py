"""Synthetic uplink channel impulse responses for a moving transmitter.

Generates per-antenna CIR frames with configurable multipath, receiver
noise, per-radio-unit clock errors, occasional gross timing outliers, and
regional non-line-of-sight degradation.  Every frame is labeled with the
true transmitter position so downstream stages can be scored.

Delay convention: a tap with zero total delay lands at the center index
``n_fft / 2`` of the (FFT-shifted) frame, and each second of delay moves it
right by ``1 / sample_period`` samples.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import AntennaId, BoundingBox, DeploymentGeometry, Position, bounding_region

DEFAULT_N_FFT = 4096
DEFAULT_SAMPLE_PERIOD = 1.0 / 122.88e6


class DelayOutOfWindow(ValueError):
    """A tap's delay maps outside the CIR window [0, n_fft)."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class CirFrame:
    """One channel impulse response measured at one antenna at one timestep."""

    antenna: AntennaId
    timestamp_index: int
    samples: np.ndarray
    sample_period: float = DEFAULT_SAMPLE_PERIOD
    fft_shifted: bool = True

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 1 or not _is_power_of_two(s.shape[0]):
            raise ValueError("samples must be a 1-D vector with power-of-two length")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        object.__setattr__(self, "samples", s)

    @property
    def n_fft(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class PropagationPath:
    """One discrete tap: excess delay relative to the direct arrival, complex gain."""

    delay: float
    gain: complex
    direct: bool = False

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("path delay must be >= 0")


@dataclass(frozen=True)
class MultipathProfile:
    """Set of taps making up the channel; exactly one is flagged direct."""

    paths: tuple[PropagationPath, ...]

    def __post_init__(self):
        directs = [p for p in self.paths if p.direct]
        if len(directs) != 1:
            raise ValueError("profile needs exactly one direct path")
        if any(p.delay < directs[0].delay for p in self.paths):
            raise ValueError("direct path must have the minimum delay")

    @classmethod
    def direct_only(cls, gain: complex = 1.0 + 0.0j) -> "MultipathProfile":
        return cls(paths=(PropagationPath(0.0, gain, direct=True),))


@dataclass(frozen=True)
class NlosRegion:
    """Transmitter positions (x-y box) where given antennas lose the clear path.

    While the transmitter is inside ``region``, the direct tap toward each
    listed antenna is scaled by ``attenuation`` and delayed by an extra
    ``extra_delay`` seconds.  ``antennas=None`` means all antennas.
    """

    region: BoundingBox
    attenuation: float
    extra_delay: float
    antennas: tuple[AntennaId, ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.attenuation <= 1.0:
            raise ValueError("attenuation must be in [0, 1]")
        if self.extra_delay < 0:
            raise ValueError("extra delay must be >= 0")

    def applies(self, ue: Position, antenna: AntennaId) -> bool:
        in_xy = (
            self.region.lo[0] <= ue.x <= self.region.hi[0]
            and self.region.lo[1] <= ue.y <= self.region.hi[1]
        )
        return in_xy and (self.antennas is None or antenna in self.antennas)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything the simulator needs besides the trajectory."""

    geometry: DeploymentGeometry
    n_fft: int = DEFAULT_N_FFT
    sample_period: float = DEFAULT_SAMPLE_PERIOD
    multipath: MultipathProfile = field(default_factory=MultipathProfile.direct_only)
    ru_clock_offset_std: float = 0.0
    ru_clock_offsets: tuple[float, ...] | None = None  # explicit per-RU offsets, seconds
    frame_jitter_std: float = 0.0
    outlier_probability: float = 0.0
    outlier_offset_range: tuple[float, float] = (0.0, 0.0)
    noise_floor: float = 0.0
    nlos_regions: tuple[NlosRegion, ...] = ()
    quantization: str = "sample-grid"
    seed: int = 0

    def __post_init__(self):
        if not _is_power_of_two(self.n_fft):
            raise ValueError("n_fft must be a power of two")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if not 0.0 <= self.outlier_probability <= 1.0:
            raise ValueError("outlier_probability must be in [0, 1]")
        if self.ru_clock_offset_std < 0 or self.frame_jitter_std < 0:
            raise ValueError("stds must be >= 0")
        if self.noise_floor < 0:
            raise ValueError("noise_floor must be >= 0")
        if self.quantization not in ("sample-grid", "fractional"):
            raise ValueError(f"unknown quantization mode {self.quantization!r}")
        if self.ru_clock_offsets is not None and len(self.ru_clock_offsets) != len(
            self.geometry.rus
        ):
            raise ValueError("ru_clock_offsets must list one offset per radio unit")

    def resolve_clock_offsets(self) -> np.ndarray:
        """Per-RU constant clock offsets in seconds, explicit or drawn from the seed."""
        if self.ru_clock_offsets is not None:
            return np.asarray(self.ru_clock_offsets, dtype=float)
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(0,)))
        return rng.normal(0.0, self.ru_clock_offset_std, len(self.geometry.rus))


@dataclass(frozen=True)
class Trajectory:
    """Timestamped ground-truth positions; indices strictly increasing."""

    points: tuple[tuple[int, Position], ...]

    def __post_init__(self):
        ts = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamp indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


@dataclass(frozen=True)
class SimulatedFrame:
    """One simulator output record: the frame plus its ground truth."""

    timestamp_index: int
    antenna: AntennaId
    frame: CirFrame
    true_position: Position
    nlos: bool = False


def make_trajectory(waypoints: list[Position], step: float) -> Trajectory:
    """Sample a piecewise-linear path through ``waypoints`` every ``step`` meters.

    Timestamp indices are consecutive from 0.  The final waypoint is included
    exactly when the total path length is a multiple of the step.
    """
    if not waypoints:
        raise ValueError("need at least one waypoint")
    if step <= 0:
        raise ValueError("step must be positive")
    if len(waypoints) == 1:
        return Trajectory(points=((0, waypoints[0]),))
    coords = np.array([w.as_array() for w in waypoints])
    seg = np.linalg.norm(np.diff(coords, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    n_steps = int(math.floor(total / step + 1e-9))
    d = np.arange(n_steps + 1) * step
    xs = np.interp(d, cum, coords[:, 0])
    ys = np.interp(d, cum, coords[:, 1])
    zs = np.interp(d, cum, coords[:, 2])
    pts = tuple(
        (i, Position(float(x), float(y), float(z)))
        for i, (x, y, z) in enumerate(zip(xs, ys, zs))
    )
    return Trajectory(points=pts)


def _frame_rng(seed: int, t: int, ru: int, ant: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, t, ru, ant)))


def _ru_jitter(cfg: ScenarioConfig, t: int, ru: int) -> float:
    """Per-timestep timing jitter, shared by every antenna of the radio unit."""
    if cfg.frame_jitter_std == 0.0:
        return 0.0
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2, t, ru)))
    return float(rng.normal(0.0, cfg.frame_jitter_std))


def synth_cir(
    cfg: ScenarioConfig,
    ue: Position,
    antenna: AntennaId,
    t: int,
    rng: np.random.Generator,
) -> CirFrame:
    """Synthesize the CIR seen by one antenna from the transmitter at ``ue``.

    The direct-path delay is range over propagation speed, plus the antenna's
    radio-unit clock offset, plus that unit's per-timestep jitter.  Clock
    offsets and jitter are derived from ``cfg.seed`` (not from ``rng``) so
    that all antennas of a radio unit see identical timing error; ``rng``
    drives only the frame-local draws (outlier occurrence/offset and noise),
    letting callers parallelize over frames with per-frame generators.

    Draw order on ``rng``: one uniform for the outlier coin, then (only on an
    outlier) one uniform for its offset, then the noise block.
    """
    pos_a = cfg.geometry.antenna_position(antenna)
    offsets = cfg.resolve_clock_offsets()
    delay = (
        ue.distance_to(pos_a) / cfg.geometry.propagation_speed
        + float(offsets[antenna.ru_index])
        + _ru_jitter(cfg, t, antenna.ru_index)
    )
    if rng.uniform() < cfg.outlier_probability:
        lo, hi = cfg.outlier_offset_range
        delay += float(rng.uniform(lo, hi))

    nlos = next((r for r in cfg.nlos_regions if r.applies(ue, antenna)), None)

    centers = []
    gains = []
    half = cfg.n_fft // 2
    for path in cfg.multipath.paths:
        tap_delay = delay + path.delay
        gain = path.gain
        if path.direct and nlos is not None:
            tap_delay += nlos.extra_delay
            gain *= nlos.attenuation
        centers.append(half + tap_delay / cfg.sample_period)
        gains.append(gain)

    samples = np.zeros(cfg.n_fft, dtype=np.complex128)
    if cfg.quantization == "sample-grid":
        for c, g in zip(centers, gains):
            idx = int(np.rint(c))
            if not 0 <= idx < cfg.n_fft:
                raise DelayOutOfWindow(
                    f"tap at sample {idx} outside [0, {cfg.n_fft}) for antenna {antenna}"
                )
            samples[idx] += g
    else:
        for c in centers:
            if not 0.0 <= c < cfg.n_fft:
                raise DelayOutOfWindow(
                    f"tap at fractional sample {c:.3f} outside [0, {cfg.n_fft}) "
                    f"for antenna {antenna}"
                )
        samples += _kernels.dirichlet_cir(cfg.n_fft, centers, gains)

    if cfg.noise_floor > 0.0:
        scale = math.sqrt(cfg.noise_floor / 2.0)
        noise = rng.normal(0.0, scale, cfg.n_fft) + 1j * rng.normal(
            0.0, scale, cfg.n_fft
        )
        samples += noise

    return CirFrame(
        antenna=antenna,
        timestamp_index=t,
        samples=samples,
        sample_period=cfg.sample_period,
    )


def simulate(cfg: ScenarioConfig, traj: Trajectory) -> list[SimulatedFrame]:
    """Run the scenario over the trajectory: one frame per (antenna, timestep).

    Deterministic given ``cfg.seed``: every frame gets its own generator
    spawned from (seed, timestep, radio unit, antenna), so processing order
    cannot change the output and the loop may be parallelized over frames.
    """
    box = bounding_region(cfg.geometry)
    for t, pos in traj:
        if not (box.lo[0] <= pos.x <= box.hi[0] and box.lo[1] <= pos.y <= box.hi[1]):
            warnings.warn(
                f"trajectory point t={t} at ({pos.x:.1f}, {pos.y:.1f}) "
                "is outside the antenna footprint"
            )
            break

    out = []
    for t, pos in traj:
        for ru_idx in range(len(cfg.geometry.rus)):
            for ant_idx in range(len(cfg.geometry.rus[ru_idx].antennas)):
                aid = AntennaId(ru_idx, ant_idx)
                rng = _frame_rng(cfg.seed, t, ru_idx, ant_idx)
                frame = synth_cir(cfg, pos, aid, t, rng)
                nlos = any(r.applies(pos, aid) for r in cfg.nlos_regions)
                out.append(
                    SimulatedFrame(
                        timestamp_index=t,
                        antenna=aid,
                        frame=frame,
                        true_position=pos,
                        nlos=nlos,
                    )
                )
    return out

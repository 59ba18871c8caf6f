"""Arrival-time estimation from CIR peaks, and the statistical peak gate.

The arrival time of a frame is the sample index of its strongest tap times
the sample period.  Frames whose peak lands outside one standard deviation
of the fleet-wide peak distribution are treated as timing outliers and
dropped before any differencing happens.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .channel import CirFrame
from .geometry import AntennaId


class NoPeak(ValueError):
    """The frame contains no energy at all."""


class InsufficientData(ValueError):
    """Too few measurements to form a peak-delay distribution."""


@dataclass(frozen=True)
class ToaMeasurement:
    """Arrival time of one frame: strongest-tap index and its time equivalent."""

    antenna: AntennaId
    timestamp_index: int
    peak_index: int
    toa_seconds: float
    peak_magnitude: float

    def __post_init__(self):
        if self.peak_index < 0:
            raise ValueError("peak_index must be >= 0")
        if self.peak_magnitude < 0:
            raise ValueError("peak_magnitude must be >= 0")


@dataclass(frozen=True)
class PeakDelayStats:
    """Mean and population standard deviation of peak indices, in samples."""

    mean: float
    std: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("stats need at least 2 measurements")
        if self.std < 0:
            raise ValueError("std must be >= 0")


def estimate_toa(frame: CirFrame) -> ToaMeasurement:
    """Strongest-tap arrival time: argmax of |h[n]|, ties toward the lowest index."""
    mags = np.abs(frame.samples)
    if not mags.any():
        raise NoPeak(f"all-zero frame from antenna {frame.antenna}")
    peak = int(np.argmax(mags))
    return ToaMeasurement(
        antenna=frame.antenna,
        timestamp_index=frame.timestamp_index,
        peak_index=peak,
        toa_seconds=frame.sample_period * peak,
        peak_magnitude=float(mags[peak]),
    )


def peak_delay_stats(measurements: list[ToaMeasurement]) -> PeakDelayStats:
    """Pooled mean/std of peak indices over a calibration set (all antennas together)."""
    if len(measurements) < 2:
        raise InsufficientData(f"need >= 2 measurements, got {len(measurements)}")
    peaks = np.array([m.peak_index for m in measurements], dtype=float)
    return PeakDelayStats(
        mean=float(peaks.mean()), std=float(peaks.std()), count=len(peaks)
    )


def filter_toa(m: ToaMeasurement, stats: PeakDelayStats) -> bool:
    """True = retain: the peak lies within one std of the pooled mean (inclusive)."""
    return stats.mean - stats.std <= m.peak_index <= stats.mean + stats.std


def apply_toa_filter(
    measurements: list[ToaMeasurement], stats: PeakDelayStats
) -> tuple[list[ToaMeasurement], list[ToaMeasurement]]:
    """Split measurements into (retained, discarded) under filter_toa."""
    kept, dropped = [], []
    for m in measurements:
        (kept if filter_toa(m, stats) else dropped).append(m)
    return kept, dropped


class RollingPeakStats:
    """Streaming calibration window: stats over the last ``window`` peaks.

    push() returns the current stats, or None until two samples have been
    seen.  Single-writer; not thread-safe.
    """

    def __init__(self, window: int = 500):
        if window < 2:
            raise ValueError("window must be >= 2")
        self._buf: deque[int] = deque(maxlen=window)

    def push(self, m: ToaMeasurement) -> PeakDelayStats | None:
        self._buf.append(m.peak_index)
        if len(self._buf) < 2:
            return None
        peaks = np.array(self._buf, dtype=float)
        return PeakDelayStats(
            mean=float(peaks.mean()), std=float(peaks.std()), count=len(peaks)
        )

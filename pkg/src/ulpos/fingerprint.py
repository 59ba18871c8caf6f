"""CIR-magnitude fingerprint preprocessing and a nearest-neighbor baseline.

The learned-positioning front end consumes a fixed-size image assembled
from per-antenna CIR magnitudes: rows are antennas (grouped by radio unit,
peak-aligned within each unit), columns are the first C delay bins after
alignment.  Values are normalized by the training-set-wide peak and rows
whose peak is too weak (obstructed path) are zeroed out by a binary mask.

The kNN regressor at the bottom is a deterministic stand-in for a trained
model: good enough to validate the preprocessing chain end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.neighbors import KNeighborsRegressor

from .channel import CirFrame, SimulatedFrame
from .geometry import AntennaId
from .toa import NoPeak

DEFAULT_COLUMNS = 100
DEFAULT_MASK_THRESHOLD = 0.4


class EmptyTrainingSet(ValueError):
    pass


class ZeroMax(ValueError):
    """Training data is identically zero; no normalization factor exists."""


class EmptyModel(ValueError):
    """Predict called on an unfitted model."""


@dataclass(frozen=True)
class CirMagnitudeMatrix:
    """Antenna-row magnitude matrix plus the row bookkeeping."""

    values: np.ndarray
    antennas: tuple[AntennaId, ...]
    shift_applied: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != len(self.antennas):
            raise ValueError("one row per antenna required")
        if (v < 0).any():
            raise ValueError("magnitudes must be >= 0")
        object.__setattr__(self, "values", v)

    @property
    def ru_index(self) -> int:
        rus = {a.ru_index for a in self.antennas}
        if len(rus) != 1:
            raise ValueError("matrix spans multiple radio units")
        return next(iter(rus))


@dataclass(frozen=True)
class NormalizationFactor:
    """Training-set-wide peak magnitude, reused verbatim at test time."""

    alpha_norm: float
    source: str = ""

    def __post_init__(self):
        if not self.alpha_norm > 0:
            raise ZeroMax(f"normalization factor must be positive, got {self.alpha_norm}")


@dataclass(frozen=True)
class LosMask:
    """Per-row keep/zero decisions from the peak-power threshold."""

    mask: np.ndarray
    threshold: float

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=np.uint8)
        if not np.isin(m, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        object.__setattr__(self, "mask", m)

    @property
    def all_masked(self) -> bool:
        return not self.mask.any()


@dataclass(frozen=True)
class FingerprintSample:
    """One training/test example: input image and its 2D position label."""

    input: CirMagnitudeMatrix
    label: tuple[float, float]
    timestamp_index: int


def align_ru(cirs: list[CirFrame]) -> CirMagnitudeMatrix:
    """Magnitude rows for one radio unit at one timestep, peak-aligned.

    Every row is shifted left by the same offset (the earliest peak among
    the unit's antennas) with the tail zero-filled, so the earliest peak
    lands at column 0 and intra-unit peak spacing is untouched.
    """
    if not cirs:
        raise ValueError("no frames")
    rus = {f.antenna.ru_index for f in cirs}
    if len(rus) != 1:
        raise ValueError(f"frames span radio units {sorted(rus)}")
    ts = {f.timestamp_index for f in cirs}
    if len(ts) != 1:
        raise ValueError(f"frames span timestamps {sorted(ts)}")
    n = {f.n_fft for f in cirs}
    if len(n) != 1:
        raise ValueError("frames have differing lengths")

    frames = sorted(cirs, key=lambda f: f.antenna)
    mags = np.abs(np.stack([f.samples for f in frames]))
    if not mags.any(axis=1).all():
        dead = frames[int(np.flatnonzero(~mags.any(axis=1))[0])].antenna
        raise NoPeak(f"all-zero frame from antenna {dead}")
    peaks = mags.argmax(axis=1)
    eta = int(peaks.min())
    shifted = np.zeros_like(mags)
    width = mags.shape[1] - eta
    shifted[:, :width] = mags[:, eta:]
    return CirMagnitudeMatrix(
        values=shifted,
        antennas=tuple(f.antenna for f in frames),
        shift_applied=eta,
    )


def compute_norm_factor(
    training: list[CirMagnitudeMatrix], source: str = "training"
) -> NormalizationFactor:
    """Largest magnitude anywhere in the (aligned) training matrices."""
    if not training:
        raise EmptyTrainingSet("no training matrices")
    alpha = max(float(m.values.max()) for m in training)
    if alpha == 0.0:
        raise ZeroMax("training data is identically zero")
    return NormalizationFactor(alpha_norm=alpha, source=source)


def apply_mask(values: np.ndarray, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero rows whose peak is <= gamma; returns (masked values, row mask)."""
    peaks = values.max(axis=1)
    mask = (peaks > gamma).astype(np.uint8)
    return values * mask[:, None], mask


def build_input(
    per_ru: list[CirMagnitudeMatrix],
    alpha: NormalizationFactor,
    columns: int = DEFAULT_COLUMNS,
    gamma: float = DEFAULT_MASK_THRESHOLD,
) -> tuple[CirMagnitudeMatrix, LosMask]:
    """Assemble the model input image for one timestep.

    Concatenates the per-unit rows in (ru_index, antenna_index) order, keeps
    the first ``columns`` delay bins, normalizes by alpha, then zeroes rows
    whose normalized peak fails the threshold.  Values above 1 are passed
    through untouched (a test-time peak may exceed the training max).

    A fully masked image is legal; check ``LosMask.all_masked``.
    """
    if not per_ru:
        raise ValueError("no matrices")
    if columns < 1:
        raise ValueError("columns must be >= 1")
    ordered = sorted(per_ru, key=lambda m: m.ru_index)
    rows = np.concatenate([m.values for m in ordered], axis=0)
    antennas = tuple(a for m in ordered for a in m.antennas)
    if rows.shape[1] < columns:
        raise ValueError(f"matrices have {rows.shape[1]} columns, need >= {columns}")
    normalized = rows[:, :columns] / alpha.alpha_norm
    masked, mask = apply_mask(normalized, gamma)
    return (
        CirMagnitudeMatrix(values=masked, antennas=antennas),
        LosMask(mask=mask, threshold=gamma),
    )


def preprocess_timestamp(
    records: list[SimulatedFrame],
    alpha: NormalizationFactor,
    columns: int = DEFAULT_COLUMNS,
    gamma: float = DEFAULT_MASK_THRESHOLD,
) -> tuple[FingerprintSample, LosMask]:
    """Full chain for one timestep of simulator output."""
    ts = {r.timestamp_index for r in records}
    if len(ts) != 1:
        raise ValueError(f"records span timestamps {sorted(ts)}")
    by_ru: dict[int, list[CirFrame]] = {}
    for r in records:
        by_ru.setdefault(r.antenna.ru_index, []).append(r.frame)
    matrices = [align_ru(frames) for _, frames in sorted(by_ru.items())]
    image, mask = build_input(matrices, alpha, columns, gamma)
    truth = records[0].true_position
    return (
        FingerprintSample(
            input=image, label=(truth.x, truth.y), timestamp_index=ts.pop()
        ),
        mask,
    )


def aligned_matrices(records: list[SimulatedFrame]) -> list[CirMagnitudeMatrix]:
    """Per-(timestep, radio unit) aligned matrices, for norm-factor fitting."""
    grouped: dict[tuple[int, int], list[CirFrame]] = {}
    for r in records:
        grouped.setdefault((r.timestamp_index, r.antenna.ru_index), []).append(r.frame)
    return [align_ru(frames) for _, frames in sorted(grouped.items())]


def build_dataset(
    records: list[SimulatedFrame],
    columns: int = DEFAULT_COLUMNS,
    gamma: float = DEFAULT_MASK_THRESHOLD,
    alpha: NormalizationFactor | None = None,
) -> tuple[list[FingerprintSample], list[LosMask], NormalizationFactor]:
    """Preprocess a whole simulator run.

    With ``alpha=None`` the normalization factor is fitted from these
    records (training mode); pass a stored factor for test mode.
    """
    if alpha is None:
        alpha = compute_norm_factor(aligned_matrices(records))
    by_t: dict[int, list[SimulatedFrame]] = {}
    for r in records:
        by_t.setdefault(r.timestamp_index, []).append(r)
    samples, masks = [], []
    for t in sorted(by_t):
        sample, mask = preprocess_timestamp(by_t[t], alpha, columns, gamma)
        samples.append(sample)
        masks.append(mask)
    return samples, masks, alpha


class KnnModel:
    """Inverse-distance-weighted k-nearest-neighbor position regressor."""

    def __init__(self, regressor: KNeighborsRegressor, input_shape: tuple[int, int]):
        self._regressor = regressor
        self.input_shape = input_shape


def knn_fit(samples: list[FingerprintSample], k: int = 5) -> KnnModel:
    """Fit the baseline on flattened fingerprint images."""
    if not samples:
        raise EmptyModel("no training samples")
    if len(samples) < k:
        raise ValueError(f"need >= k={k} samples, got {len(samples)}")
    x = np.stack([s.input.values.ravel() for s in samples])
    y = np.array([s.label for s in samples])
    # ball_tree computes true pairwise distances, so an exact-match query has
    # distance exactly 0 and gets the stored label back verbatim (the brute
    # path's dot-product expansion leaves ~1e-7 residues there)
    reg = KNeighborsRegressor(n_neighbors=k, weights="distance", algorithm="ball_tree")
    reg.fit(x, y)
    return KnnModel(reg, input_shape=samples[0].input.values.shape)


def knn_predict(model: KnnModel, image: CirMagnitudeMatrix) -> tuple[float, float]:
    """Predict the (x, y) label for one preprocessed image."""
    if not isinstance(model, KnnModel):
        raise EmptyModel("not a fitted model")
    if image.values.shape != model.input_shape:
        raise ValueError(
            f"input shape {image.values.shape} != trained {model.input_shape}"
        )
    pred = model._regressor.predict(image.values.ravel()[None, :])
    return float(pred[0, 0]), float(pred[0, 1])

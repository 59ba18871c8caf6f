"""Time-difference-of-arrival formation and geometric feasibility gating.

Differences are taken against a reference antenna, either per radio unit
(cancelling that unit's clock error) or against one common antenna for the
whole deployment.  Each observation carries the geometric bound

    |value| <= ||x_antenna - x_reference|| / propagation_speed

which any physical difference must satisfy; measurements outside the bound
(plus an optional quantization slack) are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import AntennaId, DeploymentGeometry
from .toa import ToaMeasurement


class SameAntenna(ValueError):
    """Antenna differenced against itself."""


class MissingReference(ValueError):
    """A radio unit contributed measurements but its reference ToA is absent."""


@dataclass(frozen=True)
class TdoaObservation:
    """One arrival-time difference, seconds, with its geometric bound."""

    antenna: AntennaId
    reference: AntennaId
    timestamp_index: int
    value: float
    bound: float

    def __post_init__(self):
        if self.antenna == self.reference:
            raise SameAntenna(f"observation differences {self.antenna} against itself")
        if self.bound < 0:
            raise ValueError("bound must be >= 0")


@dataclass(frozen=True)
class TdoaSet:
    """All observations of one timestamp under one reference policy."""

    timestamp_index: int
    observations: tuple[TdoaObservation, ...]
    reference_policy: str  # "per-ru" or "common"

    def __post_init__(self):
        if self.reference_policy not in ("per-ru", "common"):
            raise ValueError(f"unknown reference policy {self.reference_policy!r}")
        if any(o.timestamp_index != self.timestamp_index for o in self.observations):
            raise ValueError("observation timestamps disagree with the set")

    def __len__(self) -> int:
        return len(self.observations)


@dataclass(frozen=True)
class Rejection:
    """An observation dropped by the bound filter, with the reason."""

    observation: TdoaObservation
    reason: str


def tdoa_bound(a: AntennaId, ref: AntennaId, g: DeploymentGeometry) -> float:
    """Largest physically possible |TDoA| between two antennas, seconds."""
    if a == ref:
        raise SameAntenna(f"{a} differenced against itself")
    dist = g.antenna_position(a).distance_to(g.antenna_position(ref))
    return dist / g.propagation_speed


def compute_tdoa(
    toas: list[ToaMeasurement],
    g: DeploymentGeometry,
    policy: str = "per-ru",
    common_reference: AntennaId | None = None,
    on_missing_reference: str = "raise",
) -> TdoaSet:
    """Difference one timestamp's ToAs against reference antennas.

    policy "per-ru": each radio unit's measurements are differenced against
    that unit's configured reference antenna; a unit whose reference ToA is
    missing raises MissingReference, or is silently skipped when
    ``on_missing_reference="skip"`` (its other measurements are dropped).

    policy "common": everything is differenced against ``common_reference``
    (default: reference antenna of radio unit 0).
    """
    if policy not in ("per-ru", "common"):
        raise ValueError(f"unknown reference policy {policy!r}")
    if on_missing_reference not in ("raise", "skip"):
        raise ValueError(f"unknown on_missing_reference {on_missing_reference!r}")
    if not toas:
        raise ValueError("no measurements")
    ts = {m.timestamp_index for m in toas}
    if len(ts) != 1:
        raise ValueError(f"measurements span timestamps {sorted(ts)}")
    t = ts.pop()
    by_antenna = {m.antenna: m for m in toas}
    if len(by_antenna) != len(toas):
        raise ValueError("duplicate antenna in measurements")

    obs = []
    if policy == "per-ru":
        by_ru: dict[int, list[ToaMeasurement]] = {}
        for m in toas:
            by_ru.setdefault(m.antenna.ru_index, []).append(m)
        for ru_idx in sorted(by_ru):
            ref_id = g.reference_antenna(ru_idx)
            ref = by_antenna.get(ref_id)
            if ref is None:
                if on_missing_reference == "skip":
                    continue
                raise MissingReference(
                    f"radio unit {ru_idx} has measurements but no ToA "
                    f"for its reference {ref_id}"
                )
            for m in sorted(by_ru[ru_idx], key=lambda m: m.antenna):
                if m.antenna == ref_id:
                    continue
                obs.append(
                    TdoaObservation(
                        antenna=m.antenna,
                        reference=ref_id,
                        timestamp_index=t,
                        value=m.toa_seconds - ref.toa_seconds,
                        bound=tdoa_bound(m.antenna, ref_id, g),
                    )
                )
    else:
        ref_id = common_reference if common_reference is not None else g.reference_antenna(0)
        ref = by_antenna.get(ref_id)
        if ref is None:
            if on_missing_reference == "skip":
                return TdoaSet(timestamp_index=t, observations=(), reference_policy="common")
            raise MissingReference(f"common reference {ref_id} has no ToA")
        for m in sorted(toas, key=lambda m: m.antenna):
            if m.antenna == ref_id:
                continue
            obs.append(
                TdoaObservation(
                    antenna=m.antenna,
                    reference=ref_id,
                    timestamp_index=t,
                    value=m.toa_seconds - ref.toa_seconds,
                    bound=tdoa_bound(m.antenna, ref_id, g),
                )
            )
    return TdoaSet(timestamp_index=t, observations=tuple(obs), reference_policy=policy)


def filter_tdoa(
    tdoa_set: TdoaSet, slack: float = 0.0
) -> tuple[TdoaSet, list[Rejection]]:
    """Keep observations with |value| <= bound + slack (inclusive).

    ``slack`` absorbs quantization: a sample-grid ToA can exceed the
    continuous-time bound by up to one sample period, so pipelines pass the
    frame's sample period here.  The default 0.0 applies the bare bound.
    """
    if slack < 0:
        raise ValueError("slack must be >= 0")
    kept, rejected = [], []
    for o in tdoa_set.observations:
        if abs(o.value) <= o.bound + slack:
            kept.append(o)
        else:
            rejected.append(
                Rejection(
                    observation=o,
                    reason=(
                        f"|{o.value:.3e}| s exceeds bound {o.bound:.3e} s"
                        + (f" + slack {slack:.3e} s" if slack else "")
                    ),
                )
            )
    return (
        TdoaSet(
            timestamp_index=tdoa_set.timestamp_index,
            observations=tuple(kept),
            reference_policy=tdoa_set.reference_policy,
        ),
        rejected,
    )

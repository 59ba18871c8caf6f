"""Scene builders shared by solver, acceptance, and pipeline tests."""

import numpy as np

from ulpos.geometry import (
    AntennaId,
    BoundingBox,
    DeploymentGeometry,
    Position,
    RadioUnit,
)
from ulpos.solver import expected_tdoa
from ulpos.tdoa import TdoaObservation, TdoaSet, tdoa_bound

# Test hall: 50 m x 10 m floor, solve height 1.5 m, antennas at 2.2 m.
HALL_BOUNDS = BoundingBox(np.array([0.0, 0.0, 0.0]), np.array([50.0, 10.0, 3.0]))
ANTENNA_Z = 2.2
UE_Z = 1.5


def hall_geometry() -> DeploymentGeometry:
    """2 radio units x 4 antennas along opposite long walls, staggered in x."""
    north = RadioUnit(
        antennas=tuple(Position(x, 10.0, ANTENNA_Z) for x in (2.0, 18.0, 33.0, 48.0))
    )
    south = RadioUnit(
        antennas=tuple(Position(x, 0.0, ANTENNA_Z) for x in (7.0, 24.0, 41.0, 49.0))
    )
    return DeploymentGeometry(rus=(north, south))


def collinear_geometry(n_antennas=4) -> DeploymentGeometry:
    """One wall only: antennas on a single line (degenerate cross-axis geometry)."""
    xs = np.linspace(2.0, 48.0, n_antennas)
    half = n_antennas // 2
    return DeploymentGeometry(
        rus=(
            RadioUnit(antennas=tuple(Position(x, 0.0, ANTENNA_Z) for x in xs[:half])),
            RadioUnit(antennas=tuple(Position(x, 0.0, ANTENNA_Z) for x in xs[half:])),
        )
    )


def random_truth(rng, margin=2.0) -> Position:
    """Uniform ground-truth position inside the hall, away from the walls."""
    x = rng.uniform(HALL_BOUNDS.lo[0] + margin, HALL_BOUNDS.hi[0] - margin)
    y = rng.uniform(HALL_BOUNDS.lo[1] + margin, HALL_BOUNDS.hi[1] - margin)
    return Position(float(x), float(y), UE_Z)


def ideal_tdoa_set(
    g: DeploymentGeometry, ue: Position, policy: str = "per-ru", t: int = 0
) -> TdoaSet:
    """Noise-free continuous-time observations straight from the geometry.

    Bypasses CIR synthesis and peak picking entirely: each value is the exact
    range-difference delay the position implies.  This isolates solver-side
    behavior from measurement quantization.
    """
    obs = []
    if policy == "per-ru":
        pairs = [
            (aid, g.reference_antenna(aid.ru_index))
            for aid in g.antenna_ids()
            if aid != g.reference_antenna(aid.ru_index)
        ]
    else:
        ref = g.reference_antenna(0)
        pairs = [(aid, ref) for aid in g.antenna_ids() if aid != ref]
    for aid, ref in pairs:
        probe = TdoaObservation(
            antenna=aid,
            reference=ref,
            timestamp_index=t,
            value=0.0,
            bound=tdoa_bound(aid, ref, g),
        )
        obs.append(
            TdoaObservation(
                antenna=aid,
                reference=ref,
                timestamp_index=t,
                value=expected_tdoa(ue, probe, g),
                bound=probe.bound,
            )
        )
    return TdoaSet(timestamp_index=t, observations=tuple(obs), reference_policy=policy)

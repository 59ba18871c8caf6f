"""Position estimation from TDoA observations.

The measurement model: a candidate position u implies, for each observation
(antenna a, reference r), an expected arrival-time difference

    (||u - x_a|| - ||u - x_r||) / propagation_speed

and the solver minimizes the sum of squared residuals between measured and
expected differences.  Minimization is particle-swarm search constrained to
an axis-aligned box at a fixed solve height; a brute-force grid search over
the same box serves as an independent oracle for testing.  A moving-average
smoother stabilizes per-timestamp estimates along a trajectory.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import BoundingBox, DeploymentGeometry, Position
from .tdoa import TdoaObservation, TdoaSet


class Unsolvable(ValueError):
    """Too few observations to fix a 2D position."""


class EmptyObservations(ValueError):
    """Loss requested over an empty observation set."""


class NonFiniteLoss(ArithmeticError):
    """Loss evaluation produced NaN or infinity."""


@dataclass(frozen=True)
class PsoConfig:
    """Swarm search settings; defaults follow the reference tuning."""

    bounds: BoundingBox
    particles: int = 200
    iterations: int = 100
    inertia: float = 0.9
    cognitive: float = 0.5
    social: float = 0.9
    fixed_z: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("need at least one particle")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 < self.inertia <= 1.0:
            raise ValueError("inertia must be in (0, 1]")
        if self.cognitive < 0 or self.social < 0:
            raise ValueError("acceleration coefficients must be >= 0")
        widths = self.bounds.hi - self.bounds.lo
        if widths[0] <= 0 or widths[1] <= 0:
            raise ValueError("bounds must have positive x and y extent")


@dataclass(frozen=True)
class PositionEstimate:
    position: Position
    loss: float
    timestamp_index: int
    n_observations_used: int
    converged: bool

    def __post_init__(self):
        if self.loss < 0:
            raise ValueError("loss must be >= 0")


def expected_tdoa(
    candidate: Position, obs: TdoaObservation, g: DeploymentGeometry
) -> float:
    """Arrival-time difference the candidate position would produce, seconds."""
    da = candidate.distance_to(g.antenna_position(obs.antenna))
    dr = candidate.distance_to(g.antenna_position(obs.reference))
    return (da - dr) / g.propagation_speed


def _observation_arrays(tdoa_set: TdoaSet, g: DeploymentGeometry):
    """Flatten set + geometry into the arrays the loss kernel consumes."""
    ids = g.antenna_ids()
    row = {aid: i for i, aid in enumerate(ids)}
    antennas = g.antenna_array()
    a_idx = np.array([row[o.antenna] for o in tdoa_set.observations], dtype=np.intp)
    r_idx = np.array([row[o.reference] for o in tdoa_set.observations], dtype=np.intp)
    measured = np.array([o.value for o in tdoa_set.observations])
    return antennas, a_idx, r_idx, measured


def loss(candidate: Position, tdoa_set: TdoaSet, g: DeploymentGeometry) -> float:
    """Sum of squared measured-minus-expected residuals, seconds squared."""
    if not tdoa_set.observations:
        raise EmptyObservations("loss over an empty observation set")
    antennas, a_idx, r_idx, measured = _observation_arrays(tdoa_set, g)
    out = _kernels.tdoa_loss_points(
        candidate.as_array()[None, :],
        antennas,
        a_idx,
        r_idx,
        measured,
        1.0 / g.propagation_speed,
    )
    value = float(out[0])
    if not np.isfinite(value):
        raise NonFiniteLoss(f"loss at {candidate} is {value}")
    return value


def pso_estimate(
    tdoa_set: TdoaSet, g: DeploymentGeometry, cfg: PsoConfig
) -> PositionEstimate:
    """Particle-swarm minimization of the TDoA loss inside the configured box.

    Particles start uniformly distributed in the box at the solve height
    with zero velocity.  Each iteration draws one cognitive and one social
    uniform per particle (scalars, applied to both axes), updates velocity
    with the inertia/cognitive/social rule, clamps velocity per axis to the
    box width, steps, and clamps positions back onto the box, zeroing the
    velocity component on any violated axis.  Deterministic given cfg.seed.
    """
    n_obs = len(tdoa_set.observations)
    if n_obs < 3:
        raise Unsolvable(f"{n_obs} observations; need >= 3 for a 2D fix")
    antennas, a_idx, r_idx, measured = _observation_arrays(tdoa_set, g)
    inv_speed = 1.0 / g.propagation_speed

    lo = cfg.bounds.lo[:2]
    hi = cfg.bounds.hi[:2]
    vmax = hi - lo
    rng = np.random.default_rng(cfg.seed)
    pos = rng.uniform(lo, hi, size=(cfg.particles, 2))
    vel = np.zeros_like(pos)

    def evaluate(p2d):
        pts = np.column_stack([p2d, np.full(p2d.shape[0], cfg.fixed_z)])
        out = _kernels.tdoa_loss_points(
            pts, antennas, a_idx, r_idx, measured, inv_speed
        )
        if not np.isfinite(out).all():
            raise NonFiniteLoss("non-finite loss during swarm evaluation")
        return out

    fitness = evaluate(pos)
    pbest = pos.copy()
    pbest_loss = fitness.copy()
    g_idx = int(np.argmin(pbest_loss))
    gbest = pbest[g_idx].copy()
    gbest_loss = float(pbest_loss[g_idx])

    history = [gbest_loss]
    for _ in range(cfg.iterations):
        r1 = rng.uniform(size=cfg.particles)[:, None]
        r2 = rng.uniform(size=cfg.particles)[:, None]
        vel = (
            cfg.inertia * vel
            + cfg.cognitive * r1 * (pbest - pos)
            + cfg.social * r2 * (gbest[None, :] - pos)
        )
        np.clip(vel, -vmax, vmax, out=vel)
        pos = pos + vel
        for axis in (0, 1):
            low_hit = pos[:, axis] < lo[axis]
            high_hit = pos[:, axis] > hi[axis]
            pos[low_hit, axis] = lo[axis]
            pos[high_hit, axis] = hi[axis]
            vel[low_hit | high_hit, axis] = 0.0

        fitness = evaluate(pos)
        improved = fitness < pbest_loss
        pbest[improved] = pos[improved]
        pbest_loss[improved] = fitness[improved]
        g_idx = int(np.argmin(pbest_loss))
        if float(pbest_loss[g_idx]) < gbest_loss:
            gbest = pbest[g_idx].copy()
            gbest_loss = float(pbest_loss[g_idx])
        assert gbest_loss <= history[-1], "global best must never regress"
        history.append(gbest_loss)

    tail = max(1, cfg.iterations // 4)
    converged = (
        cfg.iterations > 0
        and history[-tail - 1] - history[-1] <= 1e-9 * max(history[-1], 1e-30)
    )
    return PositionEstimate(
        position=Position(float(gbest[0]), float(gbest[1]), cfg.fixed_z),
        loss=gbest_loss,
        timestamp_index=tdoa_set.timestamp_index,
        n_observations_used=n_obs,
        converged=converged,
    )


def grid_oracle(
    tdoa_set: TdoaSet,
    g: DeploymentGeometry,
    resolution: float,
    bounds: BoundingBox,
    fixed_z: float = 1.5,
) -> PositionEstimate:
    """Exhaustive loss minimization on a regular x-y grid over the box.

    Grid nodes run from the lower corner in ``resolution`` steps; the best
    node wins, ties broken toward the smallest x, then smallest y.  Meant as
    a slow, assumption-free check on the swarm solver.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if not tdoa_set.observations:
        raise EmptyObservations("grid search over an empty observation set")
    antennas, a_idx, r_idx, measured = _observation_arrays(tdoa_set, g)
    inv_speed = 1.0 / g.propagation_speed

    lo = bounds.lo[:2]
    hi = bounds.hi[:2]
    nx = int(np.floor((hi[0] - lo[0]) / resolution)) + 1
    ny = int(np.floor((hi[1] - lo[1]) / resolution)) + 1
    xs = lo[0] + np.arange(nx) * resolution
    ys = lo[1] + np.arange(ny) * resolution

    best_loss = np.inf
    best_xy = (xs[0], ys[0])
    chunk_rows = max(1, (1 << 18) // ny)
    for x0 in range(0, nx, chunk_rows):
        xb = xs[x0 : x0 + chunk_rows]
        gx, gy = np.meshgrid(xb, ys, indexing="ij")  # x varies slowest
        pts = np.column_stack(
            [gx.ravel(), gy.ravel(), np.full(gx.size, fixed_z)]
        )
        out = _kernels.tdoa_loss_points(
            pts, antennas, a_idx, r_idx, measured, inv_speed
        )
        idx = int(np.argmin(out))
        if out[idx] < best_loss:  # strict: earlier (smaller x, y) wins ties
            best_loss = float(out[idx])
            best_xy = (float(pts[idx, 0]), float(pts[idx, 1]))
    if not np.isfinite(best_loss):
        raise NonFiniteLoss("non-finite loss during grid search")
    return PositionEstimate(
        position=Position(best_xy[0], best_xy[1], fixed_z),
        loss=best_loss,
        timestamp_index=tdoa_set.timestamp_index,
        n_observations_used=len(tdoa_set.observations),
        converged=True,
    )


class SmootherState:
    """Moving-average window over recent position estimates.

    Single-owner, sequential: push estimates in timestamp order.  Dropped
    timestamps should simply not be pushed; the window then spans the
    surviving estimates.
    """

    def __init__(self, window: int = 5):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._buf: deque[Position] = deque(maxlen=window)

    def __len__(self) -> int:
        return len(self._buf)


def smooth(state: SmootherState, new: PositionEstimate) -> Position:
    """Push an estimate and return the mean of the last ``window`` positions."""
    state._buf.append(new.position)
    arr = np.array([p.as_array() for p in state._buf])
    m = arr.mean(axis=0)
    return Position(float(m[0]), float(m[1]), float(m[2]))

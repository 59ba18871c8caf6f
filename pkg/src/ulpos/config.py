"""YAML run configuration -> validated runtime objects.

One file describes a whole run: deployment name, antenna geometry, channel
scenario, trajectory, solver tuning, smoother window, and (optionally) a
broker address.  See configs/hall.yaml for a commented example; the schema
is documented in the README.

YAML syntax errors are reported with their line and column.  Semantic
errors name the offending key path (e.g. "geometry.radio_units[1].antennas").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .channel import (
    MultipathProfile,
    NlosRegion,
    PropagationPath,
    ScenarioConfig,
    Trajectory,
    make_trajectory,
)
from .geometry import (
    BoundingBox,
    DeploymentGeometry,
    Position,
    RadioUnit,
    bounding_region,
)
from .solver import PsoConfig


class ConfigError(ValueError):
    """Configuration file is syntactically or semantically invalid."""


@dataclass(frozen=True)
class SolverSettings:
    """PSO tuning from the config file, before bounds are attached."""

    particles: int = 200
    iterations: int = 100
    inertia: float = 0.9
    cognitive: float = 0.5
    social: float = 0.9
    fixed_z: float = 1.5
    seed: int = 0
    margin: float = 2.0

    def to_pso_config(self, bounds: BoundingBox) -> PsoConfig:
        return PsoConfig(
            bounds=bounds,
            particles=self.particles,
            iterations=self.iterations,
            inertia=self.inertia,
            cognitive=self.cognitive,
            social=self.social,
            fixed_z=self.fixed_z,
            seed=self.seed,
        )


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI command needs, parsed and validated."""

    deployment: str
    geometry: DeploymentGeometry
    scenario: ScenarioConfig
    trajectory: Trajectory
    solver: SolverSettings = field(default_factory=SolverSettings)
    smoother_window: int = 1
    broker: str | None = None

    def solver_bounds(self) -> BoundingBox:
        return bounding_region(self.geometry, margin=self.solver.margin)

    def pso_config(self) -> PsoConfig:
        return self.solver.to_pso_config(self.solver_bounds())


def _fail(path: str, why: str):
    raise ConfigError(f"{path}: {why}")


def _get(mapping, key, path, required=False, default=None):
    if not isinstance(mapping, dict):
        _fail(path, f"expected a mapping, got {type(mapping).__name__}")
    if key not in mapping:
        if required:
            _fail(path, f"missing required key '{key}'")
        return default
    return mapping[key]


def _number(value, path) -> float:
    # YAML 1.1 reads "3.0e8" (no exponent sign) as a string; accept it anyway
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            _fail(path, f"expected a number, got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, path) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    return value


def _position(value, path) -> Position:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        _fail(path, f"expected [x, y, z], got {value!r}")
    x, y, z = (_number(v, f"{path}[{i}]") for i, v in enumerate(value))
    return Position(x, y, z)


def _geometry(node, path) -> DeploymentGeometry:
    units = _get(node, "radio_units", path, required=True)
    if not isinstance(units, list) or not units:
        _fail(f"{path}.radio_units", "expected a non-empty list")
    rus = []
    for i, u in enumerate(units):
        upath = f"{path}.radio_units[{i}]"
        ants = _get(u, "antennas", upath, required=True)
        if not isinstance(ants, list) or len(ants) < 2:
            _fail(f"{upath}.antennas", "expected a list of >= 2 positions")
        positions = tuple(
            _position(a, f"{upath}.antennas[{j}]") for j, a in enumerate(ants)
        )
        ref = _get(u, "reference", upath, default=0)
        try:
            rus.append(
                RadioUnit(antennas=positions, reference_index=_integer(ref, f"{upath}.reference"))
            )
        except ConfigError:
            raise
        except ValueError as exc:
            _fail(upath, str(exc))
    speed = _get(node, "propagation_speed", path)
    try:
        if speed is None:
            return DeploymentGeometry(rus=tuple(rus))
        return DeploymentGeometry(
            rus=tuple(rus), propagation_speed=_number(speed, f"{path}.propagation_speed")
        )
    except ConfigError:
        raise
    except ValueError as exc:
        _fail(path, str(exc))


def _multipath(node, path) -> MultipathProfile:
    if not isinstance(node, list) or not node:
        _fail(path, "expected a non-empty list of taps")
    paths = []
    for i, tap in enumerate(node):
        tpath = f"{path}[{i}]"
        delay = _number(_get(tap, "delay", tpath, required=True), f"{tpath}.delay")
        gain = _get(tap, "gain", tpath, default=1.0)
        if isinstance(gain, (list, tuple)):
            if len(gain) != 2:
                _fail(f"{tpath}.gain", "complex gain is [re, im]")
            g = complex(_number(gain[0], f"{tpath}.gain[0]"), _number(gain[1], f"{tpath}.gain[1]"))
        else:
            g = complex(_number(gain, f"{tpath}.gain"), 0.0)
        direct = bool(_get(tap, "direct", tpath, default=False))
        paths.append(PropagationPath(delay=delay, gain=g, direct=direct))
    try:
        return MultipathProfile(paths=tuple(paths))
    except ConfigError:
        raise
    except ValueError as exc:
        _fail(path, str(exc))


def _nlos(node, path) -> tuple[NlosRegion, ...]:
    if not isinstance(node, list):
        _fail(path, "expected a list of regions")
    out = []
    for i, reg in enumerate(node):
        rpath = f"{path}[{i}]"
        box = _get(reg, "box", rpath, required=True)
        if not isinstance(box, list) or len(box) != 2:
            _fail(f"{rpath}.box", "expected [[x0, y0], [x1, y1]]")
        lo, hi = box
        if not (isinstance(lo, list) and isinstance(hi, list) and len(lo) == 2 and len(hi) == 2):
            _fail(f"{rpath}.box", "expected [[x0, y0], [x1, y1]]")
        corners = [_number(v, f"{rpath}.box") for v in (*lo, *hi)]
        antennas = _get(reg, "antennas", rpath)
        ant_ids = None
        if antennas is not None:
            from .geometry import AntennaId

            if not isinstance(antennas, list):
                _fail(f"{rpath}.antennas", "expected a list of [ru, antenna] pairs")
            ant_ids = tuple(
                AntennaId(
                    _integer(a[0], f"{rpath}.antennas[{j}]"),
                    _integer(a[1], f"{rpath}.antennas[{j}]"),
                )
                for j, a in enumerate(antennas)
            )
        try:
            out.append(
                NlosRegion(
                    region=BoundingBox(
                        [corners[0], corners[1], -1e9], [corners[2], corners[3], 1e9]
                    ),
                    attenuation=_number(
                        _get(reg, "attenuation", rpath, required=True), f"{rpath}.attenuation"
                    ),
                    extra_delay=_number(
                        _get(reg, "extra_delay", rpath, default=0.0), f"{rpath}.extra_delay"
                    ),
                    antennas=ant_ids,
                )
            )
        except ConfigError:
            raise
        except ValueError as exc:
            _fail(rpath, str(exc))
    return tuple(out)


def _scenario(node, path, geometry) -> ScenarioConfig:
    kwargs = {}
    if node is None:
        node = {}
    for key, conv in (
        ("n_fft", _integer),
        ("sample_period", _number),
        ("ru_clock_offset_std", _number),
        ("frame_jitter_std", _number),
        ("outlier_probability", _number),
        ("noise_floor", _number),
        ("seed", _integer),
    ):
        v = _get(node, key, path)
        if v is not None:
            kwargs[key] = conv(v, f"{path}.{key}")
    quant = _get(node, "quantization", path)
    if quant is not None:
        kwargs["quantization"] = quant
    offsets = _get(node, "ru_clock_offsets", path)
    if offsets is not None:
        if not isinstance(offsets, list):
            _fail(f"{path}.ru_clock_offsets", "expected a list of seconds per radio unit")
        kwargs["ru_clock_offsets"] = tuple(
            _number(v, f"{path}.ru_clock_offsets[{i}]") for i, v in enumerate(offsets)
        )
    rng = _get(node, "outlier_offset_range", path)
    if rng is not None:
        if not isinstance(rng, list) or len(rng) != 2:
            _fail(f"{path}.outlier_offset_range", "expected [low, high] in seconds")
        kwargs["outlier_offset_range"] = (
            _number(rng[0], f"{path}.outlier_offset_range[0]"),
            _number(rng[1], f"{path}.outlier_offset_range[1]"),
        )
    mp = _get(node, "multipath", path)
    if mp is not None:
        kwargs["multipath"] = _multipath(mp, f"{path}.multipath")
    nl = _get(node, "nlos_regions", path)
    if nl is not None:
        kwargs["nlos_regions"] = _nlos(nl, f"{path}.nlos_regions")
    try:
        return ScenarioConfig(geometry=geometry, **kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        _fail(path, str(exc))


def _trajectory(node, path) -> Trajectory:
    if node is None:
        _fail(path, "missing trajectory section")
    waypoints = _get(node, "waypoints", path)
    static = _get(node, "static", path)
    if (waypoints is None) == (static is None):
        _fail(path, "give exactly one of 'waypoints' or 'static'")
    if waypoints is not None:
        if not isinstance(waypoints, list) or len(waypoints) < 2:
            _fail(f"{path}.waypoints", "expected >= 2 positions")
        step = _number(_get(node, "step", path, required=True), f"{path}.step")
        if step <= 0:
            _fail(f"{path}.step", "step must be positive")
        points = [
            _position(w, f"{path}.waypoints[{i}]") for i, w in enumerate(waypoints)
        ]
        return make_trajectory(points, step=step)
    count = _integer(_get(node, "count", path, required=True), f"{path}.count")
    if count < 1:
        _fail(f"{path}.count", "count must be >= 1")
    pos = _position(static, f"{path}.static")
    return Trajectory(points=tuple((t, pos) for t in range(count)))


def _solver(node, path) -> SolverSettings:
    if node is None:
        return SolverSettings()
    kwargs = {}
    fields = {
        "particles": _integer,
        "iterations": _integer,
        "inertia": _number,
        "cognitive": _number,
        "social": _number,
        "fixed_z": _number,
        "seed": _integer,
        "margin": _number,
    }
    for key, conv in fields.items():
        v = _get(node, key, path)
        if v is not None:
            kwargs[key] = conv(v, f"{path}.{key}")
    unknown = set(node) - set(fields)
    if unknown:
        _fail(path, f"unknown keys {sorted(unknown)}")
    return SolverSettings(**kwargs)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a YAML document into a RunConfig."""
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{source}: {where}: {exc.problem or exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a mapping")

    deployment = _get(doc, "deployment", "top level", default="default")
    if not isinstance(deployment, str) or not deployment:
        _fail("deployment", "expected a non-empty string")
    geometry = _geometry(_get(doc, "geometry", "top level", required=True), "geometry")
    scenario = _scenario(_get(doc, "scenario", "top level"), "scenario", geometry)
    trajectory = _trajectory(_get(doc, "trajectory", "top level", required=True), "trajectory")
    solver = _solver(_get(doc, "solver", "top level"), "solver")

    smoother = _get(doc, "smoother", "top level")
    window = 1
    if smoother is not None:
        window = _integer(_get(smoother, "window", "smoother", default=1), "smoother.window")
        if window < 1:
            _fail("smoother.window", "window must be >= 1")

    broker = None
    stream = _get(doc, "stream", "top level")
    if stream is not None:
        broker = _get(stream, "broker", "stream")
        if broker is not None and not isinstance(broker, str):
            _fail("stream.broker", "expected a string address")

    known = {"deployment", "geometry", "scenario", "trajectory", "solver", "smoother", "stream"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"{source}: unknown top-level keys {sorted(unknown)}")

    return RunConfig(
        deployment=deployment,
        geometry=geometry,
        scenario=scenario,
        trajectory=trajectory,
        solver=solver,
        smoother_window=window,
        broker=broker,
    )


def load_config(path) -> RunConfig:
    """Read and parse a config file; ConfigError names the file."""
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, source=str(path))

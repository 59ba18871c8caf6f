import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ulpos.channel import DEFAULT_SAMPLE_PERIOD, ScenarioConfig, Trajectory, simulate
from ulpos.geometry import AntennaId, DeploymentGeometry, Position, RadioUnit
from ulpos.tdoa import (
    MissingReference,
    SameAntenna,
    TdoaObservation,
    TdoaSet,
    compute_tdoa,
    filter_tdoa,
    tdoa_bound,
)
from ulpos.toa import ToaMeasurement, estimate_toa

T_S = DEFAULT_SAMPLE_PERIOD


def two_by_two_geometry():
    return DeploymentGeometry(
        rus=(
            RadioUnit(antennas=(Position(0, 0, 2.2), Position(3, 0, 2.2))),
            RadioUnit(antennas=(Position(40, 0, 2.2), Position(40, 3, 2.2))),
        )
    )


def toa(ru, ant, seconds, t=0):
    return ToaMeasurement(
        antenna=AntennaId(ru, ant),
        timestamp_index=t,
        peak_index=int(round(seconds / T_S)),
        toa_seconds=seconds,
        peak_magnitude=1.0,
    )


class TestBound:
    def test_three_meters_is_ten_nanoseconds(self):
        g = two_by_two_geometry()
        assert tdoa_bound(AntennaId(0, 1), AntennaId(0, 0), g) == pytest.approx(1.0e-8)

    def test_coincident_antennas_bound_zero(self):
        g = DeploymentGeometry(
            rus=(
                RadioUnit(antennas=(Position(0, 0, 2.2), Position(0, 0, 2.2))),
                RadioUnit(antennas=(Position(10, 0, 2.2), Position(10, 3, 2.2))),
            )
        )
        assert tdoa_bound(AntennaId(0, 1), AntennaId(0, 0), g) == 0.0

    def test_same_antenna_rejected(self):
        g = two_by_two_geometry()
        with pytest.raises(SameAntenna):
            tdoa_bound(AntennaId(0, 0), AntennaId(0, 0), g)


class TestComputeTdoa:
    def test_per_ru_observation_count(self):
        g = two_by_two_geometry()
        toas = [toa(0, 0, 1e-5), toa(0, 1, 1.1e-5), toa(1, 0, 1.2e-5), toa(1, 1, 1.3e-5)]
        s = compute_tdoa(toas, g, policy="per-ru")
        assert len(s) == 2
        assert all(o.antenna.ru_index == o.reference.ru_index for o in s.observations)

    def test_common_observation_count(self):
        g = two_by_two_geometry()
        toas = [toa(0, 0, 1e-5), toa(0, 1, 1.1e-5), toa(1, 0, 1.2e-5), toa(1, 1, 1.3e-5)]
        s = compute_tdoa(toas, g, policy="common")
        assert len(s) == 3
        assert all(o.reference == AntennaId(0, 0) for o in s.observations)

    def test_values_are_differences(self):
        g = two_by_two_geometry()
        toas = [toa(0, 0, 1.00e-5), toa(0, 1, 1.02e-5)]
        s = compute_tdoa([toas[0], toas[1], toa(1, 0, 0), toa(1, 1, 0)], g)
        first = next(o for o in s.observations if o.antenna == AntennaId(0, 1))
        assert first.value == pytest.approx(0.02e-5)

    def test_per_ru_cancels_constant_ru_offset(self):
        g = two_by_two_geometry()
        base = [toa(0, 0, 1e-5), toa(0, 1, 1.1e-5), toa(1, 0, 1.2e-5), toa(1, 1, 1.3e-5)]
        delta = 7.5e-7
        shifted = [
            toa(m.antenna.ru_index, m.antenna.antenna_index,
                m.toa_seconds + (delta if m.antenna.ru_index == 1 else 0.0))
            for m in base
        ]
        a = compute_tdoa(base, g, policy="per-ru")
        b = compute_tdoa(shifted, g, policy="per-ru")
        for oa, ob in zip(a.observations, b.observations):
            assert oa.value == ob.value

    def test_common_policy_exposes_cross_ru_offset(self):
        g = two_by_two_geometry()
        base = [toa(0, 0, 1e-5), toa(0, 1, 1.1e-5), toa(1, 0, 1.2e-5), toa(1, 1, 1.3e-5)]
        delta = 7.5e-7
        shifted = [
            toa(m.antenna.ru_index, m.antenna.antenna_index,
                m.toa_seconds + (delta if m.antenna.ru_index == 1 else 0.0))
            for m in base
        ]
        a = compute_tdoa(base, g, policy="common")
        b = compute_tdoa(shifted, g, policy="common")
        for oa, ob in zip(a.observations, b.observations):
            if oa.antenna.ru_index == 1:
                assert ob.value - oa.value == pytest.approx(delta)
            else:
                assert ob.value == oa.value

    def test_missing_reference_raises(self):
        g = two_by_two_geometry()
        toas = [toa(0, 1, 1e-5), toa(1, 0, 1.2e-5), toa(1, 1, 1.3e-5)]
        with pytest.raises(MissingReference):
            compute_tdoa(toas, g, policy="per-ru")

    def test_missing_reference_skip_drops_ru(self):
        g = two_by_two_geometry()
        toas = [toa(0, 1, 1e-5), toa(1, 0, 1.2e-5), toa(1, 1, 1.3e-5)]
        s = compute_tdoa(toas, g, policy="per-ru", on_missing_reference="skip")
        assert len(s) == 1
        assert s.observations[0].antenna == AntennaId(1, 1)

    def test_mixed_timestamps_rejected(self):
        g = two_by_two_geometry()
        with pytest.raises(ValueError):
            compute_tdoa([toa(0, 0, 1e-5, t=0), toa(0, 1, 1e-5, t=1)], g)

    def test_count_properties_with_larger_ru(self):
        g = DeploymentGeometry(
            rus=(
                RadioUnit(antennas=tuple(Position(i, 0, 2.2) for i in range(4))),
                RadioUnit(antennas=tuple(Position(i, 30, 2.2) for i in range(3))),
            )
        )
        toas = [
            toa(ru, ant, 1e-5 + ru * 1e-7 + ant * 1e-8)
            for ru, n in ((0, 4), (1, 3))
            for ant in range(n)
        ]
        assert len(compute_tdoa(toas, g, policy="per-ru")) == (4 - 1) + (3 - 1)
        assert len(compute_tdoa(toas, g, policy="common")) == 7 - 1


class TestFilterTdoa:
    def obs(self, value, bound, t=0):
        return TdoaObservation(
            antenna=AntennaId(0, 1),
            reference=AntennaId(0, 0),
            timestamp_index=t,
            value=value,
            bound=bound,
        )

    def wrap(self, *obs):
        return TdoaSet(timestamp_index=0, observations=obs, reference_policy="per-ru")

    def test_inside_bound_retained(self):
        kept, rejected = filter_tdoa(self.wrap(self.obs(8e-9, 10e-9)))
        assert len(kept) == 1 and not rejected

    def test_outside_bound_rejected_with_reason(self):
        kept, rejected = filter_tdoa(self.wrap(self.obs(-12e-9, 10e-9)))
        assert len(kept) == 0
        assert len(rejected) == 1
        assert "bound" in rejected[0].reason

    def test_boundary_exactly_retained(self):
        kept, _ = filter_tdoa(self.wrap(self.obs(10e-9, 10e-9), self.obs(-10e-9, 10e-9)))
        assert len(kept) == 2

    def test_slack_admits_quantization_overshoot(self):
        o = self.obs(10e-9 + 0.5 * T_S, 10e-9)
        assert len(filter_tdoa(self.wrap(o))[0]) == 0
        assert len(filter_tdoa(self.wrap(o), slack=T_S)[0]) == 1

    @settings(max_examples=200, deadline=None)
    @given(
        value=st.floats(-5e-8, 5e-8, allow_nan=False),
        bound=st.floats(0, 3e-8, allow_nan=False),
    )
    def test_retention_rule_is_exactly_the_inequality(self, value, bound):
        kept, rejected = filter_tdoa(self.wrap(self.obs(value, bound)))
        assert (len(kept) == 1) == (abs(value) <= bound)
        assert len(kept) + len(rejected) == 1


class TestAgainstSimulator:
    def test_ue_at_reference_antenna_gives_positive_bound_value(self):
        # With the transmitter at the reference antenna the difference
        # saturates its geometric bound (to within one sample of rounding).
        g = two_by_two_geometry()
        cfg = ScenarioConfig(geometry=g, quantization="fractional")
        ue = g.antenna_position(AntennaId(0, 0))
        traj = Trajectory(points=((0, ue),))
        toas = [estimate_toa(r.frame) for r in simulate(cfg, traj)]
        s = compute_tdoa(toas, g, policy="per-ru")
        o = next(o for o in s.observations if o.antenna == AntennaId(0, 1))
        assert o.value > 0
        assert o.value == pytest.approx(o.bound, abs=T_S)

    def test_dense_sweep_never_violates_bound_plus_slack(self):
        g = two_by_two_geometry()
        cfg = ScenarioConfig(geometry=g)
        points = [
            Position(x, y, 1.5)
            for x in np.linspace(0, 40, 9)
            for y in np.linspace(0, 3, 4)
        ]
        for i, p in enumerate(points):
            traj = Trajectory(points=((0, p),))
            toas = [estimate_toa(r.frame) for r in simulate(cfg, traj)]
            s = compute_tdoa(toas, g, policy="per-ru")
            _, rejected = filter_tdoa(s, slack=T_S)
            assert not rejected, f"violation at {p}"

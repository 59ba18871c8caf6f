import numpy as np
import pytest

from tests.helpers import hall_geometry
from ulpos.channel import ScenarioConfig, make_trajectory, simulate
from ulpos.dataset import (
    CorruptPayload,
    DatasetRecord,
    VersionMismatch,
    read_dataset,
    read_fingerprints,
    records_from_simulation,
    write_dataset,
    write_fingerprints,
)
from ulpos.fingerprint import CirMagnitudeMatrix, FingerprintSample, LosMask
from ulpos.geometry import AntennaId, Position


@pytest.fixture
def sim_records():
    g = hall_geometry()
    cfg = ScenarioConfig(
        geometry=g,
        n_fft=512,
        ru_clock_offset_std=20e-9,
        noise_floor=1e-4,
        quantization="fractional",
        seed=11,
    )
    traj = make_trajectory([Position(5, 5, 1.5), Position(12, 5, 1.5)], step=1.0)
    sim = list(simulate(cfg, traj))
    offsets = cfg.resolve_clock_offsets()
    return records_from_simulation(sim, clock_offsets=offsets)


def _assert_records_equal(a, b):
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        assert ra.timestamp_index == rb.timestamp_index
        assert ra.antenna == rb.antenna
        assert ra.n_fft == rb.n_fft
        assert ra.sample_period == rb.sample_period
        # byte-level identity, not approximate
        assert ra.cir.tobytes() == rb.cir.tobytes()
        if ra.true_position is None:
            assert rb.true_position is None
        else:
            assert ra.true_position.as_array().tobytes() == rb.true_position.as_array().tobytes()
        assert ra.ru_clock_offset == rb.ru_clock_offset


class TestCirRoundTrip:
    def test_bit_exact(self, sim_records, tmp_path):
        path = tmp_path / "scene.cird"
        write_dataset(path, sim_records, deployment_id="hall-a")
        got = read_dataset(path)
        _assert_records_equal(sim_records, got)

    def test_double_round_trip_identical_bytes(self, sim_records, tmp_path):
        p1 = tmp_path / "a.cird"
        p2 = tmp_path / "b.cird"
        write_dataset(p1, sim_records, deployment_id="x")
        got = read_dataset(p1)
        write_dataset(p2, got, deployment_id="x")
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty(self, tmp_path):
        path = tmp_path / "empty.cird"
        write_dataset(path, [], deployment_id="none")
        assert read_dataset(path) == []

    def test_optional_truth_omitted(self, tmp_path):
        rec = DatasetRecord(
            timestamp_index=0,
            antenna=AntennaId(0, 0),
            cir=np.zeros(64, dtype=np.complex128),
            sample_period=1e-9,
            n_fft=64,
        )
        path = tmp_path / "min.cird"
        write_dataset(path, [rec])
        got = read_dataset(path)
        assert got[0].true_position is None
        assert got[0].ru_clock_offset is None

    def test_to_frame_preserves_identity(self, sim_records):
        f = sim_records[0].to_frame()
        assert f.antenna == sim_records[0].antenna
        assert f.samples.tobytes() == sim_records[0].cir.tobytes()


class TestCirValidation:
    def test_truncated_file(self, sim_records, tmp_path):
        path = tmp_path / "cut.cird"
        write_dataset(path, sim_records, deployment_id="hall-a")
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 7])
        with pytest.raises(CorruptPayload):
            read_dataset(path)

    def test_flipped_byte(self, sim_records, tmp_path):
        path = tmp_path / "flip.cird"
        write_dataset(path, sim_records, deployment_id="hall-a")
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CorruptPayload):
            read_dataset(path)

    def test_trailing_garbage(self, sim_records, tmp_path):
        path = tmp_path / "extra.cird"
        write_dataset(path, sim_records, deployment_id="hall-a")
        path.write_bytes(path.read_bytes() + b"\x00\x01")
        with pytest.raises(CorruptPayload):
            read_dataset(path)

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "junk.cird"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(VersionMismatch):
            read_dataset(path)

    def test_wrong_version(self, sim_records, tmp_path):
        path = tmp_path / "v2.cird"
        write_dataset(path, sim_records, deployment_id="hall-a")
        raw = bytearray(path.read_bytes())
        raw[4:6] = (99).to_bytes(2, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(VersionMismatch):
            read_dataset(path)

    def test_non_finite_rejected_at_write(self, tmp_path):
        cir = np.zeros(64, dtype=np.complex128)
        cir[3] = complex(np.nan, 0.0)
        rec = DatasetRecord(
            timestamp_index=0,
            antenna=AntennaId(0, 0),
            cir=cir,
            sample_period=1e-9,
            n_fft=64,
        )
        with pytest.raises(ValueError):
            write_dataset(tmp_path / "bad.cird", [rec])

    def test_mixed_fft_sizes_rejected(self, tmp_path):
        def rec(n):
            return DatasetRecord(
                timestamp_index=0,
                antenna=AntennaId(0, 0),
                cir=np.zeros(n, dtype=np.complex128),
                sample_period=1e-9,
                n_fft=n,
            )

        with pytest.raises(ValueError):
            write_dataset(tmp_path / "mix.cird", [rec(64), rec(128)])


def _fingerprint_batch(count=6, rows=8, cols=100, seed=5):
    rng = np.random.default_rng(seed)
    antennas = tuple(AntennaId(0, a) for a in range(rows // 2)) + tuple(
        AntennaId(1, a) for a in range(rows - rows // 2)
    )
    samples, masks = [], []
    for t in range(count):
        vals = rng.uniform(0, 1, (rows, cols))
        samples.append(
            FingerprintSample(
                input=CirMagnitudeMatrix(values=vals, antennas=antennas),
                label=(float(t), float(t) / 2),
                timestamp_index=t,
            )
        )
        masks.append(
            LosMask(mask=(rng.uniform(0, 1, rows) > 0.4).astype(np.uint8), threshold=0.4)
        )
    return samples, masks


class TestFingerprintRoundTrip:
    def test_values_labels_and_order(self, tmp_path):
        samples, masks = _fingerprint_batch()
        path = tmp_path / "fp.fpsd"
        write_fingerprints(path, samples, masks, alpha_norm=3.25, gamma=0.4)
        got_samples, got_masks, alpha, gamma = read_fingerprints(path)
        assert alpha == 3.25
        assert gamma == 0.4
        assert len(got_samples) == len(samples)
        for s, g in zip(samples, got_samples):
            assert s.label == g.label
            assert s.timestamp_index == g.timestamp_index
            assert s.input.antennas == g.input.antennas
            assert s.input.values.tobytes() == g.input.values.tobytes()
        for m, gm in zip(masks, got_masks):
            assert np.array_equal(m.mask, gm.mask)
            assert gm.threshold == 0.4

    def test_empty_batch_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_fingerprints(tmp_path / "fp.fpsd", [], [], alpha_norm=1.0, gamma=0.4)

    def test_shape_disagreement_rejected(self, tmp_path):
        samples, masks = _fingerprint_batch(count=2, cols=50)
        other, _ = _fingerprint_batch(count=1, cols=60)
        with pytest.raises(ValueError):
            write_fingerprints(
                tmp_path / "fp.fpsd", samples + other, masks + [masks[0]],
                alpha_norm=1.0, gamma=0.4,
            )

    def test_corrupt_fingerprint_file(self, tmp_path):
        samples, masks = _fingerprint_batch(count=2, rows=2, cols=10)
        path = tmp_path / "fp.fpsd"
        write_fingerprints(path, samples, masks, alpha_norm=1.0, gamma=0.4)
        raw = bytearray(path.read_bytes())
        raw[-3] ^= 0x55
        path.write_bytes(bytes(raw))
        with pytest.raises(CorruptPayload):
            read_fingerprints(path)

    def test_cir_magic_refused(self, tmp_path, sim_records):
        path = tmp_path / "scene.cird"
        write_dataset(path, sim_records)
        with pytest.raises(VersionMismatch):
            read_fingerprints(path)

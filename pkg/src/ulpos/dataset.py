"""Binary containers for captured CIR frames and fingerprint batches.

Both formats are little-endian with a magic tag, a u16 format version, a
CRC-checksummed header, and per-record CRC32 trailers, so truncation and
bit rot are detected rather than silently read.  Complex samples are stored
as interleaved float64 real/imag pairs and round-trip bit-exactly.

CIR capture file ("CIRD"):
    magic "CIRD" | u16 version | u32 header_len | header | u32 header_crc
    header: u64 deployment_hash | u32 n_fft | f64 sample_period | u64 count
    record: i64 t | u32 ru | u32 ant | u8 flags | [3 f64 position]
            [f64 clock_offset] | 2*n_fft f64 samples | u32 crc
    flags: bit 0 = has position, bit 1 = has clock offset truth

Fingerprint batch file ("FPSD"):
    magic "FPSD" | u16 version | u32 header_len | header | u32 header_crc
    header: f64 alpha_norm | f64 gamma | u32 rows | u32 cols | u64 count
            | rows * (u32 ru, u32 ant) row order
    record: i64 t | 2 f64 label | rows u8 mask | rows*cols f64 values | u32 crc
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .channel import CirFrame, SimulatedFrame
from .fingerprint import CirMagnitudeMatrix, FingerprintSample, LosMask
from .geometry import AntennaId, Position

MAGIC_CIR = b"CIRD"
MAGIC_FINGERPRINT = b"FPSD"
FORMAT_VERSION = 1

_FLAG_POSITION = 0x01
_FLAG_CLOCK = 0x02


class VersionMismatch(ValueError):
    """File carries an unsupported format version or wrong magic."""


class CorruptPayload(ValueError):
    """Checksum failure or truncated data."""


def deployment_hash(deployment_id: str) -> int:
    """Stable 64-bit tag for a deployment name."""
    return zlib.crc32(deployment_id.encode()) | (len(deployment_id) << 32)


@dataclass(frozen=True)
class DatasetRecord:
    """One stored frame with optional simulator ground truth."""

    timestamp_index: int
    antenna: AntennaId
    cir: np.ndarray
    sample_period: float
    n_fft: int
    true_position: Position | None = None
    ru_clock_offset: float | None = None

    def __post_init__(self):
        c = np.asarray(self.cir, dtype=np.complex128)
        if c.shape != (self.n_fft,):
            raise ValueError(f"cir length {c.shape} != n_fft {self.n_fft}")
        object.__setattr__(self, "cir", c)

    def to_frame(self) -> CirFrame:
        return CirFrame(
            antenna=self.antenna,
            timestamp_index=self.timestamp_index,
            samples=self.cir,
            sample_period=self.sample_period,
        )


def records_from_simulation(
    sim: list[SimulatedFrame], clock_offsets=None
) -> list[DatasetRecord]:
    """Wrap simulator output for storage, carrying truth labels along."""
    out = []
    for r in sim:
        off = None
        if clock_offsets is not None:
            off = float(clock_offsets[r.antenna.ru_index])
        out.append(
            DatasetRecord(
                timestamp_index=r.timestamp_index,
                antenna=r.antenna,
                cir=r.frame.samples,
                sample_period=r.frame.sample_period,
                n_fft=r.frame.n_fft,
                true_position=r.true_position,
                ru_clock_offset=off,
            )
        )
    return out


def _pack_block(payload: bytes) -> bytes:
    return payload + struct.pack("<I", zlib.crc32(payload))


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise CorruptPayload(f"truncated while reading {what}")
    return buf


def _check_crc(payload: bytes, crc: int, what: str):
    if zlib.crc32(payload) != crc:
        raise CorruptPayload(f"checksum mismatch in {what}")


def write_dataset(path, records: list[DatasetRecord], deployment_id: str = ""):
    """Write records to a CIRD file.  All records must share n_fft and period."""
    n_ffts = {r.n_fft for r in records}
    periods = {r.sample_period for r in records}
    if len(n_ffts) > 1 or len(periods) > 1:
        raise ValueError("records mix n_fft or sample_period values")
    n_fft = n_ffts.pop() if n_ffts else 0
    period = periods.pop() if periods else 0.0
    for r in records:
        if not np.isfinite(r.cir).all():
            raise ValueError(
                f"non-finite samples in record t={r.timestamp_index} {r.antenna}"
            )

    header = struct.pack(
        "<QIdQ", deployment_hash(deployment_id), n_fft, period, len(records)
    )
    with open(path, "wb") as fh:
        fh.write(MAGIC_CIR)
        fh.write(struct.pack("<HI", FORMAT_VERSION, len(header)))
        fh.write(_pack_block(header))
        for r in records:
            flags = 0
            extra = b""
            if r.true_position is not None:
                flags |= _FLAG_POSITION
                p = r.true_position
                extra += struct.pack("<3d", p.x, p.y, p.z)
            if r.ru_clock_offset is not None:
                flags |= _FLAG_CLOCK
                extra += struct.pack("<d", r.ru_clock_offset)
            body = (
                struct.pack(
                    "<qIIB",
                    r.timestamp_index,
                    r.antenna.ru_index,
                    r.antenna.antenna_index,
                    flags,
                )
                + extra
                + r.cir.astype("<c16").tobytes()
            )
            fh.write(_pack_block(body))


def read_dataset(path) -> list[DatasetRecord]:
    """Read a CIRD file back; raises VersionMismatch/CorruptPayload on damage."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC_CIR:
            raise VersionMismatch(f"bad magic {magic!r}")
        version, header_len = struct.unpack("<HI", _read_exact(fh, 6, "version"))
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"unsupported version {version}")
        header = _read_exact(fh, header_len, "header")
        (crc,) = struct.unpack("<I", _read_exact(fh, 4, "header crc"))
        _check_crc(header, crc, "header")
        _, n_fft, period, count = struct.unpack("<QIdQ", header)

        records = []
        fixed = struct.calcsize("<qIIB")
        for i in range(count):
            body_start = _read_exact(fh, fixed, f"record {i}")
            t, ru, ant, flags = struct.unpack("<qIIB", body_start)
            extra_len = (3 * 8 if flags & _FLAG_POSITION else 0) + (
                8 if flags & _FLAG_CLOCK else 0
            )
            rest = _read_exact(fh, extra_len + 16 * n_fft, f"record {i} payload")
            (crc,) = struct.unpack("<I", _read_exact(fh, 4, f"record {i} crc"))
            _check_crc(body_start + rest, crc, f"record {i}")

            pos = None
            offset = 0
            if flags & _FLAG_POSITION:
                x, y, z = struct.unpack_from("<3d", rest, 0)
                pos = Position(x, y, z)
                offset = 24
            clock = None
            if flags & _FLAG_CLOCK:
                (clock,) = struct.unpack_from("<d", rest, offset)
                offset += 8
            cir = np.frombuffer(rest[offset:], dtype="<c16").copy()
            records.append(
                DatasetRecord(
                    timestamp_index=t,
                    antenna=AntennaId(ru, ant),
                    cir=cir,
                    sample_period=period,
                    n_fft=n_fft,
                    true_position=pos,
                    ru_clock_offset=clock,
                )
            )
        if fh.read(1):
            raise CorruptPayload("trailing bytes after final record")
    return records


def write_fingerprints(
    path,
    samples: list[FingerprintSample],
    masks: list[LosMask],
    alpha_norm: float,
    gamma: float,
):
    """Write preprocessed fingerprint samples to an FPSD file."""
    if len(samples) != len(masks):
        raise ValueError("one mask per sample required")
    if not samples:
        raise ValueError("refusing to write an empty fingerprint file")
    rows, cols = samples[0].input.values.shape
    order = samples[0].input.antennas
    for s in samples:
        if s.input.values.shape != (rows, cols) or s.input.antennas != order:
            raise ValueError("samples disagree on shape or row order")

    header = struct.pack("<ddIIQ", alpha_norm, gamma, rows, cols, len(samples))
    header += b"".join(
        struct.pack("<II", a.ru_index, a.antenna_index) for a in order
    )
    with open(path, "wb") as fh:
        fh.write(MAGIC_FINGERPRINT)
        fh.write(struct.pack("<HI", FORMAT_VERSION, len(header)))
        fh.write(_pack_block(header))
        for s, m in zip(samples, masks):
            body = (
                struct.pack("<q2d", s.timestamp_index, *s.label)
                + m.mask.astype(np.uint8).tobytes()
                + s.input.values.astype("<f8").tobytes()
            )
            fh.write(_pack_block(body))


def read_fingerprints(path):
    """Read an FPSD file: (samples, masks, alpha_norm, gamma)."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC_FINGERPRINT:
            raise VersionMismatch(f"bad magic {magic!r}")
        version, header_len = struct.unpack("<HI", _read_exact(fh, 6, "version"))
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"unsupported version {version}")
        header = _read_exact(fh, header_len, "header")
        (crc,) = struct.unpack("<I", _read_exact(fh, 4, "header crc"))
        _check_crc(header, crc, "header")
        alpha, gamma, rows, cols, count = struct.unpack_from("<ddIIQ", header, 0)
        off = struct.calcsize("<ddIIQ")
        order = tuple(
            AntennaId(*struct.unpack_from("<II", header, off + 8 * i))
            for i in range(rows)
        )

        samples, masks = [], []
        head = struct.calcsize("<q2d")
        for i in range(count):
            body = _read_exact(fh, head + rows + rows * cols * 8, f"sample {i}")
            (crc,) = struct.unpack("<I", _read_exact(fh, 4, f"sample {i} crc"))
            _check_crc(body, crc, f"sample {i}")
            t, lx, ly = struct.unpack_from("<q2d", body, 0)
            mask = np.frombuffer(body, dtype=np.uint8, count=rows, offset=head)
            values = np.frombuffer(
                body, dtype="<f8", count=rows * cols, offset=head + rows
            ).reshape(rows, cols)
            samples.append(
                FingerprintSample(
                    input=CirMagnitudeMatrix(values=values.copy(), antennas=order),
                    label=(lx, ly),
                    timestamp_index=t,
                )
            )
            masks.append(LosMask(mask=mask.copy(), threshold=gamma))
        if fh.read(1):
            raise CorruptPayload("trailing bytes after final sample")
    return samples, masks, alpha, gamma

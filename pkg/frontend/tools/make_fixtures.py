"""Cut the golden files the host's tests compare against.

Needs the positioning package installed (pip install -e ..); writes into
frontend/test/fixtures/. Everything is seeded, so reruns reproduce the
same bytes and the fixtures can live in version control.

    python3 frontend/tools/make_fixtures.py
"""

import pathlib
import shutil
import subprocess
import tempfile

from ulpos.dataset import read_dataset
from ulpos.stream import CirStreamMessage, encode_message

HERE = pathlib.Path(__file__).resolve().parent
FIXTURES = HERE.parent / "test" / "fixtures"
CAPTURE_TIMESTAMPS = 5


def run(*argv):
    print("+", " ".join(str(a) for a in argv))
    subprocess.run([str(a) for a in argv], check=True)


def build_capture(dataset_path, out_path, corrupt_path):
    """Concatenated wire messages, replayed the way the publisher sends them."""
    records = [
        r
        for r in read_dataset(dataset_path)
        if r.timestamp_index < CAPTURE_TIMESTAMPS
    ]
    records.sort(key=lambda r: (r.timestamp_index, r.antenna))
    seq = {}
    encoded = []
    for r in records:
        ru = r.antenna.ru_index
        msg = CirStreamMessage(
            deployment="hall-16",
            timestamp_index=r.timestamp_index,
            antenna=r.antenna,
            n_fft=len(r.cir),
            sample_period=r.sample_period,
            payload=r.cir,
            sequence=seq.get(ru, 0),
        )
        seq[ru] = msg.sequence + 1
        encoded.append(encode_message(msg))
    out_path.write_bytes(b"".join(encoded))
    print(f"wrote {out_path.name}: {len(encoded)} messages")

    # Same stream with two faults: message 7 re-sent later (a duplicate the
    # host must not double-count) and a bit-flipped copy of message 12 (a
    # payload the host must reject by checksum).
    broken = bytearray(encoded[12])
    broken[60] ^= 0xFF
    faulty = encoded[:20] + [bytes(encoded[7])] + encoded[20:] + [bytes(broken)]
    corrupt_path.write_bytes(b"".join(faulty))
    print(f"wrote {corrupt_path.name}: {len(faulty)} messages (1 dup, 1 corrupt)")


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as td:
        tmp = pathlib.Path(td)
        train = tmp / "train.cird"
        test = tmp / "test.cird"
        run("ulpos", "simulate", HERE / "fixtures_train.yaml", train)
        run("ulpos", "simulate", HERE / "fixtures_test.yaml", test)
        run("ulpos", "fingerprint", train, test, "--out-dir", tmp / "fp")
        for src, name in [
            (train, "train.cird"),
            (test, "test.cird"),
            (tmp / "fp" / "train.fpsd", "train.fpsd"),
            (tmp / "fp" / "test.fpsd", "test.fpsd"),
            (tmp / "fp" / "sidecar.json", "sidecar.json"),
        ]:
            shutil.copy(src, FIXTURES / name)
            print(f"copied {name}")
        build_capture(train, FIXTURES / "capture.bin", FIXTURES / "capture_faulty.bin")


if __name__ == "__main__":
    main()

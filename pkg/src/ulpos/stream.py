"""Transport-agnostic publish/subscribe of CIR frames.

The wire format is a self-describing binary frame (versioned, checksummed,
little-endian) carrying one CIR with its identity and a per-publisher
sequence number.  Brokers are anything with publish/subscribe; an
in-process loopback broker covers tests and single-host pipelines, and an
MQTT binding is provided behind an optional dependency.

Topic convention: "cir/<deployment>/<gnb>".
"""

from __future__ import annotations

import struct
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .channel import CirFrame
from .geometry import AntennaId

MAGIC_MESSAGE = b"CIRM"
SCHEMA_VERSION = 1


class Disconnected(ConnectionError):
    """The broker is not reachable; messages may be buffered by the publisher."""


class MalformedMessage(ValueError):
    """Payload failed structural or checksum validation."""


@dataclass(frozen=True)
class CirStreamMessage:
    """One CIR in flight."""

    deployment: str
    timestamp_index: int
    antenna: AntennaId
    n_fft: int
    sample_period: float
    payload: np.ndarray
    sequence: int
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        p = np.asarray(self.payload, dtype=np.complex128)
        if p.shape != (self.n_fft,):
            raise ValueError(f"payload length {p.shape} != n_fft {self.n_fft}")
        if self.sequence < 0:
            raise ValueError("sequence must be >= 0")
        object.__setattr__(self, "payload", p)


def encode_message(msg: CirStreamMessage) -> bytes:
    """Serialize to the framed wire format."""
    dep = msg.deployment.encode()
    if len(dep) > 0xFFFF:
        raise ValueError("deployment id too long")
    body = (
        struct.pack(
            "<HQqIIIdH",
            msg.schema_version,
            msg.sequence,
            msg.timestamp_index,
            msg.antenna.ru_index,
            msg.antenna.antenna_index,
            msg.n_fft,
            msg.sample_period,
            len(dep),
        )
        + dep
        + msg.payload.astype("<c16").tobytes()
    )
    return MAGIC_MESSAGE + body + struct.pack("<I", zlib.crc32(body))


def decode_message(data: bytes) -> CirStreamMessage:
    """Parse a framed message; raises MalformedMessage on any damage."""
    if len(data) < 4 or data[:4] != MAGIC_MESSAGE:
        raise MalformedMessage("bad magic")
    body, crc_bytes = data[4:-4], data[-4:]
    if len(body) < struct.calcsize("<HQqIIIdH"):
        raise MalformedMessage("truncated header")
    (crc,) = struct.unpack("<I", crc_bytes)
    if zlib.crc32(body) != crc:
        raise MalformedMessage("checksum mismatch")
    version, seq, t, ru, ant, n_fft, period, dep_len = struct.unpack_from(
        "<HQqIIIdH", body, 0
    )
    if version != SCHEMA_VERSION:
        raise MalformedMessage(f"unsupported schema version {version}")
    off = struct.calcsize("<HQqIIIdH")
    dep = body[off : off + dep_len].decode()
    payload_bytes = body[off + dep_len :]
    if len(payload_bytes) != 16 * n_fft:
        raise MalformedMessage("payload length mismatch")
    payload = np.frombuffer(payload_bytes, dtype="<c16").copy()
    return CirStreamMessage(
        deployment=dep,
        timestamp_index=t,
        antenna=AntennaId(ru, ant),
        n_fft=n_fft,
        sample_period=period,
        payload=payload,
        sequence=seq,
    )


def cir_topic(deployment: str, gnb: str) -> str:
    return f"cir/{deployment}/{gnb}"


class Broker(Protocol):
    """Minimal pub/sub surface the pipeline relies on."""

    def publish(self, topic: str, payload: bytes) -> None: ...

    def subscribe(self, topic: str, callback: Callable[[str, bytes], None]) -> None: ...


def _topic_matches(pattern: str, topic: str) -> bool:
    """Exact match, or a trailing '#' segment matching any suffix."""
    if pattern == topic:
        return True
    if pattern.endswith("/#"):
        return topic.startswith(pattern[:-1]) or topic == pattern[:-2]
    return False


class LoopbackBroker:
    """Synchronous in-process broker: delivery is immediate and in order.

    connect()/disconnect() simulate transport outages for buffering tests.
    """

    def __init__(self):
        self._subs: list[tuple[str, Callable[[str, bytes], None]]] = []
        self._connected = True
        self.delivered = 0

    def connect(self):
        self._connected = True

    def disconnect(self):
        self._connected = False

    def publish(self, topic: str, payload: bytes) -> None:
        if not self._connected:
            raise Disconnected("loopback broker is down")
        for pattern, cb in list(self._subs):
            if _topic_matches(pattern, topic):
                cb(topic, payload)
        self.delivered += 1

    def subscribe(self, topic: str, callback: Callable[[str, bytes], None]) -> None:
        if not self._connected:
            raise Disconnected("loopback broker is down")
        self._subs.append((topic, callback))


class CirPublisher:
    """Publishes frames on "cir/<deployment>/<gnb>" with monotonic sequencing.

    While the broker raises Disconnected, up to ``buffer_depth`` encoded
    messages are held back (oldest dropped first, counted in ``dropped``)
    and flushed in order on the next successful publish.
    """

    def __init__(
        self, broker: Broker, deployment: str, gnb: str, buffer_depth: int = 1000
    ):
        if buffer_depth < 0:
            raise ValueError("buffer_depth must be >= 0")
        self._broker = broker
        self.deployment = deployment
        self.topic = cir_topic(deployment, gnb)
        self._seq = 0
        self._buffer: deque[bytes] = deque(maxlen=buffer_depth or None)
        self._depth = buffer_depth
        self.dropped = 0
        self.published = 0

    def publish_frame(self, frame: CirFrame) -> CirStreamMessage:
        msg = CirStreamMessage(
            deployment=self.deployment,
            timestamp_index=frame.timestamp_index,
            antenna=frame.antenna,
            n_fft=frame.n_fft,
            sample_period=frame.sample_period,
            payload=frame.samples,
            sequence=self._seq,
        )
        self._seq += 1
        self._send(encode_message(msg))
        return msg

    def _send(self, encoded: bytes):
        # Drain the backlog first so a recovered broker costs no drops.
        self._flush()
        if self._depth and len(self._buffer) == self._depth:
            self._buffer.popleft()
            self.dropped += 1
        self._buffer.append(encoded)
        self._flush()

    def _flush(self):
        try:
            while self._buffer:
                self._broker.publish(self.topic, self._buffer[0])
                self._buffer.popleft()
                self.published += 1
        except Disconnected:
            pass  # keep buffering; next publish retries the backlog

    @property
    def backlog(self) -> int:
        return len(self._buffer)


class CirSubscriber:
    """Decodes messages on a topic and drops per-publisher duplicates.

    The handler receives (topic, CirStreamMessage) for each fresh message.
    Duplicate means: sequence number <= the last one seen from the same
    (deployment, antenna) stream.
    """

    def __init__(
        self,
        broker: Broker,
        topic: str,
        handler: Callable[[str, CirStreamMessage], None],
    ):
        self._handler = handler
        self._last_seq: dict[tuple[str, AntennaId], int] = {}
        self.duplicates = 0
        self.received = 0
        self.malformed = 0
        broker.subscribe(topic, self._on_message)

    def _on_message(self, topic: str, payload: bytes):
        try:
            msg = decode_message(payload)
        except MalformedMessage:
            self.malformed += 1
            return
        key = (msg.deployment, msg.antenna)
        last = self._last_seq.get(key)
        if last is not None and msg.sequence <= last:
            self.duplicates += 1
            return
        self._last_seq[key] = msg.sequence
        self.received += 1
        self._handler(topic, msg)


class MqttBroker:
    """Thin MQTT binding (optional; requires the paho-mqtt extra).

    Maps publish/subscribe onto a paho client at QoS 1 (at-least-once,
    ordered per publisher), matching the loopback broker's contract.
    """

    def __init__(self, host: str, port: int = 1883, client_id: str = ""):
        try:
            import paho.mqtt.client as mqtt
        except ImportError as exc:
            raise ImportError(
                "MQTT support needs the 'mqtt' extra (pip install ulpos[mqtt])"
            ) from exc
        self._client = mqtt.Client(client_id=client_id)
        self._client.connect(host, port)
        self._client.loop_start()

    def publish(self, topic: str, payload: bytes) -> None:
        info = self._client.publish(topic, payload, qos=1)
        if info.rc != 0:
            raise Disconnected(f"mqtt publish failed rc={info.rc}")

    def subscribe(self, topic: str, callback) -> None:
        def on_message(client, userdata, message):
            callback(message.topic, message.payload)

        self._client.subscribe(topic, qos=1)
        self._client.on_message = on_message

    def close(self):
        self._client.loop_stop()
        self._client.disconnect()


def publish_cir(publisher: CirPublisher, frame: CirFrame) -> CirStreamMessage:
    """Module-level convenience mirroring the operation contract."""
    return publisher.publish_frame(frame)


def subscribe_cir(broker: Broker, topic: str, handler) -> CirSubscriber:
    """Attach a decoding, de-duplicating subscriber to a topic."""
    return CirSubscriber(broker, topic, handler)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ulpos.channel import CirFrame
from ulpos.geometry import AntennaId
from ulpos.stream import (
    CirPublisher,
    CirStreamMessage,
    CirSubscriber,
    LoopbackBroker,
    MalformedMessage,
    _topic_matches,
    cir_topic,
    decode_message,
    encode_message,
)


def make_frame(t=0, ru=0, ant=0, n=64, seed=0):
    rng = np.random.default_rng(seed)
    samples = rng.normal(size=n) + 1j * rng.normal(size=n)
    return CirFrame(
        antenna=AntennaId(ru, ant),
        timestamp_index=t,
        samples=samples,
        sample_period=1 / 122.88e6,
    )


def make_message(seq=0, t=0, ru=0, ant=0, n=16, deployment="hall", seed=1):
    rng = np.random.default_rng(seed)
    payload = rng.normal(size=n) + 1j * rng.normal(size=n)
    return CirStreamMessage(
        deployment=deployment,
        timestamp_index=t,
        antenna=AntennaId(ru, ant),
        n_fft=n,
        sample_period=1 / 122.88e6,
        payload=payload,
        sequence=seq,
    )


class TestCodec:
    @settings(max_examples=200, deadline=None)
    @given(
        deployment=st.text(max_size=20),
        seq=st.integers(0, 2**63),
        t=st.integers(-(2**40), 2**40),
        ru=st.integers(0, 1000),
        ant=st.integers(0, 1000),
        n=st.integers(1, 64),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_round_trip_identity(self, deployment, seq, t, ru, ant, n, seed):
        msg = make_message(seq=seq, t=t, ru=ru, ant=ant, n=n, deployment=deployment, seed=seed)
        back = decode_message(encode_message(msg))
        assert back.deployment == msg.deployment
        assert back.sequence == msg.sequence
        assert back.timestamp_index == msg.timestamp_index
        assert back.antenna == msg.antenna
        assert back.n_fft == msg.n_fft
        assert back.sample_period == msg.sample_period
        assert back.payload.tobytes() == msg.payload.tobytes()

    def test_bad_magic(self):
        data = bytearray(encode_message(make_message()))
        data[0] = ord("X")
        with pytest.raises(MalformedMessage):
            decode_message(bytes(data))

    def test_flipped_payload_byte(self):
        data = bytearray(encode_message(make_message()))
        data[len(data) // 2] ^= 0x20
        with pytest.raises(MalformedMessage):
            decode_message(bytes(data))

    def test_truncated(self):
        data = encode_message(make_message())
        with pytest.raises(MalformedMessage):
            decode_message(data[: len(data) - 9])

    def test_future_schema_version_refused(self):
        msg = make_message()
        object.__setattr__(msg, "schema_version", 7)
        with pytest.raises(MalformedMessage):
            decode_message(encode_message(msg))

    def test_empty_input(self):
        with pytest.raises(MalformedMessage):
            decode_message(b"")


class TestTopics:
    def test_topic_layout(self):
        assert cir_topic("hall-a", "gnb3") == "cir/hall-a/gnb3"

    def test_exact_match(self):
        assert _topic_matches("cir/h/g", "cir/h/g")
        assert not _topic_matches("cir/h/g", "cir/h/other")

    def test_trailing_wildcard(self):
        assert _topic_matches("cir/h/#", "cir/h/g1")
        assert _topic_matches("cir/h/#", "cir/h/g1/extra")
        assert _topic_matches("cir/h/#", "cir/h")
        assert not _topic_matches("cir/h/#", "cir/other/g1")


class TestLoopbackDelivery:
    def test_hundred_in_order(self):
        broker = LoopbackBroker()
        seen = []
        CirSubscriber(broker, "cir/hall/gnb1", lambda topic, m: seen.append(m))
        pub = CirPublisher(broker, "hall", "gnb1")
        for t in range(100):
            pub.publish_frame(make_frame(t=t, seed=t))
        assert [m.sequence for m in seen] == list(range(100))
        assert [m.timestamp_index for m in seen] == list(range(100))
        assert pub.published == 100
        assert pub.backlog == 0

    def test_wildcard_subscriber_sees_all_gnbs(self):
        broker = LoopbackBroker()
        seen = []
        CirSubscriber(broker, "cir/hall/#", lambda topic, m: seen.append(topic))
        CirPublisher(broker, "hall", "gnb1").publish_frame(make_frame(ru=0))
        CirPublisher(broker, "hall", "gnb2").publish_frame(make_frame(ru=1))
        CirPublisher(broker, "other", "gnb1").publish_frame(make_frame(ru=2))
        assert seen == ["cir/hall/gnb1", "cir/hall/gnb2"]

    def test_duplicate_suppressed(self):
        broker = LoopbackBroker()
        seen = []
        sub = CirSubscriber(broker, "cir/hall/gnb1", lambda topic, m: seen.append(m))
        data = encode_message(make_message(seq=4))
        broker.publish("cir/hall/gnb1", data)
        broker.publish("cir/hall/gnb1", data)
        assert len(seen) == 1
        assert sub.duplicates == 1
        assert sub.received == 1

    def test_stale_sequence_suppressed(self):
        broker = LoopbackBroker()
        seen = []
        sub = CirSubscriber(broker, "cir/hall/gnb1", lambda topic, m: seen.append(m))
        broker.publish("cir/hall/gnb1", encode_message(make_message(seq=9)))
        broker.publish("cir/hall/gnb1", encode_message(make_message(seq=3)))
        assert [m.sequence for m in seen] == [9]
        assert sub.duplicates == 1

    def test_streams_tracked_per_antenna(self):
        broker = LoopbackBroker()
        seen = []
        sub = CirSubscriber(broker, "cir/hall/gnb1", lambda topic, m: seen.append(m))
        broker.publish("cir/hall/gnb1", encode_message(make_message(seq=5, ant=0)))
        # same sequence but a different antenna is an independent stream
        broker.publish("cir/hall/gnb1", encode_message(make_message(seq=5, ant=1)))
        assert len(seen) == 2
        assert sub.duplicates == 0

    def test_malformed_counted_not_delivered(self):
        broker = LoopbackBroker()
        seen = []
        sub = CirSubscriber(broker, "cir/hall/gnb1", lambda topic, m: seen.append(m))
        broker.publish("cir/hall/gnb1", b"garbage bytes")
        assert seen == []
        assert sub.malformed == 1
        assert sub.received == 0


class TestPublisherBuffering:
    def test_outage_buffers_then_flushes_in_order(self):
        broker = LoopbackBroker()
        seen = []
        CirSubscriber(broker, "cir/hall/gnb1", lambda topic, m: seen.append(m))
        pub = CirPublisher(broker, "hall", "gnb1", buffer_depth=100)
        pub.publish_frame(make_frame(t=0))
        broker.disconnect()
        for t in range(1, 5):
            pub.publish_frame(make_frame(t=t))
        assert pub.backlog == 4
        assert [m.timestamp_index for m in seen] == [0]
        broker.connect()
        pub.publish_frame(make_frame(t=5))
        assert pub.backlog == 0
        assert pub.dropped == 0
        assert [m.sequence for m in seen] == list(range(6))
        assert [m.timestamp_index for m in seen] == list(range(6))

    def test_drop_oldest_when_full(self):
        broker = LoopbackBroker()
        seen = []
        CirSubscriber(broker, "cir/hall/gnb1", lambda topic, m: seen.append(m))
        pub = CirPublisher(broker, "hall", "gnb1", buffer_depth=3)
        broker.disconnect()
        for t in range(7):
            pub.publish_frame(make_frame(t=t))
        assert pub.backlog == 3
        assert pub.dropped == 4
        broker.connect()
        pub.publish_frame(make_frame(t=7))
        # oldest four were shed; the survivors arrive oldest first
        assert [m.timestamp_index for m in seen] == [4, 5, 6, 7]
        assert [m.sequence for m in seen] == [4, 5, 6, 7]

    def test_sequence_advances_across_drops(self):
        broker = LoopbackBroker()
        pub = CirPublisher(broker, "hall", "gnb1", buffer_depth=1)
        broker.disconnect()
        for t in range(3):
            pub.publish_frame(make_frame(t=t))
        broker.connect()
        msg = pub.publish_frame(make_frame(t=3))
        assert msg.sequence == 3

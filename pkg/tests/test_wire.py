import json

import numpy as np
import pytest

from proxyhand.wire import (LineDecoder, WireError, WireMessage, decode,
                            encode, feedback_message, frame_message,
                            protocol_error_message, scene_delta_message,
                            scene_init_message)

# Golden byte fixtures: the canonical encoding of every message type is
# frozen here; any codec change that breaks compatibility fails loudly.
GOLDEN = {
    "command_text": (
        WireMessage("command_text", 1, 17, "pinch the cube."),
        b'{"payload":"pinch the cube.","seq":1,"ts_ms":17,"type":"command_text"}\n',
    ),
    "disambiguation_reply": (
        WireMessage("disambiguation_reply", 2, 18, 2),
        b'{"payload":2,"seq":2,"ts_ms":18,"type":"disambiguation_reply"}\n',
    ),
    "ping": (
        WireMessage("ping", 3, 19, None),
        b'{"payload":null,"seq":3,"ts_ms":19,"type":"ping"}\n',
    ),
    "pong": (
        WireMessage("pong", 4, 20, None),
        b'{"payload":null,"seq":4,"ts_ms":20,"type":"pong"}\n',
    ),
    "frame": (
        frame_message(5, 21, [0.0] * 63),
        b'{"payload":{"pose":[' + b",".join([b"0.0"] * 63) +
        b']},"seq":5,"ts_ms":21,"type":"frame"}\n',
    ),
    "scene_init": (
        scene_init_message(6, 22, {"objects": [{"id": "cube", "name": "cube"}]}),
        b'{"payload":{"objects":[{"id":"cube","name":"cube"}]},'
        b'"seq":6,"ts_ms":22,"type":"scene_init"}\n',
    ),
    "scene_delta": (
        scene_delta_message(7, 23, {"cube": {"position": [0.0, 1.0, 2.0]}}),
        b'{"payload":{"cube":{"position":[0.0,1.0,2.0]}},'
        b'"seq":7,"ts_ms":23,"type":"scene_delta"}\n',
    ),
    "feedback": (
        feedback_message(8, 24, "disambiguation_labels", [["cube_a", 1], ["cube_b", 2]]),
        b'{"payload":{"kind":"disambiguation_labels",'
        b'"payload":[["cube_a",1],["cube_b",2]]},"seq":8,"ts_ms":24,"type":"feedback"}\n',
    ),
    "protocol_error": (
        protocol_error_message(9, 25, "unknown message type"),
        b'{"payload":{"reason":"unknown message type"},'
        b'"seq":9,"ts_ms":25,"type":"protocol_error"}\n',
    ),
}


class TestGoldenBytes:
    @pytest.mark.parametrize("name", sorted(GOLDEN))
    def test_encode_matches_golden(self, name):
        msg, blob = GOLDEN[name]
        assert encode(msg) == blob

    @pytest.mark.parametrize("name", sorted(GOLDEN))
    def test_decode_golden(self, name):
        msg, blob = GOLDEN[name]
        assert decode(blob.strip()) == msg


class TestRoundTrip:
    def test_zero_frame(self):
        msg = frame_message(0, 0, [0.0] * 63)
        out = decode(encode(msg).strip())
        assert out.payload["pose"] == [0.0] * 63

    def test_feedback_structure_preserved(self):
        msg = feedback_message(1, 2, "disambiguation_labels",
                               [["a", 1], ["b", 2], ["c", 3]])
        assert decode(encode(msg).strip()) == msg

    def test_unknown_envelope_fields_ignored(self):
        doc = {"type": "ping", "seq": 1, "ts_ms": 2, "payload": None,
               "future_field": {"x": 1}}
        msg = decode(json.dumps(doc))
        assert msg == WireMessage("ping", 1, 2, None)

    def test_unknown_type_decodes(self):
        # Unknown types are valid documents; the server answers them with a
        # protocol_error instead of dropping the connection.
        msg = decode(json.dumps({"type": "warp", "seq": 1, "ts_ms": 0,
                                 "payload": {}}))
        assert msg.type == "warp"


class TestValidation:
    @pytest.mark.parametrize("doc", [
        {"type": "command_text", "payload": 5},
        {"type": "disambiguation_reply", "payload": "two"},
        {"type": "disambiguation_reply", "payload": True},
        {"type": "frame", "payload": {"pose": [0.0] * 62}},
        {"type": "frame", "payload": {"pose": "not a list"}},
        {"type": "frame", "payload": {}},
        {"type": "scene_init", "payload": {}},
        {"type": "feedback", "payload": {}},
        {"type": 7, "payload": None},
        {"payload": None},
        {"type": "ping", "seq": "one"},
        [1, 2, 3],
    ])
    def test_rejects(self, doc):
        with pytest.raises(WireError):
            decode(json.dumps(doc))

    def test_malformed_json(self):
        with pytest.raises(WireError):
            decode(b'{"type": "ping", ')


class TestLineDecoder:
    def test_stream_reassembly(self):
        decoder = LineDecoder()
        blob = encode(GOLDEN["ping"][0]) + encode(GOLDEN["pong"][0])
        out = decoder.feed(blob[:10])
        assert out == []
        out = decoder.feed(blob[10:])
        assert [m.type for m in out] == ["ping", "pong"]

    def test_resync_after_truncated_document(self):
        decoder = LineDecoder()
        good = encode(GOLDEN["ping"][0])
        bad = b'{"type": "ping", "seq"\n'
        out = decoder.feed(bad + good)
        assert isinstance(out[0], WireError)
        assert isinstance(out[1], WireMessage)
        assert out[1].type == "ping"

    def test_fuzzed_truncation_always_resyncs(self):
        rng = np.random.default_rng(77)
        messages = [GOLDEN[name][0] for name in sorted(GOLDEN)]
        for _ in range(500):
            victim = messages[rng.integers(len(messages))]
            keeper = messages[rng.integers(len(messages))]
            blob = encode(victim)
            cut = rng.integers(1, len(blob) - 1)
            stream = blob[:cut] + b"\n" + encode(keeper)
            decoder = LineDecoder()
            out = decoder.feed(stream)
            assert isinstance(out[-1], WireMessage)
            assert out[-1] == keeper

    def test_blank_lines_skipped(self):
        decoder = LineDecoder()
        out = decoder.feed(b"\n\n" + encode(GOLDEN["ping"][0]) + b"\n")
        assert [m.type for m in out] == ["ping"]


def random_message(rng):
    kind = rng.choice(["command_text", "disambiguation_reply", "ping", "pong",
                       "frame", "feedback", "scene_delta", "protocol_error"])
    seq = int(rng.integers(0, 1 << 31))
    ts = int(rng.integers(0, 1 << 40))
    if kind == "command_text":
        text = "".join(rng.choice(list("abc xyz.,!?"), size=rng.integers(1, 40)))
        return WireMessage(kind, seq, ts, text)
    if kind == "disambiguation_reply":
        return WireMessage(kind, seq, ts, int(rng.integers(1, 9)))
    if kind == "frame":
        pose = [float(v) for v in rng.normal(size=63)]
        return frame_message(seq, ts, pose)
    if kind == "feedback":
        return feedback_message(seq, ts, "error_retry", "try again")
    if kind == "scene_delta":
        return scene_delta_message(seq, ts, {
            f"obj_{i}": {"position": [float(v) for v in rng.normal(size=3)]}
            for i in range(rng.integers(0, 4))})
    if kind == "protocol_error":
        return protocol_error_message(seq, ts, "nope")
    return WireMessage(kind, seq, ts, None)


def test_fuzz_roundtrip_identity():
    rng = np.random.default_rng(123)
    for _ in range(2000):
        msg = random_message(rng)
        assert decode(encode(msg).strip()) == msg

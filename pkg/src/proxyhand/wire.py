"""Bit-level wire protocol: length-delimited JSON documents, one per line.

Every message is an envelope ``{"type", "seq", "ts_ms", "payload"}``. The
same documents run over raw TCP (newline framing) and WebSocket (one
document per text message). Unknown envelope fields are ignored; unknown
types earn a ``protocol_error`` reply but never close the connection.
Frames carry the hand pose as a flat list of 63 numbers in joint order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

CLIENT_TYPES = ("command_text", "disambiguation_reply", "ping")
SERVER_TYPES = ("frame", "scene_init", "scene_delta", "feedback", "pong", "protocol_error")
ALL_TYPES = CLIENT_TYPES + SERVER_TYPES


class WireError(ValueError):
    """Message cannot be decoded or fails validation."""


@dataclass(frozen=True)
class WireMessage:
    type: str
    seq: int = 0
    ts_ms: int = 0
    payload: object = None

    def to_dict(self) -> dict:
        return {"type": self.type, "seq": self.seq, "ts_ms": self.ts_ms,
                "payload": self.payload}


def encode(msg: WireMessage) -> bytes:
    """Canonical byte form: compact JSON, sorted keys, newline terminated."""
    return (json.dumps(msg.to_dict(), sort_keys=True, separators=(",", ":"))
            + "\n").encode("utf-8")


def decode(data: bytes | str) -> WireMessage:
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="strict")
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise WireError(f"malformed document: {exc}") from exc
    return from_dict(doc)


def from_dict(doc) -> WireMessage:
    if not isinstance(doc, dict):
        raise WireError("message must be a JSON object")
    mtype = doc.get("type")
    if not isinstance(mtype, str):
        raise WireError("message missing string 'type'")
    seq = doc.get("seq", 0)
    ts_ms = doc.get("ts_ms", 0)
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise WireError("'seq' must be an integer")
    if not isinstance(ts_ms, int) or isinstance(ts_ms, bool):
        raise WireError("'ts_ms' must be an integer")
    msg = WireMessage(mtype, seq, ts_ms, doc.get("payload"))
    validate(msg)
    return msg


def validate(msg: WireMessage) -> None:
    p = msg.payload
    if msg.type == "command_text":
        if not isinstance(p, str):
            raise WireError("command_text payload must be a string")
    elif msg.type == "disambiguation_reply":
        if not isinstance(p, int) or isinstance(p, bool):
            raise WireError("disambiguation_reply payload must be an integer")
    elif msg.type == "frame":
        if (not isinstance(p, dict) or not isinstance(p.get("pose"), list)
                or len(p["pose"]) != 63
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                           for v in p["pose"])):
            raise WireError("frame payload must carry a 63-number pose")
    elif msg.type == "scene_init":
        if not isinstance(p, dict) or not isinstance(p.get("objects"), list):
            raise WireError("scene_init payload must carry an object list")
    elif msg.type == "scene_delta":
        if not isinstance(p, dict):
            raise WireError("scene_delta payload must be an object map")
    elif msg.type == "feedback":
        if not isinstance(p, dict) or "kind" not in p:
            raise WireError("feedback payload must carry a kind")
    elif msg.type in ("ping", "pong", "protocol_error"):
        pass
    # Unknown types pass validation; the server answers them with
    # protocol_error rather than dropping the connection.


class LineDecoder:
    """Newline-framed stream decoder that resynchronizes after bad input."""

    def __init__(self) -> None:
        self._buf = b""

    def feed(self, data: bytes) -> list[WireMessage | WireError]:
        """Return decoded messages and decode errors, in stream order."""
        self._buf += data
        out: list[WireMessage | WireError] = []
        while b"\n" in self._buf:
            line, self._buf = self._buf.split(b"\n", 1)
            line = line.strip()
            if not line:
                continue
            try:
                out.append(decode(line))
            except WireError as exc:
                out.append(exc)
        return out


def frame_message(seq: int, ts_ms: int, pose_flat: list[float]) -> WireMessage:
    return WireMessage("frame", seq, ts_ms, {"pose": pose_flat})


def feedback_message(seq: int, ts_ms: int, kind: str, payload) -> WireMessage:
    return WireMessage("feedback", seq, ts_ms, {"kind": kind, "payload": payload})


def scene_init_message(seq: int, ts_ms: int, scene_doc: dict) -> WireMessage:
    return WireMessage("scene_init", seq, ts_ms, scene_doc)


def scene_delta_message(seq: int, ts_ms: int, changed: dict) -> WireMessage:
    return WireMessage("scene_delta", seq, ts_ms, changed)


def protocol_error_message(seq: int, ts_ms: int, reason: str) -> WireMessage:
    return WireMessage("protocol_error", seq, ts_ms, {"reason": reason})

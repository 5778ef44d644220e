"""Gesture clips: annotated pose sequences the controller plays back.

A clip is a sequence of hand poses plus a metadata record describing its
source, its phase segments (preparation / stroke / retraction), the frame
at which the hand fully interacts with an object, and the joint that makes
contact. Clips can be loaded from a bundle directory (one subdirectory per
gesture holding ``meta.json`` and a whitespace-delimited 63-number-per-frame
pose file) or synthesized procedurally; synthetic clips are the default
library and the test corpus.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import skeleton
from .skeleton import JOINT_COUNT, MIDDLE_MCP, WRIST

GESTURE_IDS = (
    "pinch", "point", "push", "grab", "swipe", "punch",
    "squeeze", "cut", "thumb_up", "thumb_down", "open_hand",
)

PHASE_NAMES = ("preparation", "stroke", "retraction")


class GestureSchemaError(ValueError):
    """Metadata document is missing fields or malformed."""


class GestureBoundsError(ValueError):
    """Frame indices in the metadata fall outside the clip."""


class UnknownPhaseError(KeyError):
    """Requested phase is not declared in the clip's segments."""


class UnknownGestureError(KeyError):
    """No clip registered under that name."""


class ZeroSpanError(ValueError):
    """First frame has coincident wrist and middle MCP; cannot scale."""


@dataclass(frozen=True)
class GestureSegment:
    name: str
    start_frame: int
    end_frame: int


@dataclass
class GestureMetadata:
    name: str
    data_format: str = "unified"
    data_source: str = "synthetic"
    num_hands: int = 1
    right_hand_data_file: str = ""
    left_hand_data_file: str | None = None
    is_hold_at_peak: bool = False
    is_static: bool = False
    interacting_frame: int = 0
    interacting_joint: list[str] = field(default_factory=lambda: ["wrist"])
    segments: list[GestureSegment] = field(default_factory=list)

    @classmethod
    def from_dict(cls, doc: dict) -> "GestureMetadata":
        required = (
            "name", "data_format", "data_source", "num_hands",
            "right_hand_data_file", "is_hold_at_peak", "is_static",
            "interacting_frame", "segments",
        )
        missing = [key for key in required if key not in doc]
        if missing:
            raise GestureSchemaError(f"metadata missing fields: {missing}")
        try:
            segments = [
                GestureSegment(seg["name"], int(seg["start_frame"]), int(seg["end_frame"]))
                for seg in doc["segments"]
            ]
        except (KeyError, TypeError) as exc:
            raise GestureSchemaError(f"malformed segment entry: {exc}") from exc
        joints = doc.get("interacting_joint") or ["wrist"]
        if isinstance(joints, str):
            joints = [joints]
        return cls(
            name=doc["name"],
            data_format=doc["data_format"],
            data_source=doc["data_source"],
            num_hands=int(doc["num_hands"]),
            right_hand_data_file=doc["right_hand_data_file"],
            left_hand_data_file=doc.get("left_hand_data_file"),
            is_hold_at_peak=bool(doc["is_hold_at_peak"]),
            is_static=bool(doc["is_static"]),
            interacting_frame=int(doc["interacting_frame"]),
            interacting_joint=list(joints),
            segments=segments,
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "data_format": self.data_format,
            "data_source": self.data_source,
            "num_hands": self.num_hands,
            "right_hand_data_file": self.right_hand_data_file,
            "left_hand_data_file": self.left_hand_data_file,
            "is_hold_at_peak": self.is_hold_at_peak,
            "is_static": self.is_static,
            "interacting_frame": self.interacting_frame,
            "interacting_joint": list(self.interacting_joint),
            "segments": [
                {"name": s.name, "start_frame": s.start_frame, "end_frame": s.end_frame}
                for s in self.segments
            ],
        }

    def validate(self, frame_count: int) -> None:
        if not self.segments:
            raise GestureSchemaError("metadata declares no segments")
        for seg in self.segments:
            if seg.name not in PHASE_NAMES:
                raise GestureSchemaError(f"unknown segment name {seg.name!r}")
            if seg.start_frame > seg.end_frame:
                raise GestureSchemaError(f"segment {seg.name} has start > end")
        if self.segments[0].start_frame != 0:
            raise GestureSchemaError("first segment must start at frame 0")
        for prev, cur in zip(self.segments, self.segments[1:]):
            if cur.start_frame != prev.end_frame:
                raise GestureSchemaError(
                    f"segments not contiguous: {prev.name} ends at {prev.end_frame}, "
                    f"{cur.name} starts at {cur.start_frame}"
                )
        if self.segments[-1].end_frame != frame_count:
            raise GestureBoundsError(
                f"segments end at {self.segments[-1].end_frame}, clip has {frame_count} frames"
            )
        if not 0 <= self.interacting_frame < frame_count:
            raise GestureBoundsError(
                f"interacting_frame {self.interacting_frame} outside clip of {frame_count} frames"
            )
        for name in self.interacting_joint:
            skeleton.joint_index(name)  # raises UnknownJointError

    def primary_joint(self) -> int:
        return skeleton.joint_index(self.interacting_joint[0]) if self.interacting_joint else WRIST


@dataclass
class GestureClip:
    metadata: GestureMetadata
    frames: np.ndarray  # (n, 21, 3)

    def __len__(self) -> int:
        return int(self.frames.shape[0])

    def phase_at(self, frame: int) -> str:
        frame = min(max(frame, 0), len(self) - 1)
        for seg in self.metadata.segments:
            if seg.start_frame <= frame < seg.end_frame:
                return seg.name
        return self.metadata.segments[-1].name


def phase_range(clip: GestureClip, phase: str) -> tuple[int, int]:
    """[start, end) frame range of a declared phase."""
    for seg in clip.metadata.segments:
        if seg.name == phase:
            return (seg.start_frame, seg.end_frame)
    raise UnknownPhaseError(phase)


def parse_pose_text(text: str) -> np.ndarray:
    """Parse a whitespace/line-delimited stream of 63-number frames."""
    tokens = text.split()
    try:
        values = np.array(tokens, dtype=np.float64)
    except ValueError as exc:
        raise GestureSchemaError(f"pose data is not numeric: {exc}") from exc
    if values.size == 0 or values.size % (JOINT_COUNT * 3) != 0:
        raise GestureSchemaError(
            f"pose data has {values.size} numbers, not a multiple of 63"
        )
    return values.reshape(-1, JOINT_COUNT, 3)


def load_gesture(metadata_doc: dict, pose_data, reference_size: float = 0.09) -> GestureClip:
    """Validate a metadata document against its pose frames and normalize."""
    meta = GestureMetadata.from_dict(metadata_doc)
    if isinstance(pose_data, str):
        frames = parse_pose_text(pose_data)
    else:
        frames = np.asarray(pose_data, dtype=np.float64)
        if frames.ndim == 2 and frames.shape[1] == JOINT_COUNT * 3:
            frames = frames.reshape(-1, JOINT_COUNT, 3)
    if frames.ndim != 3 or frames.shape[1:] != (JOINT_COUNT, 3):
        raise GestureSchemaError(f"pose data has shape {frames.shape}, want (n, 21, 3)")
    if frames.shape[0] == 0:
        raise GestureSchemaError("clip has no frames")
    if not np.all(np.isfinite(frames)):
        raise GestureSchemaError("pose data contains non-finite values")
    meta.validate(frames.shape[0])
    return normalize_clip(GestureClip(meta, frames), reference_size)


def normalize_clip(clip: GestureClip, reference_size: float = 0.09) -> GestureClip:
    """Map a clip into the canonical hand space.

    The first frame's wrist moves to the origin and the whole clip is
    uniformly scaled so the first frame's wrist-to-middle-MCP span equals
    the reference hand size. Clips already in canonical space pass through
    untouched, which keeps normalization idempotent to the bit.
    """
    first = clip.frames[0]
    wrist = first[WRIST]
    span = float(np.linalg.norm(first[MIDDLE_MCP] - wrist))
    if span < 1e-9:
        raise ZeroSpanError(f"clip {clip.metadata.name!r}: wrist and middle MCP coincide")
    scale = reference_size / span
    if not wrist.any() and abs(scale - 1.0) <= 1e-12:
        return GestureClip(clip.metadata, clip.frames.copy())
    frames = (clip.frames - wrist) * scale
    return GestureClip(clip.metadata, frames)


# ---------------------------------------------------------------------------
# Synthetic clips
#
# A neutral right hand: wrist at the origin, fingers pointing forward (-z),
# palm facing down (-y), thumb on the -x side. Wrist to middle MCP is the
# reference 0.09 m, so normalization leaves these clips untouched.
# ---------------------------------------------------------------------------

REST_POSE = np.array([
    [0.000, 0.000, 0.000],    # wrist
    [-0.022, -0.005, -0.030],  # thumb_cmc
    [-0.042, -0.006, -0.055],  # thumb_mcp
    [-0.054, -0.006, -0.075],  # thumb_ip
    [-0.062, -0.006, -0.090],  # thumb_tip
    [-0.025, 0.000, -0.088],   # index_mcp
    [-0.028, 0.000, -0.128],   # index_pip
    [-0.030, 0.000, -0.152],   # index_dip
    [-0.031, 0.000, -0.172],   # index_tip
    [0.000, 0.000, -0.090],    # middle_mcp
    [0.000, 0.000, -0.134],    # middle_pip
    [0.000, 0.000, -0.162],    # middle_dip
    [0.000, 0.000, -0.184],    # middle_tip
    [0.022, 0.000, -0.085],    # ring_mcp
    [0.024, 0.000, -0.127],    # ring_pip
    [0.026, 0.000, -0.152],    # ring_dip
    [0.027, 0.000, -0.170],    # ring_tip
    [0.042, 0.000, -0.078],    # pinky_mcp
    [0.046, 0.000, -0.112],    # pinky_pip
    [0.048, 0.000, -0.130],    # pinky_dip
    [0.049, 0.000, -0.145],    # pinky_tip
], dtype=np.float64)

_FINGER_CHAINS = {
    "thumb": (1, 2, 3, 4),
    "index": (5, 6, 7, 8),
    "middle": (9, 10, 11, 12),
    "ring": (13, 14, 15, 16),
    "pinky": (17, 18, 19, 20),
}
_CURL_FINGERS = ("index", "middle", "ring", "pinky")

# Flexion axis for finger curls (the rest pose's lateral direction) and the
# opposition axis for the thumb (the rest pose's longitudinal direction).
_CURL_AXIS = np.array([-1.0, 0.0, 0.0])
_OPPOSE_AXIS = np.array([0.0, 0.0, 1.0])


def _curl_chain(pose: np.ndarray, chain: tuple[int, ...], angle: float, axis: np.ndarray) -> None:
    if angle == 0.0:
        return
    rot = skeleton.rotation_matrix(axis, angle)
    for i in range(len(chain) - 1):
        pivot = pose[chain[i]].copy()
        rest = list(chain[i + 1:])
        pose[rest] = (pose[rest] - pivot) @ rot.T + pivot


def _hand_frame(curl: float = 0.0, oppose: float = 0.0, offset=(0.0, 0.0, 0.0),
                curl_angle: float = 0.8, oppose_angle: float = 0.6) -> np.ndarray:
    pose = REST_POSE.copy()
    for finger in _CURL_FINGERS:
        _curl_chain(pose, _FINGER_CHAINS[finger], curl * curl_angle, _CURL_AXIS)
    if oppose:
        _curl_chain(pose, _FINGER_CHAINS["thumb"], oppose * oppose_angle, _OPPOSE_AXIS)
    return pose + np.asarray(offset, dtype=np.float64)


def _ramp(k: int, k0: int, k1: int, v0: float, v1: float) -> float:
    if k1 <= k0 or k <= k0:
        return v0
    if k >= k1:
        return v1
    return v0 + (v1 - v0) * (k - k0) / (k1 - k0)


def _scaled_marks(n: int, default_n: int, marks: tuple[int, ...]) -> list[int]:
    out = [int(round(m * n / default_n)) for m in marks]
    out[0] = 0
    out[-1] = n
    for i in range(1, len(out)):
        out[i] = max(out[i], out[i - 1] + 1) if out[i] != n else out[i]
    return out


def _segments(bounds: list[int]) -> list[GestureSegment]:
    names = PHASE_NAMES[: len(bounds) - 1]
    return [GestureSegment(name, bounds[i], bounds[i + 1]) for i, name in enumerate(names)]


def _meta(name: str, segments: list[GestureSegment], interacting_frame: int,
          joints: list[str], hold_at_peak: bool = False, static: bool = False) -> GestureMetadata:
    return GestureMetadata(
        name=name,
        right_hand_data_file=f"{name}.txt",
        is_hold_at_peak=hold_at_peak,
        is_static=static,
        interacting_frame=interacting_frame,
        interacting_joint=list(joints),
        segments=segments,
    )


def _pinch_like(name: str, n: int, default_n: int, marks: tuple[int, ...], peak_ratio: float,
                joints: list[str]) -> GestureClip:
    # Thumb tip and index tip converge along their rest separation, which
    # keeps the tip distance strictly decreasing up to the peak frame.
    b = _scaled_marks(n, default_n, marks)
    peak = min(max(int(round(peak_ratio * n)), b[1]), b[2] - 1)
    i_rest = REST_POSE[skeleton.INDEX_TIP]
    t_rest = REST_POSE[skeleton.THUMB_TIP]
    meet = (i_rest + t_rest) / 2.0
    sep = t_rest - i_rest
    unit = sep / np.linalg.norm(sep)
    d_index = (meet - 0.004 * unit) - i_rest
    d_thumb = (meet + 0.004 * unit) - t_rest
    index_w = {8: 1.0, 7: 0.65, 6: 0.3, 5: 0.05}
    thumb_w = {4: 1.0, 3: 0.7, 2: 0.35, 1: 0.1}
    frames = np.empty((n, JOINT_COUNT, 3))
    for k in range(n):
        c = min(k / peak, 1.0) if peak > 0 else 1.0
        if k > peak:
            c = 1.0 - 0.8 * (k - peak) / max(n - 1 - peak, 1)
        pose = REST_POSE.copy()
        for j, w in index_w.items():
            pose[j] += c * w * d_index
        for j, w in thumb_w.items():
            pose[j] += c * w * d_thumb
        frames[k] = pose
    return GestureClip(_meta(name, _segments(b), peak, joints, hold_at_peak=True), frames)


def _curl_clip(name: str, n: int, default_n: int, marks: tuple[int, ...], peak_ratio: float,
               curl_angle: float, oppose_angle: float, joints: list[str],
               hold_at_peak: bool, thrust: float = 0.0, release_to: float = 0.1) -> GestureClip:
    b = _scaled_marks(n, default_n, marks)
    peak = min(max(int(round(peak_ratio * n)), b[1]), b[2] - 1)
    frames = np.empty((n, JOINT_COUNT, 3))
    for k in range(n):
        if k <= peak:
            c = k / peak if peak > 0 else 1.0
        else:
            c = 1.0 - (1.0 - release_to) * (k - peak) / max(n - 1 - peak, 1)
        push = _ramp(k, b[1], peak, 0.0, thrust) if k <= peak else _ramp(k, peak, n - 1, thrust, 0.0)
        frames[k] = _hand_frame(curl=c, oppose=c, offset=(0.0, 0.0, -push),
                                curl_angle=curl_angle, oppose_angle=oppose_angle)
    return GestureClip(_meta(name, _segments(b), peak, joints, hold_at_peak=hold_at_peak), frames)


def _translating_clip(name: str, n: int, default_n: int, marks: tuple[int, ...],
                      interacting_ratio: float, path, joints: list[str],
                      curl: float = 0.0, oppose: float = 0.0) -> GestureClip:
    b = _scaled_marks(n, default_n, marks)
    peak = min(max(int(round(interacting_ratio * n)), b[1]), b[2] - 1)
    frames = np.empty((n, JOINT_COUNT, 3))
    for k in range(n):
        frames[k] = _hand_frame(curl=curl, oppose=oppose, offset=path(k, b, peak, n))
    return GestureClip(_meta(name, _segments(b), peak, joints), frames)


def _point_clip(n: int) -> GestureClip:
    b = _scaled_marks(n, 40, (0, 12, 28, 40))
    peak = min(max(int(round(27 * n / 40)), b[1]), b[2] - 1)
    frames = np.empty((n, JOINT_COUNT, 3))
    for k in range(n):
        fold = _ramp(k, 0, b[1] - 1, 0.0, 1.0)
        if k <= peak:
            poke = _ramp(k, b[1], peak, 0.0, 0.04)
        else:
            poke = _ramp(k, peak, n - 1, 0.04, 0.0)
        pose = REST_POSE.copy()
        for finger in ("middle", "ring", "pinky"):
            _curl_chain(pose, _FINGER_CHAINS[finger], fold * 0.85, _CURL_AXIS)
        _curl_chain(pose, _FINGER_CHAINS["thumb"], fold * 0.5, _OPPOSE_AXIS)
        frames[k] = pose + (0.0, 0.0, -poke)
    return GestureClip(_meta("point", _segments(b), peak, ["index_tip"]), frames)


def _open_hand_clip(n: int) -> GestureClip:
    b = _scaled_marks(n, 24, (0, 4, 18, 24))
    peak = b[2] if b[2] < n else n - 1
    frames = np.empty((n, JOINT_COUNT, 3))
    for k in range(n):
        c = _ramp(k, 0, max(b[2] - 1, 1), 0.6, 0.0)
        frames[k] = _hand_frame(curl=c, oppose=c * 0.7)
    return GestureClip(_meta("open_hand", _segments(b), peak, ["wrist"]), frames)


def _thumb_clip(name: str, up: bool) -> GestureClip:
    pose = _hand_frame(curl=1.0, oppose=0.0, curl_angle=1.0)
    sign = 1.0 if up else -1.0
    pose[1] = (-0.022, sign * 0.004, -0.032)
    pose[2] = (-0.024, sign * 0.030, -0.033)
    pose[3] = (-0.025, sign * 0.050, -0.034)
    pose[4] = (-0.026, sign * 0.068, -0.035)
    meta = _meta(name, [GestureSegment("stroke", 0, 1)], 0, ["wrist"], static=True)
    return GestureClip(meta, pose[None, :, :].copy())


def synth_gesture(gesture: str, frames: int | None = None) -> GestureClip:
    """Procedurally generate a clip for one of the built-in gestures.

    Output is deterministic for a given (gesture, frames) pair. Clips come
    out already in canonical hand space.
    """
    if gesture not in GESTURE_IDS:
        raise UnknownGestureError(gesture)

    if gesture == "pinch":
        n = frames or 36
        return _pinch_like("pinch", n, 36, (0, 6, 24, 36), 23 / 36, ["index_tip", "thumb_tip"])
    if gesture == "grab":
        n = frames or 36
        return _curl_clip("grab", n, 36, (0, 8, 24, 36), 23 / 36, 0.8, 0.6,
                          ["middle_mcp"], hold_at_peak=True)
    if gesture == "punch":
        n = frames or 40
        return _curl_clip("punch", n, 40, (0, 14, 27, 40), 26 / 40, 1.0, 0.8,
                          ["middle_mcp"], hold_at_peak=False, thrust=0.15, release_to=0.2)
    if gesture == "squeeze":
        n = frames or 40
        return _curl_clip("squeeze", n, 40, (0, 10, 27, 40), 26 / 40, 0.85, 0.7,
                          ["middle_mcp"], hold_at_peak=False, release_to=0.2)
    if gesture == "point":
        return _point_clip(frames or 40)
    if gesture == "open_hand":
        return _open_hand_clip(frames or 24)
    if gesture == "push":
        n = frames or 44

        def push_path(k, b, peak, total):
            if k <= peak:
                return (0.0, 0.0, -_ramp(k, b[1], peak, 0.0, 0.12))
            return (0.0, 0.0, -_ramp(k, peak, total - 1, 0.12, 0.0))

        return _translating_clip("push", n, 44, (0, 10, 30, 44), 29 / 44, push_path,
                                 ["middle_mcp"])
    if gesture == "swipe":
        n = frames or 40

        def swipe_path(k, b, peak, total):
            if k < b[1]:
                return (_ramp(k, 0, b[1], 0.0, 0.05), 0.0, 0.0)
            if k < b[2]:
                return (_ramp(k, b[1], b[2] - 1, 0.05, -0.12), 0.0, 0.0)
            return (_ramp(k, b[2], total - 1, -0.12, 0.0), 0.0, 0.0)

        return _translating_clip("swipe", n, 40, (0, 8, 30, 40), 20 / 40, swipe_path, ["wrist"])
    if gesture == "cut":
        n = frames or 200

        def cut_path(k, b, peak, total):
            if k < b[1]:
                return (0.0, _ramp(k, 0, b[1] - 1, 0.0, 0.06), 0.0)
            if k < b[2]:
                return (0.0, _ramp(k, b[1], b[2] - 1, 0.06, -0.10), 0.0)
            return (0.0, _ramp(k, b[2], total - 1, -0.10, 0.0), 0.0)

        return _translating_clip("cut", n, 200, (0, 58, 123, 200), 81 / 200, cut_path,
                                 ["pinky_mcp"])
    if gesture == "thumb_up":
        return _thumb_clip("thumb_up", up=True)
    return _thumb_clip("thumb_down", up=False)


class GestureLibrary:
    """Immutable-after-build registry of clips keyed by gesture name."""

    def __init__(self) -> None:
        self._clips: dict[str, GestureClip] = {}

    def register(self, clip: GestureClip) -> None:
        self._clips[clip.metadata.name] = clip

    def get(self, name: str) -> GestureClip:
        try:
            return self._clips[name]
        except KeyError:
            raise UnknownGestureError(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._clips

    def names(self) -> list[str]:
        return sorted(self._clips)


def build_default_library(reference_size: float = 0.09) -> GestureLibrary:
    """Synthesize and register one clip for every built-in gesture."""
    library = GestureLibrary()
    for gesture in GESTURE_IDS:
        clip = normalize_clip(synth_gesture(gesture), reference_size)
        clip.metadata.validate(len(clip))
        library.register(clip)
    return library


def write_bundle(library: GestureLibrary, root: str | Path) -> None:
    """Write a library as a bundle directory (meta.json + pose text files)."""
    root = Path(root)
    for name in library.names():
        clip = library.get(name)
        gesture_dir = root / name
        gesture_dir.mkdir(parents=True, exist_ok=True)
        (gesture_dir / "meta.json").write_text(
            json.dumps(clip.metadata.to_dict(), indent=2) + "\n"
        )
        flat = clip.frames.reshape(len(clip), -1)
        lines = [" ".join(repr(float(v)) for v in row) for row in flat]
        (gesture_dir / clip.metadata.right_hand_data_file).write_text("\n".join(lines) + "\n")


def load_bundle(root: str | Path, reference_size: float = 0.09) -> GestureLibrary:
    """Load every gesture subdirectory under a bundle root."""
    root = Path(root)
    library = GestureLibrary()
    for meta_path in sorted(root.glob("*/meta.json")):
        doc = json.loads(meta_path.read_text())
        data_file = meta_path.parent / doc.get("right_hand_data_file", "")
        if not data_file.is_file():
            raise GestureSchemaError(f"{meta_path.parent.name}: pose data file missing")
        clip = load_gesture(doc, data_file.read_text(), reference_size)
        library.register(clip)
    return library

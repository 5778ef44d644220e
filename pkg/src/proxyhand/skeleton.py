"""21-joint hand pose model and rigid-motion math.

A pose is a float64 numpy array of shape (21, 3), meters, in a right-handed
y-up frame. Joint order is fixed: wrist, then four joints per digit
(thumb CMC/MCP/IP/tip, then MCP/PIP/DIP/tip for index, middle, ring, pinky).
The wire form of a pose is the same 63 numbers flattened in joint order,
x, y, z interleaved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

JOINT_NAMES = (
    "wrist",
    "thumb_cmc", "thumb_mcp", "thumb_ip", "thumb_tip",
    "index_mcp", "index_pip", "index_dip", "index_tip",
    "middle_mcp", "middle_pip", "middle_dip", "middle_tip",
    "ring_mcp", "ring_pip", "ring_dip", "ring_tip",
    "pinky_mcp", "pinky_pip", "pinky_dip", "pinky_tip",
)
JOINT_COUNT = len(JOINT_NAMES)  # 21

_NAME_TO_INDEX = {name: i for i, name in enumerate(JOINT_NAMES)}

WRIST = 0
THUMB_TIP = _NAME_TO_INDEX["thumb_tip"]
INDEX_MCP = _NAME_TO_INDEX["index_mcp"]
INDEX_TIP = _NAME_TO_INDEX["index_tip"]
MIDDLE_MCP = _NAME_TO_INDEX["middle_mcp"]
PINKY_MCP = _NAME_TO_INDEX["pinky_mcp"]

# Rotation kinds map onto the hand frame: pan turns about the normal,
# roll about the longitudinal axis, tilt about the lateral axis.
# "left"/"up" are positive angles by the right-hand rule.
ROTATION_KINDS = {
    "pan_left": ("normal", 1.0),
    "pan_right": ("normal", -1.0),
    "roll_left": ("longitudinal", 1.0),
    "roll_right": ("longitudinal", -1.0),
    "tilt_up": ("lateral", 1.0),
    "tilt_down": ("lateral", -1.0),
}


class UnknownJointError(KeyError):
    """Raised for a joint name outside the canonical 21."""


class DegeneratePoseError(ValueError):
    """Raised when the wrist and MCP markers are too close to define axes."""


def joint_index(name: str) -> int:
    """Return the fixed index of a canonical joint name."""
    try:
        return _NAME_TO_INDEX[name]
    except KeyError:
        raise UnknownJointError(name) from None


def validate_pose(pose: np.ndarray) -> np.ndarray:
    """Coerce to a (21, 3) float64 array and reject non-finite coordinates."""
    arr = np.asarray(pose, dtype=np.float64)
    if arr.shape != (JOINT_COUNT, 3):
        raise ValueError(f"pose must have shape (21, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("pose contains non-finite coordinates")
    return arr


def pose_to_flat(pose: np.ndarray) -> list[float]:
    """Flatten a pose to the 63-number wire list (joint order, xyz interleaved)."""
    return [float(v) for v in np.asarray(pose, dtype=np.float64).reshape(-1)]


def pose_from_flat(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size != JOINT_COUNT * 3:
        raise ValueError(f"expected 63 values, got {arr.size}")
    return validate_pose(arr.reshape(JOINT_COUNT, 3))


@dataclass(frozen=True)
class HandAxes:
    """Orthonormal hand frame estimated from wrist and MCP markers."""

    lateral: np.ndarray       # middle MCP toward index MCP, orthogonalized
    longitudinal: np.ndarray  # middle MCP toward wrist
    normal: np.ndarray        # lateral x longitudinal

    def axis(self, name: str) -> np.ndarray:
        return getattr(self, name)


def hand_axes(pose: np.ndarray) -> HandAxes:
    """Estimate the hand's rotation frame from a pose.

    The longitudinal direction (middle MCP to wrist) is kept exact; the
    lateral direction (middle MCP to index MCP) is Gram-Schmidt projected
    against it so the returned frame is orthonormal, and the normal is
    their cross product.
    """
    pose = np.asarray(pose, dtype=np.float64)
    middle = pose[MIDDLE_MCP]
    lateral = pose[INDEX_MCP] - middle
    longitudinal = pose[WRIST] - middle

    lat_norm = np.linalg.norm(lateral)
    long_norm = np.linalg.norm(longitudinal)
    if lat_norm <= 1e-6 or long_norm <= 1e-6 or np.linalg.norm(pose[INDEX_MCP] - pose[WRIST]) <= 1e-6:
        raise DegeneratePoseError("wrist / index-MCP / middle-MCP markers coincide")

    longitudinal = longitudinal / long_norm
    lateral = lateral - np.dot(lateral, longitudinal) * longitudinal
    lat_norm = np.linalg.norm(lateral)
    if lat_norm <= 1e-9:
        raise DegeneratePoseError("wrist and MCP markers are collinear")
    lateral = lateral / lat_norm
    normal = np.cross(lateral, longitudinal)
    return HandAxes(lateral=lateral, longitudinal=longitudinal, normal=normal)


def translate_pose(pose: np.ndarray, delta) -> np.ndarray:
    """Move every joint by the same delta vector."""
    delta = np.asarray(delta, dtype=np.float64)
    if not np.all(np.isfinite(delta)):
        raise ValueError("delta must be finite")
    return np.asarray(pose, dtype=np.float64) + delta


def rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix about a unit axis (Rodrigues form)."""
    x, y, z = axis
    c = np.cos(angle)
    s = np.sin(angle)
    t = 1.0 - c
    return np.array([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])


def rotate_pose(pose: np.ndarray, rotation: str, angle: float) -> np.ndarray:
    """Rotate a pose about one of its own hand axes, pivoting at the wrist."""
    if rotation not in ROTATION_KINDS:
        raise ValueError(f"unknown rotation kind: {rotation!r}")
    pose = np.asarray(pose, dtype=np.float64)
    axis_name, sign = ROTATION_KINDS[rotation]
    axes = hand_axes(pose)
    rot = rotation_matrix(axes.axis(axis_name), sign * angle)
    wrist = pose[WRIST]
    return (pose - wrist) @ rot.T + wrist


def pairwise_distances(pose: np.ndarray) -> np.ndarray:
    """All C(21, 2) inter-joint distances, in a fixed order."""
    pose = np.asarray(pose, dtype=np.float64)
    diffs = pose[:, None, :] - pose[None, :, :]
    dists = np.sqrt((diffs ** 2).sum(axis=-1))
    iu = np.triu_indices(JOINT_COUNT, k=1)
    return dists[iu]

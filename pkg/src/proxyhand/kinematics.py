"""Motion planning: turn clips and goals into executable pose sequences.

Plans are immutable frame arrays the controller steps through. Reach plans
spread a target offset linearly across the frames leading up to a clip's
interacting frame and keep the full offset afterwards, so the interacting
joint lands on the target exactly when the gesture makes contact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_CONFIG, EngineConfig
from .gestures import GestureClip
from .skeleton import WRIST, rotate_pose

DIRECTION_VECTORS = {
    "up": np.array([0.0, 1.0, 0.0]),
    "down": np.array([0.0, -1.0, 0.0]),
    "left": np.array([-1.0, 0.0, 0.0]),
    "right": np.array([1.0, 0.0, 0.0]),
    "forward": np.array([0.0, 0.0, -1.0]),
    "backward": np.array([0.0, 0.0, 1.0]),
}


@dataclass
class MotionPlan:
    frames: np.ndarray                 # (n, 21, 3)
    interacting_frame: int             # plan index where contact happens
    preview_path: np.ndarray           # (m, 3) waypoints for UI arrows
    hold_frame: int | None = None      # pin playback here until released
    lead_in: int = 0                   # frames prepended before clip frame 0
    contact_joint: int = WRIST

    def __len__(self) -> int:
        return int(self.frames.shape[0])

    def clip_frame(self, plan_frame: int, clip_len: int) -> int:
        return min(max(plan_frame - self.lead_in, 0), clip_len - 1)


def _preview(frames: np.ndarray, joint: int, stride: int) -> np.ndarray:
    path = frames[:, joint, :]
    if len(path) == 1 or np.linalg.norm(path[-1] - path[0]) <= 1e-6:
        return path[:1].copy()
    idx = list(range(0, len(path) - 1, max(stride, 1))) + [len(path) - 1]
    return path[idx].copy()


def plan_reach(clip: GestureClip, current: np.ndarray, target: np.ndarray | None,
               config: EngineConfig = DEFAULT_CONFIG, hold: bool = False) -> MotionPlan:
    """Play a clip from the current wrist location, steered onto a target.

    The clip is re-anchored at the current wrist. With a target, the offset
    needed to put the interacting joint on the target at the interacting
    frame is split into equal per-frame steps and accumulated over the
    frames before contact; every later frame keeps the full offset, so the
    hand stays at the object. A clip whose contact happens on frame 0 gets
    a straight-line approach prepended instead.
    """
    current = np.asarray(current, dtype=np.float64)
    joint = clip.metadata.primary_joint()
    anchor = current[WRIST] - clip.frames[0][WRIST]
    base = clip.frames + anchor
    n_interact = clip.metadata.interacting_frame
    lead_in = 0

    if target is None:
        frames = base.copy()
    else:
        target = np.asarray(target, dtype=np.float64)
        offset = target - base[n_interact][joint]
        if n_interact == 0:
            approach_goal = current[joint] + offset
            approach = plan_move_to(current, approach_goal, config, joint=joint)
            frames = np.concatenate([approach.frames, base + offset])
            lead_in = len(approach.frames)
        else:
            steps = np.minimum(np.arange(len(base)), n_interact)[:, None] * (offset / n_interact)
            frames = base + steps[:, None, :]

    plan_interact = lead_in + n_interact
    hold_frame = None
    if clip.metadata.is_hold_at_peak:
        # Grip gestures keep the grip: stop at contact, skip the retraction.
        frames = frames[: plan_interact + 1]
    elif hold:
        hold_frame = plan_interact

    return MotionPlan(
        frames=frames,
        interacting_frame=plan_interact,
        preview_path=_preview(frames, joint, config.preview_stride),
        hold_frame=hold_frame,
        lead_in=lead_in,
        contact_joint=joint,
    )


def plan_move_to(current: np.ndarray, goal: np.ndarray,
                 config: EngineConfig = DEFAULT_CONFIG, joint: int = WRIST) -> MotionPlan:
    """Straight-line plan carrying the anchor joint onto the goal point."""
    current = np.asarray(current, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    offset = goal - current[joint]
    distance = float(np.linalg.norm(offset))
    step = config.hand_speed / config.fps
    n = max(math.ceil(distance / step), 1)
    fractions = (np.arange(1, n + 1) / n)[:, None, None]
    frames = current[None, :, :] + offset[None, None, :] * fractions
    return MotionPlan(
        frames=frames,
        interacting_frame=n - 1,
        preview_path=_preview(frames, joint, config.preview_stride),
        contact_joint=joint,
    )


def plan_translation(current: np.ndarray, direction: str, distance: float,
                     config: EngineConfig = DEFAULT_CONFIG, joint: int = WRIST) -> MotionPlan:
    vec = DIRECTION_VECTORS[direction]
    goal = np.asarray(current, dtype=np.float64)[joint] + vec * distance
    return plan_move_to(current, goal, config, joint=joint)


def plan_rotation(current: np.ndarray, rotation: str, span: float,
                  config: EngineConfig = DEFAULT_CONFIG) -> MotionPlan:
    """Incremental rotation about the hand's own (re-estimated) axes."""
    per_frame = config.rotation_speed / config.fps
    n = max(math.ceil(span / per_frame), 1)
    frames = np.empty((n,) + current.shape)
    pose = np.asarray(current, dtype=np.float64)
    remaining = span
    for k in range(n):
        angle = min(per_frame, remaining)
        pose = rotate_pose(pose, rotation, angle)
        frames[k] = pose
        remaining -= angle
    return MotionPlan(
        frames=frames,
        interacting_frame=n - 1,
        preview_path=_preview(frames, WRIST, config.preview_stride),
        contact_joint=WRIST,
    )


def apply_translation(current: np.ndarray, direction, speed: float, dt: float) -> np.ndarray:
    """One integration step of continuous translation."""
    if speed < 0:
        raise ValueError("speed must be non-negative")
    vec = DIRECTION_VECTORS[direction] if isinstance(direction, str) else np.asarray(direction)
    return np.asarray(current, dtype=np.float64) + vec * (speed * dt)


def apply_rotation(current: np.ndarray, rotation: str, angular_speed: float, dt: float) -> np.ndarray:
    """One integration step of continuous rotation about the current axes."""
    if dt == 0.0 or angular_speed == 0.0:
        return np.asarray(current, dtype=np.float64).copy()
    return rotate_pose(current, rotation, angular_speed * dt)

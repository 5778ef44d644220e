"""Engine-wide tunables, collected in one place so tests and the CLI agree."""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class EngineConfig:
    # Playback
    fps: int = 60
    speed_step: float = 1.5          # multiplier applied per faster/slower command
    speed_min: float = 0.25
    speed_max: float = 4.0

    # Hand motion
    hand_speed: float = 0.25         # m/s for translations and reach approaches
    rotation_speed: float = math.radians(120.0)  # rad/s for continuous rotation
    default_travel: float = 0.5      # m, span of an open-ended "move left" style command
    default_twist: float = math.pi / 2  # rad, span of an open-ended twist command

    # Hand geometry
    reference_hand_size: float = 0.09  # m, wrist to middle-MCP after normalization

    # Scene interaction
    clearance: float = 0.05          # m, gap used by relative placement offsets
    contact_radius: float = 0.015    # m, collision sphere around the interacting joint
    slider_travel: float = 0.2       # m of hand motion covering the full slider range
    knob_min: float = -math.pi
    knob_max: float = math.pi

    # History
    history_depth: int = 64          # undo/redo checkpoints
    command_history: int = 50        # retained parsed commands for "do it again"

    # Motion-plan previews
    preview_stride: int = 8          # frames between preview waypoints

    # External interpreter backend
    backend_timeout: float = 5.0     # s


DEFAULT_CONFIG = EngineConfig()

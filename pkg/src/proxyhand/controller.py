"""The hand-state engine.

Owns the one mutable copy of the hand and scene. Instruction lists queue
FIFO and execute step by step at a fixed tick; playback-control messages
arrive on a priority channel drained before anything else each tick, so a
"stop" freezes the very next frame. Completed commands checkpoint
(pose, scene, held binding) onto a bounded history for undo/redo.

Everything here is synchronous and deterministic: the server and the
headless harness drive ticks and deliver messages, nothing inside reads
wall-clock time except through the injected clock.
"""
from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import kinematics, skeleton
from .config import DEFAULT_CONFIG, EngineConfig
from .gestures import REST_POSE, GestureClip, GestureLibrary, build_default_library
from .instructions import (GestureStep, InstructionList, MovementStep, Step,
                           TemporalStep)
from .kinematics import MotionPlan
from .scene import Binding, HandContact, Scene, SceneObject
from .skeleton import WRIST

FEEDBACK_KINDS = ("recognized_text", "active_command", "error_retry",
                  "disambiguation_labels", "path_preview")


@dataclass(frozen=True)
class FeedbackEvent:
    kind: str
    payload: object

    def to_dict(self) -> dict:
        return {"kind": self.kind, "payload": self.payload}


@dataclass(frozen=True)
class Frame:
    seq: int
    ts_ms: int
    pose: np.ndarray

    def flat(self) -> list[float]:
        return skeleton.pose_to_flat(self.pose)


@dataclass
class TickResult:
    frame: Frame
    feedback: list[FeedbackEvent]
    interactions: list


@dataclass
class _Checkpoint:
    pose: np.ndarray
    scene_snap: dict
    held: Binding | None
    holding: bool


@dataclass
class _ActiveStep:
    plan: MotionPlan
    step: Step
    gesture: str | None = None
    clip: GestureClip | None = None
    fired_contact: bool = False
    hold_consumed: bool = False


@dataclass
class _Parked:
    instruction_list: InstructionList
    step_index: int
    step: Step
    candidates: tuple[str, ...]


class Engine:
    """Single-owner hand/scene state machine driven by tick()."""

    def __init__(self, scene: Scene, library: GestureLibrary | None = None,
                 config: EngineConfig = DEFAULT_CONFIG, clock=None) -> None:
        self.config = config
        self.scene = scene
        self.library = library or build_default_library(config.reference_hand_size)
        self.clock = clock or time.monotonic

        self.pose = REST_POSE + np.array([0.0, 1.0, -0.1])

        self.status = "idle"  # idle | playing | paused | holding
        self.speed_factor = 1.0
        self.cursor = 0.0

        self.queue: deque[InstructionList] = deque()
        self._preempt_inbox: deque[TemporalStep] = deque()
        self._submit_inbox: deque[InstructionList] = deque()

        self.active_list: InstructionList | None = None
        self.step_index = 0
        self.active: _ActiveStep | None = None
        self.parked: _Parked | None = None
        self.held: Binding | None = None

        self.history: list[_Checkpoint] = []
        self.redo_stack: list[_Checkpoint] = []
        self._push_checkpoint()

        self.frame_seq = 0
        self._last_ts_ms = 0
        self._feedback: list[FeedbackEvent] = []
        self.event_log: list[tuple[str, str]] = []
        self._last_completed: list[Step] | None = None

    # ------------------------------------------------------------------
    # Inbound messages (callable from any producer; applied on the tick)
    # ------------------------------------------------------------------

    def submit(self, instruction_list: InstructionList) -> None:
        """Queue a parsed command; rejects rather than executes bad input."""
        if instruction_list.disposition == "irrelevant":
            self.event_log.append(("ignored", instruction_list.note))
            return
        if instruction_list.disposition == "uninterpretable":
            self.event_log.append(("rejected", instruction_list.note))
            self._emit("error_retry", instruction_list.note
                       or "could not interpret the command; please rephrase")
            return
        self._submit_inbox.append(instruction_list)

    def preempt(self, control: TemporalStep) -> None:
        """High-priority playback control; drained before the next frame."""
        self._preempt_inbox.append(control)

    def resolve_disambiguation(self, number: int) -> None:
        if self.parked is None:
            self._emit("error_retry", "nothing to disambiguate")
            return
        parked = self.parked
        if not 1 <= number <= len(parked.candidates):
            self._emit("error_retry",
                       f"no option {number}; choose 1-{len(parked.candidates)}")
            return
        self.parked = None
        chosen = parked.candidates[number - 1]
        self.event_log.append(("disambiguated", chosen))
        self.active_list = parked.instruction_list
        self.step_index = parked.step_index
        self._begin_step(parked.step, forced_target=chosen)

    def recognized(self, text: str) -> None:
        self._emit("recognized_text", text)

    # ------------------------------------------------------------------
    # The tick
    # ------------------------------------------------------------------

    def tick(self, dt: float | None = None) -> TickResult:
        dt = (1.0 / self.config.fps) if dt is None else dt

        while self._preempt_inbox:
            self._apply_preempt(self._preempt_inbox.popleft())
        while self._submit_inbox:
            self._enqueue(self._submit_inbox.popleft())

        self._advance_pipeline()

        emitted_pose = self._emit_pose()
        contact = self._contact_for(emitted_pose)
        interactions, self.held = self.scene.step_interactions(emitted_pose, contact, self.held)
        for event in interactions:
            self.event_log.append((type(event).__name__, getattr(event, "object_id", "")))

        self.pose = emitted_pose

        if self.status == "playing" and self.active is not None:
            self._advance_cursor(dt)

        ts = max(int(self.clock() * 1000.0), self._last_ts_ms)
        self._last_ts_ms = ts
        frame = Frame(self.frame_seq, ts, self.pose.copy())
        self.frame_seq += 1
        feedback, self._feedback = self._feedback, []
        return TickResult(frame, feedback, interactions)

    # -- queue / step plumbing -------------------------------------------

    def _enqueue(self, instruction_list: InstructionList) -> None:
        if self.parked is not None:
            # The user moved on; the parked instruction is abandoned.
            self.event_log.append(("parked_cancelled",
                                   self.parked.instruction_list.source.raw_text
                                   if self.parked.instruction_list.source else ""))
            self.parked = None
        self.queue.append(instruction_list)
        self.event_log.append(("enqueued", instruction_list.source.raw_text
                               if instruction_list.source else ""))

    def _advance_pipeline(self) -> None:
        """Pull work until something is active, parked, pinned, or empty."""
        while True:
            if self.status in ("paused", "holding") or self.parked is not None:
                if self.status == "holding" and self.parked is None \
                        and self._queue_front_releases():
                    # A release command lifts the pin; the rest of the pinned
                    # clip is abandoned in favor of the open-hand gesture.
                    self.active = None
                    self.status = "idle"
                    if self.active_list is not None:
                        self.step_index += 1
                    continue
                return
            if self.active is not None:
                return
            if self.active_list is not None and self.step_index < len(self.active_list.steps):
                step = self.active_list.steps[self.step_index]
                self._begin_step(step)
                if self.active is None and self.parked is None \
                        and self.active_list is not None:
                    continue  # temporal step consumed inline
                return
            if self.active_list is not None:
                self._complete_list()
                continue
            if self.queue:
                self.active_list = self.queue.popleft()
                self.step_index = 0
                if self.active_list.source is not None:
                    self._emit("active_command", self.active_list.source.raw_text)
                continue
            if self.status == "playing":
                self.status = "idle"
            return

    def _queue_front_releases(self) -> bool:
        if not self.queue:
            return False
        steps = self.queue[0].steps
        return bool(steps) and isinstance(steps[0], GestureStep) \
            and steps[0].gesture == "open_hand"

    def _complete_list(self) -> None:
        done = self.active_list
        self.active_list = None
        self.step_index = 0
        self.active = None
        if self.status == "playing":
            self.status = "idle"
        if done is not None:
            self.event_log.append(("completed", done.source.raw_text if done.source else ""))
            self._last_completed = [s for s in done.steps
                                    if not isinstance(s, TemporalStep)]
            self._push_checkpoint()
            self.redo_stack.clear()

    def _begin_step(self, step: Step, forced_target: str | None = None) -> None:
        if isinstance(step, TemporalStep):
            self.step_index += 1
            if step.control == "repeat":
                self._apply_repeat(step)
            else:
                self._apply_preempt(step)
            return
        try:
            if isinstance(step, GestureStep):
                self._begin_gesture(step, forced_target)
            else:
                self._begin_movement(step, forced_target)
        except Exception as exc:  # freeze and report, never crash the loop
            self.event_log.append(("fault", repr(exc)))
            self._emit("error_retry", f"internal fault: {exc}")
            self._abort_active_list()

    def _resolve_step_target(self, query: str, constraints, forced_target: str | None):
        if forced_target is not None:
            return self.scene.get(forced_target)
        res = self.scene.resolve_target(query, list(constraints),
                                        reference=self.pose[WRIST])
        if res.outcome == "unique":
            return self.scene.get(res.object_id)
        if res.outcome == "ambiguous":
            labels = [(oid, i + 1) for i, oid in enumerate(res.candidates)]
            self._emit("disambiguation_labels", labels)
            self.parked = _Parked(self.active_list, self.step_index,
                                  self._current_step(), res.candidates)
            self.event_log.append(("parked", query))
            self.active_list = None
            self.active = None
            self.status = "idle"
            return None
        self._emit("error_retry", f"no object matching {query!r}")
        self._abort_active_list()
        return None

    def _current_step(self) -> Step:
        return self.active_list.steps[self.step_index]

    def _begin_gesture(self, step: GestureStep, forced_target: str | None) -> None:
        clip = self.library.get(step.gesture)
        target_point = None
        if step.object is not None:
            obj = self._resolve_step_target(step.object, step.constraints, forced_target)
            if obj is None:
                return
            target_point = obj.position.copy()
        plan = kinematics.plan_reach(clip, self.pose, target_point,
                                     self.config, hold=step.hold)
        self._install_plan(plan, step, gesture=step.gesture, clip=clip)

    def _begin_movement(self, step: MovementStep, forced_target: str | None) -> None:
        anchor_joint = self.held.joint if self.held is not None else WRIST
        if step.movement == "rotational":
            span = self.config.default_twist
            plan = kinematics.plan_rotation(self.pose, step.rotation, span, self.config)
        elif step.object is not None:
            obj = self._resolve_step_target(step.object, step.constraints, forced_target)
            if obj is None:
                return
            goal = self._movement_goal(obj, step.position)
            plan = kinematics.plan_move_to(self.pose, goal, self.config, joint=anchor_joint)
        else:
            distance = self._movement_distance()
            plan = kinematics.plan_translation(self.pose, step.direction, distance,
                                               self.config, joint=anchor_joint)
        self._install_plan(plan, step)

    def _movement_goal(self, obj: SceneObject, position: str | None) -> np.ndarray:
        carrying = (self.held is not None
                    and self.scene.get(self.held.object_id).affordance == "grabbable")
        if obj.affordance == "container" and carrying:
            # Containers capture at their center so a release drops inside.
            return obj.position.copy()
        return self.scene.relative_position(obj, position or "on_top_of")

    def _movement_distance(self) -> float:
        if self.held is not None:
            held_obj = self.scene.get(self.held.object_id)
            if held_obj.affordance == "slider":
                return self.config.slider_travel
        return self.config.default_travel

    def _install_plan(self, plan: MotionPlan, step: Step, gesture: str | None = None,
                      clip: GestureClip | None = None) -> None:
        self.active = _ActiveStep(plan, step, gesture=gesture, clip=clip)
        self.cursor = 0.0
        self.status = "playing"
        if len(plan.preview_path) >= 2:
            self._emit("path_preview",
                       [[float(v) for v in pt] for pt in plan.preview_path])

    # -- frame emission ----------------------------------------------------

    def _emit_pose(self) -> np.ndarray:
        if self.active is None:
            return self.pose
        idx = min(int(self.cursor), len(self.active.plan) - 1)
        return self.active.plan.frames[idx].copy()

    def _advance_cursor(self, dt: float) -> None:
        active = self.active
        self.cursor += self.speed_factor * dt * self.config.fps
        plan = active.plan
        if not active.fired_contact and int(self.cursor) > plan.interacting_frame:
            # Never skip the contact frame, whatever the playback speed.
            self.cursor = float(plan.interacting_frame)
            return
        if plan.hold_frame is not None and not active.hold_consumed \
                and self.cursor > plan.hold_frame:
            self.cursor = float(plan.hold_frame)
            self.status = "holding"
            return
        if int(self.cursor) >= len(plan):
            self._finish_step()

    def _finish_step(self) -> None:
        self.pose = self.active.plan.frames[-1].copy()
        self.active = None
        self.cursor = 0.0
        self.step_index += 1
        self._advance_pipeline()

    # -- contact context ---------------------------------------------------

    def _contact_for(self, emitted_pose: np.ndarray) -> HandContact:
        gesture = None
        phase = None
        at_interacting = False
        joint = self.held.joint if self.held is not None else WRIST

        active = self.active
        if active is not None:
            idx = min(int(self.cursor), len(active.plan) - 1)
            if idx >= active.plan.interacting_frame and not active.fired_contact:
                active.fired_contact = True
                at_interacting = active.gesture is not None
            if active.gesture is not None and active.clip is not None:
                gesture = active.gesture
                clip_idx = active.plan.clip_frame(idx, len(active.clip))
                phase = active.clip.phase_at(clip_idx)
            joint = active.plan.contact_joint if self.held is None else self.held.joint

        joint_delta = emitted_pose[joint] - self.pose[joint]
        roll_delta = 0.0
        if self.held is not None \
                and self.scene.get(self.held.object_id).affordance == "knob":
            roll_delta = self._roll_between(self.pose, emitted_pose)

        return HandContact(
            gesture=gesture,
            phase=phase,
            at_interacting_frame=at_interacting,
            joint=joint,
            joint_position=emitted_pose[joint].copy(),
            joint_delta=joint_delta,
            roll_delta=roll_delta,
        )

    @staticmethod
    def _roll_between(prev: np.ndarray, cur: np.ndarray) -> float:
        """Signed rotation about the longitudinal axis between two poses."""
        try:
            a = skeleton.hand_axes(prev)
            b = skeleton.hand_axes(cur)
        except skeleton.DegeneratePoseError:
            return 0.0
        axis = b.longitudinal
        u = a.lateral - np.dot(a.lateral, axis) * axis
        n = np.linalg.norm(u)
        if n < 1e-9:
            return 0.0
        u = u / n
        return float(math.atan2(np.dot(np.cross(u, b.lateral), axis),
                                np.dot(u, b.lateral)))

    # -- playback control ---------------------------------------------------

    def _apply_preempt(self, control: TemporalStep) -> None:
        kind = control.control
        self.event_log.append(("preempt", kind))
        if kind == "stop":
            if self.status in ("playing", "holding"):
                self.status = "paused"
        elif kind == "continue":
            if self.status == "paused":
                self.status = "playing" if self.active is not None else "idle"
            elif self.status == "holding":
                if self.active is not None:
                    self.active.hold_consumed = True
                    self.status = "playing"
                else:
                    self.status = "idle"
        elif kind == "faster":
            self.speed_factor = min(self.speed_factor * self.config.speed_step,
                                    self.config.speed_max)
        elif kind == "slower":
            self.speed_factor = max(self.speed_factor / self.config.speed_step,
                                    self.config.speed_min)
        elif kind == "hold":
            self._apply_hold()
        elif kind == "undo_step":
            self._apply_undo()
        elif kind == "redo_step":
            self._apply_redo()
        elif kind == "repeat":
            self._apply_repeat(control)

    def _apply_hold(self) -> None:
        active = self.active
        if active is None:
            return
        idx = int(self.cursor)
        plan = active.plan
        clip = active.clip
        if clip is not None and idx < plan.interacting_frame \
                and clip.phase_at(plan.clip_frame(idx, len(clip))) in ("preparation", "stroke"):
            # Mid-stroke: park at the moment of contact instead of right here.
            plan.hold_frame = plan.interacting_frame
        else:
            plan.hold_frame = idx
            self.cursor = float(idx)
            self.status = "holding"

    def _apply_undo(self) -> None:
        if self.active is not None or self.active_list is not None or self.parked is not None:
            # Mid-command: abort it and fall back to the last checkpoint.
            self._abort_active_list()
            self._restore(self.history[-1])
            return
        if len(self.history) <= 1:
            self._emit("error_retry", "nothing to undo")
            return
        top = self.history.pop()
        self.redo_stack.append(top)
        self._restore(self.history[-1])

    def _apply_redo(self) -> None:
        if not self.redo_stack:
            self._emit("error_retry", "nothing to redo")
            return
        self._abort_active_list()
        checkpoint = self.redo_stack.pop()
        self.history.append(checkpoint)
        self._restore(checkpoint)

    def _apply_repeat(self, control: TemporalStep) -> None:
        count = (control.repeat or 2) - 1
        steps: list[Step] = []
        source = None
        if self.active_list is not None:
            steps = [s for s in self.active_list.steps if not isinstance(s, TemporalStep)]
            source = self.active_list.source
        if not steps and self._last_completed:
            # A bare "do it again" replays the previous command.
            steps = list(self._last_completed)
            source = None
        if not steps:
            self._emit("error_retry", "nothing to repeat")
            return
        for _ in range(count):
            self.queue.appendleft(InstructionList(source, list(steps)))
        self.event_log.append(("repeat_scheduled", str(count)))

    def _abort_active_list(self) -> None:
        if self.active_list is not None:
            self.event_log.append(("aborted", self.active_list.source.raw_text
                                   if self.active_list.source else ""))
        self.active_list = None
        self.active = None
        self.parked = None
        self.step_index = 0
        self.cursor = 0.0
        if self.status in ("playing", "holding"):
            self.status = "idle"

    # -- history -------------------------------------------------------------

    def _push_checkpoint(self) -> None:
        self.history.append(_Checkpoint(
            pose=self.pose.copy(),
            scene_snap=self.scene.snapshot(),
            held=self.held,
            holding=self.status == "holding",
        ))
        if len(self.history) > self.config.history_depth:
            self.history.pop(0)

    def _restore(self, checkpoint: _Checkpoint) -> None:
        self.pose = checkpoint.pose.copy()
        self.scene.restore(checkpoint.scene_snap)
        self.held = checkpoint.held
        self.status = "holding" if checkpoint.holding else "idle"
        self.cursor = 0.0
        self.active = None

    # -- feedback --------------------------------------------------------------

    def _emit(self, kind: str, payload) -> None:
        self._feedback.append(FeedbackEvent(kind, payload))

    def state_summary(self) -> dict:
        return {
            "status": self.status,
            "speed_factor": self.speed_factor,
            "queue": len(self.queue),
            "held": self.held.object_id if self.held else None,
            "history": len(self.history),
            "redo": len(self.redo_stack),
            "parked": self.parked is not None,
        }

"""Simulated interactable environment.

Objects are axis-aligned boxes with names, descriptive tags, and an
affordance (grabbable, button, slider, knob, container, static). The
camera frame is fixed: +x right, +y up, -z forward into the scene, so
"left"/"right" in commands and constraints always mean the viewer's left
and right. Interactions fire only from hand collision and gesture state,
never from direct API calls.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import DEFAULT_CONFIG, EngineConfig

AFFORDANCES = ("grabbable", "button", "slider", "knob", "container", "static")

# Relations used both as spatial constraints and placement offsets.
RELATION_AXES = {
    "on_top_of": (1, 1.0),
    "above": (1, 1.0),
    "under": (1, -1.0),
    "below": (1, -1.0),
    "to_the_left_of": (0, -1.0),
    "to_the_right_of": (0, 1.0),
    "in_front_of": (2, 1.0),
    "behind": (2, -1.0),
}

RELATIONAL_CONSTRAINTS = (
    "below", "above", "to_the_left_of", "to_the_right_of", "in_front_of", "behind",
)
ORDINAL_CONSTRAINTS = (
    "closest", "farthest", "first", "last", "on_the_left", "in_the_middle", "on_the_right",
)


class SceneError(ValueError):
    pass


class StaleSnapshotError(SceneError):
    """Snapshot does not match the scene's current object set."""


def lemma(token: str) -> str:
    """Cheap lemmatizer: lowercase and strip plural suffixes."""
    t = token.lower()
    if len(t) > 4 and t.endswith("ies"):
        return t[:-3] + "y"
    if len(t) > 4 and t.endswith(("xes", "ses", "zes", "ches", "shes")):
        return t[:-2]
    if len(t) > 3 and t.endswith("s") and not t.endswith(("ss", "us", "is")):
        return t[:-1]
    return t


def _tokens(text: str) -> list[str]:
    return re.findall(r"[a-z0-9_]+", text.lower())


@dataclass(frozen=True)
class SpatialConstraint:
    kind: str
    anchor: str | None = None  # object id, required for relational kinds

    def __post_init__(self):
        if self.kind in RELATIONAL_CONSTRAINTS and self.anchor is None:
            raise SceneError(f"constraint {self.kind!r} requires an anchor")
        if self.kind not in RELATIONAL_CONSTRAINTS and self.kind not in ORDINAL_CONSTRAINTS:
            raise SceneError(f"unknown constraint kind {self.kind!r}")


@dataclass(frozen=True)
class TargetResolution:
    outcome: str  # "unique" | "ambiguous" | "none"
    candidates: tuple[str, ...] = ()

    @property
    def object_id(self) -> str:
        if self.outcome != "unique":
            raise SceneError("no unique target")
        return self.candidates[0]


@dataclass
class SceneObject:
    id: str
    name: str
    affordance: str = "static"
    tags: list[str] = field(default_factory=list)
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    half_extents: np.ndarray = field(default_factory=lambda: np.full(3, 0.05))
    pressed_count: int = 0
    slider_value: float = 0.0
    knob_angle: float = 0.0
    slider_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    contained_in: str | None = None

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.half_extents = np.asarray(self.half_extents, dtype=np.float64)
        self.slider_axis = np.asarray(self.slider_axis, dtype=np.float64)
        if self.affordance not in AFFORDANCES:
            raise SceneError(f"unknown affordance {self.affordance!r}")
        if not np.all(self.half_extents > 0):
            raise SceneError(f"object {self.id}: half_extents must be positive")

    def lexemes(self) -> set[str]:
        words = set()
        for token in _tokens(self.name):
            words.add(lemma(token))
        for tag in self.tags:
            for token in _tokens(tag):
                words.add(lemma(token))
        return words

    def contains_point(self, point: np.ndarray) -> bool:
        return bool(np.all(np.abs(point - self.position) <= self.half_extents))

    def sphere_hits(self, center: np.ndarray, radius: float) -> bool:
        # Closest point on the AABB to the sphere center.
        closest = np.clip(center, self.position - self.half_extents,
                          self.position + self.half_extents)
        return bool(np.sum((center - closest) ** 2) <= radius * radius)

    def state_dict(self) -> dict:
        out = {"position": [float(v) for v in self.position]}
        if self.affordance == "button":
            out["pressed_count"] = self.pressed_count
        elif self.affordance == "slider":
            out["slider_value"] = self.slider_value
        elif self.affordance == "knob":
            out["knob_angle"] = self.knob_angle
        if self.contained_in is not None:
            out["contained_in"] = self.contained_in
        return out

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "affordance": self.affordance,
            "tags": list(self.tags),
            "position": [float(v) for v in self.position],
            "half_extents": [float(v) for v in self.half_extents],
            "pressed_count": self.pressed_count,
            "slider_value": self.slider_value,
            "knob_angle": self.knob_angle,
            "slider_axis": [float(v) for v in self.slider_axis],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneObject":
        return cls(
            id=doc["id"],
            name=doc["name"],
            affordance=doc.get("affordance", "static"),
            tags=list(doc.get("tags", [])),
            position=doc.get("position", (0.0, 0.0, 0.0)),
            half_extents=doc.get("half_extents", (0.05, 0.05, 0.05)),
            pressed_count=int(doc.get("pressed_count", 0)),
            slider_value=float(doc.get("slider_value", 0.0)),
            knob_angle=float(doc.get("knob_angle", 0.0)),
            slider_axis=doc.get("slider_axis", (0.0, 1.0, 0.0)),
        )


# Interaction events emitted by step_interactions.

@dataclass(frozen=True)
class ButtonPressed:
    object_id: str
    count: int


@dataclass(frozen=True)
class Grabbed:
    object_id: str
    joint: int


@dataclass(frozen=True)
class Released:
    object_id: str


@dataclass(frozen=True)
class ContainedIn:
    object_id: str
    container_id: str


@dataclass(frozen=True)
class SliderChanged:
    object_id: str
    value: float


@dataclass(frozen=True)
class KnobTurned:
    object_id: str
    angle: float


@dataclass(frozen=True)
class Binding:
    """A live attachment between the hand and an object."""
    object_id: str
    joint: int


@dataclass(frozen=True)
class HandContact:
    """Per-tick hand context the scene needs to react to the gesture."""
    gesture: str | None = None
    phase: str | None = None
    at_interacting_frame: bool = False
    joint: int = 0
    joint_position: np.ndarray | None = None
    joint_delta: np.ndarray | None = None
    roll_delta: float = 0.0


class Scene:
    def __init__(self, objects: list[SceneObject] | None = None,
                 config: EngineConfig = DEFAULT_CONFIG) -> None:
        self.config = config
        self._objects: dict[str, SceneObject] = {}
        self._button_latch: set[str] = set()
        for obj in objects or []:
            self.add(obj)

    def add(self, obj: SceneObject) -> None:
        if obj.id in self._objects:
            raise SceneError(f"duplicate object id {obj.id!r}")
        self._objects[obj.id] = obj

    def get(self, object_id: str) -> SceneObject:
        return self._objects[object_id]

    def objects(self) -> list[SceneObject]:
        return list(self._objects.values())

    def ids(self) -> list[str]:
        return list(self._objects)

    def __len__(self) -> int:
        return len(self._objects)

    def lexicon(self) -> set[str]:
        words: set[str] = set()
        for obj in self._objects.values():
            words |= obj.lexemes()
        return words

    # -- target resolution ---------------------------------------------

    def resolve_target(self, query: str, constraints: list[SpatialConstraint] = (),
                       reference: np.ndarray | None = None) -> TargetResolution:
        """Resolve a name/tag query plus spatial constraints to object ids.

        Matching is lemma-level: an object is a candidate when any query
        term equals any of its name/tag lexemes. When terms discriminate
        (e.g. "power button" vs other buttons), only objects matching the
        most terms survive. Constraints then filter (relational kinds) or
        select (ordinal kinds). Candidates are reported left to right.
        """
        terms = [lemma(t) for t in _tokens(query)]
        terms = [t for t in terms if t not in _QUERY_STOPWORDS]
        if not terms:
            return TargetResolution("none")
        scored: list[tuple[int, SceneObject]] = []
        for obj in self._objects.values():
            hits = sum(1 for t in terms if t in obj.lexemes())
            if hits:
                scored.append((hits, obj))
        if not scored:
            return TargetResolution("none")
        best = max(s for s, _ in scored)
        candidates = [obj for s, obj in scored if s == best]

        for constraint in constraints:
            candidates = self._apply_constraint(candidates, constraint, reference)
            if not candidates:
                return TargetResolution("none")

        candidates.sort(key=lambda o: (float(o.position[0]), o.id))
        ids = tuple(o.id for o in candidates)
        if len(ids) == 1:
            return TargetResolution("unique", ids)
        return TargetResolution("ambiguous", ids)

    def _apply_constraint(self, candidates: list[SceneObject],
                          constraint: SpatialConstraint,
                          reference: np.ndarray | None) -> list[SceneObject]:
        kind = constraint.kind
        if kind in RELATIONAL_CONSTRAINTS:
            anchor = self._objects.get(constraint.anchor)
            if anchor is None:
                return []
            axis, sign = RELATION_AXES[kind]
            return [o for o in candidates if o.id != anchor.id
                    and sign * (o.position[axis] - anchor.position[axis]) > 0]
        if not candidates:
            return []
        if kind in ("closest", "farthest"):
            ref = reference if reference is not None else np.zeros(3)
            keyed = sorted(candidates,
                           key=lambda o: (float(np.linalg.norm(o.position - ref)), o.id))
            return [keyed[0] if kind == "closest" else keyed[-1]]
        by_x = sorted(candidates, key=lambda o: (float(o.position[0]), o.id))
        if kind in ("first", "on_the_left"):
            return [by_x[0]]
        if kind in ("last", "on_the_right"):
            return [by_x[-1]]
        if kind == "in_the_middle":
            return [by_x[(len(by_x) - 1) // 2]]
        raise SceneError(f"unknown constraint kind {kind!r}")

    # -- geometry helpers ----------------------------------------------

    def relative_position(self, anchor: SceneObject, relation: str,
                          clearance: float | None = None) -> np.ndarray:
        """Point displaced from the anchor's center along a relation axis."""
        if relation not in RELATION_AXES:
            raise SceneError(f"unknown relation {relation!r}")
        clearance = self.config.clearance if clearance is None else clearance
        axis, sign = RELATION_AXES[relation]
        point = anchor.position.copy()
        point[axis] += sign * (anchor.half_extents[axis] + clearance)
        return point

    # -- interaction stepping ------------------------------------------

    def step_interactions(self, pose: np.ndarray, contact: HandContact,
                          held: Binding | None) -> tuple[list, Binding | None]:
        """Advance object state for one tick of hand motion.

        Returns the interaction events plus the (possibly changed) binding.
        Buttons fire on joint entry during the stroke of point/push; grab
        and pinch bind the object under the interacting joint at the
        interacting frame; bound grabbables ride the joint, sliders project
        its motion on their axis, knobs follow hand roll; open_hand releases
        and checks containers.
        """
        events: list = []
        joint_pos = contact.joint_position
        if joint_pos is None:
            joint_pos = np.asarray(pose[contact.joint], dtype=np.float64)

        radius = self.config.contact_radius

        if contact.gesture == "open_hand" and held is not None and contact.at_interacting_frame:
            obj = self._objects[held.object_id]
            events.append(Released(obj.id))
            if obj.affordance == "grabbable":
                for container in self._objects.values():
                    if container.affordance == "container" and container.contains_point(obj.position):
                        obj.contained_in = container.id
                        events.append(ContainedIn(obj.id, container.id))
                        break
            held = None

        if held is not None:
            obj = self._objects[held.object_id]
            delta = contact.joint_delta
            if obj.affordance == "grabbable" and delta is not None and np.any(delta):
                obj.position = obj.position + delta
                obj.contained_in = None
            elif obj.affordance == "slider" and delta is not None:
                travel = float(np.dot(delta, obj.slider_axis))
                if travel:
                    value = obj.slider_value + travel / self.config.slider_travel
                    obj.slider_value = min(max(value, 0.0), 1.0)
                    events.append(SliderChanged(obj.id, obj.slider_value))
            elif obj.affordance == "knob" and contact.roll_delta:
                # Clockwise rolls (roll_right, negative by the right-hand
                # rule) turn the knob up.
                angle = obj.knob_angle - contact.roll_delta
                obj.knob_angle = min(max(angle, self.config.knob_min), self.config.knob_max)
                events.append(KnobTurned(obj.id, obj.knob_angle))

        if contact.gesture in ("point", "push") and contact.phase == "stroke":
            for obj in self._objects.values():
                if obj.affordance != "button":
                    continue
                inside = obj.sphere_hits(joint_pos, radius)
                if inside and obj.id not in self._button_latch:
                    obj.pressed_count += 1
                    events.append(ButtonPressed(obj.id, obj.pressed_count))
                    self._button_latch.add(obj.id)
                elif not inside:
                    self._button_latch.discard(obj.id)
        else:
            self._button_latch.clear()

        if (held is None and contact.gesture in ("grab", "pinch")
                and contact.at_interacting_frame):
            for obj in self._objects.values():
                if obj.affordance in ("grabbable", "slider", "knob") and obj.sphere_hits(joint_pos, radius):
                    held = Binding(obj.id, contact.joint)
                    events.append(Grabbed(obj.id, contact.joint))
                    if obj.affordance == "grabbable":
                        obj.contained_in = None
                    break

        return events, held

    # -- snapshots -------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "ids": tuple(self._objects),
            "objects": {oid: replace(obj,
                                     position=obj.position.copy(),
                                     half_extents=obj.half_extents.copy(),
                                     slider_axis=obj.slider_axis.copy(),
                                     tags=list(obj.tags))
                        for oid, obj in self._objects.items()},
        }

    def restore(self, snap: dict) -> None:
        if snap["ids"] != tuple(self._objects):
            raise StaleSnapshotError("object set changed since snapshot")
        for oid, saved in snap["objects"].items():
            self._objects[oid] = replace(saved,
                                         position=saved.position.copy(),
                                         half_extents=saved.half_extents.copy(),
                                         slider_axis=saved.slider_axis.copy(),
                                         tags=list(saved.tags))
        self._button_latch.clear()

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {"objects": [obj.to_dict() for obj in self._objects.values()]}

    @classmethod
    def from_dict(cls, doc: dict, config: EngineConfig = DEFAULT_CONFIG) -> "Scene":
        return cls([SceneObject.from_dict(o) for o in doc.get("objects", [])], config)

    @classmethod
    def from_file(cls, path: str | Path, config: EngineConfig = DEFAULT_CONFIG) -> "Scene":
        return cls.from_dict(json.loads(Path(path).read_text()), config)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


_QUERY_STOPWORDS = {"the", "a", "an", "of", "one", "that", "this", "it"}


def build_study_scene(config: EngineConfig = DEFAULT_CONFIG) -> Scene:
    """The default demo room: a viewer window with UI widgets and a table
    of graspable props, mirroring the layout the fixtures assume."""
    objs = [
        SceneObject("window", "window", "static", ["viewer", "screen", "photo", "image"],
                    (0.0, 1.2, -0.5), (0.25, 0.18, 0.02)),
        SceneObject("table", "table", "static", ["desk", "surface"],
                    (0.0, 0.7, -0.35), (0.6, 0.02, 0.3)),
        SceneObject("apple", "apple", "grabbable", ["red", "fruit", "food", "round"],
                    (-0.45, 0.77, -0.3), (0.04, 0.04, 0.04)),
        SceneObject("peach", "peach", "grabbable", ["pink", "fruit", "circular", "round"],
                    (-0.15, 0.77, -0.25), (0.04, 0.04, 0.04)),
        SceneObject("watermelon_1", "watermelon", "grabbable",
                    ["green", "striped", "fruit", "melon"],
                    (-0.3, 0.79, -0.45), (0.06, 0.06, 0.06)),
        SceneObject("watermelon_2", "watermelon", "grabbable",
                    ["green", "striped", "fruit", "melon"],
                    (0.0, 0.79, -0.45), (0.06, 0.06, 0.06)),
        SceneObject("watermelon_3", "watermelon", "grabbable",
                    ["green", "striped", "fruit", "melon"],
                    (0.3, 0.79, -0.45), (0.06, 0.06, 0.06)),
        SceneObject("cube", "cube", "grabbable", ["blue", "block", "box"],
                    (0.15, 0.765, -0.25), (0.035, 0.035, 0.035)),
        SceneObject("basket", "basket", "container", ["brown", "woven", "bin"],
                    (0.48, 0.81, -0.4), (0.12, 0.1, 0.12)),
        SceneObject("confirm_button", "confirm button", "button", ["confirm", "ok", "green"],
                    (-0.18, 0.95, -0.48), (0.03, 0.03, 0.012)),
        SceneObject("like_button", "like button", "button", ["like", "heart", "favorite"],
                    (0.02, 1.08, -0.48), (0.03, 0.03, 0.012)),
        SceneObject("resize_button", "resize button", "button", ["resize", "corner"],
                    (0.2, 0.95, -0.48), (0.03, 0.03, 0.012)),
        SceneObject("minimize_button", "minimize button", "button", ["minimize", "fold"],
                    (0.0, 1.45, -0.48), (0.03, 0.03, 0.012)),
        SceneObject("power_button", "power button", "button", ["power", "on", "off", "white"],
                    (0.45, 1.2, -0.48), (0.03, 0.03, 0.012)),
        SceneObject("volume_slider", "volume slider", "slider", ["volume", "sound", "audio"],
                    (-0.45, 1.1, -0.48), (0.03, 0.09, 0.012),
                    slider_value=0.25),
        SceneObject("brightness_knob", "brightness knob", "knob", ["brightness", "light", "dial"],
                    (0.35, 0.95, -0.48), (0.03, 0.03, 0.02)),
    ]
    return Scene(objs, config)

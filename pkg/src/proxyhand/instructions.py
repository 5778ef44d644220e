"""Validated instruction IR produced by the interpreter and consumed by the
controller, plus its JSON wire form.

A parsed command becomes an InstructionList: an ordered sequence of gesture,
movement, and temporal steps. The JSON form is an array of
``{"component_type": ..., "value": ...}`` components; a bare release step
serializes as the string value ``"release"``. Enumerations are closed: any
unknown field value fails decoding, so nothing unvalidated ever reaches the
controller.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .gestures import GESTURE_IDS
from .scene import (ORDINAL_CONSTRAINTS, RELATIONAL_CONSTRAINTS, SpatialConstraint)
from .skeleton import ROTATION_KINDS

DIRECTIONS = ("up", "down", "left", "right", "forward", "backward")
POSITIONS = ("on_top_of", "under", "in_front_of", "behind",
             "to_the_left_of", "to_the_right_of")
TEMPORAL_CONTROLS = ("stop", "continue", "faster", "slower",
                     "undo_step", "redo_step", "hold", "repeat")

DISPOSITIONS = ("execute", "irrelevant", "uninterpretable")


class SchemaError(ValueError):
    """Instruction document violates the schema."""


def _spaced(token: str) -> str:
    return token.replace("_", " ")


def _snaked(token: str) -> str:
    return token.replace(" ", "_")


@dataclass(frozen=True)
class Command:
    """One segmented sentence of user input."""
    raw_text: str
    seq: int = 0
    received_at: float = 0.0


@dataclass(frozen=True)
class GestureStep:
    gesture: str
    object: str | None = None
    constraints: tuple[SpatialConstraint, ...] = ()
    ambiguous: bool = False
    hold: bool = False

    component_type = "gesture"


@dataclass(frozen=True)
class MovementStep:
    movement: str  # "translational" | "rotational"
    direction: str | None = None
    rotation: str | None = None
    object: str | None = None
    constraints: tuple[SpatialConstraint, ...] = ()
    position: str | None = None
    ambiguous: bool = False

    component_type = "movement"


@dataclass(frozen=True)
class TemporalStep:
    control: str
    repeat: int | None = None

    component_type = "temporal"


Step = GestureStep | MovementStep | TemporalStep


@dataclass
class InstructionList:
    source: Command | None
    steps: list[Step]
    disposition: str = "execute"
    note: str = ""

    def __post_init__(self):
        if self.disposition not in DISPOSITIONS:
            raise SchemaError(f"unknown disposition {self.disposition!r}")
        if self.disposition == "execute" and not self.steps:
            raise SchemaError("execute list must have steps")
        if self.disposition != "execute" and self.steps:
            raise SchemaError(f"{self.disposition} list must be empty")


def irrelevant(source: Command | None, note: str = "") -> InstructionList:
    return InstructionList(source, [], "irrelevant", note)


def uninterpretable(source: Command | None, note: str = "") -> InstructionList:
    return InstructionList(source, [], "uninterpretable", note)


def validate_step(step: Step) -> None:
    if isinstance(step, GestureStep):
        if step.gesture not in GESTURE_IDS:
            raise SchemaError(f"unknown gesture {step.gesture!r}")
        if step.ambiguous and step.object is None:
            raise SchemaError("ambiguous gesture step without a target")
        _validate_constraints(step.constraints)
    elif isinstance(step, MovementStep):
        if step.movement == "translational":
            if step.rotation is not None:
                raise SchemaError("translational movement carries a rotation")
            if step.direction is None and step.object is None:
                raise SchemaError("translational movement needs a direction or target")
            if step.direction is not None and step.direction not in DIRECTIONS:
                raise SchemaError(f"unknown direction {step.direction!r}")
        elif step.movement == "rotational":
            if step.rotation not in ROTATION_KINDS:
                raise SchemaError(f"unknown rotation {step.rotation!r}")
            if step.direction is not None:
                raise SchemaError("rotational movement carries a direction")
        else:
            raise SchemaError(f"unknown movement_type {step.movement!r}")
        if step.position is not None and step.position not in POSITIONS:
            raise SchemaError(f"unknown position {step.position!r}")
        if step.ambiguous and step.object is None:
            raise SchemaError("ambiguous movement step without a target")
        _validate_constraints(step.constraints)
    elif isinstance(step, TemporalStep):
        if step.control not in TEMPORAL_CONTROLS:
            raise SchemaError(f"unknown temporal control {step.control!r}")
        if step.control == "repeat" and (step.repeat is None or step.repeat < 1):
            raise SchemaError("repeat control needs a positive count")
        if step.repeat is not None and (not isinstance(step.repeat, int) or step.repeat < 1):
            raise SchemaError("repeat count must be a positive integer")
    else:
        raise SchemaError(f"unknown step type {type(step).__name__}")


def _validate_constraints(constraints) -> None:
    for c in constraints:
        if not isinstance(c, SpatialConstraint):
            raise SchemaError("constraints must be SpatialConstraint values")


def validate_list(instruction_list: InstructionList) -> None:
    for step in instruction_list.steps:
        validate_step(step)


# -- JSON wire form ----------------------------------------------------------

def _constraint_to_json(c: SpatialConstraint) -> dict:
    out = {"constraint": _spaced(c.kind)}
    if c.anchor is not None:
        out["anchor"] = c.anchor
    return out


def _constraint_from_json(doc) -> SpatialConstraint:
    if not isinstance(doc, dict) or "constraint" not in doc:
        raise SchemaError(f"malformed constraint {doc!r}")
    kind = _snaked(str(doc["constraint"]))
    if kind not in RELATIONAL_CONSTRAINTS and kind not in ORDINAL_CONSTRAINTS:
        raise SchemaError(f"unknown constraint {doc['constraint']!r}")
    try:
        return SpatialConstraint(kind, doc.get("anchor"))
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def step_to_component(step: Step) -> dict:
    validate_step(step)
    if isinstance(step, GestureStep):
        if (step.gesture == "open_hand" and step.object is None
                and not step.hold and not step.constraints):
            return {"component_type": "gesture", "value": "release"}
        value: dict = {"gesture_type": step.gesture}
        if step.object is not None:
            value["object"] = step.object
        value["is_ambiguous"] = step.ambiguous
        if step.hold:
            value["hold"] = True
        if step.constraints:
            value["constraints"] = [_constraint_to_json(c) for c in step.constraints]
        return {"component_type": "gesture", "value": value}
    if isinstance(step, MovementStep):
        value = {"movement_type": step.movement}
        if step.direction is not None:
            value["direction"] = step.direction
        if step.rotation is not None:
            value["rotation"] = _spaced(step.rotation)
        if step.object is not None:
            value["object"] = step.object
            value["is_ambiguous"] = step.ambiguous
        if step.position is not None:
            value["position"] = _spaced(step.position)
        if step.constraints:
            value["constraints"] = [_constraint_to_json(c) for c in step.constraints]
        return {"component_type": "movement", "value": value}
    value = {"control": step.control}
    if step.repeat is not None:
        value["repeat"] = step.repeat
    return {"component_type": "temporal", "value": value}


def step_from_component(doc) -> Step:
    if not isinstance(doc, dict):
        raise SchemaError(f"component must be an object, got {type(doc).__name__}")
    ctype = doc.get("component_type")
    value = doc.get("value")
    if ctype == "gesture":
        if isinstance(value, str):
            if value != "release":
                raise SchemaError(f"unknown gesture shorthand {value!r}")
            return GestureStep("open_hand")
        if not isinstance(value, dict):
            raise SchemaError("gesture value must be an object or 'release'")
        step = GestureStep(
            gesture=str(value.get("gesture_type", "")),
            object=value.get("object"),
            constraints=tuple(_constraint_from_json(c) for c in value.get("constraints", [])),
            ambiguous=bool(value.get("is_ambiguous", False)),
            hold=bool(value.get("hold", False)),
        )
    elif ctype == "movement":
        if not isinstance(value, dict):
            raise SchemaError("movement value must be an object")
        rotation = value.get("rotation")
        position = value.get("position")
        step = MovementStep(
            movement=str(value.get("movement_type", "")),
            direction=value.get("direction"),
            rotation=_snaked(rotation) if rotation is not None else None,
            object=value.get("object"),
            constraints=tuple(_constraint_from_json(c) for c in value.get("constraints", [])),
            position=_snaked(position) if position is not None else None,
            ambiguous=bool(value.get("is_ambiguous", False)),
        )
    elif ctype == "temporal":
        if not isinstance(value, dict):
            raise SchemaError("temporal value must be an object")
        repeat = value.get("repeat")
        if repeat is not None:
            if isinstance(repeat, bool) or not isinstance(repeat, int):
                raise SchemaError("repeat count must be an integer")
        step = TemporalStep(control=str(value.get("control", "")), repeat=repeat)
    else:
        raise SchemaError(f"unknown component_type {ctype!r}")
    validate_step(step)
    return step


def steps_to_json(steps: list[Step]) -> list[dict]:
    return [step_to_component(s) for s in steps]


def steps_from_json(doc) -> list[Step]:
    if not isinstance(doc, list):
        raise SchemaError("instruction document must be an array of components")
    return [step_from_component(c) for c in doc]

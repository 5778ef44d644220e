"""Optional HTTP interpreter backend.

Sends each command plus live scene context to a remote model endpoint and
validates the response against the instruction schema. The engine never
executes anything the validator has not admitted: a timeout, transport
error, malformed body, or out-of-vocabulary field all downgrade the command
to uninterpretable and the pipeline keeps running on the grammar tier.

Configuration comes from the environment:
  PROXYHAND_BACKEND_URL   endpoint receiving a JSON POST
  PROXYHAND_BACKEND_KEY   optional bearer token
  PROXYHAND_BACKEND_MODEL optional model name forwarded in the body
"""
from __future__ import annotations

import json
import os
import urllib.error
import urllib.request

from .gestures import GESTURE_IDS
from .instructions import (Command, DIRECTIONS, InstructionList, POSITIONS,
                           SchemaError, TEMPORAL_CONTROLS, irrelevant,
                           steps_from_json, uninterpretable)
from .scene import ORDINAL_CONSTRAINTS, RELATIONAL_CONSTRAINTS, Scene
from .skeleton import ROTATION_KINDS

SYSTEM_PROMPT = (
    "You control a virtual right hand in a 3D scene. Decompose the user's "
    "command into an ordered JSON array of control components. Each component "
    "is {\"component_type\": \"gesture\"|\"movement\"|\"temporal\", \"value\": ...}. "
    "Use only the vocabulary provided. Fix obvious transcription errors. If "
    "several scene objects match a reference, set is_ambiguous to true. If the "
    "input is not an interaction command, return an empty array."
)


def control_vocabulary() -> dict:
    return {
        "gestures": list(GESTURE_IDS),
        "directions": list(DIRECTIONS),
        "rotations": [r.replace("_", " ") for r in ROTATION_KINDS],
        "positions": [p.replace("_", " ") for p in POSITIONS],
        "constraints": [c.replace("_", " ")
                        for c in RELATIONAL_CONSTRAINTS + ORDINAL_CONSTRAINTS],
        "temporal": list(TEMPORAL_CONTROLS),
    }


def scene_context(scene: Scene) -> list[dict]:
    return [
        {
            "name": obj.name,
            "tags": list(obj.tags),
            "position": [float(v) for v in obj.position],
            "affordance": obj.affordance,
        }
        for obj in scene.objects()
    ]


class ExternalBackend:
    def __init__(self, url: str | None = None, api_key: str | None = None,
                 model: str | None = None, timeout: float = 5.0) -> None:
        self.url = url or os.environ.get("PROXYHAND_BACKEND_URL", "")
        self.api_key = api_key if api_key is not None else os.environ.get("PROXYHAND_BACKEND_KEY")
        self.model = model or os.environ.get("PROXYHAND_BACKEND_MODEL")
        self.timeout = timeout
        if not self.url:
            raise ValueError("external backend needs a URL "
                             "(flag or PROXYHAND_BACKEND_URL)")

    def interpret(self, cmd: Command, scene: Scene, history=None) -> InstructionList:
        body = {
            "prompt": SYSTEM_PROMPT,
            "command": cmd.raw_text,
            "scene": scene_context(scene),
            "vocabulary": control_vocabulary(),
        }
        if self.model:
            body["model"] = self.model
        request = urllib.request.Request(
            self.url,
            data=json.dumps(body).encode("utf-8"),
            headers=self._headers(),
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                raw = response.read()
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            return uninterpretable(cmd, f"backend unreachable: {exc}")
        return self.parse_response(cmd, raw)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    @staticmethod
    def parse_response(cmd: Command, raw: bytes | str) -> InstructionList:
        """Schema guard: admit only fully valid instruction documents."""
        try:
            doc = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return uninterpretable(cmd, f"backend returned malformed JSON: {exc}")
        if isinstance(doc, dict) and "components" in doc:
            doc = doc["components"]
        try:
            steps = steps_from_json(doc)
        except SchemaError as exc:
            return uninterpretable(cmd, f"backend response failed validation: {exc}")
        if not steps:
            return irrelevant(cmd, "backend classified the input as irrelevant")
        return InstructionList(cmd, steps)

"""Headless script runner and latency bench.

Script mode drives the full pipeline on simulated time: commands are fed at
scripted millisecond offsets, the engine ticks at its nominal rate with an
injected clock, and assertions are evaluated against the final scene and the
recorded pose trace. Nothing reads the wall clock, so a scenario with a
fixed seed is exactly reproducible.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import DEFAULT_CONFIG, EngineConfig
from .controller import Engine
from .gestures import load_bundle
from .instructions import Command
from .interpreter import CommandPipeline, GrammarParser, match_priority
from .scene import Scene, build_study_scene
from .skeleton import WRIST


class ScenarioError(ValueError):
    pass


@dataclass
class CheckResult:
    description: str
    passed: bool
    detail: str = ""


@dataclass
class ScriptReport:
    name: str
    passed: bool
    checks: list[CheckResult]
    frames: int
    sim_ms: int
    parse_latencies_ms: list[float]
    feedback: list[dict]
    interactions: list[str]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checks": [
                {"description": c.description, "passed": c.passed, "detail": c.detail}
                for c in self.checks
            ],
            "frames": self.frames,
            "sim_ms": self.sim_ms,
            "parse_latency_ms": {
                "p50": _pct(self.parse_latencies_ms, 50),
                "p95": _pct(self.parse_latencies_ms, 95),
            },
            "interactions": self.interactions,
        }


def _pct(values: list[float], pct: float) -> float | None:
    if not values:
        return None
    ordered = sorted(values)
    idx = min(int(math.ceil(pct / 100.0 * len(ordered))) - 1, len(ordered) - 1)
    return ordered[max(idx, 0)]


def load_scene_ref(ref: str | dict | None, config: EngineConfig,
                   base_dir: Path | None = None) -> Scene:
    if ref is None or ref == "study_room":
        return build_study_scene(config)
    if isinstance(ref, dict):
        return Scene.from_dict(ref, config)
    path = Path(ref)
    if not path.is_file() and base_dir is not None and (base_dir / ref).is_file():
        path = base_dir / ref
    if not path.is_file():
        raise ScenarioError(f"scene file not found: {ref}")
    return Scene.from_file(path, config)


def run_script(scenario: dict | str | Path, config: EngineConfig | None = None,
               gestures_dir: str | None = None) -> ScriptReport:
    base_dir = None
    if isinstance(scenario, (str, Path)):
        path = Path(scenario)
        if not path.is_file():
            raise ScenarioError(f"scenario file not found: {scenario}")
        base_dir = path.parent
        scenario = json.loads(path.read_text())
    if not isinstance(scenario, dict):
        raise ScenarioError("scenario must be a JSON object")

    config = config or EngineConfig()
    if "fps" in scenario:
        config.fps = int(scenario["fps"])

    commands = sorted(scenario.get("commands", []), key=lambda c: c["t_ms"])
    if any(c["t_ms"] < 0 for c in commands):
        raise ScenarioError("command times must be non-negative")

    scene = load_scene_ref(scenario.get("scene"), config, base_dir)
    library = load_bundle(gestures_dir, config.reference_hand_size) if gestures_dir else None

    sim = {"t": 0.0}
    engine = Engine(scene, library=library, config=config, clock=lambda: sim["t"])
    parser = GrammarParser(scene, config)
    feedback_log: list[dict] = []
    pipeline = CommandPipeline(
        parser,
        on_list=engine.submit,
        on_preempt=engine.preempt,
        on_reply=engine.resolve_disambiguation,
        reply_gate=lambda: engine.parked is not None,
        clock=lambda: sim["t"],
    )

    duration_ms = int(scenario.get("duration_ms", 30000))
    tick_ms = 1000.0 / config.fps
    trace: list[tuple[float, np.ndarray]] = []
    interactions: list[str] = []

    pending = list(commands)
    ticks = 0
    max_ticks = int(duration_ms / tick_ms) + 1
    while ticks < max_ticks:
        now_ms = sim["t"] * 1000.0
        while pending and pending[0]["t_ms"] <= now_ms:
            entry = pending.pop(0)
            pipeline.feed(entry["text"])
            if entry.get("flush", True):
                pipeline.flush()
        result = engine.tick()
        feedback_log.extend(fb.to_dict() for fb in result.feedback)
        interactions.extend(type(e).__name__ for e in result.interactions)
        trace.append((now_ms, result.frame.pose))
        sim["t"] += 1.0 / config.fps
        ticks += 1
        if not pending and ticks > 3 and _quiesced(engine):
            break

    checks = [
        _evaluate(check, engine, scene, trace, feedback_log, interactions)
        for check in scenario.get("assertions", [])
    ]
    return ScriptReport(
        name=scenario.get("name", "scenario"),
        passed=all(c.passed for c in checks),
        checks=checks,
        frames=ticks,
        sim_ms=int(sim["t"] * 1000),
        parse_latencies_ms=[v * 1000 for v in pipeline.parse_latencies],
        feedback=feedback_log,
        interactions=interactions,
    )


def _quiesced(engine: Engine) -> bool:
    if engine._submit_inbox or engine._preempt_inbox:
        return False
    if engine.status == "holding":
        return True  # pinned; only new input changes anything
    return (engine.status in ("idle", "paused")
            and not engine.queue
            and engine.active_list is None
            and engine.active is None
            and engine.parked is None)


def _evaluate(check: dict, engine: Engine, scene: Scene,
              trace, feedback_log, interactions) -> CheckResult:
    kind = check.get("check")
    desc = json.dumps(check, sort_keys=True)
    try:
        if kind == "contained_in":
            obj = scene.get(check["object"])
            ok = obj.contained_in == check["value"]
            return CheckResult(desc, ok, f"contained_in={obj.contained_in}")
        if kind == "center_inside":
            obj = scene.get(check["object"])
            container = scene.get(check["value"])
            ok = container.contains_point(obj.position)
            return CheckResult(desc, ok, f"position={obj.position.tolist()}")
        if kind == "slider_value":
            obj = scene.get(check["object"])
            tol = float(check.get("tolerance", 1e-9))
            ok = abs(obj.slider_value - float(check["value"])) <= tol
            return CheckResult(desc, ok, f"value={obj.slider_value}")
        if kind == "knob_angle_gt":
            obj = scene.get(check["object"])
            ok = obj.knob_angle > float(check["value"])
            return CheckResult(desc, ok, f"angle={obj.knob_angle}")
        if kind == "pressed_count":
            obj = scene.get(check["object"])
            ok = obj.pressed_count == int(check["value"])
            return CheckResult(desc, ok, f"count={obj.pressed_count}")
        if kind == "held_object":
            held = engine.held.object_id if engine.held else None
            return CheckResult(desc, held == check["value"], f"held={held}")
        if kind == "frozen_from":
            return _check_frozen(check, trace, desc)
        if kind == "moved_after":
            t = float(check["t_ms"])
            poses = [p for ms, p in trace if ms >= t]
            moved = any(not np.array_equal(poses[i], poses[i + 1])
                        for i in range(len(poses) - 1))
            return CheckResult(desc, moved, "")
        if kind == "feedback_kind":
            kinds = [fb["kind"] for fb in feedback_log]
            return CheckResult(desc, check["value"] in kinds, f"kinds={sorted(set(kinds))}")
        if kind == "no_errors":
            errors = [fb for fb in feedback_log if fb["kind"] == "error_retry"]
            return CheckResult(desc, not errors, f"errors={[e['payload'] for e in errors]}")
        if kind == "engine_status":
            return CheckResult(desc, engine.status == check["value"],
                               f"status={engine.status}")
        if kind == "interaction":
            return CheckResult(desc, check["value"] in interactions,
                               f"seen={sorted(set(interactions))}")
        return CheckResult(desc, False, f"unknown check kind {kind!r}")
    except KeyError as exc:
        return CheckResult(desc, False, f"missing field/object: {exc}")


def _check_frozen(check: dict, trace, desc: str) -> CheckResult:
    start = float(check["t_ms"])
    end = float(check.get("until_ms", float("inf")))
    skip = int(check.get("settle_ticks", 1))
    window = [p for ms, p in trace if start <= ms <= end]
    if len(window) <= skip + 1:
        return CheckResult(desc, False, "window too short")
    window = window[skip:]
    frozen = all(np.array_equal(window[0], p) for p in window[1:])
    return CheckResult(desc, frozen, f"window={len(window)} frames")


# ---------------------------------------------------------------------------
# Bench
# ---------------------------------------------------------------------------

def bench(corpus: dict, config: EngineConfig | None = None) -> dict:
    """Latency stats for the keyword tier, the grammar, and end-to-end."""
    config = config or EngineConfig()
    scene = build_study_scene(config)

    priority_texts = corpus.get("priority", [])
    grammar_texts = corpus.get("grammar", [])
    if not priority_texts and not grammar_texts:
        raise ScenarioError("bench corpus is empty")

    out: dict = {}

    if priority_texts:
        sim = {"t": 0.0}
        engine = Engine(build_study_scene(config), config=config, clock=lambda: sim["t"])
        for text in priority_texts[:5]:  # warm-up
            hit = match_priority(text)
            if hit:
                engine.preempt(hit)
        engine.tick()
        samples = []
        for text in priority_texts:
            t0 = time.perf_counter()
            hit = match_priority(text)
            if hit is not None:
                engine.preempt(hit)
            samples.append((time.perf_counter() - t0) * 1000.0)
            engine.tick()
        out["priority"] = _stats(samples)

    if grammar_texts:
        parser = GrammarParser(scene, config)
        from .interpreter import CommandHistory
        history = CommandHistory()
        parser.parse(Command("warm up"), history)
        samples = []
        for i, text in enumerate(grammar_texts):
            t0 = time.perf_counter()
            result = parser.parse(Command(text, seq=i), history)
            samples.append((time.perf_counter() - t0) * 1000.0)
            if result.disposition == "execute":
                history.push(result.source, result)
        out["grammar"] = _stats(samples)

        # End to end: text in, first frame of the executing plan out.
        sim = {"t": 0.0}
        engine = Engine(build_study_scene(config), config=config, clock=lambda: sim["t"])
        parser2 = GrammarParser(engine.scene, config)
        pipeline = CommandPipeline(parser2, on_list=engine.submit,
                                   on_preempt=engine.preempt,
                                   clock=lambda: sim["t"])
        e2e = []
        for text in grammar_texts:
            t0 = time.perf_counter()
            pipeline.feed(text if text.rstrip().endswith((".", "?", "!")) else text + ".")
            engine.tick()
            e2e.append((time.perf_counter() - t0) * 1000.0)
            for _ in range(2000):
                if _quiesced(engine):
                    break
                engine.tick()
        out["end_to_end"] = _stats(e2e)

    return out


def _stats(samples_ms: list[float]) -> dict:
    return {
        "count": len(samples_ms),
        "p50_ms": _pct(samples_ms, 50),
        "p95_ms": _pct(samples_ms, 95),
        "max_ms": max(samples_ms),
    }


# ---------------------------------------------------------------------------
# Recording replay
# ---------------------------------------------------------------------------

def replay_recording(path: str | Path, config: EngineConfig | None = None) -> dict:
    """Re-drive a headless engine from a traffic recording's inbound half."""
    config = config or EngineConfig()
    lines = Path(path).read_text().splitlines()
    inbound = []
    for line in lines:
        if not line.strip():
            continue
        entry = json.loads(line)
        if entry.get("dir") == "in":
            inbound.append(entry["msg"])
    sim = {"t": 0.0}
    engine = Engine(build_study_scene(config), config=config, clock=lambda: sim["t"])
    parser = GrammarParser(engine.scene, config)
    pipeline = CommandPipeline(parser, on_list=engine.submit,
                               on_preempt=engine.preempt,
                               on_reply=engine.resolve_disambiguation,
                               reply_gate=lambda: engine.parked is not None,
                               clock=lambda: sim["t"])
    frames = 0
    for msg in inbound:
        if msg.get("type") == "command_text":
            pipeline.feed(msg.get("payload", ""))
            pipeline.flush()
        elif msg.get("type") == "disambiguation_reply":
            engine.resolve_disambiguation(msg.get("payload", 0))
        for _ in range(3600):
            engine.tick()
            frames += 1
            sim["t"] += 1.0 / config.fps
            if _quiesced(engine):
                break
    return {"inbound": len(inbound), "frames": frames,
            "state": engine.state_summary()}

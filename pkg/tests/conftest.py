import numpy as np
import pytest

from proxyhand.config import EngineConfig
from proxyhand.controller import Engine
from proxyhand.instructions import Command
from proxyhand.interpreter import CommandHistory, GrammarParser
from proxyhand.scene import build_study_scene


@pytest.fixture
def scene():
    return build_study_scene()


@pytest.fixture
def engine(scene):
    sim = {"t": 0.0}
    eng = Engine(scene, clock=lambda: sim["t"])
    eng._sim = sim
    return eng


@pytest.fixture
def parser(scene):
    return GrammarParser(scene)


class EngineDriver:
    """Test harness around an Engine with simulated time."""

    def __init__(self, scene=None, config=None):
        self.config = config or EngineConfig()
        self.scene = scene if scene is not None else build_study_scene(self.config)
        self.sim = {"t": 0.0}
        self.engine = Engine(self.scene, config=self.config, clock=lambda: self.sim["t"])
        self.parser = GrammarParser(self.scene, self.config)
        self.history = CommandHistory()
        self.feedback = []
        self.interactions = []
        self._seq = 0

    def parse(self, text):
        cmd = Command(text, seq=self._seq, received_at=self.sim["t"])
        self._seq += 1
        result = self.parser.parse(cmd, self.history)
        if result.disposition == "execute":
            self.history.push(cmd, result)
        return result

    def submit(self, text):
        result = self.parse(text)
        assert result.disposition == "execute", (text, result.disposition, result.note)
        self.engine.submit(result)
        return result

    def tick(self, n=1):
        last = None
        for _ in range(n):
            last = self.engine.tick()
            self.feedback.extend(last.feedback)
            self.interactions.extend(last.interactions)
            self.sim["t"] += 1.0 / self.config.fps
        return last

    def run_until_idle(self, max_ticks=6000):
        for _ in range(max_ticks):
            self.tick()
            e = self.engine
            if e._submit_inbox or e._preempt_inbox:
                continue
            if e.status == "holding":
                return  # pinned: nothing moves without new input
            if (e.status in ("idle", "paused") and not e.queue
                    and e.active_list is None and e.active is None
                    and e.parked is None):
                return
        raise AssertionError("engine did not quiesce")

    def run(self, text):
        self.submit(text)
        self.run_until_idle()

    def feedback_kinds(self):
        return [fb.kind for fb in self.feedback]


@pytest.fixture
def driver():
    return EngineDriver()


def random_pose(rng, scale=0.3):
    base = rng.uniform(-scale, scale, size=3)
    from proxyhand.gestures import REST_POSE
    return REST_POSE + base


def assert_state_equal(a, b):
    """Compare (pose, scene snapshot, binding) triples bit-exactly."""
    pose_a, snap_a, held_a = a
    pose_b, snap_b, held_b = b
    assert np.array_equal(pose_a, pose_b)
    assert held_a == held_b
    assert snap_a["ids"] == snap_b["ids"]
    for oid in snap_a["ids"]:
        oa, ob = snap_a["objects"][oid], snap_b["objects"][oid]
        assert np.array_equal(oa.position, ob.position), oid
        assert oa.pressed_count == ob.pressed_count, oid
        assert oa.slider_value == ob.slider_value, oid
        assert oa.knob_angle == ob.knob_angle, oid
        assert oa.contained_in == ob.contained_in, oid


def capture_state(engine):
    return (engine.pose.copy(), engine.scene.snapshot(), engine.held)

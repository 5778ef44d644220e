import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxyhand.instructions import (Command, GestureStep, MovementStep,
                                    TemporalStep, validate_list)
from proxyhand.interpreter import (CommandHistory, CommandPipeline,
                                   GrammarParser, NoAffordancePlanError,
                                   StreamSegmenter, match_priority,
                                   parse_disambiguation_reply, plan_affordance)
from proxyhand.scene import Scene, SceneObject, build_study_scene

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

STREAMED_COMMANDS = ("put the pink fruit into the basket, press and hold "
                     "the like button, wait actually, the confirm button")


def scene_with_bag():
    scene = build_study_scene()
    scene.add(SceneObject("bag", "bag", "grabbable", ["punching"],
                          (0.7, 1.1, -0.4), (0.1, 0.18, 0.1)))
    return scene


class TestSegmentation:
    def test_four_command_stream(self):
        seg = StreamSegmenter()
        out = seg.feed(STREAMED_COMMANDS)
        out += seg.flush()
        assert [c.raw_text for c in out] == [
            "put the pink fruit into the basket",
            "press and hold the like button",
            "wait actually",
            "the confirm button",
        ]

    def test_single_sentence(self):
        seg = StreamSegmenter()
        out = seg.feed("pinch the cube.")
        assert [c.raw_text for c in out] == ["pinch the cube"]

    def test_chunks_splitting_words(self):
        seg = StreamSegmenter()
        out = []
        for chunk in ("pin", "ch the cu", "be."):
            out += seg.feed(chunk)
        assert [c.raw_text for c in out] == ["pinch the cube"]

    @given(st.integers(min_value=1, max_value=len(STREAMED_COMMANDS) - 1),
           st.integers(min_value=1, max_value=len(STREAMED_COMMANDS) - 1))
    @settings(max_examples=60, deadline=None)
    def test_chunk_boundary_independence(self, cut_a, cut_b):
        lo, hi = sorted((cut_a, cut_b))
        seg = StreamSegmenter()
        out = seg.feed(STREAMED_COMMANDS[:lo])
        out += seg.feed(STREAMED_COMMANDS[lo:hi])
        out += seg.feed(STREAMED_COMMANDS[hi:])
        out += seg.flush()
        assert [c.raw_text for c in out] == [
            "put the pink fruit into the basket",
            "press and hold the like button",
            "wait actually",
            "the confirm button",
        ]

    def test_intra_command_comma_not_split(self):
        seg = StreamSegmenter()
        out = seg.feed("grab the big, red apple.")
        assert [c.raw_text for c in out] == ["grab the big, red apple"]

    def test_seq_strictly_increasing(self):
        seg = StreamSegmenter()
        out = seg.feed("pinch. grab the cube. stop.")
        assert [c.seq for c in out] == [0, 1, 2]

    def test_question_and_bang_terminators(self):
        seg = StreamSegmenter()
        out = seg.feed("grab the apple! can you pinch?")
        assert [c.raw_text for c in out] == ["grab the apple", "can you pinch"]

    def test_empty_clauses_skipped(self):
        seg = StreamSegmenter()
        out = seg.feed("..  . stop.")
        assert [c.raw_text for c in out] == ["stop"]


class TestPriorityTier:
    @pytest.mark.parametrize("text,control", [
        ("stop", "stop"), ("halt", "stop"), ("freeze", "stop"),
        ("Stop!", "stop"), ("please stop", "stop"),
        ("continue", "continue"), ("resume", "continue"), ("go on", "continue"),
        ("faster", "faster"), ("speed up", "faster"),
        ("slower", "slower"), ("slow down", "slower"),
        ("undo", "undo_step"), ("wait actually", "undo_step"),
        ("go back", "undo_step"),
        ("redo", "redo_step"),
        ("hold", "hold"), ("keep holding", "hold"),
    ])
    def test_keywords(self, text, control):
        hit = match_priority(text)
        assert hit is not None and hit.control == control

    @pytest.mark.parametrize("text", [
        "grab the apple", "press and hold the like button", "hold the peach",
        "", "the confirm button", "stop sign ahead please maybe",
    ])
    def test_non_keywords(self, text):
        assert match_priority(text) is None

    def test_pipeline_skips_parse_for_priority_clause(self):
        parsed, preempts = [], []

        class SpyParser:
            def parse(self, cmd, history):
                parsed.append(cmd.raw_text)
                from proxyhand.instructions import irrelevant
                return irrelevant(cmd)

        pipe = CommandPipeline(SpyParser(), on_list=lambda r: None,
                               on_preempt=lambda t: preempts.append(t.control))
        pipe.feed("grab the apple. stop. move left.")
        pipe.flush()
        assert preempts == ["stop"]
        assert parsed == ["grab the apple", "move left"]

    def test_partial_fire_before_terminator(self):
        preempts = []

        class NeverParser:
            def parse(self, cmd, history):
                from proxyhand.instructions import irrelevant
                return irrelevant(cmd)

        pipe = CommandPipeline(NeverParser(), on_list=lambda r: None,
                               on_preempt=lambda t: preempts.append(t.control))
        pipe.feed("sto")
        assert preempts == []
        pipe.feed("p")          # partial now reads "stop": fires immediately
        assert preempts == ["stop"]
        pipe.feed(".")          # clause completion must not double-fire
        assert preempts == ["stop"]

    def test_hold_waits_for_clause_completion(self):
        preempts, lists = [], []
        parser = GrammarParser(build_study_scene())
        pipe = CommandPipeline(parser, on_list=lists.append,
                               on_preempt=lambda t: preempts.append(t.control))
        pipe.feed("hold")
        assert preempts == []  # could still become "hold the peach"
        pipe.feed(" the peach.")
        assert preempts == []
        assert lists and lists[0].steps[0].gesture == "grab"
        pipe.feed("hold.")
        assert preempts == ["hold"]


class TestReplyParsing:
    @pytest.mark.parametrize("text,expected", [
        ("2", 2), ("2.", 2), ("number 2", 2), ("the second one", 2),
        ("3", 3), ("the first one", 1), ("option 4", 4), ("two", 2),
    ])
    def test_replies(self, text, expected):
        assert parse_disambiguation_reply(text) == expected

    @pytest.mark.parametrize("text", ["grab the cube", "22 monkeys", "", "once"])
    def test_non_replies(self, text):
        assert parse_disambiguation_reply(text) is None


class TestGrammarDecomposition:
    @pytest.fixture(autouse=True)
    def _setup(self):
        self.scene = scene_with_bag()
        self.parser = GrammarParser(self.scene)
        self.history = CommandHistory()

    def parse(self, text):
        result = self.parser.parse(Command(text), self.history)
        if result.disposition == "execute":
            self.history.push(result.source, result)
        return result

    def test_bare_pinch(self):
        assert self.parse("pinch").steps == [GestureStep("pinch")]

    def test_pull_up(self):
        assert self.parse("pull up").steps == [
            GestureStep("grab", hold=True),
            MovementStep("translational", direction="up"),
        ]

    def test_punch_the_bag_twice(self):
        assert self.parse("punch the bag twice").steps == [
            GestureStep("punch", "bag"),
            TemporalStep("repeat", 2),
        ]

    def test_twist_the_knob(self):
        assert self.parse("twist the knob to the right").steps == [
            GestureStep("grab", "knob"),
            MovementStep("rotational", rotation="roll_right"),
        ]

    def test_put_apple_into_basket(self):
        assert self.parse("put the apple into the basket").steps == [
            GestureStep("grab", "apple"),
            MovementStep("translational", object="basket", position="on_top_of"),
            GestureStep("open_hand"),
        ]

    def test_irrelevant_chatter(self):
        result = self.parse("how are you today")
        assert result.disposition == "irrelevant"
        assert result.steps == []

    def test_unmatchable_interaction(self):
        result = self.parse("grab the spaceship")
        assert result.disposition == "uninterpretable"

    def test_typo_repair(self):
        steps = self.parse("press the power bottom").steps
        assert steps == [GestureStep("point", "power button")]

    def test_constraint_extraction(self):
        steps = self.parse("grab the middle watermelon").steps
        assert steps[0].gesture == "grab"
        assert steps[0].object == "watermelon"
        assert [c.kind for c in steps[0].constraints] == ["in_the_middle"]
        assert steps[0].ambiguous is False

    def test_ambiguity_marked(self):
        result = self.parse("grab the watermelon")
        assert result.steps[0].ambiguous is True

    def test_anaphora_reuses_previous_gesture(self):
        self.parse("press and hold the like button")
        steps = self.parse("the confirm button").steps
        assert steps == [GestureStep("point", "confirm button", hold=True)]

    def test_hold_synonym_maps_to_grab(self):
        assert self.parse("hold the peach").steps[0] == GestureStep("grab", "peach")

    def test_determinism(self):
        a = self.parse("put the apple into the basket")
        b = GrammarParser(scene_with_bag()).parse(
            Command("put the apple into the basket"), CommandHistory())
        assert a.steps == b.steps

    def test_verbless_put_template(self):
        steps = self.parse("peach into the basket").steps
        assert steps[0] == GestureStep("grab", "peach")
        assert steps[1].object == "basket"

    def test_relational_anchor(self):
        steps = self.parse("grab the cube to the left of the basket").steps
        constraint = steps[0].constraints[0]
        assert constraint.kind == "to_the_left_of"
        assert constraint.anchor == "basket"


class TestAffordancePlanner:
    def test_knob_increase(self, scene):
        knob = scene.get("brightness_knob")
        steps = plan_affordance("increase", knob)
        assert steps == [GestureStep("grab", "brightness knob"),
                         MovementStep("rotational", rotation="roll_right")]

    def test_slider_maximize(self, scene):
        slider = scene.get("volume_slider")
        steps = plan_affordance("maximize", slider)
        assert steps == [GestureStep("pinch", "volume slider"),
                         MovementStep("translational", direction="up")]

    def test_grabbable_has_no_scalar(self, scene):
        with pytest.raises(NoAffordancePlanError):
            plan_affordance("increase", scene.get("apple"))

    def test_button_press(self, scene):
        steps = plan_affordance("press", scene.get("confirm_button"), hold=True)
        assert steps == [GestureStep("point", "confirm button", hold=True)]


class TestSchemaSoundness:
    def test_fuzzed_commands_never_emit_invalid_lists(self):
        # 10k generated commands; every execute-list must pass validation.
        rng = np.random.default_rng(99)
        scene = scene_with_bag()
        parser = GrammarParser(scene)
        history = CommandHistory()
        verbs = ["grab", "pinch", "press", "push", "punch", "take", "fetch",
                 "move", "put", "turn", "twist", "pull", "cut", "squeeze",
                 "maximize", "increase", "release", "swipe", "hold", "xyzzy"]
        objects = ["the apple", "the peach", "the cube", "the basket",
                   "the watermelon", "the left watermelon", "the bag",
                   "the power button", "the volume slider", "the brightness knob",
                   "the middle watermelon", "the gizmo", "it", ""]
        tails = ["", " twice", " up", " down", " to the right",
                 " into the basket", " on the left", " three times", " now"]
        count = 0
        for _ in range(10000):
            text = " ".join(filter(None, [
                str(rng.choice(verbs)), str(rng.choice(objects)),
                str(rng.choice(tails)).strip()]))
            result = parser.parse(Command(text), history)
            validate_list(result)  # raises on any schema violation
            if result.disposition == "execute":
                history.push(result.source, result)
                count += 1
        assert count > 3000  # the corpus is mostly parseable


class TestParaphraseCorpus:
    def test_full_grammar_coverage(self):
        corpus = json.loads((FIXTURES / "paraphrases.json").read_text())
        scene = build_study_scene()
        parser = GrammarParser(scene)
        failures = []
        for task, spec in corpus.items():
            for text in spec["phrasings"]:
                result = parser.parse(Command(text), CommandHistory())
                ok = result.disposition == "execute" and self._matches(
                    result, spec, scene)
                if not ok:
                    failures.append((task, text, result.disposition, result.note))
        assert not failures, failures

    @staticmethod
    def _matches(result, spec, scene):
        kind = spec["type"]
        steps = result.steps
        if kind == "gesture":
            step = steps[0]
            if not isinstance(step, GestureStep) or step.gesture != spec["gesture"]:
                return False
            res = scene.resolve_target(step.object, list(step.constraints))
            return res.outcome == "unique" and res.object_id == spec["object_id"]
        if kind == "put_into":
            if len(steps) != 3 or not isinstance(steps[0], GestureStep):
                return False
            grab = scene.resolve_target(steps[0].object, list(steps[0].constraints))
            dest = scene.resolve_target(steps[1].object, list(steps[1].constraints))
            return (grab.outcome == "unique" and grab.object_id == spec["object_id"]
                    and dest.outcome == "unique" and dest.object_id == spec["dest_id"]
                    and steps[2] == GestureStep("open_hand"))
        if kind == "steps":
            step = steps[0]
            if not isinstance(step, GestureStep) or step.gesture != spec["first_gesture"]:
                return False
            res = scene.resolve_target(step.object, list(step.constraints))
            return res.outcome == "unique" and res.object_id == spec["object_id"]
        if kind == "movement":
            step = steps[0]
            return isinstance(step, MovementStep) and \
                step.direction == spec["direction"]
        return False

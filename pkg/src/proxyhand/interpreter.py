"""Command interpretation: streaming segmentation, the fast keyword tier for
playback control, and the deterministic grammar that turns one sentence into
an InstructionList.

The ingest path is two-tiered. Every partial chunk is checked against a
fixed table of playback-control phrases (stop, hold, undo, ...) which fire
immediately and bypass parsing for that clause. Complete sentences that are
not playback controls go through the grammar: lexical repair against the
scene lexicon, verb-synonym mapping, multi-step decomposition templates,
constraint extraction, and ambiguity marking against the live scene.
"""
from __future__ import annotations

import re
import time
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CONFIG, EngineConfig
from .instructions import (Command, GestureStep, InstructionList, MovementStep,
                           TemporalStep, irrelevant, uninterpretable, validate_list)
from .scene import Scene, SpatialConstraint, lemma

TERMINATORS = ".?!"

# Playback-control phrases matched verbatim (after normalization) on partial
# input. Matching is whole-clause equality, not substring search: "press and
# hold the button" must reach the grammar, while a bare "hold" must not.
PRIORITY_PHRASES = {
    "stop": "stop", "halt": "stop", "freeze": "stop", "pause": "stop",
    "stop it": "stop", "stop stop": "stop",
    "continue": "continue", "resume": "continue", "go on": "continue",
    "keep going": "continue", "proceed": "continue",
    "faster": "faster", "speed up": "faster", "go faster": "faster",
    "slower": "slower", "slow down": "slower", "go slower": "slower",
    "undo": "undo_step", "wait actually": "undo_step", "go back": "undo_step",
    "undo that": "undo_step",
    "redo": "redo_step", "redo that": "redo_step",
    "hold": "hold", "hold it": "hold", "hold there": "hold", "keep holding": "hold",
}

_FILLERS = {"please", "now", "just", "ok", "okay", "hey", "and", "then"}

# Priority phrases that are also prefixes of longer gesture commands; these
# wait for their clause to complete instead of firing on partial input.
_PARTIAL_HAZARDS = {"hold", "take", "get"}

VERB_TO_GESTURE = {
    "pinch": "pinch",
    "point": "point", "poke": "point", "tap": "point", "click": "point",
    "press": "point", "touch": "point",
    "push": "push", "shove": "push",
    "grab": "grab", "take": "grab", "fetch": "grab", "catch": "grab",
    "carry": "grab", "lift": "grab", "hold": "grab", "grasp": "grab",
    "get": "grab", "pick": "grab",
    "swipe": "swipe", "sweep": "swipe", "wave": "swipe",
    "punch": "punch", "hit": "punch", "strike": "punch", "jab": "punch",
    "squeeze": "squeeze", "crush": "squeeze", "squish": "squeeze",
    "cut": "cut", "chop": "cut", "slice": "cut",
}

RELEASE_PHRASES = {
    "release", "release it", "let go", "let it go", "drop", "drop it",
    "open your hand", "open hand", "open your fingers", "open up",
}

MOVE_VERBS = {"move", "go", "slide", "shift", "bring"}
PUT_VERBS = {"put", "place", "drop", "move", "bring", "set", "stick"}
TURN_VERBS = {"turn", "twist", "rotate", "spin"}

DIRECTION_WORDS = {
    "up": "up", "upward": "up", "upwards": "up",
    "down": "down", "downward": "down", "downwards": "down",
    "left": "left", "right": "right",
    "forward": "forward", "forwards": "forward", "ahead": "forward",
    "backward": "backward", "backwards": "backward", "back": "backward",
}

ROTATION_WORDS = {
    ("pan", "left"): "pan_left", ("pan", "right"): "pan_right",
    ("roll", "left"): "roll_left", ("roll", "right"): "roll_right",
    ("tilt", "up"): "tilt_up", ("tilt", "down"): "tilt_down",
}

CLOCKWISE = {"clockwise"}
COUNTERCLOCKWISE = {"counterclockwise", "anticlockwise", "counterclock"}

NUMBER_WORDS = {
    "one": 1, "once": 1, "two": 2, "twice": 2, "three": 3, "thrice": 3,
    "four": 4, "five": 5, "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
}

ORDINAL_WORDS = {
    "first": 1, "second": 2, "third": 3, "fourth": 4, "fifth": 5,
    "1st": 1, "2nd": 2, "3rd": 3, "4th": 4, "5th": 5,
}

_ARTICLES = {"the", "a", "an", "this", "that", "your", "my", "its", "it"}

# Adjectives and phrases that become spatial constraints on a target query.
_ADJECTIVE_CONSTRAINTS = {
    "left": "on_the_left", "leftmost": "on_the_left",
    "middle": "in_the_middle", "center": "in_the_middle", "central": "in_the_middle",
    "right": "on_the_right", "rightmost": "on_the_right",
    "first": "first", "last": "last",
    "closest": "closest", "nearest": "closest",
    "farthest": "farthest", "furthest": "farthest",
}

_RELATION_PHRASES = [
    (("on", "top", "of"), "on_top_of"),
    (("to", "the", "left", "of"), "to_the_left_of"),
    (("to", "the", "right", "of"), "to_the_right_of"),
    (("in", "front", "of"), "in_front_of"),
    (("behind",), "behind"),
    (("under",), "under"),
    (("below",), "below"),
    (("above",), "above"),
]

_POSITION_PHRASES = [
    (("on", "the", "left",), "on_the_left"),
    (("on", "the", "right",), "on_the_right"),
    (("in", "the", "middle",), "in_the_middle"),
    (("in", "the", "center",), "in_the_middle"),
]

_GOAL_VERBS = {
    "increase": "increase", "raise": "increase", "brighten": "increase",
    "decrease": "decrease", "lower": "decrease", "dim": "decrease",
    "maximize": "maximize", "max": "maximize",
    "minimize": "minimize",
    "use": "press", "toggle": "press",
}


class NoAffordancePlanError(ValueError):
    """The object's affordance offers no expansion for the goal verb."""


def normalize_phrase(text: str) -> str:
    tokens = re.findall(r"[a-z']+", text.lower())
    while tokens and tokens[0] in _FILLERS:
        tokens.pop(0)
    while tokens and tokens[-1] in _FILLERS:
        tokens.pop()
    return " ".join(tokens)


def match_priority(text: str) -> TemporalStep | None:
    """Map a partial command onto a playback control, or None.

    Pure and cheap; runs on every chunk before any parsing happens.
    """
    control = PRIORITY_PHRASES.get(normalize_phrase(text))
    return TemporalStep(control) if control else None


def parse_disambiguation_reply(text: str) -> int | None:
    """Recognize ' 2 ', 'number 2', 'the second one' style replies."""
    tokens = re.findall(r"[a-z0-9]+", text.lower())
    while tokens and tokens[0] in ("number", "option", "label", "the"):
        tokens.pop(0)
    while tokens and tokens[-1] in ("one", "please"):
        # "the second one": trailing "one" is a pronoun, not the number.
        if len(tokens) == 1:
            break
        tokens.pop()
    if len(tokens) != 1:
        return None
    token = tokens[0]
    if token.isdigit():
        return int(token)
    if token in ORDINAL_WORDS:
        return ORDINAL_WORDS[token]
    if token in NUMBER_WORDS and token not in ("once", "twice", "thrice"):
        return NUMBER_WORDS[token]
    return None


# ---------------------------------------------------------------------------
# Streaming segmentation
# ---------------------------------------------------------------------------

_SPLIT_STARTERS = (
    set(VERB_TO_GESTURE) | MOVE_VERBS | PUT_VERBS | TURN_VERBS
    | set(_GOAL_VERBS) | {"pan", "roll", "tilt", "release", "open", "do", "repeat", "pull"}
    | {phrase.split()[0] for phrase in PRIORITY_PHRASES}
)


class StreamSegmenter:
    """Split an incremental text stream into command sentences.

    Sentences end at terminal punctuation. A comma also ends a sentence
    when the clause before it is a bare playback-control phrase or the
    word after it starts a new imperative; other commas stay inside the
    command. Chunk boundaries are irrelevant: any chunking of the same
    text yields the same commands.
    """

    def __init__(self, clock=None) -> None:
        self._buf = ""
        self._scan = 0
        self._seq = 0
        self._clock = clock or time.monotonic

    def pending_text(self) -> str:
        return self._buf

    def feed(self, chunk: str) -> list[Command]:
        self._buf += chunk
        out: list[Command] = []
        i = self._scan
        while i < len(self._buf):
            ch = self._buf[i]
            if ch in TERMINATORS:
                self._emit(self._buf[:i], out)
                self._buf = self._buf[i + 1:]
                i = 0
                continue
            if ch == ",":
                decision = self._comma_splits(i)
                if decision is None:
                    break  # need more text to judge this comma
                if decision:
                    self._emit(self._buf[:i], out)
                    self._buf = self._buf[i + 1:]
                    i = 0
                    continue
            i += 1
        self._scan = i
        return out

    def flush(self) -> list[Command]:
        out: list[Command] = []
        self._emit(self._buf, out)
        self._buf = ""
        self._scan = 0
        return out

    def _comma_splits(self, i: int) -> bool | None:
        if normalize_phrase(self._buf[:i]) in PRIORITY_PHRASES:
            return True
        rest = self._buf[i + 1:]
        match = re.match(r"\s*([A-Za-z']+)(\W)", rest)
        if match is None:
            # Token still incomplete (or nothing yet): cannot decide.
            if re.fullmatch(r"\s*[A-Za-z']*", rest):
                return None
            return False
        return lemma(match.group(1)) in _SPLIT_STARTERS

    def _emit(self, text: str, out: list[Command]) -> None:
        text = text.strip()
        if text:
            out.append(Command(text, seq=self._seq, received_at=self._clock()))
            self._seq += 1


# ---------------------------------------------------------------------------
# Grammar tier
# ---------------------------------------------------------------------------

def edit_distance(a: str, b: str, cap: int = 3) -> int:
    if abs(len(a) - len(b)) > cap:
        return cap + 1
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        if min(cur) > cap:
            return cap + 1
        prev = cur
    return prev[-1]


@dataclass
class CommandHistory:
    """Recently parsed commands, for 'do it again' style references."""
    depth: int = 50
    entries: list[tuple[Command, InstructionList]] = field(default_factory=list)

    def push(self, cmd: Command, result: InstructionList) -> None:
        self.entries.append((cmd, result))
        if len(self.entries) > self.depth:
            self.entries.pop(0)

    def last_object_gesture(self) -> GestureStep | None:
        for _, result in reversed(self.entries):
            if result.disposition != "execute":
                continue
            for step in result.steps:
                if isinstance(step, GestureStep) and step.object is not None:
                    return step
        return None


def plan_affordance(goal: str, obj, hold: bool = False) -> list:
    """Expand a high-level goal verb against an object's affordance."""
    kind = obj.affordance
    if kind == "knob":
        if goal in ("increase", "maximize"):
            return [GestureStep("grab", obj.name),
                    MovementStep("rotational", rotation="roll_right")]
        if goal in ("decrease", "minimize"):
            return [GestureStep("grab", obj.name),
                    MovementStep("rotational", rotation="roll_left")]
    elif kind == "slider":
        if goal in ("increase", "maximize"):
            return [GestureStep("pinch", obj.name),
                    MovementStep("translational", direction="up")]
        if goal in ("decrease", "minimize"):
            return [GestureStep("pinch", obj.name),
                    MovementStep("translational", direction="down")]
    elif kind == "button" and goal in ("press", "increase", "decrease"):
        return [GestureStep("point", obj.name, hold=hold)]
    elif kind == "grabbable" and goal == "put_into":
        raise NoAffordancePlanError("put_into needs a destination; use the template")
    raise NoAffordancePlanError(f"no {goal!r} plan for affordance {kind!r}")


class GrammarParser:
    """Deterministic lexicon-driven parser: one (command, scene) in, one
    InstructionList out, no randomness anywhere."""

    def __init__(self, scene: Scene, config: EngineConfig = DEFAULT_CONFIG) -> None:
        self.scene = scene
        self.config = config
        self._lexicon = self._build_lexicon()
        self._repair_candidates = sorted(
            w for w in self._lexicon
            if len(w) >= 3 and w.isalpha() and w not in _ARTICLES and w not in _FILLERS
            and w not in NUMBER_WORDS and w not in ORDINAL_WORDS
        )

    def _build_lexicon(self) -> set[str]:
        words = set(self.scene.lexicon())
        words |= set(VERB_TO_GESTURE) | MOVE_VERBS | PUT_VERBS | TURN_VERBS
        words |= set(_GOAL_VERBS) | set(DIRECTION_WORDS) | set(_ADJECTIVE_CONSTRAINTS)
        words |= {w for phrase in PRIORITY_PHRASES for w in phrase.split()}
        words |= set(NUMBER_WORDS) | set(ORDINAL_WORDS)
        words |= _ARTICLES | _FILLERS
        words |= {"hand", "into", "in", "inside", "onto", "to", "of", "on", "at",
                  "top", "front", "times", "time", "again", "release", "open",
                  "fingers", "pan", "roll", "tilt", "pull", "side", "me", "until",
                  "by", "with", "towards", "toward", "away", "from",
                  "can", "could", "would", "will", "you", "want", "like", "i"}
        return words

    def _interaction_words(self) -> set[str]:
        if not hasattr(self, "_interaction_cache"):
            self._interaction_cache = (
                self.scene.lexicon() | set(VERB_TO_GESTURE) | MOVE_VERBS
                | PUT_VERBS | TURN_VERBS | set(_GOAL_VERBS)
                | set(DIRECTION_WORDS) | {"pan", "roll", "tilt", "pull", "release"}
            )
        return self._interaction_cache

    def repair_token(self, token: str) -> str:
        """Typo repair: nearest meaningful lexicon word, distance at most 2.

        Short tokens only move one edit; anything else stays as said.
        """
        if token in self._lexicon or len(token) < 3 or token.isdigit():
            return token
        cap = 1 if len(token) <= 4 else 2
        best, best_d = token, cap + 1
        for word in self._repair_candidates:
            d = edit_distance(token, word, cap=cap)
            if d < best_d:
                best, best_d = word, d
                if d == 1:
                    break
        return best if best_d <= cap else token

    def _tokens(self, text: str) -> list[str]:
        raw = re.findall(r"[a-z0-9']+", text.lower())
        out = []
        for token in raw:
            token = token.strip("'")
            if not token:
                continue
            token = lemma(token) if not token.isdigit() else token
            out.append(self.repair_token(token))
        return out

    @staticmethod
    def _strip_courtesy(tokens: list[str]) -> list[str]:
        prefixes = [
            ("i", "want", "you", "to"), ("i", "would", "like", "you", "to"),
            ("can", "you"), ("could", "you"), ("would", "you"), ("will", "you"),
            ("please",), ("now",), ("just",), ("hey",), ("ok",), ("okay",),
        ]
        changed = True
        while changed:
            changed = False
            for prefix in prefixes:
                if tuple(tokens[: len(prefix)]) == prefix:
                    tokens = tokens[len(prefix):]
                    changed = True
        return tokens

    # -- target phrases -------------------------------------------------

    def _extract_constraints(self, tokens: list[str]) -> tuple[list[str], list[SpatialConstraint], str]:
        """Split a target phrase into query tokens and spatial constraints."""
        constraints: list[SpatialConstraint] = []
        note = ""
        tokens = list(tokens)

        # Relational phrases bind everything after them as the anchor.
        for phrase, kind in _RELATION_PHRASES:
            for i in range(len(tokens) - len(phrase) + 1):
                if tuple(tokens[i: i + len(phrase)]) == phrase:
                    anchor_tokens = [t for t in tokens[i + len(phrase):] if t not in _ARTICLES]
                    tokens = tokens[:i]
                    if kind == "on_top_of":
                        kind = "above"
                    anchor_res = self.scene.resolve_target(" ".join(anchor_tokens))
                    if anchor_res.outcome == "unique":
                        constraints.append(SpatialConstraint(kind, anchor_res.object_id))
                    else:
                        note = f"could not resolve anchor {' '.join(anchor_tokens)!r}"
                    break
            else:
                continue
            break

        for phrase, kind in _POSITION_PHRASES:
            for i in range(len(tokens) - len(phrase) + 1):
                if tuple(tokens[i: i + len(phrase)]) == phrase:
                    constraints.append(SpatialConstraint(kind))
                    tokens = tokens[:i] + tokens[i + len(phrase):]
                    break

        kept: list[str] = []
        for token in tokens:
            if token in _ADJECTIVE_CONSTRAINTS and token not in self.scene.lexicon():
                constraints.append(SpatialConstraint(_ADJECTIVE_CONSTRAINTS[token]))
            elif token not in _ARTICLES and token not in ("of", "side", "one"):
                kept.append(token)
        return kept, constraints, note

    def _resolve(self, query_tokens: list[str], constraints: list[SpatialConstraint],
                 reference: np.ndarray | None = None):
        query = " ".join(query_tokens)
        return query, self.scene.resolve_target(query, constraints, reference)

    def _gesture_step(self, gesture: str, target_tokens: list[str], hold: bool):
        """Build a gesture step, resolving its target. Returns (step, note)."""
        if not target_tokens:
            return GestureStep(gesture, hold=hold), ""
        query_tokens, constraints, note = self._extract_constraints(target_tokens)
        if not query_tokens:
            return GestureStep(gesture, hold=hold), note
        query, res = self._resolve(query_tokens, constraints)
        if res.outcome == "none":
            return None, note or f"no object matching {query!r}"
        return GestureStep(gesture, query, tuple(constraints),
                           ambiguous=res.outcome == "ambiguous", hold=hold), note

    # -- the parse entry point -------------------------------------------

    def parse(self, cmd: Command, history: CommandHistory | None = None) -> InstructionList:
        result = self._parse_inner(cmd, history or CommandHistory())
        validate_list(result)
        return result

    def _parse_inner(self, cmd: Command, history: CommandHistory) -> InstructionList:
        tokens = self._strip_courtesy(self._tokens(cmd.raw_text))
        if not tokens:
            return irrelevant(cmd, "empty command")

        phrase = " ".join(tokens)

        control = PRIORITY_PHRASES.get(normalize_phrase(phrase))
        if control:
            return InstructionList(cmd, [TemporalStep(control)])
        # Leading control verbs that cannot start a gesture command still
        # read as playback controls ("stop it right now").
        if tokens[0] in ("stop", "halt", "freeze", "pause"):
            return InstructionList(cmd, [TemporalStep("stop")])
        if tokens[0] in ("continue", "resume", "proceed"):
            return InstructionList(cmd, [TemporalStep("continue")])
        if tokens[0] in ("undo", "redo"):
            return InstructionList(cmd, [TemporalStep(f"{tokens[0]}_step")])

        repeat = self._match_repeat(tokens)
        if repeat is not None:
            return InstructionList(cmd, [TemporalStep("repeat", repeat)])

        if phrase in RELEASE_PHRASES:
            return InstructionList(cmd, [GestureStep("open_hand")])

        thumb = self._match_thumb(tokens)
        if thumb is not None:
            return InstructionList(cmd, [GestureStep(thumb)])

        if len(tokens) == 2 and tokens[0] == "double" and tokens[1] in VERB_TO_GESTURE:
            return InstructionList(cmd, [GestureStep(VERB_TO_GESTURE[tokens[1]]),
                                         TemporalStep("repeat", 2)])

        # "press and hold ..." / "... and hold it" folds into a hold flag.
        tokens, hold = self._strip_hold_suffix(tokens)

        for builder in (self._match_put_into, self._match_pull, self._match_rotation,
                        self._match_move, self._match_goal, self._match_gesture):
            result = builder(cmd, tokens, hold, history)
            if result is not None:
                return result

        result = self._match_bare_target(cmd, tokens, hold, history)
        if result is not None:
            return result

        if any(t in self._interaction_words() for t in tokens):
            return uninterpretable(cmd, f"could not interpret {cmd.raw_text!r}")
        return irrelevant(cmd, "not an interaction command")

    # -- clause templates ------------------------------------------------

    @staticmethod
    def _match_repeat(tokens: list[str]) -> int | None:
        phrase = " ".join(tokens)
        if phrase in ("again", "do it again", "do that again", "one more time"):
            return 2
        m = re.fullmatch(r"(?:do it |do that |repeat )?(?:it )?(\w+) (?:more )?time", phrase)
        if m:
            token = m.group(1)
            count = int(token) if token.isdigit() else NUMBER_WORDS.get(token)
            if count:
                return count
        if phrase in ("do it twice", "repeat twice"):
            return 2
        return None

    @staticmethod
    def _match_thumb(tokens: list[str]) -> str | None:
        for i, token in enumerate(tokens[:-1]):
            if token in ("thumb", "thumbs"):
                if tokens[i + 1] == "up":
                    return "thumb_up"
                if tokens[i + 1] == "down":
                    return "thumb_down"
        if tokens in (["like"],):
            return "thumb_up"
        return None

    @staticmethod
    def _strip_hold_suffix(tokens: list[str]) -> tuple[list[str], bool]:
        phrase = " ".join(tokens)
        for marker in (" and hold it", " and hold there", " and keep holding", " and hold"):
            if phrase.endswith(marker):
                return phrase[: -len(marker)].split(), True
        if " and hold " in f" {phrase} ":
            tokens = [t for t in tokens]
            for i in range(len(tokens) - 1):
                if tokens[i] == "and" and tokens[i + 1] == "hold":
                    return tokens[:i] + tokens[i + 2:], True
        return tokens, False

    def _match_put_into(self, cmd, tokens, hold, history):
        preps = {"into", "inside", "onto", "in", "to"}
        idx = next((i for i, t in enumerate(tokens) if t in preps), None)
        if idx is None:
            return None
        if tokens[idx] == "to" and tokens[0] not in PUT_VERBS:
            return None
        left = tokens[:idx]
        right = [t for t in tokens[idx + 1:] if t not in _ARTICLES]
        if not left or not right:
            return None
        # "grab the melon in the middle" keeps its positional phrase.
        if right[0] in ("middle", "center", "left", "right", "front", "back"):
            return None
        if left[0] in VERB_TO_GESTURE and left[0] not in PUT_VERBS:
            return None
        if left[0] in PUT_VERBS or left[0] in MOVE_VERBS:
            left = left[1:]
        left = [t for t in left if t not in _ARTICLES and t != "me"]
        if not left:
            return None

        step, note = self._gesture_step("grab", left, hold=False)
        if step is None:
            return uninterpretable(cmd, note)
        dest_tokens, dest_constraints, note2 = self._extract_constraints(right)
        dest_query, dest_res = self._resolve(dest_tokens, dest_constraints)
        if dest_res.outcome == "none":
            return uninterpretable(cmd, note2 or f"no object matching {dest_query!r}")
        move = MovementStep("translational", object=dest_query,
                            constraints=tuple(dest_constraints),
                            position="on_top_of",
                            ambiguous=dest_res.outcome == "ambiguous")
        return InstructionList(cmd, [step, move, GestureStep("open_hand")])

    def _match_pull(self, cmd, tokens, hold, history):
        if not tokens or tokens[0] != "pull":
            return None
        rest = tokens[1:]
        direction = None
        for i, t in enumerate(rest):
            if t in DIRECTION_WORDS:
                direction = DIRECTION_WORDS[t]
                rest = rest[:i] + rest[i + 1:]
                break
        rest = [t for t in rest if t not in _ARTICLES and t not in ("to", "it")]
        direction = direction or "backward"
        if rest:
            step, note = self._gesture_step("grab", rest, hold=True)
            if step is None:
                return uninterpretable(cmd, note)
        else:
            step = GestureStep("grab", hold=True)
        return InstructionList(cmd, [step, MovementStep("translational", direction=direction)])

    def _match_rotation(self, cmd, tokens, hold, history):
        for (a, b), rotation in ROTATION_WORDS.items():
            for i in range(len(tokens) - 1):
                if tokens[i] == a and tokens[i + 1] == b:
                    return InstructionList(cmd, [MovementStep("rotational", rotation=rotation)])
        if not tokens or tokens[0] not in TURN_VERBS:
            return None
        rest = tokens[1:]
        # Direction of the twist.
        rotation = None
        stripped: list[str] = []
        skip = 0
        for i, t in enumerate(rest):
            if skip:
                skip -= 1
                continue
            if t in CLOCKWISE:
                rotation = "roll_right"
            elif t in COUNTERCLOCKWISE:
                rotation = "roll_left"
            elif t == "to" and rest[i + 1: i + 3] == ["the", "right"]:
                rotation, skip = "roll_right", 2
            elif t == "to" and rest[i + 1: i + 3] == ["the", "left"]:
                rotation, skip = "roll_left", 2
            elif t == "right" and i >= len(rest) - 1:
                rotation = "roll_right"
            elif t == "left" and i >= len(rest) - 1:
                rotation = "roll_left"
            else:
                stripped.append(t)
        if rotation is None:
            return None
        target = [t for t in stripped if t not in _ARTICLES and t not in ("hand", "it")]
        if not target:
            return InstructionList(cmd, [MovementStep("rotational", rotation=rotation)])
        step, note = self._gesture_step("grab", target, hold=False)
        if step is None:
            return uninterpretable(cmd, note)
        return InstructionList(cmd, [step, MovementStep("rotational", rotation=rotation)])

    def _match_move(self, cmd, tokens, hold, history):
        if not tokens or tokens[0] not in MOVE_VERBS:
            return None
        rest = [t for t in tokens[1:] if t not in ("hand",)]
        rest = [t for t in rest if t not in _ARTICLES]
        if not rest:
            return None
        for i, t in enumerate(rest):
            if t in DIRECTION_WORDS and (i == 0 or rest[i - 1] != "the"):
                return InstructionList(
                    cmd, [MovementStep("translational", direction=DIRECTION_WORDS[t])])
        # "move to the basket" / "move it on top of the shelf"
        rest = [t for t in rest if t not in ("it", "me")]
        position = None
        for phrase, kind in _RELATION_PHRASES:
            for i in range(len(rest) - len(phrase) + 1):
                if tuple(rest[i: i + len(phrase)]) == phrase:
                    position = kind
                    rest = rest[:i] + rest[i + len(phrase):]
                    break
            if position:
                break
        if rest and rest[0] in ("to", "towards", "toward", "at"):
            rest = rest[1:]
        rest = [t for t in rest if t not in _ARTICLES]
        if not rest:
            return None
        query_tokens, constraints, note = self._extract_constraints(rest)
        if not query_tokens:
            return None
        query, res = self._resolve(query_tokens, constraints)
        if res.outcome == "none":
            return uninterpretable(cmd, note or f"no object matching {query!r}")
        move = MovementStep("translational", object=query, constraints=tuple(constraints),
                            position=position, ambiguous=res.outcome == "ambiguous")
        return InstructionList(cmd, [move])

    def _match_goal(self, cmd, tokens, hold, history):
        goal = None
        rest = tokens
        if len(tokens) >= 2 and tokens[0] == "turn" and tokens[1] in ("up", "down"):
            goal = "increase" if tokens[1] == "up" else "decrease"
            rest = tokens[2:]
        elif tokens[0] in _GOAL_VERBS:
            goal = _GOAL_VERBS[tokens[0]]
            rest = tokens[1:]
        if goal is None:
            return None
        if not [t for t in rest if t not in _ARTICLES]:
            return uninterpretable(cmd, f"{goal} what?")
        query_tokens, constraints, note = self._extract_constraints(rest)
        query, res = self._resolve(query_tokens, constraints)
        if res.outcome == "none":
            return uninterpretable(cmd, note or f"no object matching {query!r}")
        if res.outcome == "ambiguous":
            return uninterpretable(cmd, f"ambiguous goal target {query!r}")
        obj = self.scene.get(res.object_id)
        try:
            steps = plan_affordance(goal, obj, hold=hold)
        except NoAffordancePlanError as exc:
            return uninterpretable(cmd, str(exc))
        return InstructionList(cmd, steps)

    def _match_gesture(self, cmd, tokens, hold, history):
        if not tokens or tokens[0] not in VERB_TO_GESTURE:
            return None
        verb = tokens[0]
        gesture = VERB_TO_GESTURE[verb]
        rest = tokens[1:]
        if verb == "pick" and rest[:1] == ["up"]:
            rest = rest[1:]
        if verb == "get" and rest[:1] == ["me"]:
            rest = rest[1:]

        repeat = None
        if rest and rest[-1] in ("twice", "thrice"):
            repeat = NUMBER_WORDS[rest[-1]]
            rest = rest[:-1]
        elif len(rest) >= 2 and rest[-1] == "time":
            token = rest[-2]
            count = int(token) if token.isdigit() else NUMBER_WORDS.get(token)
            if count:
                repeat = count
                rest = rest[:-2]

        trailing_dir = None
        if len(rest) == 1 and rest[0] in DIRECTION_WORDS:
            trailing_dir = DIRECTION_WORDS[rest[0]]
            rest = []

        step, note = self._gesture_step(gesture, rest, hold=hold)
        if step is None:
            return uninterpretable(cmd, note)
        steps: list = [step]
        if trailing_dir:
            steps.append(MovementStep("translational", direction=trailing_dir))
        if repeat:
            steps.append(TemporalStep("repeat", repeat))
        return InstructionList(cmd, steps)

    def _match_bare_target(self, cmd, tokens, hold, history):
        query_tokens, constraints, _ = self._extract_constraints(tokens)
        if not query_tokens:
            return None
        query, res = self._resolve(query_tokens, constraints)
        if res.outcome == "none":
            return None
        previous = history.last_object_gesture()
        if previous is None:
            return None
        return InstructionList(cmd, [GestureStep(
            previous.gesture, query, tuple(constraints),
            ambiguous=res.outcome == "ambiguous", hold=hold or previous.hold)])


# ---------------------------------------------------------------------------
# Ingest pipeline
# ---------------------------------------------------------------------------

class CommandPipeline:
    """Glue between a text stream and the engine.

    Feeds chunks to the segmenter, fires the keyword tier on partial input
    (skipping the grammar for that clause), routes disambiguation replies,
    and hands everything else to the parser. With an executor, parsing
    runs off the ingest path on a single worker, one command in flight in
    seq order, so a slow backend never delays keyword preemption or the
    tick loop.
    """

    def __init__(self, parser, on_list, on_preempt, on_reply=None,
                 reply_gate=None, on_command=None, clock=None,
                 executor=None) -> None:
        self.parser = parser
        self.segmenter = StreamSegmenter(clock=clock)
        self.history = CommandHistory()
        self.on_list = on_list
        self.on_preempt = on_preempt
        self.on_reply = on_reply
        self.reply_gate = reply_gate or (lambda: False)
        self.on_command = on_command
        self.executor = executor
        self._partial_fired = False
        self.parse_latencies: list[float] = []

    def feed(self, chunk: str) -> None:
        self._dispatch(self.segmenter.feed(chunk))
        if not self._partial_fired:
            partial = self.segmenter.pending_text()
            # "hold" alone could still grow into "hold the cup": it only
            # fires once its clause completes. Everything else fires now.
            if partial.strip() and normalize_phrase(partial) not in _PARTIAL_HAZARDS:
                hit = match_priority(partial)
                if hit is not None:
                    self._partial_fired = True
                    self.on_preempt(hit)

    def flush(self) -> None:
        self._dispatch(self.segmenter.flush())

    def _dispatch(self, commands: list[Command]) -> None:
        for idx, cmd in enumerate(commands):
            if idx == 0 and self._partial_fired:
                self._partial_fired = False
                continue
            self._partial_fired = False
            self._handle(cmd)

    def _handle(self, cmd: Command) -> None:
        if self.on_command:
            self.on_command(cmd)
        hit = match_priority(cmd.raw_text)
        if hit is not None:
            self.on_preempt(hit)
            return
        if self.reply_gate():
            number = parse_disambiguation_reply(cmd.raw_text)
            if number is not None and self.on_reply:
                self.on_reply(number)
                return
        if self.executor is not None:
            self.executor.submit(self._parse_and_dispatch, cmd)
        else:
            self._parse_and_dispatch(cmd)

    def _parse_and_dispatch(self, cmd: Command) -> None:
        start = time.perf_counter()
        result = self.parser.parse(cmd, self.history)
        self.parse_latencies.append(time.perf_counter() - start)
        if result.disposition == "execute":
            self.history.push(cmd, result)
            # A lone playback-control produced by the grammar still takes
            # the fast path to the controller.
            if len(result.steps) == 1 and isinstance(result.steps[0], TemporalStep) \
                    and result.steps[0].control != "repeat":
                self.on_preempt(result.steps[0])
                return
        self.on_list(result)

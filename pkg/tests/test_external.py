import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from proxyhand.external import ExternalBackend, control_vocabulary, scene_context
from proxyhand.instructions import Command, GestureStep
from proxyhand.interpreter import CommandHistory, GrammarParser
from proxyhand.scene import build_study_scene

PINCH_RESPONSE = [
    {"component_type": "gesture",
     "value": {"gesture_type": "pinch", "object": "cube", "is_ambiguous": False}},
]


class StubHandler(BaseHTTPRequestHandler):
    response_body = json.dumps(PINCH_RESPONSE).encode()
    status = 200
    requests: list = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        StubHandler.requests.append(json.loads(self.rfile.read(length)))
        self.send_response(self.status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(self.response_body)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    StubHandler.requests = []
    StubHandler.response_body = json.dumps(PINCH_RESPONSE).encode()
    StubHandler.status = 200
    httpd = HTTPServer(("127.0.0.1", 0), StubHandler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_port}"
    httpd.shutdown()


class TestExternalBackend:
    def test_valid_response_matches_grammar_path(self, stub_server):
        scene = build_study_scene()
        backend = ExternalBackend(url=stub_server, timeout=2.0)
        cmd = Command("pinch the cube")
        external = backend.interpret(cmd, scene)
        grammar = GrammarParser(scene).parse(cmd, CommandHistory())
        assert external.disposition == "execute"
        assert external.steps == grammar.steps

    def test_request_carries_prompt_scene_and_vocabulary(self, stub_server):
        scene = build_study_scene()
        backend = ExternalBackend(url=stub_server, api_key="sekrit", timeout=2.0)
        backend.interpret(Command("pinch the cube"), scene)
        request = StubHandler.requests[0]
        assert set(request) >= {"prompt", "command", "scene", "vocabulary"}
        assert request["command"] == "pinch the cube"
        names = {o["name"] for o in request["scene"]}
        assert "cube" in names and "volume slider" in names
        assert "pinch" in request["vocabulary"]["gestures"]

    def test_unknown_gesture_downgrades(self, stub_server):
        StubHandler.response_body = json.dumps([
            {"component_type": "gesture", "value": {"gesture_type": "teleport"}},
        ]).encode()
        backend = ExternalBackend(url=stub_server, timeout=2.0)
        result = backend.interpret(Command("teleport home"), build_study_scene())
        assert result.disposition == "uninterpretable"
        assert "validation" in result.note

    def test_malformed_json_downgrades(self, stub_server):
        StubHandler.response_body = b"{nope"
        backend = ExternalBackend(url=stub_server, timeout=2.0)
        result = backend.interpret(Command("pinch"), build_study_scene())
        assert result.disposition == "uninterpretable"

    def test_empty_array_is_irrelevant(self, stub_server):
        StubHandler.response_body = b"[]"
        backend = ExternalBackend(url=stub_server, timeout=2.0)
        result = backend.interpret(Command("how are you"), build_study_scene())
        assert result.disposition == "irrelevant"

    def test_components_wrapper_accepted(self, stub_server):
        StubHandler.response_body = json.dumps(
            {"components": PINCH_RESPONSE}).encode()
        backend = ExternalBackend(url=stub_server, timeout=2.0)
        result = backend.interpret(Command("pinch the cube"), build_study_scene())
        assert result.steps == [GestureStep("pinch", "cube")]

    def test_unreachable_backend_downgrades(self):
        backend = ExternalBackend(url="http://127.0.0.1:1/none", timeout=0.5)
        result = backend.interpret(Command("pinch"), build_study_scene())
        assert result.disposition == "uninterpretable"
        assert "unreachable" in result.note

    def test_http_error_downgrades(self, stub_server):
        StubHandler.status = 500
        backend = ExternalBackend(url=stub_server, timeout=2.0)
        result = backend.interpret(Command("pinch"), build_study_scene())
        assert result.disposition == "uninterpretable"

    def test_missing_url_is_config_error(self, monkeypatch):
        monkeypatch.delenv("PROXYHAND_BACKEND_URL", raising=False)
        with pytest.raises(ValueError):
            ExternalBackend()

    def test_env_configuration(self, monkeypatch, stub_server):
        monkeypatch.setenv("PROXYHAND_BACKEND_URL", stub_server)
        monkeypatch.setenv("PROXYHAND_BACKEND_KEY", "from-env")
        backend = ExternalBackend(timeout=2.0)
        assert backend.url == stub_server
        assert backend.api_key == "from-env"


class TestContextBuilders:
    def test_vocabulary_is_complete(self):
        vocab = control_vocabulary()
        assert "open_hand" in vocab["gestures"]
        assert "pan left" in vocab["rotations"]
        assert "on top of" in vocab["positions"]
        assert "stop" in vocab["temporal"]

    def test_scene_context_shape(self):
        ctx = scene_context(build_study_scene())
        assert all({"name", "tags", "position", "affordance"} <= set(o) for o in ctx)

"""Network boundary: accepts command text, broadcasts frames and feedback.

One tick task owns the engine; per-client reader tasks funnel messages into
it and per-client writer tasks fan results out. Frames are latest-wins per
client (a slow reader just sees fewer frames), while feedback and scene
messages ride a reliable bounded queue; a client that cannot keep up with
even those is disconnected rather than allowed to stall the loop.

The same JSON documents run over two framings: newline-delimited TCP and
WebSocket text messages.
"""
from __future__ import annotations

import asyncio
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import wire
from .controller import Engine
from .external import ExternalBackend
from .instructions import Command
from .interpreter import CommandPipeline, GrammarParser

RELIABLE_QUEUE_LIMIT = 512


@dataclass
class SessionConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    transport: str = "tcp-jsonl"  # "tcp-jsonl" | "websocket"
    max_clients: int = 32
    record_path: str | None = None

    def __post_init__(self):
        if self.transport not in ("tcp-jsonl", "websocket"):
            raise ValueError(f"unknown transport {self.transport!r}")


class _Client:
    _next_id = 0

    def __init__(self, send, close) -> None:
        _Client._next_id += 1
        self.id = _Client._next_id
        self._send = send
        self._close = close
        self.frame_slot: wire.WireMessage | None = None
        self.reliable: list[wire.WireMessage] = []
        self.wake = asyncio.Event()
        self.alive = True
        self.decoder = wire.LineDecoder()
        self.pipeline: CommandPipeline | None = None

    def queue_frame(self, msg: wire.WireMessage) -> None:
        self.frame_slot = msg  # latest wins
        self.wake.set()

    def queue_reliable(self, msg: wire.WireMessage) -> bool:
        if len(self.reliable) >= RELIABLE_QUEUE_LIMIT:
            return False
        self.reliable.append(msg)
        self.wake.set()
        return True

    async def writer_loop(self) -> None:
        try:
            while self.alive:
                await self.wake.wait()
                self.wake.clear()
                while self.reliable:
                    await self._send(wire.encode(self.reliable.pop(0)))
                if self.frame_slot is not None:
                    msg, self.frame_slot = self.frame_slot, None
                    await self._send(wire.encode(msg))
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            self.alive = False

    async def close(self) -> None:
        self.alive = False
        self.wake.set()
        try:
            await self._close()
        except Exception:
            pass


class StreamServer:
    def __init__(self, engine: Engine, session: SessionConfig,
                 backend: ExternalBackend | None = None) -> None:
        self.engine = engine
        self.session = session
        self.backend = backend
        self.parser = GrammarParser(engine.scene, engine.config)
        self.clients: dict[int, _Client] = {}
        self.out_seq = 0
        self._server = None
        self._tick_task: asyncio.Task | None = None
        self._writer_tasks: set[asyncio.Task] = set()
        self._record_fh = None
        self._scene_shadow: dict[str, dict] = {}
        self._stopping = asyncio.Event()
        # A single parse worker keeps commands in flight one at a time, in
        # seq order, without ever blocking the tick loop on a slow backend.
        self._parse_executor = ThreadPoolExecutor(
            max_workers=1, thread_name_prefix="parse")

    # -- lifecycle -------------------------------------------------------

    async def start(self) -> None:
        if self.session.record_path:
            self._record_fh = open(self.session.record_path, "a", encoding="utf-8")
        if self.session.transport == "websocket":
            import websockets
            self._server = await websockets.serve(
                self._handle_websocket, self.session.host, self.session.port)
        else:
            self._server = await asyncio.start_server(
                self._handle_tcp, self.session.host, self.session.port)
        self._scene_shadow = {o.id: o.state_dict() for o in self.engine.scene.objects()}
        self._tick_task = asyncio.create_task(self._tick_loop())

    async def stop(self) -> None:
        self._stopping.set()
        if self._tick_task:
            self._tick_task.cancel()
            try:
                await self._tick_task
            except asyncio.CancelledError:
                pass
        for client in list(self.clients.values()):
            await client.close()
        if self._server is not None:
            self._server.close()
            try:
                await self._server.wait_closed()
            except Exception:
                pass
        if self._record_fh:
            self._record_fh.close()
            self._record_fh = None
        self._parse_executor.shutdown(wait=False)

    async def serve_forever(self) -> None:
        await self._stopping.wait()

    @property
    def port(self) -> int:
        if self.session.transport == "websocket":
            return self._server.sockets[0].getsockname()[1]
        return self._server.sockets[0].getsockname()[1]

    # -- the tick --------------------------------------------------------

    async def _tick_loop(self) -> None:
        loop = asyncio.get_running_loop()
        period = 1.0 / self.engine.config.fps
        next_t = loop.time()
        while True:
            result = self.engine.tick()
            self._broadcast_tick(result)
            next_t += period
            delay = next_t - loop.time()
            if delay < -1.0:
                next_t = loop.time()  # fell far behind; do not burst-catch-up
            await asyncio.sleep(max(delay, 0.0))

    def _broadcast_tick(self, result) -> None:
        frame = wire.frame_message(self._next_seq(), result.frame.ts_ms,
                                   result.frame.flat())
        self._record("out", frame)
        feedback_msgs = [
            wire.feedback_message(self._next_seq(), result.frame.ts_ms,
                                  fb.kind, fb.payload)
            for fb in result.feedback
        ]
        delta = self._scene_changes()
        delta_msg = None
        if delta:
            delta_msg = wire.scene_delta_message(self._next_seq(),
                                                 result.frame.ts_ms, delta)
        for client in list(self.clients.values()):
            ok = True
            for msg in feedback_msgs:
                ok = ok and client.queue_reliable(msg)
            if delta_msg is not None:
                ok = ok and client.queue_reliable(delta_msg)
            if not ok:
                asyncio.ensure_future(self._drop(client, "outbound queue overflow"))
                continue
            client.queue_frame(frame)
        for msg in feedback_msgs:
            self._record("out", msg)
        if delta_msg is not None:
            self._record("out", delta_msg)

    def _scene_changes(self) -> dict:
        changed: dict[str, dict] = {}
        for obj in self.engine.scene.objects():
            state = obj.state_dict()
            if self._scene_shadow.get(obj.id) != state:
                changed[obj.id] = state
                self._scene_shadow[obj.id] = state
        return changed

    def _next_seq(self) -> int:
        self.out_seq += 1
        return self.out_seq

    # -- client handling ---------------------------------------------------

    async def _handle_tcp(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter) -> None:
        async def send(data: bytes) -> None:
            writer.write(data)
            await writer.drain()

        async def close() -> None:
            writer.close()

        client = _Client(send, close)
        await self._run_client(client, lambda: reader.read(4096))
        writer.close()

    async def _handle_websocket(self, websocket) -> None:
        async def send(data: bytes) -> None:
            await websocket.send(data.decode("utf-8"))

        async def close() -> None:
            await websocket.close()

        client = _Client(send, close)

        async def recv() -> bytes:
            try:
                data = await websocket.recv()
            except Exception:
                return b""
            if isinstance(data, str):
                data = data.encode("utf-8")
            return data + b"\n"

        await self._run_client(client, recv)

    async def _run_client(self, client: _Client, recv) -> None:
        if len(self.clients) >= self.session.max_clients:
            await client.close()
            return
        self.clients[client.id] = client
        client.pipeline = self._make_pipeline()
        writer_task = asyncio.create_task(client.writer_loop())
        self._writer_tasks.add(writer_task)
        writer_task.add_done_callback(self._writer_tasks.discard)

        init = wire.scene_init_message(self._next_seq(), self.engine.frame_seq,
                                       self.engine.scene.to_dict())
        client.queue_reliable(init)
        self._record("out", init)
        try:
            while client.alive:
                data = await recv()
                if not data:
                    break
                for item in client.decoder.feed(data):
                    if isinstance(item, wire.WireError):
                        client.queue_reliable(wire.protocol_error_message(
                            self._next_seq(), 0, str(item)))
                        continue
                    self._record("in", item)
                    self._handle_message(client, item)
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            self.clients.pop(client.id, None)
            writer_task.cancel()
            await client.close()

    def _make_pipeline(self) -> CommandPipeline:
        engine = self.engine

        def parse(cmd: Command, history):
            if self.backend is not None:
                return self.backend.interpret(cmd, engine.scene, history)
            return self.parser.parse(cmd, history)

        parser_like = type("_ParserAdapter", (), {"parse": staticmethod(parse)})()
        return CommandPipeline(
            parser_like,
            on_list=engine.submit,
            on_preempt=engine.preempt,
            on_reply=engine.resolve_disambiguation,
            reply_gate=lambda: engine.parked is not None,
            on_command=lambda cmd: engine.recognized(cmd.raw_text),
            executor=self._parse_executor,
        )

    def _handle_message(self, client: _Client, msg: wire.WireMessage) -> None:
        if msg.type == "command_text":
            client.pipeline.feed(msg.payload)
            if msg.payload.endswith("\n"):
                client.pipeline.flush()
        elif msg.type == "disambiguation_reply":
            self.engine.resolve_disambiguation(msg.payload)
        elif msg.type == "ping":
            client.queue_reliable(wire.WireMessage("pong", self._next_seq(), 0,
                                                   msg.payload))
        else:
            client.queue_reliable(wire.protocol_error_message(
                self._next_seq(), 0, f"unknown message type {msg.type!r}"))

    async def _drop(self, client: _Client, reason: str) -> None:
        self.clients.pop(client.id, None)
        await client.close()

    def _record(self, direction: str, msg: wire.WireMessage) -> None:
        if self._record_fh is None:
            return
        entry = {"dir": direction, "msg": msg.to_dict()}
        self._record_fh.write(json.dumps(entry, sort_keys=True) + "\n")
        self._record_fh.flush()


async def run_server(engine: Engine, session: SessionConfig,
                     backend: ExternalBackend | None = None) -> StreamServer:
    server = StreamServer(engine, session, backend)
    await server.start()
    return server

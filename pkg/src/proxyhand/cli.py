"""Operator entry point: serve the engine, run headless scripts, or bench.

Exit codes: 0 clean shutdown, 2 configuration error, 3 bind error.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

from .config import EngineConfig
from .controller import Engine
from .gestures import load_bundle
from .harness import ScenarioError, bench, load_scene_ref, replay_recording, run_script

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BIND = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxyhand",
        description="Text-command control of a virtual hand in a simulated scene",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the streaming server")
    serve.add_argument("--listen", default="127.0.0.1:8765", metavar="HOST:PORT")
    serve.add_argument("--fps", type=int, default=60)
    serve.add_argument("--transport", choices=("tcp-jsonl", "websocket"),
                       default="websocket")
    serve.add_argument("--scene", default=None, help="scene JSON file (default: built-in room)")
    serve.add_argument("--gestures", default=None, help="gesture bundle directory")
    serve.add_argument("--backend", choices=("grammar", "external"), default="grammar")
    serve.add_argument("--record", default=None, help="append wire traffic to this file")
    serve.add_argument("--replay", default=None, help="drive the engine from a recording, headless")

    script = sub.add_parser("script", help="run a scripted scenario headless")
    script.add_argument("file")
    script.add_argument("--gestures", default=None)
    script.add_argument("--json", action="store_true", dest="as_json")

    bench_cmd = sub.add_parser("bench", help="latency stats over a command corpus")
    bench_cmd.add_argument("file", help="JSON corpus with 'priority'/'grammar' lists")
    bench_cmd.add_argument("--json", action="store_true", dest="as_json")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return _cmd_serve(args)
    if args.command == "script":
        return _cmd_script(args)
    return _cmd_bench(args)


def _cmd_serve(args) -> int:
    if not 10 <= args.fps <= 120:
        print("fps must be between 10 and 120", file=sys.stderr)
        return EXIT_CONFIG

    config = EngineConfig(fps=args.fps)

    if args.replay:
        if not Path(args.replay).is_file():
            print(f"recording not found: {args.replay}", file=sys.stderr)
            return EXIT_CONFIG
        summary = replay_recording(args.replay, config)
        print(json.dumps(summary, indent=2))
        return EXIT_OK

    try:
        host, _, port_text = args.listen.rpartition(":")
        port = int(port_text)
        host = host or "127.0.0.1"
    except ValueError:
        print(f"bad --listen value: {args.listen}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        scene = load_scene_ref(args.scene, config)
    except (ScenarioError, ValueError, json.JSONDecodeError) as exc:
        print(f"scene error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    library = None
    if args.gestures:
        try:
            library = load_bundle(args.gestures, config.reference_hand_size)
        except Exception as exc:
            print(f"gesture bundle error: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    backend = None
    if args.backend == "external":
        try:
            from .external import ExternalBackend
            backend = ExternalBackend(timeout=config.backend_timeout)
        except ValueError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_CONFIG

    from .server import SessionConfig, StreamServer

    engine = Engine(scene, library=library, config=config)
    session = SessionConfig(host=host, port=port, transport=args.transport,
                            record_path=args.record)
    server = StreamServer(engine, session, backend)

    async def run() -> int:
        try:
            await server.start()
        except OSError as exc:
            print(f"bind error: {exc}", file=sys.stderr)
            return EXIT_BIND
        print(f"listening on {args.transport}://{host}:{server.port} "
              f"({len(scene)} objects, {args.fps} fps)", flush=True)
        try:
            await server.serve_forever()
        except asyncio.CancelledError:
            pass
        finally:
            await server.stop()
        return EXIT_OK

    try:
        return asyncio.run(run())
    except KeyboardInterrupt:
        return EXIT_OK


def _cmd_script(args) -> int:
    try:
        report = run_script(args.file, gestures_dir=args.gestures)
    except (ScenarioError, json.JSONDecodeError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.as_json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(f"scenario {report.name}: {'PASS' if report.passed else 'FAIL'} "
              f"({report.frames} frames, {report.sim_ms} ms simulated)")
        for check in report.checks:
            mark = "ok " if check.passed else "FAIL"
            print(f"  [{mark}] {check.description} {check.detail}")
    return EXIT_OK if report.passed else 1


def _cmd_bench(args) -> int:
    try:
        corpus = json.loads(Path(args.file).read_text())
        stats = bench(corpus)
    except FileNotFoundError:
        print(f"corpus not found: {args.file}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, json.JSONDecodeError) as exc:
        print(f"corpus error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.as_json:
        print(json.dumps(stats, indent=2))
    else:
        for section, values in stats.items():
            print(f"{section}: p50={values['p50_ms']:.4f} ms "
                  f"p95={values['p95_ms']:.4f} ms max={values['max_ms']:.4f} ms "
                  f"(n={values['count']})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

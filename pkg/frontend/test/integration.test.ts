// End-to-end against the real engine: spawn the stream server, speak the
// wire protocol with the client's own codec/state code, and watch a
// command execute. Uses the TCP framing (same JSON documents as the
// WebSocket binding) so no extra client dependency is needed.
import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { ChildProcess, spawn } from 'node:child_process';
import * as net from 'node:net';

import { decodeMessage, encodeMessage } from '../src/protocol.js';
import { ViewState } from '../src/state.js';

let server: ChildProcess;
let port: number;

beforeAll(async () => {
  server = spawn(
    'python3',
    ['-m', 'proxyhand.cli', 'serve', '--listen', '127.0.0.1:0',
     '--transport', 'tcp-jsonl'],
    { cwd: '..', stdio: ['ignore', 'pipe', 'pipe'] },
  );
  port = await new Promise<number>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error('server never started')), 15000);
    server.stdout!.on('data', (chunk: Buffer) => {
      const match = /:(\d+) \(/.exec(chunk.toString());
      if (match) {
        clearTimeout(timer);
        resolve(Number(match[1]));
      }
    });
    server.on('exit', (code) => reject(new Error(`server exited: ${code}`)));
  });
}, 20000);

afterAll(() => {
  server.kill('SIGINT');
});

function connect(): Promise<net.Socket> {
  return new Promise((resolve, reject) => {
    const socket = net.createConnection({ host: '127.0.0.1', port }, () =>
      resolve(socket));
    socket.on('error', reject);
  });
}

async function drive(
  socket: net.Socket,
  state: ViewState,
  until: (state: ViewState) => boolean,
  timeoutMs = 8000,
): Promise<void> {
  let buffer = '';
  return new Promise((resolve, reject) => {
    const timer = setTimeout(
      () => reject(new Error('condition never satisfied')), timeoutMs);
    socket.on('data', (chunk: Buffer) => {
      buffer += chunk.toString();
      let idx;
      while ((idx = buffer.indexOf('\n')) >= 0) {
        const line = buffer.slice(0, idx);
        buffer = buffer.slice(idx + 1);
        if (!line.trim()) continue;
        state.apply(decodeMessage(line));
        if (until(state)) {
          clearTimeout(timer);
          resolve();
          return;
        }
      }
    });
  });
}

function send(socket: net.Socket, type: string, payload: unknown): void {
  socket.write(encodeMessage({ type, seq: 1, ts_ms: 0, payload }) + '\n');
}

describe('against the live server', () => {
  it('mirrors the scene and streams joint frames', async () => {
    const socket = await connect();
    const state = new ViewState();
    await drive(socket, state, (s) => s.objects.size > 0 && s.pose !== null);
    expect(state.objects.has('apple')).toBe(true);
    expect(state.objects.has('basket')).toBe(true);
    expect(state.pose).toHaveLength(21);
    socket.end();
  }, 15000);

  it('a typed command produces overlays and hand motion', async () => {
    const socket = await connect();
    const state = new ViewState();
    await drive(socket, state, (s) => s.pose !== null);
    const startWrist = state.pose![0].slice();
    send(socket, 'command_text', 'move up.\n');
    await drive(socket, state, (s) => s.overlays.active === 'move up');
    await drive(socket, state, (s) =>
      s.pose !== null && s.pose[0][1] > startWrist[1] + 0.05);
    socket.end();
  }, 15000);

  it('slider state flows back through scene deltas', async () => {
    const socket = await connect();
    const state = new ViewState();
    await drive(socket, state, (s) => s.objects.size > 0);
    send(socket, 'command_text', 'maximize the volume.\n');
    await drive(socket, state, (s) =>
      (s.objects.get('volume_slider')?.slider_value ?? 0) >= 1.0, 20000);
    socket.end();
  }, 25000);
});

import { describe, expect, it, vi } from 'vitest';

import { SocketClient } from '../src/net.js';
import { WireMessage, encodeMessage } from '../src/protocol.js';

class FakeSocket {
  static instances: FakeSocket[] = [];
  readyState = 0; // CONNECTING
  sent: string[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  constructor(public url: string) {
    FakeSocket.instances.push(this);
  }

  open(): void {
    this.readyState = 1;
    this.onopen?.();
  }

  receive(msg: WireMessage): void {
    this.onmessage?.({ data: encodeMessage(msg) });
  }

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.readyState = 3;
    this.onclose?.();
  }
}

function makeClient() {
  FakeSocket.instances = [];
  const messages: WireMessage[] = [];
  const statuses: string[] = [];
  const client = new SocketClient(
    'ws://test',
    {
      onMessage: (m) => messages.push(m),
      onStatus: (s) => statuses.push(s),
    },
    (url) => new FakeSocket(url) as unknown as WebSocket,
  );
  return { client, messages, statuses };
}

describe('socket client', () => {
  it('reports connected after the handshake', () => {
    const { client, statuses } = makeClient();
    client.connect();
    FakeSocket.instances[0].open();
    expect(statuses).toEqual(['connecting', 'connected']);
  });

  it('delivers decoded messages', () => {
    const { client, messages } = makeClient();
    client.connect();
    const sock = FakeSocket.instances[0];
    sock.open();
    sock.receive({ type: 'pong', seq: 1, ts_ms: 0, payload: null });
    expect(messages).toEqual([{ type: 'pong', seq: 1, ts_ms: 0, payload: null }]);
  });

  it('ignores malformed server lines', () => {
    const { client, messages } = makeClient();
    client.connect();
    const sock = FakeSocket.instances[0];
    sock.open();
    sock.onmessage?.({ data: '{broken' });
    expect(messages).toEqual([]);
  });

  it('reconnects after a drop', () => {
    vi.useFakeTimers();
    try {
      const { client, statuses } = makeClient();
      client.connect();
      FakeSocket.instances[0].open();
      FakeSocket.instances[0].close();
      expect(statuses).toContain('disconnected');
      vi.advanceTimersByTime(600);
      expect(FakeSocket.instances).toHaveLength(2);
      FakeSocket.instances[1].open();
      expect(statuses[statuses.length - 1]).toBe('connected');
    } finally {
      vi.useRealTimers();
    }
  });

  it('does not reconnect after an explicit close', () => {
    vi.useFakeTimers();
    try {
      const { client } = makeClient();
      client.connect();
      FakeSocket.instances[0].open();
      client.close();
      vi.advanceTimersByTime(10000);
      expect(FakeSocket.instances).toHaveLength(1);
    } finally {
      vi.useRealTimers();
    }
  });

  it('appends the newline flush to commands', () => {
    const { client } = makeClient();
    client.connect();
    const sock = FakeSocket.instances[0];
    sock.open();
    expect(client.sendCommand('grab the apple.')).toBe(true);
    const doc = JSON.parse(sock.sent[0]);
    expect(doc.type).toBe('command_text');
    expect(doc.payload).toBe('grab the apple.\n');
  });

  it('badge clicks and typed numbers produce the same reply message', () => {
    const { client } = makeClient();
    client.connect();
    const sock = FakeSocket.instances[0];
    sock.open();
    client.sendDisambiguation(2);
    const doc = JSON.parse(sock.sent[0]);
    expect(doc.type).toBe('disambiguation_reply');
    expect(doc.payload).toBe(2);
  });

  it('refuses to send while disconnected', () => {
    const { client } = makeClient();
    client.connect();
    expect(client.sendCommand('too early')).toBe(false);
  });
});

// WebSocket client with automatic reconnection. On every (re)connect the
// server sends a fresh scene_init, so the mirror never drifts.

import { WireMessage, decodeMessage, encodeMessage } from './protocol.js';

export type SocketFactory = (url: string) => WebSocket;

export interface ClientHooks {
  onMessage: (msg: WireMessage) => void;
  onStatus: (status: 'connecting' | 'connected' | 'disconnected') => void;
}

export class SocketClient {
  private socket: WebSocket | null = null;
  private seq = 0;
  private retryMs = 500;
  private closed = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private hooks: ClientHooks,
    private factory: SocketFactory = (u) => new WebSocket(u),
  ) {}

  connect(): void {
    this.closed = false;
    this.hooks.onStatus('connecting');
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.retryMs = 500;
      this.hooks.onStatus('connected');
    };
    socket.onmessage = (event: MessageEvent) => {
      try {
        this.hooks.onMessage(decodeMessage(String(event.data)));
      } catch {
        // Malformed server line: ignore; the stream resyncs per message.
      }
    };
    socket.onclose = () => this.handleDrop();
    socket.onerror = () => {
      // onclose follows; nothing to do here.
    };
  }

  private handleDrop(): void {
    this.socket = null;
    if (this.closed) return;
    this.hooks.onStatus('disconnected');
    this.reconnectTimer = setTimeout(() => this.connect(), this.retryMs);
    this.retryMs = Math.min(this.retryMs * 2, 8000);
  }

  send(type: string, payload: unknown): boolean {
    if (!this.socket || this.socket.readyState !== 1 /* OPEN */) {
      return false;
    }
    this.seq += 1;
    const msg: WireMessage = { type, seq: this.seq, ts_ms: Date.now(), payload };
    this.socket.send(encodeMessage(msg));
    return true;
  }

  sendCommand(text: string): boolean {
    // A trailing newline flushes the sentence server-side even without
    // terminal punctuation.
    return this.send('command_text', text.endsWith('\n') ? text : text + '\n');
  }

  sendDisambiguation(label: number): boolean {
    return this.send('disambiguation_reply', label);
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
  }
}

// Entry point: connect, render the live scene and hand, wire the command
// box (plus browser speech where available) into the same text channel.

import { SocketClient } from './net.js';
import { OverlayController } from './overlay.js';
import { defaultViewport, drawScene } from './render.js';
import { ViewState } from './state.js';

function serverUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get('server') ?? `ws://${window.location.hostname || 'localhost'}:8765`;
}

function start(): void {
  const canvas = document.getElementById('scene') as HTMLCanvasElement;
  const ctx = canvas.getContext('2d')!;
  const hud = document.getElementById('hud')!;
  const input = document.getElementById('command') as HTMLInputElement;
  const sendButton = document.getElementById('send') as HTMLButtonElement;
  const speakButton = document.getElementById('speak') as HTMLButtonElement;

  const state = new ViewState();
  const client = new SocketClient(serverUrl(), {
    onMessage: (msg) => {
      state.apply(msg);
      if (msg.type === 'scene_init') {
        state.clearBadges(); // fresh session after (re)connect
      }
    },
    onStatus: (status) => {
      state.connection = status;
    },
  });
  const overlay = new OverlayController(hud, (label) => {
    client.sendDisambiguation(label);
    state.clearBadges();
  });

  const submit = () => {
    const text = input.value.trim();
    if (!text) return;
    if (client.sendCommand(text)) input.value = '';
  };
  sendButton.addEventListener('click', submit);
  input.addEventListener('keydown', (event) => {
    if (event.key === 'Enter') submit();
  });

  setupSpeech(speakButton, input, submit);

  const view = defaultViewport(canvas.width, canvas.height);
  const frame = () => {
    drawScene(ctx, view, state);
    overlay.update(state, view);
    requestAnimationFrame(frame);
  };
  client.connect();
  requestAnimationFrame(frame);
}

function setupSpeech(
  button: HTMLButtonElement,
  input: HTMLInputElement,
  submit: () => void,
): void {
  type RecognitionCtor = new () => {
    continuous: boolean;
    interimResults: boolean;
    onresult: (event: { results: ArrayLike<ArrayLike<{ transcript: string }>> }) => void;
    onend: () => void;
    start: () => void;
  };
  const Ctor = (window as unknown as Record<string, RecognitionCtor | undefined>)
    .webkitSpeechRecognition;
  if (!Ctor) {
    button.style.display = 'none';
    return;
  }
  button.addEventListener('click', () => {
    const recognition = new Ctor();
    recognition.continuous = false;
    recognition.interimResults = false;
    recognition.onresult = (event) => {
      const last = event.results[event.results.length - 1];
      input.value = last[0].transcript;
      submit();
    };
    recognition.onend = () => button.classList.remove('listening');
    button.classList.add('listening');
    recognition.start();
  });
}

start();

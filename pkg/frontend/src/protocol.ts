// Wire protocol mirror: one JSON envelope per WebSocket text message.

export interface WireMessage {
  type: string;
  seq: number;
  ts_ms: number;
  payload: unknown;
}

export interface FeedbackPayload {
  kind:
    | 'recognized_text'
    | 'active_command'
    | 'error_retry'
    | 'disambiguation_labels'
    | 'path_preview';
  payload: unknown;
}

export interface SceneObjectDoc {
  id: string;
  name: string;
  affordance: string;
  tags: string[];
  position: [number, number, number];
  half_extents: [number, number, number];
  pressed_count?: number;
  slider_value?: number;
  knob_angle?: number;
}

export class ProtocolError extends Error {}

export function decodeMessage(data: string): WireMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(data);
  } catch (err) {
    throw new ProtocolError(`malformed document: ${err}`);
  }
  if (typeof doc !== 'object' || doc === null || Array.isArray(doc)) {
    throw new ProtocolError('message must be a JSON object');
  }
  const msg = doc as Record<string, unknown>;
  if (typeof msg.type !== 'string') {
    throw new ProtocolError("message missing string 'type'");
  }
  const seq = msg.seq ?? 0;
  const ts = msg.ts_ms ?? 0;
  if (typeof seq !== 'number' || typeof ts !== 'number') {
    throw new ProtocolError('seq/ts_ms must be numbers');
  }
  return { type: msg.type, seq, ts_ms: ts, payload: msg.payload ?? null };
}

export function encodeMessage(msg: WireMessage): string {
  return JSON.stringify({
    type: msg.type,
    seq: msg.seq,
    ts_ms: msg.ts_ms,
    payload: msg.payload,
  });
}

export function commandText(seq: number, text: string): WireMessage {
  return { type: 'command_text', seq, ts_ms: Date.now(), payload: text };
}

export function disambiguationReply(seq: number, label: number): WireMessage {
  return { type: 'disambiguation_reply', seq, ts_ms: Date.now(), payload: label };
}

export function framePose(msg: WireMessage): number[][] | null {
  if (msg.type !== 'frame') return null;
  const payload = msg.payload as { pose?: unknown } | null;
  const pose = payload?.pose;
  if (!Array.isArray(pose) || pose.length !== 63) return null;
  const joints: number[][] = [];
  for (let j = 0; j < 21; j++) {
    joints.push([pose[j * 3] as number, pose[j * 3 + 1] as number, pose[j * 3 + 2] as number]);
  }
  return joints;
}

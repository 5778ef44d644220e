// Client-side mirror of the server state plus overlay bookkeeping.
// The server is authoritative: this never mutates anything on its own,
// it only applies what arrives on the socket.

import { FeedbackPayload, SceneObjectDoc, WireMessage, framePose } from './protocol.js';

export type ConnectionStatus = 'connecting' | 'connected' | 'disconnected';

export interface Overlays {
  recognized: string;
  active: string;
  error: string;
  badges: Array<[string, number]>; // [object id, label number]
  pathPreview: number[][];
}

export interface MirroredObject extends SceneObjectDoc {
  contained_in?: string | null;
}

export class ViewState {
  connection: ConnectionStatus = 'connecting';
  pose: number[][] | null = null;
  frameSeq = -1;
  objects = new Map<string, MirroredObject>();
  overlays: Overlays = {
    recognized: '',
    active: '',
    error: '',
    badges: [],
    pathPreview: [],
  };
  overlayVersion = 0; // bumped once per visible overlay change

  apply(msg: WireMessage): void {
    switch (msg.type) {
      case 'scene_init':
        this.applySceneInit(msg);
        break;
      case 'scene_delta':
        this.applySceneDelta(msg);
        break;
      case 'frame':
        this.applyFrame(msg);
        break;
      case 'feedback':
        this.applyFeedback(msg.payload as FeedbackPayload);
        break;
      default:
        break; // pong / protocol_error are surfaced elsewhere
    }
  }

  private applySceneInit(msg: WireMessage): void {
    const payload = msg.payload as { objects?: SceneObjectDoc[] };
    this.objects.clear();
    for (const doc of payload.objects ?? []) {
      this.objects.set(doc.id, { ...doc });
    }
  }

  private applySceneDelta(msg: WireMessage): void {
    const changes = msg.payload as Record<string, Partial<MirroredObject>>;
    for (const [id, change] of Object.entries(changes)) {
      const obj = this.objects.get(id);
      if (obj) Object.assign(obj, change);
    }
  }

  private applyFrame(msg: WireMessage): void {
    const pose = framePose(msg);
    if (pose && msg.seq > this.frameSeq) {
      this.pose = pose;
      this.frameSeq = msg.seq;
    }
  }

  private applyFeedback(fb: FeedbackPayload): void {
    switch (fb.kind) {
      case 'recognized_text':
        this.overlays.recognized = String(fb.payload);
        break;
      case 'active_command':
        this.overlays.active = String(fb.payload);
        this.overlays.error = '';
        break;
      case 'error_retry':
        this.overlays.error = String(fb.payload);
        break;
      case 'disambiguation_labels':
        this.overlays.badges = (fb.payload as Array<[string, number]>).map(
          ([id, n]) => [id, n],
        );
        break;
      case 'path_preview':
        this.overlays.pathPreview = fb.payload as number[][];
        break;
      default:
        return;
    }
    this.overlayVersion += 1;
  }

  clearBadges(): void {
    if (this.overlays.badges.length > 0) {
      this.overlays.badges = [];
      this.overlayVersion += 1;
    }
  }
}

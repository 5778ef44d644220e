import { describe, expect, it } from 'vitest';

import { WireMessage } from '../src/protocol.js';
import { ViewState } from '../src/state.js';

function msg(type: string, payload: unknown, seq = 1): WireMessage {
  return { type, seq, ts_ms: 0, payload };
}

function feedback(kind: string, payload: unknown, seq = 1): WireMessage {
  return msg('feedback', { kind, payload }, seq);
}

const SCENE_INIT = msg('scene_init', {
  objects: [
    {
      id: 'cube_a', name: 'cube', affordance: 'grabbable', tags: ['blue'],
      position: [-0.2, 1.0, -0.3], half_extents: [0.035, 0.035, 0.035],
    },
    {
      id: 'cube_b', name: 'cube', affordance: 'grabbable', tags: ['red'],
      position: [0.2, 1.0, -0.3], half_extents: [0.035, 0.035, 0.035],
    },
    {
      id: 'volume', name: 'volume slider', affordance: 'slider', tags: [],
      position: [-0.45, 1.1, -0.48], half_extents: [0.03, 0.09, 0.012],
      slider_value: 0.25,
    },
  ],
});

describe('scene mirror', () => {
  it('applies scene_init with server ids', () => {
    const state = new ViewState();
    state.apply(SCENE_INIT);
    expect([...state.objects.keys()]).toEqual(['cube_a', 'cube_b', 'volume']);
  });

  it('applies scene_delta to the matching object only', () => {
    const state = new ViewState();
    state.apply(SCENE_INIT);
    state.apply(msg('scene_delta', {
      volume: { slider_value: 1.0, position: [-0.45, 1.1, -0.48] },
    }));
    expect(state.objects.get('volume')!.slider_value).toBe(1.0);
    expect(state.objects.get('cube_a')!.position).toEqual([-0.2, 1.0, -0.3]);
  });

  it('keeps only the newest frame by seq', () => {
    const state = new ViewState();
    const pose = Array(63).fill(0);
    const newer = [...pose];
    newer[0] = 9;
    state.apply(msg('frame', { pose: newer }, 10));
    state.apply(msg('frame', { pose }, 5)); // stale, must not regress
    expect(state.frameSeq).toBe(10);
    expect(state.pose![0][0]).toBe(9);
  });

  it('unpacks frames into 21 joints', () => {
    const state = new ViewState();
    const pose = Array.from({ length: 63 }, (_, i) => i);
    state.apply(msg('frame', { pose }, 1));
    expect(state.pose).toHaveLength(21);
    expect(state.pose![8]).toEqual([24, 25, 26]);
  });
});

describe('feedback overlays', () => {
  it.each([
    ['recognized_text', 'grab the apple', (s: ViewState) => s.overlays.recognized],
    ['active_command', 'grab the apple', (s: ViewState) => s.overlays.active],
    ['error_retry', 'please rephrase', (s: ViewState) => s.overlays.error],
  ])('%s sets its overlay field', (kind, payload, get) => {
    const state = new ViewState();
    const before = state.overlayVersion;
    state.apply(feedback(kind, payload));
    expect(get(state)).toBe(payload);
    expect(state.overlayVersion).toBe(before + 1);
  });

  it('disambiguation_labels populate ordered badges', () => {
    const state = new ViewState();
    state.apply(feedback('disambiguation_labels', [['cube_a', 1], ['cube_b', 2]]));
    expect(state.overlays.badges).toEqual([['cube_a', 1], ['cube_b', 2]]);
  });

  it('path_preview stores the polyline', () => {
    const state = new ViewState();
    const path = [[0, 1, 0], [0.1, 1, 0], [0.2, 1.1, 0]];
    state.apply(feedback('path_preview', path));
    expect(state.overlays.pathPreview).toEqual(path);
  });

  it('each feedback event bumps the overlay version exactly once', () => {
    const state = new ViewState();
    const kinds: Array<[string, unknown]> = [
      ['recognized_text', 'a'],
      ['active_command', 'b'],
      ['error_retry', 'c'],
      ['disambiguation_labels', [['x', 1], ['y', 2]]],
      ['path_preview', [[0, 0, 0], [1, 1, 1]]],
    ];
    for (const [i, [kind, payload]] of kinds.entries()) {
      state.apply(feedback(kind, payload, i));
      expect(state.overlayVersion).toBe(i + 1);
    }
  });

  it('an active command clears a stale error banner', () => {
    const state = new ViewState();
    state.apply(feedback('error_retry', 'nope'));
    state.apply(feedback('active_command', 'grab the apple'));
    expect(state.overlays.error).toBe('');
    expect(state.overlays.active).toBe('grab the apple');
  });

  it('unknown feedback kinds change nothing', () => {
    const state = new ViewState();
    const before = state.overlayVersion;
    state.apply(feedback('confetti', '!'));
    expect(state.overlayVersion).toBe(before);
  });
});

// Orthographic front-view renderer on a plain 2D canvas. The scene frame
// is +x right, +y up, -z into the scene; the camera looks straight down
// -z, so screen left/right matches command left/right.

import { MirroredObject, ViewState } from './state.js';

export interface Viewport {
  width: number;
  height: number;
  centerX: number; // scene x at the canvas center
  centerY: number; // scene y at the canvas center
  scale: number;   // pixels per meter
}

export function defaultViewport(width: number, height: number): Viewport {
  return { width, height, centerX: 0.0, centerY: 1.05, scale: height / 1.35 };
}

export function project(view: Viewport, p: ArrayLike<number>): [number, number] {
  return [
    view.width / 2 + (p[0] - view.centerX) * view.scale,
    view.height / 2 - (p[1] - view.centerY) * view.scale,
  ];
}

// Bone chains between joint indices (wrist at 0, four joints per digit).
export const BONES: Array<[number, number]> = [
  [0, 1], [1, 2], [2, 3], [3, 4],        // thumb
  [0, 5], [5, 6], [6, 7], [7, 8],        // index
  [0, 9], [9, 10], [10, 11], [11, 12],   // middle
  [0, 13], [13, 14], [14, 15], [15, 16], // ring
  [0, 17], [17, 18], [18, 19], [19, 20], // pinky
  [5, 9], [9, 13], [13, 17],             // knuckle arc
];

const AFFORDANCE_COLORS: Record<string, string> = {
  grabbable: '#4f8edc',
  button: '#d2604f',
  slider: '#58a56a',
  knob: '#b08e3f',
  container: '#8a6ccb',
  static: '#57606f',
};

export function drawScene(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  state: ViewState,
): void {
  ctx.clearRect(0, 0, view.width, view.height);
  ctx.fillStyle = '#11151c';
  ctx.fillRect(0, 0, view.width, view.height);

  const sorted = [...state.objects.values()].sort(
    (a, b) => a.position[2] - b.position[2],
  );
  for (const obj of sorted) {
    drawObject(ctx, view, obj);
  }
  if (state.overlays.pathPreview.length >= 2) {
    drawPathArrows(ctx, view, state.overlays.pathPreview);
  }
  if (state.pose) {
    drawHand(ctx, view, state.pose);
  }
}

function drawObject(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  obj: MirroredObject,
): void {
  const [cx, cy] = project(view, obj.position);
  const w = obj.half_extents[0] * 2 * view.scale;
  const h = obj.half_extents[1] * 2 * view.scale;
  ctx.fillStyle = AFFORDANCE_COLORS[obj.affordance] ?? '#555';
  ctx.globalAlpha = obj.affordance === 'static' ? 0.35 : 0.85;
  ctx.fillRect(cx - w / 2, cy - h / 2, w, h);
  ctx.globalAlpha = 1.0;

  if (obj.affordance === 'slider' && obj.slider_value !== undefined) {
    ctx.fillStyle = '#eaf3ea';
    const knobY = cy + h / 2 - obj.slider_value * h;
    ctx.fillRect(cx - w / 2 - 2, knobY - 2, w + 4, 4);
  }
  if (obj.affordance === 'knob' && obj.knob_angle !== undefined) {
    ctx.strokeStyle = '#f3ecd8';
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(
      cx + (Math.sin(obj.knob_angle) * w) / 2,
      cy - (Math.cos(obj.knob_angle) * h) / 2,
    );
    ctx.stroke();
  }

  ctx.fillStyle = '#c9d2e0';
  ctx.font = '11px system-ui, sans-serif';
  ctx.textAlign = 'center';
  ctx.fillText(obj.name, cx, cy + h / 2 + 12);
}

function drawHand(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  pose: number[][],
): void {
  ctx.strokeStyle = '#f5f7fa';
  ctx.lineWidth = 2;
  for (const [a, b] of BONES) {
    const [ax, ay] = project(view, pose[a]);
    const [bx, by] = project(view, pose[b]);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
  for (let j = 0; j < pose.length; j++) {
    const [x, y] = project(view, pose[j]);
    ctx.fillStyle = j === 0 ? '#ffd36b' : '#9fd1ff';
    ctx.beginPath();
    ctx.arc(x, y, j === 0 ? 5 : 3, 0, Math.PI * 2);
    ctx.fill();
  }
}

export function arrowSegments(path: number[][]): Array<[number[], number[]]> {
  const segments: Array<[number[], number[]]> = [];
  for (let i = 0; i + 1 < path.length; i++) {
    segments.push([path[i], path[i + 1]]);
  }
  return segments;
}

function drawPathArrows(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  path: number[][],
): void {
  ctx.strokeStyle = '#6be585';
  ctx.fillStyle = '#6be585';
  ctx.lineWidth = 2;
  for (const [from, to] of arrowSegments(path)) {
    const [ax, ay] = project(view, from);
    const [bx, by] = project(view, to);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
    const angle = Math.atan2(by - ay, bx - ax);
    ctx.beginPath();
    ctx.moveTo(bx, by);
    ctx.lineTo(bx - 8 * Math.cos(angle - 0.4), by - 8 * Math.sin(angle - 0.4));
    ctx.lineTo(bx - 8 * Math.cos(angle + 0.4), by - 8 * Math.sin(angle + 0.4));
    ctx.closePath();
    ctx.fill();
  }
}

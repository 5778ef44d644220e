// DOM feedback overlays: recognized/active command lines, error banner,
// and numbered disambiguation badges pinned to object screen positions.
// Clicking a badge answers the prompt exactly like saying its number.

import { Viewport, project } from './render.js';
import { ViewState } from './state.js';

export class OverlayController {
  readonly recognizedEl: HTMLElement;
  readonly activeEl: HTMLElement;
  readonly errorEl: HTMLElement;
  readonly badgeLayer: HTMLElement;
  readonly statusEl: HTMLElement;
  private renderedVersion = -1;

  constructor(
    root: HTMLElement,
    private onBadge: (label: number) => void,
  ) {
    this.statusEl = child(root, 'div', 'hud-status');
    this.recognizedEl = child(root, 'div', 'hud-recognized');
    this.activeEl = child(root, 'div', 'hud-active');
    this.errorEl = child(root, 'div', 'hud-error');
    this.badgeLayer = child(root, 'div', 'hud-badges');
  }

  update(state: ViewState, view: Viewport): void {
    this.statusEl.textContent = state.connection;
    this.statusEl.dataset.status = state.connection;
    if (state.overlayVersion === this.renderedVersion) return;
    this.renderedVersion = state.overlayVersion;

    const { recognized, active, error, badges } = state.overlays;
    this.recognizedEl.textContent = recognized ? `heard: ${recognized}` : '';
    this.activeEl.textContent = active ? `doing: ${active}` : '';
    this.errorEl.textContent = error;
    this.errorEl.style.display = error ? 'block' : 'none';

    this.badgeLayer.replaceChildren();
    for (const [objectId, label] of badges) {
      const obj = state.objects.get(objectId);
      if (!obj) continue;
      const badge = document.createElement('button');
      badge.className = 'hud-badge';
      badge.dataset.objectId = objectId;
      badge.dataset.label = String(label);
      badge.textContent = String(label);
      const [x, y] = project(view, obj.position);
      badge.style.left = `${Math.round(x)}px`;
      badge.style.top = `${Math.round(y)}px`;
      badge.addEventListener('click', () => this.onBadge(label));
      this.badgeLayer.appendChild(badge);
    }
  }
}

function child(parent: HTMLElement, tag: string, className: string): HTMLElement {
  const el = document.createElement(tag);
  el.className = className;
  parent.appendChild(el);
  return el;
}

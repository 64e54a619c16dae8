// Browser bootstrap: canvas, status bar, keyboard, websocket. Everything
// testable lives in the other modules; this file only wires the DOM.

import { GatewayClient } from './client.js';
import { InputController } from './input.js';
import { drawFrame, statusLine, type Draw2D } from './render.js';
import { ViewModel } from './viewmodel.js';

const params = new URLSearchParams(window.location.search);
const url = params.get('ws') ?? `ws://${window.location.hostname || '127.0.0.1'}:8765`;

const canvas = document.getElementById('world') as HTMLCanvasElement;
const status = document.getElementById('status') as HTMLElement;
const help = document.getElementById('help') as HTMLElement;
help.textContent = 'space: seize/release   arrows: steer + speed   p/r: pause/resume';

const vm = new ViewModel();
const input = new InputController(7, 3, () => vm.mode);
let lastFrameAt = performance.now();

const client = new GatewayClient(url, (u) => new WebSocket(u) as never, {
  onRaw: (data) => {
    if (vm.ingestRaw(data)) {
      lastFrameAt = performance.now();
      if (vm.latest) {
        input.onTick();
        for (const msg of input.drain()) client.send(msg);
      }
    }
  },
  onStatus: (s) => { vm.status = s; },
});
client.connect();

window.addEventListener('keydown', (e) => {
  if ([' ', 'ArrowLeft', 'ArrowRight', 'ArrowUp', 'ArrowDown'].includes(e.key)) {
    e.preventDefault();
  }
  input.onKey({ key: e.key });
  for (const msg of input.drain()) client.send(msg);
});

const raw = canvas.getContext('2d')!;
const ctx: Draw2D = {
  clear(w, h) {
    raw.fillStyle = '#14161f';
    raw.fillRect(0, 0, w, h);
  },
  line(points, width, color) {
    if (points.length < 2) return;
    raw.strokeStyle = color;
    raw.lineWidth = width;
    raw.beginPath();
    raw.moveTo(points[0][0], points[0][1]);
    for (const [x, y] of points.slice(1)) raw.lineTo(x, y);
    raw.stroke();
  },
  circle(x, y, r, color, fill) {
    raw.beginPath();
    raw.arc(x, y, r, 0, 2 * Math.PI);
    if (fill) {
      raw.fillStyle = color;
      raw.fill();
    } else {
      raw.strokeStyle = color;
      raw.stroke();
    }
  },
  poly(points, color) {
    if (!points.length) return;
    raw.fillStyle = color;
    raw.beginPath();
    raw.moveTo(points[0][0], points[0][1]);
    for (const [x, y] of points.slice(1)) raw.lineTo(x, y);
    raw.closePath();
    raw.fill();
  },
  text(s, x, y, color) {
    raw.fillStyle = color;
    raw.font = '12px monospace';
    raw.fillText(s, x, y);
  },
};

function paint(): void {
  const view = { width: canvas.width, height: canvas.height };
  if (vm.hello && vm.latest) {
    const elapsed = vm.paused ? 0 : (performance.now() - lastFrameAt) / 1000;
    const state = vm.renderState(elapsed);
    if (state) drawFrame(ctx, view, vm.hello, vm.latest, state);
  } else {
    ctx.clear(view.width, view.height);
    ctx.text('connecting...', 20, 30, '#c0caf5');
  }
  status.textContent = `${vm.status}  ${statusLine(vm.latest, vm.paused, vm.droppedFrames)}`;
  requestAnimationFrame(paint);
}
requestAnimationFrame(paint);

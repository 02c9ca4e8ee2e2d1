/**
 * Operator console entry point: wires the socket, the reducer, the canvas,
 * and the sidebar controls together. All mutation flows one way: DOM and
 * pointer events either send commands over the link or adjust the camera;
 * the world on screen only ever changes when the server says so.
 */

import { fitBounds, panByPixels, screenToWorld, zoomAt, type Camera, type Viewport } from "./camera.js";
import { ControlLink, type LinkEvent } from "./net.js";
import { drawScene, type AimPreview } from "./render.js";
import { initialModel, isStalled, reduce, type ViewModel } from "./state.js";

const DEFAULT_PROGRAMS = ["idle", "hop_gradient", "phototaxis", "run_tumble", "signal_led", "flood", "forward"];
const TOAST_MS = 4000;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing #${id} in index.html`);
  }
  return el as T;
}

const canvas = byId<HTMLCanvasElement>("arena");
const ctx = canvas.getContext("2d")!;

let model: ViewModel = initialModel();
let camera: Camera = { cx: 0, cy: 0, scale: 100 };
let fitted = false;
let aimPreview: AimPreview | null = null;
let renderedFeed: ViewModel["feed"] | null = null;
let renderedInspect: ViewModel["inspected"] | null = null;
let renderedPrograms = "";

function socketUrl(): string {
  if (location.protocol === "http:" || location.protocol === "https:") {
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    return `${scheme}://${location.host}/ws`;
  }
  return "ws://127.0.0.1:8000/ws"; // opened from a file: point at the default serve port
}

function dispatch(event: LinkEvent): void {
  if (event.kind === "protocol-error") {
    model = { ...model, toast: { text: event.reason, at: event.at } };
    return;
  }
  model = reduce(model, event);
  if (!fitted && model.snapshot !== null) {
    fitView();
    fitted = true;
  }
}

const link = new ControlLink(socketUrl(), dispatch);
link.connect();

function send(type: string, payload: Record<string, unknown> = {}): void {
  if (link.send(type, payload) === null) {
    model = { ...model, toast: { text: "not connected", at: Date.now() } };
  }
}

// ------------------------------------------------------------- view sizing

function viewport(): Viewport {
  return { width: canvas.clientWidth, height: canvas.clientHeight };
}

function resizeCanvas(): void {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth;
  const h = canvas.clientHeight;
  if (canvas.width !== Math.round(w * dpr) || canvas.height !== Math.round(h * dpr)) {
    canvas.width = Math.round(w * dpr);
    canvas.height = Math.round(h * dpr);
  }
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
}

new ResizeObserver(resizeCanvas).observe(canvas);

function fitView(): void {
  const snap = model.snapshot;
  if (snap === null) {
    return;
  }
  const points = [...snap.arena];
  for (const r of snap.robots) {
    points.push([r.x, r.y]);
  }
  camera = fitBounds(points, viewport(), 40);
}

// ------------------------------------------------------- pointer gestures

type DragMode =
  | { kind: "pan"; lastX: number; lastY: number }
  | { kind: "shower-move"; x: number; y: number }
  | { kind: "shower-aim"; theta: number };

let drag: DragMode | null = null;

function canvasPoint(event: PointerEvent | WheelEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return { x: event.clientX - rect.left, y: event.clientY - rect.top };
}

function hitRobot(wx: number, wy: number): number | null {
  const snap = model.snapshot;
  if (snap === null) {
    return null;
  }
  const slack = 3 / camera.scale;
  let best: number | null = null;
  let bestDist = Infinity;
  for (const r of snap.robots) {
    const d = Math.hypot(r.x - wx, r.y - wy);
    if (d <= r.radius + slack && d < bestDist) {
      best = r.id;
      bestDist = d;
    }
  }
  return best;
}

canvas.addEventListener("pointerdown", (event) => {
  const p = canvasPoint(event);
  const w = screenToWorld(camera, viewport(), p.x, p.y);
  const shower = model.snapshot?.shower ?? null;

  if (shower !== null) {
    const hx = shower.x + shower.range * Math.cos(shower.theta);
    const hy = shower.y + shower.range * Math.sin(shower.theta);
    if (Math.hypot(w.x - hx, w.y - hy) <= Math.max(0.035, 8 / camera.scale)) {
      drag = { kind: "shower-aim", theta: shower.theta };
      canvas.setPointerCapture(event.pointerId);
      return;
    }
    if (Math.hypot(w.x - shower.x, w.y - shower.y) <= Math.max(0.06, 8 / camera.scale)) {
      drag = { kind: "shower-move", x: shower.x, y: shower.y };
      canvas.setPointerCapture(event.pointerId);
      return;
    }
  }

  const robot = hitRobot(w.x, w.y);
  if (robot !== null) {
    model = reduce(model, { kind: "select", id: robot });
    send("inspect", { id: robot });
    return;
  }

  drag = { kind: "pan", lastX: p.x, lastY: p.y };
  canvas.setPointerCapture(event.pointerId);
});

canvas.addEventListener("pointermove", (event) => {
  if (drag === null) {
    return;
  }
  const p = canvasPoint(event);
  const shower = model.snapshot?.shower ?? null;
  if (drag.kind === "pan") {
    camera = panByPixels(camera, p.x - drag.lastX, p.y - drag.lastY);
    drag = { kind: "pan", lastX: p.x, lastY: p.y };
    return;
  }
  if (shower === null) {
    return;
  }
  const w = screenToWorld(camera, viewport(), p.x, p.y);
  if (drag.kind === "shower-move") {
    drag = { kind: "shower-move", x: w.x, y: w.y };
    aimPreview = { x: w.x, y: w.y, theta: shower.theta, range: shower.range };
  } else {
    const theta = Math.atan2(w.y - shower.y, w.x - shower.x);
    drag = { kind: "shower-aim", theta };
    aimPreview = { x: shower.x, y: shower.y, theta, range: shower.range };
  }
});

canvas.addEventListener("pointerup", () => {
  if (drag === null) {
    return;
  }
  if (drag.kind === "shower-move") {
    send("shower.set_pose", { x: drag.x, y: drag.y });
  } else if (drag.kind === "shower-aim") {
    const deg = (drag.theta * 180) / Math.PI;
    send("shower.set_pose", { aim_deg: Math.round(deg * 10) / 10 });
  }
  drag = null;
  aimPreview = null;
});

canvas.addEventListener("wheel", (event) => {
  event.preventDefault();
  const p = canvasPoint(event);
  const factor = event.deltaY < 0 ? 1.15 : 1 / 1.15;
  camera = zoomAt(camera, viewport(), p.x, p.y, factor);
}, { passive: false });

canvas.addEventListener("dblclick", fitView);

// ------------------------------------------------------------ sidebar DOM

byId<HTMLButtonElement>("pause").addEventListener("click", () => send("pause"));
byId<HTMLButtonElement>("resume").addEventListener("click", () => send("resume"));
byId<HTMLButtonElement>("step").addEventListener("click", () => send("single_step"));
byId<HTMLButtonElement>("fit").addEventListener("click", fitView);

byId<HTMLButtonElement>("apply-timescale").addEventListener("click", () => {
  const value = Number(byId<HTMLInputElement>("timescale").value);
  send("set_timescale", { timescale: value });
});

byId<HTMLButtonElement>("send-program").addEventListener("click", () => {
  const program = byId<HTMLSelectElement>("program").value;
  send("shower.program", { program });
});

function signalCode(): number {
  return Number(byId<HTMLInputElement>("signal-code").value) | 0;
}

byId<HTMLButtonElement>("shower-signal").addEventListener("click", () => {
  send("shower.emit_signal", { code: signalCode() });
});
byId<HTMLButtonElement>("broadcast-signal").addEventListener("click", () => {
  send("emit_signal", { code: signalCode() });
});

// --------------------------------------------------------------- DOM sync

const connEl = byId<HTMLSpanElement>("conn");
const tickEl = byId<HTMLSpanElement>("tick");
const timeEl = byId<HTMLSpanElement>("time");
const paceEl = byId<HTMLSpanElement>("pace");
const statsEl = byId<HTMLSpanElement>("stats");
const stalledEl = byId<HTMLSpanElement>("stalled");
const feedEl = byId<HTMLUListElement>("feed");
const inspectEl = byId<HTMLPreElement>("inspect");
const toastEl = byId<HTMLDivElement>("toast");
const programEl = byId<HTMLSelectElement>("program");

function syncPrograms(): void {
  const names = new Set(DEFAULT_PROGRAMS);
  for (const r of model.snapshot?.robots ?? []) {
    names.add(r.program);
  }
  const key = [...names].sort().join(",");
  if (key === renderedPrograms) {
    return;
  }
  renderedPrograms = key;
  const current = programEl.value;
  programEl.replaceChildren(
    ...[...names].sort().map((name) => {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      return opt;
    }),
  );
  programEl.value = names.has(current) ? current : "phototaxis";
}

function syncFeed(): void {
  if (model.feed === renderedFeed) {
    return;
  }
  renderedFeed = model.feed;
  feedEl.replaceChildren(
    ...model.feed.map((entry) => {
      const li = document.createElement("li");
      li.className = `feed-${entry.kind}`;
      const tick = entry.tick === null ? "" : `[${entry.tick}] `;
      li.textContent = `${tick}${entry.text}`;
      return li;
    }),
  );
}

function syncInspect(): void {
  if (model.inspected === renderedInspect) {
    return;
  }
  renderedInspect = model.inspected;
  if (model.inspected === null) {
    inspectEl.textContent =
      model.selected === null ? "click a robot to inspect" : `robot ${model.selected}…`;
  } else {
    inspectEl.textContent = JSON.stringify(model.inspected, null, 2);
  }
}

function syncStatus(now: number): void {
  connEl.textContent = model.connection;
  connEl.className = `conn-${model.connection}`;
  const snap = model.snapshot;
  tickEl.textContent = snap === null ? "–" : String(snap.tick);
  timeEl.textContent = snap === null ? "–" : `${snap.time_s.toFixed(2)} s`;
  paceEl.textContent = model.paused ? "paused" : `×${model.timescale}`;
  statsEl.textContent =
    snap === null
      ? ""
      : `tx ${snap.stats.transmitted} · rx ${snap.stats.delivered} · drop ${snap.stats.dropped} · air ${snap.in_flight}`;
  stalledEl.style.display = isStalled(model, now) ? "inline-block" : "none";

  const toast = model.toast;
  if (toast !== null && now - toast.at < TOAST_MS) {
    toastEl.textContent = toast.text;
    toastEl.style.display = "block";
  } else {
    toastEl.style.display = "none";
  }
}

// -------------------------------------------------------------- main loop

function frame(): void {
  const now = Date.now();
  resizeCanvas();
  drawScene(ctx, viewport(), model, camera, now, aimPreview);
  syncStatus(now);
  syncPrograms();
  syncFeed();
  syncInspect();
  requestAnimationFrame(frame);
}

requestAnimationFrame(frame);

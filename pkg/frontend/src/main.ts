// Operator console: top-down map, altitude strip, per-behavior gauges with
// measured value (bar) vs model prediction (marker), and the ternary
// correction buttons. boot() is exported so tests can drive the full app
// with a fake socket.

import { SocketFactory, SteeringClient, defaultServerUrl } from "./client";
import {
  BEHAVIORS,
  Behavior,
  makeInstruction,
  satisfiedInstruction,
} from "./protocol";
import { drawAltitudeStrip, drawMap, Canvas2D
} from "./render";
import {
  applyServerMessage,
  connectionChanged,
  controlsEnabled,
  initialViewModel,
  ViewModel,
} from "./state";

const MAP_SIZE = 520;
const STRIP_WIDTH = 46;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface App {
  vm: ViewModel;
  client: SteeringClient;
}

export function boot(doc: Document, wsFactory?: SocketFactory, url?: string): App {
  const root = doc.getElementById("app") ?? doc.body;

  const header = el(doc, "div", "header");
  const status = el(doc, "span", "status", "connecting");
  const sessionInfo = el(doc, "span", "session-info", "");
  const situation = el(doc, "span", "situation-badge", "--");
  const phaseBadge = el(doc, "span", "phase-badge", "phase");
  phaseBadge.style.visibility = "hidden";
  const banner = el(doc, "div", "banner", "");
  banner.style.display = "none";
  header.append(status, sessionInfo, situation, phaseBadge);

  const stage = el(doc, "div", "stage");
  const map = el(doc, "canvas", "map");
  map.id = "map";
  map.width = MAP_SIZE;
  map.height = MAP_SIZE;
  const strip = el(doc, "canvas", "altitude");
  strip.id = "altitude";
  strip.width = STRIP_WIDTH;
  strip.height = MAP_SIZE;
  stage.append(map, strip);

  const gauges = el(doc, "div", "gauges");
  const gaugeParts: Record<string, { bar: HTMLElement; marker: HTMLElement; readout: HTMLElement }> = {};
  const instructionButtons: HTMLButtonElement[] = [];
  for (const behavior of BEHAVIORS) {
    const row = el(doc, "div", "gauge-row");
    const label = el(doc, "span", "gauge-label", behavior);
    const track = el(doc, "div", "gauge-track");
    const bar = el(doc, "div", "gauge-bar");
    const marker = el(doc, "div", "gauge-marker");
    track.append(bar, marker);
    const readout = el(doc, "span", "gauge-readout", "-/-");
    const minus = el(doc, "button", "btn-dec", "-");
    minus.dataset.behavior = behavior;
    minus.dataset.direction = "-1";
    const plus = el(doc, "button", "btn-inc", "+");
    plus.dataset.behavior = behavior;
    plus.dataset.direction = "1";
    instructionButtons.push(minus, plus);
    row.append(label, track, readout, minus, plus);
    gauges.append(row);
    gaugeParts[behavior] = { bar, marker, readout };
  }

  const controls = el(doc, "div", "controls");
  const satisfied = el(doc, "button", "btn-satisfied", "satisfied");
  const pause = el(doc, "button", "btn-pause", "pause");
  const resume = el(doc, "button", "btn-resume", "resume");
  const reset = el(doc, "button", "btn-reset", "reset");
  instructionButtons.push(satisfied);
  controls.append(satisfied, pause, resume, reset);

  root.append(header, banner, stage, gauges, controls);

  const mapCtx = map.getContext("2d") as Canvas2D | null;
  const stripCtx = strip.getContext("2d") as Canvas2D | null;

  const app = { vm: initialViewModel() } as App;

  function redraw(): void {
    const vm = app.vm;
    status.textContent = vm.connection;
    if (vm.banner) {
      banner.textContent = vm.banner;
      banner.style.display = "block";
    } else {
      banner.style.display = "none";
    }
    const enabled = controlsEnabled(vm);
    for (const button of instructionButtons) button.disabled = !enabled;
    if (vm.arena) {
      sessionInfo.textContent = `${vm.arena.session_id} · ${vm.arena.algo}`;
      if (mapCtx) drawMap(mapCtx, MAP_SIZE, MAP_SIZE, vm.arena, vm.frame);
      if (stripCtx) drawAltitudeStrip(stripCtx, STRIP_WIDTH, MAP_SIZE, vm.arena.max_altitude, vm.frame);
    }
    if (vm.frame) {
      situation.textContent = vm.frame.situation;
      phaseBadge.style.visibility = vm.frame.phase_active ? "visible" : "hidden";
      phaseBadge.textContent = vm.frame.phase_active
        ? `phase ${vm.frame.metrics.n_phases} · ${vm.frame.metrics.current_phase_len}`
        : "phase";
      for (const behavior of BEHAVIORS) {
        const parts = gaugeParts[behavior];
        const measured = vm.frame.R[behavior];
        const predicted = vm.frame.H_hat[behavior];
        parts.bar.style.width = `${(measured * 100).toFixed(1)}%`;
        parts.marker.style.left = `${(predicted * 100).toFixed(1)}%`;
        parts.readout.textContent = `${predicted.toFixed(2)} / ${measured.toFixed(2)}`;
      }
    }
  }

  const target = url ?? defaultServerUrl(doc.defaultView?.location ?? { host: "localhost:8000", protocol: "http:" });
  const client = new SteeringClient(
    target,
    {
      onOpen() {
        app.vm = connectionChanged(app.vm, "open");
        redraw();
      },
      onClose() {
        app.vm = connectionChanged(app.vm, "closed");
        redraw();
      },
      onMessage(msg) {
        app.vm = applyServerMessage(app.vm, msg);
        if (app.vm.connection === "schema-mismatch") client.close();
        redraw();
      },
      onBadPayload() {
        app.vm = { ...app.vm, banner: "malformed server message" };
        redraw();
      },
    },
    wsFactory,
  );
  app.client = client;

  function sendFromButton(button: HTMLElement): void {
    if (!controlsEnabled(app.vm)) return;
    const behavior = button.dataset.behavior as Behavior | undefined;
    if (behavior) {
      const direction = Number(button.dataset.direction) as -1 | 1;
      client.send(makeInstruction(behavior, direction));
    } else {
      client.send(satisfiedInstruction());
    }
  }

  for (const button of instructionButtons) {
    button.addEventListener("click", () => sendFromButton(button));
  }
  pause.addEventListener("click", () => client.send({ type: "pause" }));
  resume.addEventListener("click", () => client.send({ type: "resume" }));
  reset.addEventListener("click", () => client.send({ type: "reset" }));

  redraw();
  return app;
}

declare global {
  interface Window {
    __prefflockBooted?: boolean;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && !window.__prefflockBooted) {
  if (document.getElementById("app")) {
    window.__prefflockBooted = true;
    boot(document);
  }
}

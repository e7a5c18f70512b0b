// @vitest-environment jsdom
//
// Full-app test: boots the console against a scripted fake socket, feeds it
// an arena and a frame, and checks that the canvas received draw calls and
// that button clicks emit schema-valid instruction messages in order.

import { beforeEach, describe, expect, it } from "vitest";

import { boot } from "../src/main";
import { SCHEMA_VERSION, validateClientMessage } from "../src/protocol";
import type { SocketLike } from "../src/client";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }

  push(msg: unknown): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }
}

class RecordingContext {
  calls: string[] = [];
  fillStyle = "";
  strokeStyle = "";
  lineWidth = 1;
}

for (const name of [
  "clearRect", "fillRect", "strokeRect", "beginPath", "arc", "moveTo", "lineTo", "fill", "stroke",
]) {
  (RecordingContext.prototype as unknown as Record<string, unknown>)[name] = function (
    this: RecordingContext,
  ) {
    this.calls.push(name);
  };
}

const contexts: RecordingContext[] = [];

function arenaMsg() {
  return {
    type: "arena",
    schema_version: SCHEMA_VERSION,
    session_id: "s0007",
    algo: "maml",
    width: 400,
    depth: 400,
    max_altitude: 50,
    obstacles: [{ center: [120, 100, 15], half_extents: [15, 10, 15] }],
    targets: [{ center: [350, 350], radius: 20 }],
  };
}

function frameMsg(step: number) {
  return {
    type: "frame",
    schema_version: SCHEMA_VERSION,
    session_id: "s0007",
    algo: "maml",
    step,
    robots: [
      { p: [20, 20, 10], v: [1, 0, 0] },
      { p: [24, 21, 11], v: [1, 0, 0] },
      { p: [22, 18, 9], v: [1, 0, 0] },
      { p: [18, 22, 10], v: [1, 0, 0] },
      { p: [21, 24, 12], v: [1, 0, 0] },
    ],
    H_hat: { inner: 0.52, height: 0.41, speed: 0.63, safety: 0.35 },
    R: { inner: 0.5, height: 0.4, speed: 0.6, safety: 0.4 },
    situation: "FF",
    phase_active: true,
    metrics: { n_phases: 1, current_phase_len: 3 },
  };
}

function bootApp() {
  document.body.innerHTML = '<div id="app"></div>';
  contexts.length = 0;
  (HTMLCanvasElement.prototype as unknown as { getContext: unknown }).getContext = function () {
    const ctx = new RecordingContext();
    contexts.push(ctx);
    return ctx;
  };
  const socket = new FakeSocket();
  const app = boot(document, () => socket, "ws://test/ws");
  socket.open();
  return { app, socket };
}

describe("steering console", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders a frame: robot markers drawn, gauges and badges updated", () => {
    const { socket } = bootApp();
    socket.push(arenaMsg());
    socket.push(frameMsg(0));

    const mapCtx = contexts[0];
    const arcCalls = mapCtx.calls.filter((c) => c === "arc").length;
    // one target circle + five robots on the map
    expect(arcCalls).toBeGreaterThanOrEqual(6);
    expect(mapCtx.calls.filter((c) => c === "fillRect").length).toBeGreaterThanOrEqual(2);

    const badge = document.querySelector(".phase-badge") as HTMLElement;
    expect(badge.style.visibility).toBe("visible");
    expect(badge.textContent).toContain("1");

    const situation = document.querySelector(".situation-badge") as HTMLElement;
    expect(situation.textContent).toBe("FF");

    const readouts = Array.from(document.querySelectorAll(".gauge-readout"));
    expect(readouts[2].textContent).toBe("0.63 / 0.60");
  });

  it("click on speed minus sends exactly one schema-valid instruction", () => {
    const { socket } = bootApp();
    socket.push(arenaMsg());
    socket.push(frameMsg(0));

    const minusButtons = Array.from(
      document.querySelectorAll<HTMLButtonElement>(".btn-dec"),
    );
    const speedMinus = minusButtons.find((b) => b.dataset.behavior === "speed")!;
    expect(speedMinus.disabled).toBe(false);
    speedMinus.click();

    expect(socket.sent).toHaveLength(1);
    const msg = JSON.parse(socket.sent[0]);
    expect(validateClientMessage(msg)).toBe(true);
    expect(msg.ins).toEqual({ inner: 0, height: 0, speed: -1, safety: 0 });
  });

  it("satisfied button sends the zero instruction", () => {
    const { socket } = bootApp();
    socket.push(arenaMsg());
    socket.push(frameMsg(0));
    (document.querySelector(".btn-satisfied") as HTMLButtonElement).click();
    const msg = JSON.parse(socket.sent[0]);
    expect(validateClientMessage(msg)).toBe(true);
    expect(Object.values(msg.ins).every((v) => v === 0)).toBe(true);
  });

  it("two rapid clicks produce two ordered messages", () => {
    const { socket } = bootApp();
    socket.push(arenaMsg());
    socket.push(frameMsg(0));
    const plus = Array.from(document.querySelectorAll<HTMLButtonElement>(".btn-inc"));
    const heightPlus = plus.find((b) => b.dataset.behavior === "height")!;
    heightPlus.click();
    heightPlus.click();
    expect(socket.sent).toHaveLength(2);
    expect(JSON.parse(socket.sent[0]).ins.height).toBe(1);
    expect(JSON.parse(socket.sent[1]).ins.height).toBe(1);
  });

  it("buttons disabled while disconnected and while paused", () => {
    const { socket } = bootApp();
    socket.push(arenaMsg());
    socket.push(frameMsg(0));
    const anyButton = document.querySelector(".btn-inc") as HTMLButtonElement;
    expect(anyButton.disabled).toBe(false);

    socket.push({
      type: "ack", schema_version: SCHEMA_VERSION, session_id: "s0007", command: "pause",
    });
    expect(anyButton.disabled).toBe(true);
    socket.push({
      type: "ack", schema_version: SCHEMA_VERSION, session_id: "s0007", command: "resume",
    });
    expect(anyButton.disabled).toBe(false);

    socket.close();
    expect(anyButton.disabled).toBe(true);
  });

  it("malformed frame shows a banner without crashing", () => {
    const { socket } = bootApp();
    socket.push(arenaMsg());
    socket.onmessage?.({ data: "{broken" });
    const banner = document.querySelector(".banner") as HTMLElement;
    expect(banner.style.display).toBe("block");
    expect(banner.textContent).toContain("malformed");
  });

  it("schema mismatch disconnects with a banner", () => {
    const { socket } = bootApp();
    socket.push({ ...arenaMsg(), schema_version: "9" });
    const banner = document.querySelector(".banner") as HTMLElement;
    expect(banner.textContent).toContain("unsupported schema");
    expect(socket.closed).toBe(true);
  });
});

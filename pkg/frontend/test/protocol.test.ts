import { describe, expect, it } from "vitest";

import {
  BEHAVIORS,
  makeInstruction,
  parseServerMessage,
  satisfiedInstruction,
  SCHEMA_VERSION,
  validateClientMessage,
} from "../src/protocol";

const frame = {
  type: "frame",
  schema_version: SCHEMA_VERSION,
  session_id: "s0001",
  algo: "maml",
  step: 3,
  robots: [{ p: [1, 2, 3], v: [0, 0, 0] }],
  H_hat: { inner: 0.5, height: 0.5, speed: 0.5, safety: 0.5 },
  R: { inner: 0.4, height: 0.5, speed: 0.6, safety: 0.5 },
  situation: "FF",
  phase_active: false,
  metrics: { n_phases: 0, current_phase_len: 0 },
};

describe("parseServerMessage", () => {
  it("accepts a well-formed frame", () => {
    const msg = parseServerMessage(JSON.stringify(frame));
    expect(msg?.type).toBe("frame");
  });

  it("rejects junk json and unknown types", () => {
    expect(parseServerMessage("{oops")).toBeNull();
    expect(parseServerMessage(JSON.stringify({ type: "nope", schema_version: "1" }))).toBeNull();
  });

  it("rejects a frame missing gauges", () => {
    const broken = { ...frame, H_hat: { inner: 0.5 } };
    expect(parseServerMessage(JSON.stringify(broken))).toBeNull();
  });

  it("accepts error and shutdown messages", () => {
    expect(
      parseServerMessage(
        JSON.stringify({ type: "error", schema_version: "1", session_id: "s", message: "bad" }),
      )?.type,
    ).toBe("error");
    expect(
      parseServerMessage(
        JSON.stringify({ type: "server_shutdown", schema_version: "1", session_id: "s" }),
      )?.type,
    ).toBe("server_shutdown");
  });
});

describe("instruction builders", () => {
  it("sets exactly one nonzero component", () => {
    for (const behavior of BEHAVIORS) {
      for (const direction of [-1, 1] as const) {
        const msg = makeInstruction(behavior, direction);
        expect(msg.ins[behavior]).toBe(direction);
        const others = BEHAVIORS.filter((b) => b !== behavior);
        for (const other of others) expect(msg.ins[other]).toBe(0);
        expect(validateClientMessage(msg)).toBe(true);
      }
    }
  });

  it("satisfied is the zero vector", () => {
    const msg = satisfiedInstruction();
    expect(Object.values(msg.ins).every((v) => v === 0)).toBe(true);
    expect(validateClientMessage(msg)).toBe(true);
  });

  it("round-trips through the outbound schema validator", () => {
    const wire = JSON.stringify(makeInstruction("speed", 1));
    expect(validateClientMessage(JSON.parse(wire))).toBe(true);
  });

  it("validator rejects malformed instructions", () => {
    expect(validateClientMessage({ type: "instruction", ins: { inner: 2, height: 0, speed: 0, safety: 0 } })).toBe(false);
    expect(validateClientMessage({ type: "instruction", ins: { inner: 0 } })).toBe(false);
    expect(validateClientMessage({ type: "warp" })).toBe(false);
    expect(validateClientMessage({ type: "pause" })).toBe(true);
  });
});

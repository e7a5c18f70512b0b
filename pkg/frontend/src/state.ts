// View model and its reducer. The reducer is pure so tests can drive it
// with canned messages; rendering reads the latest state only.

import {
  ArenaMessage,
  FrameMessage,
  SCHEMA_VERSION,
  ServerMessage,
} from "./protocol";

export type Connection = "connecting" | "open" | "closed" | "schema-mismatch";

export interface ViewModel {
  connection: Connection;
  arena: ArenaMessage | null;
  frame: FrameMessage | null;
  framesSeen: number;
  paused: boolean;
  banner: string | null;
  lastAckPref: Record<string, number> | null;
}

export function initialViewModel(): ViewModel {
  return {
    connection: "connecting",
    arena: null,
    frame: null,
    framesSeen: 0,
    paused: false,
    banner: null,
    lastAckPref: null,
  };
}

export function applyServerMessage(vm: ViewModel, msg: ServerMessage): ViewModel {
  if (msg.schema_version !== SCHEMA_VERSION) {
    return { ...vm, connection: "schema-mismatch", banner: `unsupported schema ${msg.schema_version}` };
  }
  switch (msg.type) {
    case "arena":
      return { ...vm, arena: msg, banner: null };
    case "frame":
      return { ...vm, frame: msg, framesSeen: vm.framesSeen + 1 };
    case "ack":
      if (msg.command === "pause") return { ...vm, paused: true };
      if (msg.command === "resume") return { ...vm, paused: false };
      if (msg.command === "reset") return { ...vm, lastAckPref: null };
      return { ...vm, lastAckPref: msg.H_hat ?? vm.lastAckPref };
    case "error":
      return { ...vm, banner: msg.message };
    case "server_shutdown":
      return { ...vm, connection: "closed", banner: "server shut down" };
  }
}

export function connectionChanged(vm: ViewModel, connection: Connection): ViewModel {
  return { ...vm, connection };
}

// Instruction buttons are live only with an open, unpaused session.
export function controlsEnabled(vm: ViewModel): boolean {
  return vm.connection === "open" && !vm.paused;
}

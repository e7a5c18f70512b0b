// Wire protocol shared with the session service. Every message carries a
// schema version and the session id; the client refuses frames from a
// different schema.

export const SCHEMA_VERSION = "1";

export const BEHAVIORS = ["inner", "height", "speed", "safety"] as const;
export type Behavior = (typeof BEHAVIORS)[number];

export type PrefValues = Record<Behavior, number>;
export type TernaryValues = Record<Behavior, -1 | 0 | 1>;

export interface ArenaMessage {
  type: "arena";
  schema_version: string;
  session_id: string;
  algo: string;
  width: number;
  depth: number;
  max_altitude: number;
  obstacles: { center: number[]; half_extents: number[] }[];
  targets: { center: number[]; radius: number }[];
}

export interface FrameMessage {
  type: "frame";
  schema_version: string;
  session_id: string;
  algo: string;
  step: number;
  robots: { p: number[]; v: number[] }[];
  H_hat: PrefValues;
  R: PrefValues;
  situation: "FF" | "TF" | "FT" | "TT";
  phase_active: boolean;
  metrics: { n_phases: number; current_phase_len: number };
}

export interface AckMessage {
  type: "ack";
  schema_version: string;
  session_id: string;
  command: string;
  H_hat?: PrefValues;
}

export interface ErrorMessage {
  type: "error";
  schema_version: string;
  session_id: string;
  message: string;
}

export interface ShutdownMessage {
  type: "server_shutdown";
  schema_version: string;
  session_id: string;
}

export type ServerMessage =
  | ArenaMessage
  | FrameMessage
  | AckMessage
  | ErrorMessage
  | ShutdownMessage;

export interface InstructionMessage {
  type: "instruction";
  ins: TernaryValues;
}

export interface ControlMessage {
  type: "pause" | "resume" | "reset";
}

export type ClientMessage = InstructionMessage | ControlMessage;

function isPrefValues(value: unknown): value is PrefValues {
  if (typeof value !== "object" || value === null) return false;
  return BEHAVIORS.every((b) => typeof (value as Record<string, unknown>)[b] === "number");
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const m = msg as Record<string, unknown>;
  if (typeof m.type !== "string" || typeof m.schema_version !== "string") return null;
  switch (m.type) {
    case "arena":
      return Array.isArray(m.obstacles) && Array.isArray(m.targets)
        ? (msg as ArenaMessage)
        : null;
    case "frame":
      return typeof m.step === "number" &&
        Array.isArray(m.robots) &&
        isPrefValues(m.H_hat) &&
        isPrefValues(m.R)
        ? (msg as FrameMessage)
        : null;
    case "ack":
      return typeof m.command === "string" ? (msg as AckMessage) : null;
    case "error":
      return typeof m.message === "string" ? (msg as ErrorMessage) : null;
    case "server_shutdown":
      return msg as ShutdownMessage;
    default:
      return null;
  }
}

export function makeInstruction(behavior: Behavior, direction: -1 | 1): InstructionMessage {
  const ins: TernaryValues = { inner: 0, height: 0, speed: 0, safety: 0 };
  ins[behavior] = direction;
  return { type: "instruction", ins };
}

export function satisfiedInstruction(): InstructionMessage {
  return { type: "instruction", ins: { inner: 0, height: 0, speed: 0, safety: 0 } };
}

// Outbound schema check used by the UI tests: exactly the shape the service
// accepts, nothing more.
export function validateClientMessage(msg: unknown): msg is ClientMessage {
  if (typeof msg !== "object" || msg === null) return false;
  const m = msg as Record<string, unknown>;
  if (m.type === "pause" || m.type === "resume" || m.type === "reset") {
    return Object.keys(m).length === 1;
  }
  if (m.type !== "instruction") return false;
  const ins = m.ins as Record<string, unknown> | undefined;
  if (typeof ins !== "object" || ins === null) return false;
  if (Object.keys(ins).length !== BEHAVIORS.length) return false;
  return BEHAVIORS.every((b) => ins[b] === -1 || ins[b] === 0 || ins[b] === 1);
}

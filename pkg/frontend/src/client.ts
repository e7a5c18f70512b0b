// Thin WebSocket wrapper. Outbound sends are fire-and-forget in click
// order; inbound text is parsed and handed to a single callback.

import { ClientMessage, parseServerMessage, ServerMessage } from "./protocol";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientHandlers {
  onMessage(msg: ServerMessage): void;
  onOpen(): void;
  onClose(): void;
  onBadPayload(raw: string): void;
}

export class SteeringClient {
  private socket: SocketLike;

  constructor(url: string, handlers: ClientHandlers, factory?: SocketFactory) {
    const make = factory ?? ((u: string) => new WebSocket(u) as unknown as SocketLike);
    this.socket = make(url);
    this.socket.onopen = () => handlers.onOpen();
    this.socket.onclose = () => handlers.onClose();
    this.socket.onerror = () => handlers.onClose();
    this.socket.onmessage = (ev) => {
      const msg = parseServerMessage(ev.data);
      if (msg === null) {
        handlers.onBadPayload(ev.data);
        return;
      }
      handlers.onMessage(msg);
    };
  }

  send(msg: ClientMessage): void {
    this.socket.send(JSON.stringify(msg));
  }

  close(): void {
    this.socket.close();
  }
}

export function defaultServerUrl(loc: { host: string; protocol: string }): string {
  const scheme = loc.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${loc.host}/ws`;
}

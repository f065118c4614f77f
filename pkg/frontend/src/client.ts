// WebSocket session wrapper: parses frames, tracks connection state, and is the
// single place TargetCommands leave from (never while disconnected).

import { Ack, ControlCommand, Hello, parseServerMessage, StateBroadcast } from "./protocol.js";

export interface TeleopHandlers {
  onHello?(msg: Hello): void;
  onState?(msg: StateBroadcast): void;
  onAck?(msg: Ack): void;
  onStatus?(status: "connected" | "disconnected"): void;
}

export class TeleopSocket {
  private ws: WebSocket | null = null;
  private handlers: TeleopHandlers;
  connected = false;

  constructor(handlers: TeleopHandlers) {
    this.handlers = handlers;
  }

  connect(url: string): void {
    const ws = new WebSocket(url);
    this.ws = ws;
    ws.addEventListener("open", () => {
      this.connected = true;
      this.handlers.onStatus?.("connected");
    });
    ws.addEventListener("close", () => {
      this.connected = false;
      this.handlers.onStatus?.("disconnected");
    });
    ws.addEventListener("message", (event: MessageEvent) => {
      const msg = parseServerMessage(String(event.data));
      if (msg === null) {
        console.warn("dropping malformed broadcast");
        return;
      }
      if (msg.type === "state") this.handlers.onState?.(msg);
      else if (msg.type === "hello") this.handlers.onHello?.(msg as Hello);
      else if (msg.type === "ack") this.handlers.onAck?.(msg as Ack);
    });
  }

  sendTarget(x: number, y: number): boolean {
    if (!this.connected || !this.ws) return false;
    this.ws.send(JSON.stringify({ type: "target", x, y }));
    return true;
  }

  sendControl(cmd: ControlCommand["cmd"], extra: Partial<ControlCommand> = {}): boolean {
    if (!this.connected || !this.ws) return false;
    this.ws.send(JSON.stringify({ type: "control", cmd, ...extra }));
    return true;
  }
}

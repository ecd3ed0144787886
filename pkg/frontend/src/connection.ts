/** Reconnecting WebSocket wrapper; decodes frames off the wire callbacks. */

import { decodeFrame, parseHello, type HelloMsg, type WireFrame } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface ConnectionEvents {
  onFrame: (frame: WireFrame) => void;
  onHello: (hello: HelloMsg) => void;
  onStatus: (status: ConnectionStatus) => void;
}

export class ViewerConnection {
  private ws: WebSocket | null = null;
  private backoffMs = 500;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly events: ConnectionEvents,
  ) {}

  start(): void {
    this.closed = false;
    this.open();
  }

  stop(): void {
    this.closed = true;
    this.ws?.close();
  }

  send(text: string): boolean {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(text);
      return true;
    }
    return false;
  }

  private open(): void {
    this.events.onStatus("connecting");
    const ws = new WebSocket(this.url);
    ws.binaryType = "arraybuffer";
    this.ws = ws;

    ws.onopen = () => {
      this.backoffMs = 500;
      this.events.onStatus("connected");
    };
    ws.onmessage = (ev: MessageEvent) => {
      if (typeof ev.data === "string") {
        const hello = parseHello(ev.data);
        if (hello) {
          this.events.onHello(hello);
        }
        return;
      }
      try {
        this.events.onFrame(decodeFrame(ev.data as ArrayBuffer));
      } catch (err) {
        console.warn("dropping undecodable frame:", err);
      }
    };
    ws.onclose = () => {
      this.events.onStatus("disconnected");
      if (!this.closed) {
        // exponential backoff; viewer state survives the reconnect
        setTimeout(() => this.open(), this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, 8000);
      }
    };
    ws.onerror = () => ws.close();
  }
}

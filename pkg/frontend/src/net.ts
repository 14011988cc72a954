// WebSocket client with automatic reconnect and re-subscription. The engine
// speaks one JSON object per text frame; subscriptions are plain messages.

import { parseServerMsg, ServerMsg, subscribeMsg } from "./protocol.js";

export interface NetCallbacks {
  onMessage(msg: ServerMsg): void;
  onStatus(open: boolean): void;
}

export class WsClient {
  private url: string;
  private topics: string[];
  private callbacks: NetCallbacks;
  private ws: WebSocket | null = null;
  private closed = false;
  private retryMs: number;

  constructor(url: string, topics: string[], callbacks: NetCallbacks, retryMs = 500) {
    this.url = url;
    this.topics = topics;
    this.callbacks = callbacks;
    this.retryMs = retryMs;
  }

  connect(): void {
    if (this.closed) return;
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      for (const topic of this.topics) {
        ws.send(JSON.stringify(subscribeMsg(topic, -1)));
      }
      this.callbacks.onStatus(true);
    };
    ws.onmessage = (ev: MessageEvent) => {
      const msg = parseServerMsg(String(ev.data));
      if (msg) this.callbacks.onMessage(msg);
    };
    ws.onclose = () => {
      this.callbacks.onStatus(false);
      // reconnect well inside the 2 s resynchronization budget
      if (!this.closed) setTimeout(() => this.connect(), this.retryMs);
    };
    ws.onerror = () => ws.close();
  }

  send(obj: object): boolean {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(obj));
      return true;
    }
    return false;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}

export function defaultWsUrl(): string {
  const override = new URLSearchParams(location.search).get("ws");
  if (override) return override;
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/ws`;
}

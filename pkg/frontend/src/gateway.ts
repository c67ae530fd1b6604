// Gateway access. fetch and WebSocket are injectable so the suite can run
// against a scripted fake; the browser build uses the globals.

import type { WireFrame } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;
export type WsFactory = (url: string) => WebSocketLike;

export interface WebSocketLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  close(): void;
}

export interface EventsHandle {
  stop(): void;
}

export class GatewayClient {
  private base: string;
  private fetchFn: FetchLike;
  private wsFactory: WsFactory;
  operator: string;

  constructor(base: string, opts: { fetchFn?: FetchLike; wsFactory?: WsFactory;
                                    operator?: string } = {}) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = opts.fetchFn ?? ((url, init) => fetch(url, init));
    this.wsFactory = opts.wsFactory ?? ((url) => new WebSocket(url) as unknown as WebSocketLike);
    this.operator = opts.operator ?? "console";
  }

  private async request(method: string, path: string, body?: unknown): Promise<any> {
    const init: RequestInit = {
      method,
      headers: { "X-Operator": this.operator },
    };
    if (body !== undefined) {
      init.headers = { ...init.headers, "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    const text = await resp.text();
    const parsed = text ? JSON.parse(text) : null;
    if (!resp.ok) {
      const detail = parsed?.detail ?? text;
      throw new GatewayError(parsed?.error ?? `HTTP ${resp.status}`, detail);
    }
    return parsed;
  }

  status(prefix = ""): Promise<Record<string, any>> {
    return this.request("GET", `/api/status?prefix=${encodeURIComponent(prefix)}`);
  }

  alerts(): Promise<any[]> {
    return this.request("GET", "/api/alerts");
  }

  respondAlert(id: number, choice: string): Promise<any> {
    return this.request("POST", `/api/alerts/${id}/respond`,
                        { choice, operator: this.operator });
  }

  reserve(taxon: string): Promise<{ key: string }> {
    return this.request("POST", "/api/reserve", { taxon });
  }

  release(key: string, taxon?: string): Promise<any> {
    const suffix = taxon ? `?taxon=${encodeURIComponent(taxon)}` : "";
    return this.request("DELETE", `/api/reserve/${key}${suffix}`);
  }

  reservations(): Promise<any[]> {
    return this.request("GET", "/api/reservations");
  }

  startShot(body: Record<string, unknown> = {}): Promise<{ shot_id: number }> {
    return this.request("POST", "/api/shots", body);
  }

  abortShot(shotId: number, reason = "console abort"): Promise<any> {
    return this.request("POST", `/api/shots/${shotId}/abort`, { reason });
  }

  shot(shotId: number): Promise<any> {
    return this.request("GET", `/api/shots/${shotId}`);
  }

  activeShot(): Promise<{ shot: any }> {
    return this.request("GET", "/api/shots/active");
  }

  runSequence(xml: string, operatorScript?: unknown): Promise<{ exec_id: string }> {
    const body: Record<string, unknown> = { xml };
    if (operatorScript) body.operatorScript = operatorScript;
    return this.request("POST", "/api/sequences", body);
  }

  sequenceStatus(execId: string): Promise<any> {
    return this.request("GET", `/api/sequences/${execId}`);
  }

  sequenceResume(execId: string, choice: string): Promise<any> {
    return this.request("POST", `/api/sequences/${execId}/resume`, { choice });
  }

  processes(): Promise<any[]> {
    return this.request("GET", "/api/processes");
  }

  facility(): Promise<any> {
    return this.request("GET", "/api/facility");
  }

  // WebSocket stream with automatic reconnect. onState fires with
  // "online"/"offline"; after every (re)open the caller must resync.
  events(onFrame: (f: WireFrame) => void,
         onState: (state: "online" | "offline") => void,
         reconnectMs = 1000): EventsHandle {
    let stopped = false;
    let socket: WebSocketLike | null = null;

    const wsUrl = this.base.replace(/^http/, "ws") + "/api/events";
    const connect = () => {
      if (stopped) return;
      socket = this.wsFactory(wsUrl);
      socket.onopen = () => onState("online");
      socket.onmessage = (ev) => {
        try {
          onFrame(JSON.parse(ev.data) as WireFrame);
        } catch {
          // a malformed frame is a gateway bug; skip it, keep the stream
        }
      };
      socket.onclose = () => {
        onState("offline");
        if (!stopped) setTimeout(connect, reconnectMs);
      };
    };
    connect();
    return {
      stop() {
        stopped = true;
        socket?.close();
      },
    };
  }
}

export class GatewayError extends Error {
  code: string;
  constructor(code: string, detail: string) {
    super(`${code}: ${detail}`);
    this.code = code;
  }
}

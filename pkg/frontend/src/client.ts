/** HTTP + event-stream client for the causal-loop service. */

import type {
  ApiError,
  DistributionView,
  EdgeInfluence,
  EditOp,
  GraphDoc,
  QueryRequest,
  SessionEvent,
  SessionView,
} from "./protocol.js";

export class ServiceError extends Error {
  constructor(public error: ApiError, public status: number) {
    super(`${error.code}: ${error.detail}`);
  }
}

async function parseError(resp: Response): Promise<never> {
  let body: { error?: ApiError };
  try {
    body = await resp.json();
  } catch {
    body = { error: { code: "HTTPError", detail: resp.statusText } };
  }
  throw new ServiceError(body.error ?? { code: "HTTPError", detail: resp.statusText },
                         resp.status);
}

export class ApiClient {
  constructor(public base: string, private fetchFn: typeof fetch = fetch) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(this.base + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) await parseError(resp);
    return resp.json() as Promise<T>;
  }

  listScenarios(): Promise<{ scenarios: string[] }> {
    return this.request("GET", "/scenarios");
  }

  createSession(scenario: string): Promise<SessionView> {
    return this.request("POST", "/sessions", { scenario });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${id}`);
  }

  getGraph(id: string, version?: number): Promise<GraphDoc> {
    const q = version === undefined ? "" : `?version=${version}`;
    return this.request("GET", `/sessions/${id}/graph${q}`);
  }

  beginEdit(id: string): Promise<{ phase: string; base_version: number }> {
    return this.request("POST", `/sessions/${id}/edit`, { action: "begin" });
  }

  commitEdit(id: string, baseVersion: number, ops: EditOp[]):
      Promise<{ phase: string; version: number }> {
    return this.request("POST", `/sessions/${id}/edit`,
                        { action: "commit", base_version: baseVersion, ops });
  }

  query(id: string, req: QueryRequest): Promise<DistributionView> {
    return this.request("POST", `/sessions/${id}/query`, req);
  }

  execute(id: string, trials: number, seed: number,
          forced: Record<string, string> = {}): Promise<SessionView> {
    return this.request("POST", `/sessions/${id}/execute`,
                        { trials, seed, forced, background: true });
  }

  respond(id: string, cont: boolean): Promise<SessionView> {
    return this.request("POST", `/sessions/${id}/respond`, { continue: cont });
  }

  events(id: string, fromSeq = 0): Promise<{ events: SessionEvent[]; last_seq: number }> {
    return this.request("GET", `/sessions/${id}/events?from_seq=${fromSeq}`);
  }

  influence(id: string, version?: number):
      Promise<{ version: number; edges: EdgeInfluence[] }> {
    const q = version === undefined ? "" : `?version=${version}`;
    return this.request("GET", `/sessions/${id}/influence${q}`);
  }
}

export type ChannelStatus = "connecting" | "live" | "stale";

export interface ChannelCallbacks {
  onEvent(event: SessionEvent): void;
  onStatus?(status: ChannelStatus): void;
}

/**
 * Persistent event channel: WebSocket when available, HTTP polling otherwise.
 * Reconnects automatically and always resumes from the last applied sequence
 * number, so delivery is gapless across drops.
 */
export class EventChannel {
  lastSeq = 0;
  private ws: WebSocket | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(
    private base: string,
    private sessionId: string,
    private callbacks: ChannelCallbacks,
    private pollMs = 400,
    private useWebSocket = typeof WebSocket !== "undefined",
  ) {}

  start(fromSeq = 0): void {
    this.lastSeq = fromSeq;
    if (this.useWebSocket) this.connectWs();
    else this.poll();
  }

  stop(): void {
    this.closed = true;
    if (this.ws) this.ws.close();
    if (this.timer) clearTimeout(this.timer);
  }

  private deliver(event: SessionEvent): void {
    if (event.seq <= this.lastSeq) return; // duplicate after reconnect
    this.lastSeq = event.seq;
    this.callbacks.onEvent(event);
  }

  private connectWs(): void {
    const wsBase = this.base.replace(/^http/, "ws");
    this.callbacks.onStatus?.("connecting");
    const ws = new WebSocket(
      `${wsBase}/sessions/${this.sessionId}/events?from_seq=${this.lastSeq}`);
    this.ws = ws;
    ws.onopen = () => this.callbacks.onStatus?.("live");
    ws.onmessage = (msg) => {
      const data = JSON.parse(msg.data as string);
      if (typeof data.seq === "number") this.deliver(data as SessionEvent);
    };
    ws.onclose = () => {
      if (this.closed) return;
      this.callbacks.onStatus?.("stale");
      this.timer = setTimeout(() => this.connectWs(), 1000);
    };
    ws.onerror = () => ws.close();
  }

  private poll(): void {
    if (this.closed) return;
    fetch(`${this.base}/sessions/${this.sessionId}/events?from_seq=${this.lastSeq}`)
      .then((r) => r.json())
      .then((page: { events: SessionEvent[] }) => {
        this.callbacks.onStatus?.("live");
        for (const event of page.events) this.deliver(event);
      })
      .catch(() => this.callbacks.onStatus?.("stale"))
      .finally(() => {
        this.timer = setTimeout(() => this.poll(), this.pollMs);
      });
  }
}

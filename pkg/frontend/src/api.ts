import type { Quad } from "./quad.js";
import { parseQuad } from "./quad.js";

export interface SessionMeta {
  session_id: string;
  seq: number;
  quad: Quad | null;
  mode: string;
  timestamp_ms: number;
  staleness_ms: number;
  candidate: Quad | null;
  locked: Quad | null;
}

export interface SessionInfo {
  session_id: string;
  seq: number;
  mode: string;
}

export type ControlEvent =
  | { type: "tap"; x: number; y: number }
  | { type: "lock" }
  | { type: "unlock" }
  | { type: "relock_previous" }
  | { type: "mode"; kind: string };

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async sessions(): Promise<SessionInfo[]> {
    const resp = await fetch(`${this.baseUrl}/sessions`);
    if (!resp.ok) throw new Error(`sessions: HTTP ${resp.status}`);
    return (await resp.json()) as SessionInfo[];
  }

  async meta(sessionId: string): Promise<SessionMeta> {
    const resp = await fetch(`${this.baseUrl}/view/${sessionId}/meta`);
    if (!resp.ok) throw new Error(`meta: HTTP ${resp.status}`);
    const raw = (await resp.json()) as Record<string, unknown>;
    return {
      session_id: String(raw.session_id),
      seq: Number(raw.seq),
      quad: parseQuad(raw.quad),
      mode: String(raw.mode),
      timestamp_ms: Number(raw.timestamp_ms),
      staleness_ms: Number(raw.staleness_ms),
      candidate: parseQuad(raw.candidate),
      locked: parseQuad(raw.locked),
    };
  }

  async sendControl(sessionId: string, event: ControlEvent): Promise<void> {
    const resp = await fetch(`${this.baseUrl}/control/${sessionId}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(event),
    });
    if (!resp.ok) throw new Error(`control: HTTP ${resp.status}`);
  }

  previewUrl(sessionId: string, seq?: number): string {
    const bust = seq ?? Date.now();
    return `${this.baseUrl}/view/${sessionId}/preview.jpg?t=${bust}`;
  }

  latestUrl(sessionId: string, seq?: number): string {
    const bust = seq ?? Date.now();
    return `${this.baseUrl}/view/${sessionId}/latest.jpg?t=${bust}`;
  }
}

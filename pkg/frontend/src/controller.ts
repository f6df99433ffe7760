import { ApiClient, ControlEvent, SessionMeta } from "./api.js";
import type { GestureConfig } from "./gestures.js";
import { dragEndToControl, tapToControl } from "./gestures.js";
import type { Letterbox, Size } from "./transform.js";
import { letterbox } from "./transform.js";

export interface ControllerOptions {
  pollIntervalMs?: number;
  config?: GestureConfig;
}

/**
 * One session's UI state: polls meta, exposes the current view, and turns
 * user gestures into control messages. All state changes happen in poll()
 * or in the gesture methods (single writer).
 */
export class SessionController {
  readonly pollIntervalMs: number;
  config: GestureConfig;
  meta: SessionMeta | null = null;
  frame: Size = { width: 640, height: 480 };
  display: Size = { width: 640, height: 480 };
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    readonly api: ApiClient,
    readonly sessionId: string,
    options: ControllerOptions = {},
  ) {
    this.pollIntervalMs = options.pollIntervalMs ?? 250;
    this.config = options.config ?? { centerTapLock: false };
  }

  get transform(): Letterbox {
    return letterbox(this.frame, this.display);
  }

  setFrameSize(width: number, height: number): void {
    if (width > 0 && height > 0) this.frame = { width, height };
  }

  setDisplaySize(width: number, height: number): void {
    if (width > 0 && height > 0) this.display = { width, height };
  }

  async poll(): Promise<SessionMeta> {
    this.meta = await this.api.meta(this.sessionId);
    return this.meta;
  }

  start(onUpdate: (meta: SessionMeta) => void, onError?: (err: unknown) => void): void {
    this.stop();
    const tick = () =>
      this.poll().then(onUpdate, (err) => onError?.(err));
    tick();
    this.timer = setInterval(tick, this.pollIntervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private async send(event: ControlEvent | null): Promise<ControlEvent | null> {
    if (event !== null) await this.api.sendControl(this.sessionId, event);
    return event;
  }

  /** Click/tap on the preview at display coordinates. */
  tap(displayX: number, displayY: number): Promise<ControlEvent | null> {
    return this.send(
      tapToControl(
        {
          transform: this.transform,
          frame: this.frame,
          candidate: this.meta?.candidate ?? null,
          config: this.config,
        },
        displayX,
        displayY,
      ),
    );
  }

  /** Corner drag release: commits a single tap at the release point. */
  dragEnd(displayX: number, displayY: number): Promise<ControlEvent | null> {
    return this.send(
      dragEndToControl(
        {
          transform: this.transform,
          frame: this.frame,
          candidate: this.meta?.candidate ?? null,
          config: this.config,
        },
        displayX,
        displayY,
      ),
    );
  }

  lock(): Promise<ControlEvent | null> {
    return this.send({ type: "lock" });
  }

  unlock(): Promise<ControlEvent | null> {
    return this.send({ type: "unlock" });
  }

  relockPrevious(): Promise<ControlEvent | null> {
    return this.send({ type: "relock_previous" });
  }

  setMode(kind: string): Promise<ControlEvent | null> {
    return this.send({ type: "mode", kind });
  }

  previewUrl(): string {
    return this.api.previewUrl(this.sessionId, this.meta?.seq);
  }

  latestUrl(): string {
    return this.api.latestUrl(this.sessionId, this.meta?.seq);
  }
}

/**
 * Session client: owns the WebSocket, an inbound message queue drained on the
 * render loop, outbound throttling, and the mode / intervention state
 * machine. The displayed mode changes only when the server acknowledges it.
 */

import { MAX_SEND_HZ, Throttle } from "./input.js";
import {
  type ClientMessage,
  commandMessage,
  feedbackMessage,
  type Mode,
  parseServerMessage,
  type ServerMessage,
  type StateMessage,
} from "./protocol.js";

/** The subset of the WebSocket API the client uses; `ws` and the browser
 * implementation both satisfy it. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
}

export type InterventionPhase = "idle" | "marked" | "begun" | "active";

export interface ClientEvents {
  onState?: (msg: StateMessage) => void;
  onError?: (reason: string) => void;
  onModeChange?: (mode: Mode) => void;
}

export class SessionClient {
  /** Server-acknowledged mode. */
  mode: Mode;
  /** Mode requested but not yet acknowledged. */
  private pendingMode: Mode | null = null;
  phase: InterventionPhase = "idle";
  markedTick: number | null = null;
  latestState: StateMessage | null = null;
  lastStateAtMs = 0;
  connection: "connecting" | "open" | "closed" = "connecting";

  private readonly inbox: ServerMessage[] = [];
  private readonly throttle = new Throttle(MAX_SEND_HZ);
  private readonly now: () => number;

  constructor(
    private readonly socket: SocketLike,
    initialMode: Mode,
    private readonly events: ClientEvents = {},
    now: () => number = () => Date.now(),
  ) {
    this.mode = initialMode;
    this.now = now;
    socket.onopen = () => {
      this.connection = "open";
    };
    socket.onclose = () => {
      this.connection = "closed";
    };
    socket.onmessage = (ev) => {
      try {
        this.inbox.push(parseServerMessage(String(ev.data)));
      } catch (err) {
        this.events.onError?.(`bad frame from server: ${(err as Error).message}`);
      }
    };
  }

  /** Drain queued server messages; called once per render frame so all
   * mutation happens on the same logical loop. */
  poll(): void {
    let msg: ServerMessage | undefined;
    while ((msg = this.inbox.shift())) {
      this.dispatch(msg);
    }
  }

  private dispatch(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        this.mode = msg.mode;
        this.connection = "open";
        break;
      case "state":
        this.latestState = msg;
        this.lastStateAtMs = this.now();
        this.events.onState?.(msg);
        break;
      case "ack":
        this.applyAck(msg.of, msg.tick);
        break;
      case "error":
        // A rejected request leaves client state untouched.
        if (this.pendingMode !== null) this.pendingMode = null;
        this.events.onError?.(msg.reason);
        break;
    }
  }

  private applyAck(of: string, tick: number): void {
    switch (of) {
      case "set_mode":
        if (this.pendingMode !== null) {
          this.mode = this.pendingMode;
          this.pendingMode = null;
          this.phase = "idle";
          this.markedTick = null;
          this.events.onModeChange?.(this.mode);
        }
        break;
      case "mark":
        this.phase = "marked";
        this.markedTick = tick;
        break;
      case "begin_intervention":
        this.phase = "begun";
        break;
      case "rewind":
        this.phase = "active";
        break;
      case "end_intervention":
        this.phase = "idle";
        this.markedTick = null;
        break;
    }
  }

  // -- outbound ------------------------------------------------------------

  private send(msg: ClientMessage): void {
    this.socket.send(JSON.stringify(msg));
  }

  requestMode(mode: Mode): void {
    this.pendingMode = mode;
    this.send({ type: "set_mode", mode });
  }

  /** Teleoperation command; rate-limited to MAX_SEND_HZ. Returns whether the
   * message actually went out. */
  sendCommand(v: number, omega: number): boolean {
    if (!(this.mode === "demonstrate" || (this.mode === "intervene" && this.phase === "active"))) {
      return false;
    }
    if (!this.throttle.allow(this.now())) return false;
    this.send(commandMessage(v, omega));
    return true;
  }

  sendFeedback(e: number): void {
    if (this.mode !== "evaluate") {
      this.events.onError?.("feedback buttons are disabled outside evaluate mode");
      return;
    }
    this.send(feedbackMessage(e));
  }

  thumbsUp(): void {
    this.sendFeedback(1);
  }

  thumbsDown(): void {
    this.sendFeedback(0);
  }

  // Intervention flow: mark -> begin(kind) -> rewind(marked tick) -> commands
  // -> end. The server enforces the ordering; the client tracks phase from
  // acks so the UI can enable the right button.

  mark(): void {
    this.send({ type: "mark" });
  }

  beginIntervention(kind: "A" | "B"): void {
    this.send({ type: "begin_intervention", kind });
  }

  rewindToMark(): void {
    if (this.markedTick === null) {
      this.events.onError?.("no marked tick to rewind to");
      return;
    }
    this.send({ type: "rewind", tick: this.markedTick });
  }

  endIntervention(): void {
    this.send({ type: "end_intervention" });
  }

  close(): void {
    this.socket.close();
  }
}

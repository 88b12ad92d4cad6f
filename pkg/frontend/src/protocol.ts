/**
 * Wire protocol for the interaction service: typed JSON messages over a
 * WebSocket plus the three HTTP endpoints. This module owns every byte that
 * crosses the wire; the rest of the UI deals only in parsed types.
 */

export const MODES = ["watch", "demonstrate", "intervene", "evaluate"] as const;
export type Mode = (typeof MODES)[number];

export const V_LIMIT = 2.0;
export const OMEGA_LIMIT = 3.14;

// ---------------------------------------------------------------------------
// Client -> server
// ---------------------------------------------------------------------------

export type ClientMessage =
  | { type: "hello" }
  | { type: "set_mode"; mode: Mode }
  | { type: "command"; v: number; omega: number }
  | { type: "feedback"; e: number }
  | { type: "mark" }
  | { type: "begin_intervention"; kind: "A" | "B" }
  | { type: "rewind"; tick: number }
  | { type: "end_intervention" };

export function commandMessage(v: number, omega: number): ClientMessage {
  return {
    type: "command",
    v: clamp(v, 0, V_LIMIT),
    omega: clamp(omega, -OMEGA_LIMIT, OMEGA_LIMIT),
  };
}

export function feedbackMessage(e: number): ClientMessage {
  if (!(e >= 0 && e <= 1)) {
    throw new Error(`feedback must lie in [0, 1], got ${e}`);
  }
  return { type: "feedback", e };
}

export function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

// ---------------------------------------------------------------------------
// Server -> client
// ---------------------------------------------------------------------------

export interface HelloMessage {
  type: "hello";
  session: string;
  mode: Mode;
  tick: number;
  tick_interval: number;
}

export interface StateMessage {
  type: "state";
  tick: number;
  pose: [number, number, number];
  scan: number[]; // 180 beams, full circle starting at the heading
  path: [number, number][];
  theta: Record<string, number>;
  context: number;
  recovery: boolean;
  done: "goal" | "collision" | null;
}

export interface AckMessage {
  type: "ack";
  of: string;
  tick: number;
}

export interface ErrorMessage {
  type: "error";
  reason: string;
}

export type ServerMessage = HelloMessage | StateMessage | AckMessage | ErrorMessage;

/** Parse and validate one inbound frame; throws on anything malformed. */
export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new Error("not JSON");
  }
  if (typeof data !== "object" || data === null || typeof (data as { type?: unknown }).type !== "string") {
    throw new Error("missing message type");
  }
  const msg = data as Record<string, unknown>;
  switch (msg.type) {
    case "hello":
      expect(typeof msg.session === "string", "hello.session");
      expect(MODES.includes(msg.mode as Mode), "hello.mode");
      expect(typeof msg.tick === "number", "hello.tick");
      expect(typeof msg.tick_interval === "number", "hello.tick_interval");
      return msg as unknown as HelloMessage;
    case "state":
      expect(typeof msg.tick === "number", "state.tick");
      expect(Array.isArray(msg.pose) && msg.pose.length === 3, "state.pose");
      expect(Array.isArray(msg.scan), "state.scan");
      expect(Array.isArray(msg.path), "state.path");
      expect(typeof msg.theta === "object" && msg.theta !== null, "state.theta");
      expect(typeof msg.context === "number", "state.context");
      expect(typeof msg.recovery === "boolean", "state.recovery");
      return msg as unknown as StateMessage;
    case "ack":
      expect(typeof msg.of === "string", "ack.of");
      return msg as unknown as AckMessage;
    case "error":
      expect(typeof msg.reason === "string", "error.reason");
      return msg as unknown as ErrorMessage;
    default:
      throw new Error(`unknown server message type ${String(msg.type)}`);
  }
}

function expect(cond: boolean, what: string): void {
  if (!cond) throw new Error(`malformed ${what}`);
}

// ---------------------------------------------------------------------------
// HTTP endpoints
// ---------------------------------------------------------------------------

export interface SessionInfo {
  session: string;
  mode: Mode;
  env: {
    size: [number, number];
    resolution: number;
    start: [number, number, number];
    goal: [number, number];
    seed: number;
  };
}

export interface EnvJson {
  bitmap: string; // base64-packed occupancy bits, row-major
  shape: [number, number];
  resolution: number;
  start: [number, number, number];
  goal: [number, number];
  seed: number;
  difficulty: number;
}

export interface CreateSessionBody {
  mode: Mode;
  policy?: string;
  env?: { course?: string; seed?: number; difficulty?: number };
}

type FetchLike = (url: string, init?: { method?: string; headers?: Record<string, string>; body?: string }) => Promise<{
  ok: boolean;
  status: number;
  text(): Promise<string>;
  json(): Promise<unknown>;
}>;

export class HttpApi {
  constructor(
    private readonly base: string,
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  async createSession(body: CreateSessionBody): Promise<SessionInfo> {
    const res = await this.fetchImpl(`${this.base}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new Error(`create session failed: HTTP ${res.status} ${await res.text()}`);
    return (await res.json()) as SessionInfo;
  }

  async recording(sid: string): Promise<string> {
    const res = await this.fetchImpl(`${this.base}/sessions/${sid}/recording`);
    if (!res.ok) throw new Error(`recording fetch failed: HTTP ${res.status}`);
    return res.text();
  }

  async env(sid: string): Promise<EnvJson> {
    const res = await this.fetchImpl(`${this.base}/sessions/${sid}/env`);
    if (!res.ok) throw new Error(`env fetch failed: HTTP ${res.status}`);
    return (await res.json()) as EnvJson;
  }

  async envs(): Promise<{ courses: string[] }> {
    const res = await this.fetchImpl(`${this.base}/envs`);
    if (!res.ok) throw new Error(`envs fetch failed: HTTP ${res.status}`);
    return (await res.json()) as { courses: string[] };
  }
}

/** Unpack the server's base64 bit-packed occupancy grid into a row-major
 * boolean array of `shape` = [rows, cols]. */
export function decodeEnvBitmap(env: EnvJson): { grid: Uint8Array; rows: number; cols: number } {
  const [rows, cols] = env.shape;
  const packed = base64ToBytes(env.bitmap);
  const grid = new Uint8Array(rows * cols);
  for (let i = 0; i < rows * cols; i++) {
    grid[i] = (packed[i >> 3] >> (7 - (i & 7))) & 1;
  }
  return { grid, rows, cols };
}

function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return Uint8Array.from(Buffer.from(b64, "base64"));
}

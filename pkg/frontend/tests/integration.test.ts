/**
 * Round-trip against the real interaction service: spawn the Python server,
 * drive sessions through the same client modules the browser uses, export the
 * recordings, and verify them with the reference implementation.
 */

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { SessionClient, type SocketLike } from "../src/client.js";
import { HttpApi, type Mode, type StateMessage } from "../src/protocol.js";

const execFileP = promisify(execFile);
const HERE = path.dirname(fileURLToPath(import.meta.url));
const REPO = path.resolve(HERE, "../..");
const VERIFY = path.join(HERE, "verify_replay.py");
const PORT = 18000 + (process.pid % 2000);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
const tmp = mkdtempSync(path.join(tmpdir(), "teleop-"));

async function until(cond: () => boolean, ms: number, what: string): Promise<void> {
  const deadline = Date.now() + ms;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 10));
  }
}

interface Driver {
  client: SessionClient;
  errors: string[];
  states: StateMessage[];
  ws: WebSocket;
  stop(): void;
}

async function connect(sid: string, mode: Mode): Promise<Driver> {
  const ws = new WebSocket(`ws://127.0.0.1:${PORT}/sessions/${sid}/ws`);
  const errors: string[] = [];
  const states: StateMessage[] = [];
  const client = new SessionClient(ws as unknown as SocketLike, mode, {
    onError: (r) => errors.push(r),
    onState: (s) => states.push(s),
  });
  const pump = setInterval(() => client.poll(), 5);
  await until(() => client.connection === "open", 10_000, "websocket open");
  return {
    client,
    errors,
    states,
    ws,
    stop() {
      clearInterval(pump);
      client.close();
    },
  };
}

async function verify(recording: string, name: string, check: string): Promise<string> {
  const file = path.join(tmp, name);
  writeFileSync(file, recording);
  const { stdout } = await execFileP("python3", [VERIFY, file, check], { cwd: REPO });
  return stdout.trim();
}

beforeAll(async () => {
  server = spawn("python3", ["-m", "navtune.cli", "serve", "--port", String(PORT), "--tick-interval", "0.01"], {
    cwd: REPO,
    stdio: "ignore",
  });
  const api = new HttpApi(BASE);
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      await api.envs();
      return;
    } catch {
      if (Date.now() > deadline) throw new Error("server never came up");
      await new Promise((r) => setTimeout(r, 200));
    }
  }
}, 70_000);

afterAll(() => {
  server?.kill();
});

describe("UI round-trip against the live service", () => {
  it("demonstrates 200 ticks and the exported recording replays bit-identically", async () => {
    const api = new HttpApi(BASE);
    const info = await api.createSession({ mode: "demonstrate", env: { course: "open" } });
    expect(info.mode).toBe("demonstrate");
    const d = await connect(info.session, "demonstrate");
    try {
      // Straight run, then a gentle interior circle so 200 ticks pass without
      // reaching the goal or a wall.
      let sentCircle = false;
      const feeder = setInterval(() => {
        const tick = d.states.at(-1)?.tick ?? 0;
        if (tick < 50) {
          d.client.sendCommand(0.3, 0);
        } else if (!sentCircle || tick % 20 === 0) {
          d.client.sendCommand(0.3, 0.6);
          sentCircle = true;
        }
      }, 50);
      await until(() => (d.states.at(-1)?.tick ?? 0) >= 205, 60_000, "205 ticks");
      clearInterval(feeder);
      expect(d.states.every((s) => s.done === null)).toBe(true);
      expect(d.states.every((s) => s.scan.length === 180)).toBe(true);
    } finally {
      d.stop();
    }
    const recording = await api.recording(info.session);
    const out = await verify(recording, "demo.jsonl", "replay");
    expect(out).toMatch(/^REPLAY_OK \d+$/);
    expect(Number(out.split(" ")[1])).toBeGreaterThanOrEqual(200);
  }, 90_000);

  it("binds feedback clicks to tick-5 states", async () => {
    const api = new HttpApi(BASE);
    const info = await api.createSession({ mode: "evaluate", policy: "static", env: { course: "open" } });
    const d = await connect(info.session, "evaluate");
    try {
      await until(() => (d.states.at(-1)?.tick ?? 0) >= 10, 30_000, "10 ticks");
      d.client.thumbsUp();
      d.client.thumbsDown();
      await until(() => (d.states.at(-1)?.tick ?? 0) >= 30, 30_000, "30 ticks");
      expect(d.errors).toEqual([]);
    } finally {
      d.stop();
    }
    const out = await verify(await api.recording(info.session), "eval.jsonl", "feedback");
    expect(out).toBe("FEEDBACK_OK 2");
  }, 60_000);

  it("enforces the mark -> begin -> rewind -> end intervention flow", async () => {
    const api = new HttpApi(BASE);
    const info = await api.createSession({ mode: "intervene", policy: "static", env: { course: "open" } });
    const d = await connect(info.session, "intervene");
    try {
      await until(() => (d.states.at(-1)?.tick ?? 0) >= 10, 30_000, "10 ticks");

      // Out of order: begin before mark is rejected by the server.
      d.client.beginIntervention("A");
      await until(() => d.errors.length >= 1, 10_000, "ordering rejection");
      expect(d.errors[0]).toMatch(/mark/);

      d.client.mark();
      await until(() => d.client.phase === "marked", 10_000, "mark ack");
      const marked = d.client.markedTick!;

      d.client.beginIntervention("A");
      await until(() => d.client.phase === "begun", 10_000, "begin ack");

      // Wrong rewind target is rejected; the flow survives.
      d.ws.send(JSON.stringify({ type: "rewind", tick: marked + 1 }));
      await until(() => d.errors.some((e) => /marked tick/.test(e)), 10_000, "wrong-rewind rejection");

      d.client.rewindToMark();
      await until(() => d.client.phase === "active", 10_000, "rewind ack");

      const teleop = setInterval(() => d.client.sendCommand(0.3, 0.4), 50);
      await until(() => (d.states.at(-1)?.tick ?? 0) >= marked + 12, 30_000, "teleop ticks");
      clearInterval(teleop);

      d.client.endIntervention();
      await until(() => d.client.phase === "idle", 10_000, "end ack");
    } finally {
      d.stop();
    }
    const out = await verify(await api.recording(info.session), "intervene.jsonl", "interventions");
    expect(out).toMatch(/^INTERVENTIONS_OK \d+$/);
  }, 60_000);
});

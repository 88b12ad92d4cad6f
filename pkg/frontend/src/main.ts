/**
 * Browser entry point: wires the canvas, keyboard, buttons, and the session
 * client into a single requestAnimationFrame loop. All state mutation happens
 * on that loop; network receipt only enqueues.
 */

import { SessionClient } from "./client.js";
import { COMMAND_HZ, inputToCommand, Ticker } from "./input.js";
import { HttpApi, type Mode } from "./protocol.js";
import { initialViewState, renderFrame, type ViewState } from "./view.js";

const KEYS = new Set(["ArrowUp", "ArrowDown", "ArrowLeft", "ArrowRight"]);

export async function start(root: Document = document): Promise<void> {
  const base = `${location.protocol}//${location.host}`;
  const api = new HttpApi(base);
  const canvas = root.getElementById("world") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const statusEl = root.getElementById("status")!;

  const params = new URLSearchParams(location.search);
  const mode = (params.get("mode") ?? "demonstrate") as Mode;
  const course = params.get("course") ?? "open";
  const policy = params.get("policy") ?? (mode === "demonstrate" ? undefined : "static");

  const info = await api.createSession({ mode, policy, env: { course } });
  const view: ViewState = initialViewState();
  view.env = await api.env(info.session);
  view.mode = info.mode;

  const ws = new WebSocket(`${base.replace(/^http/, "ws")}/sessions/${info.session}/ws`);
  const client = new SessionClient(ws as never, info.mode, {
    onError: (reason) => {
      statusEl.textContent = reason;
    },
    onModeChange: (m) => {
      view.mode = m;
    },
  });

  const held = new Set<string>();
  root.addEventListener("keydown", (e) => {
    if (KEYS.has(e.key)) {
      held.add(e.key);
      e.preventDefault();
    }
  });
  root.addEventListener("keyup", (e) => held.delete(e.key));
  view.device = { keys: held };

  const bind = (id: string, fn: () => void) => root.getElementById(id)?.addEventListener("click", fn);
  bind("thumbs-up", () => client.thumbsUp());
  bind("thumbs-down", () => client.thumbsDown());
  bind("mark", () => client.mark());
  bind("begin-a", () => client.beginIntervention("A"));
  bind("begin-b", () => client.beginIntervention("B"));
  bind("rewind", () => client.rewindToMark());
  bind("end", () => client.endIntervention());
  const slider = root.getElementById("feedback-slider") as HTMLInputElement | null;
  bind("feedback-send", () => client.sendFeedback(Number(slider?.value ?? 0.5)));
  for (const m of ["watch", "demonstrate", "intervene", "evaluate"] as const) {
    bind(`mode-${m}`, () => client.requestMode(m));
  }

  const commandTicker = new Ticker(COMMAND_HZ, () => {
    const cmd = inputToCommand(view.device);
    client.sendCommand(cmd.v, cmd.omega);
  });

  const frame = (nowMs: number) => {
    client.poll();
    view.latest = client.latestState;
    view.lastStateAtMs = client.lastStateAtMs;
    view.connection = client.connection;
    view.mode = client.mode;
    commandTicker.advance(nowMs);
    renderFrame(ctx, view, nowMs);
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.addEventListener("DOMContentLoaded", () => void start());
}

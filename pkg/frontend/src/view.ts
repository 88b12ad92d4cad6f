/**
 * Canvas rendering. Everything drawn originates from a server message: the
 * occupancy grid comes from the env endpoint, the robot/scan/path/labels from
 * the latest state broadcast. The renderer takes a minimal 2D-context
 * interface so tests can substitute a recording fake for a real canvas.
 */

import type { EnvJson, Mode, StateMessage } from "./protocol.js";
import { decodeEnvBitmap } from "./protocol.js";

/** How long a state may go unrefreshed before the staleness banner shows. */
export const STALE_AFTER_MS = 1000;

const ROBOT_RADIUS_M = 0.21;

export interface ViewState {
  latest: StateMessage | null;
  /** Wall-clock ms when `latest` arrived. */
  lastStateAtMs: number;
  connection: "connecting" | "open" | "closed";
  /** Server-acknowledged mode; the UI never renders an unconfirmed mode. */
  mode: Mode;
  env: EnvJson | null;
  device: { keys: ReadonlySet<string>; axes?: { forward: number; turn: number } };
}

export function initialViewState(): ViewState {
  return {
    latest: null,
    lastStateAtMs: 0,
    connection: "connecting",
    mode: "watch",
    env: null,
    device: { keys: new Set() },
  };
}

/** The subset of CanvasRenderingContext2D the renderer needs. */
export interface Draw2D {
  canvas: { width: number; height: number };
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export function renderFrame(ctx: Draw2D, view: ViewState, nowMs: number): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, width, height);

  if (!view.latest || !view.env) {
    ctx.fillStyle = "#8899aa";
    ctx.font = "16px sans-serif";
    ctx.fillText("waiting for world…", width / 2 - 70, height / 2);
    return;
  }

  const env = view.env;
  const { grid, rows, cols } = decodeEnvBitmap(env);
  const worldW = cols * env.resolution;
  const worldH = rows * env.resolution;
  const scale = Math.min(width / worldW, height / worldH);
  // World (x, y) with y up -> canvas pixels with y down.
  const px = (x: number) => x * scale;
  const py = (y: number) => height - y * scale;

  ctx.fillStyle = "#3d4654";
  const cell = env.resolution * scale;
  for (let i = 0; i < rows; i++) {
    for (let j = 0; j < cols; j++) {
      if (grid[i * cols + j]) {
        ctx.fillRect(px(j * env.resolution), py((i + 1) * env.resolution), cell + 0.5, cell + 0.5);
      }
    }
  }

  const [gx, gy] = env.goal;
  ctx.strokeStyle = "#44dd88";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(px(gx), py(gy), 0.3 * scale, 0, 2 * Math.PI);
  ctx.stroke();

  const st = view.latest;
  const [x, y, heading] = st.pose;

  if (st.path.length > 1) {
    ctx.strokeStyle = "#5577cc";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(px(st.path[0][0]), py(st.path[0][1]));
    for (const [wx, wy] of st.path.slice(1)) ctx.lineTo(px(wx), py(wy));
    ctx.stroke();
  }

  ctx.strokeStyle = "rgba(220, 120, 80, 0.45)";
  ctx.lineWidth = 1;
  const n = st.scan.length;
  for (let k = 0; k < n; k++) {
    const a = heading + (2 * Math.PI * k) / n;
    ctx.beginPath();
    ctx.moveTo(px(x), py(y));
    ctx.lineTo(px(x + st.scan[k] * Math.cos(a)), py(y + st.scan[k] * Math.sin(a)));
    ctx.stroke();
  }

  ctx.fillStyle = st.done === "collision" ? "#ee4444" : "#eecc44";
  ctx.beginPath();
  ctx.arc(px(x), py(y), ROBOT_RADIUS_M * scale, 0, 2 * Math.PI);
  ctx.fill();
  ctx.strokeStyle = "#10141a";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(px(x), py(y));
  ctx.lineTo(px(x + ROBOT_RADIUS_M * 1.8 * Math.cos(heading)), py(y + ROBOT_RADIUS_M * 1.8 * Math.sin(heading)));
  ctx.stroke();

  ctx.fillStyle = "#d0d8e0";
  ctx.font = "13px monospace";
  ctx.fillText(`mode: ${view.mode}`, 8, 16);
  ctx.fillText(`tick: ${st.tick}  context: ${st.context}`, 8, 32);
  const theta = Object.entries(st.theta)
    .map(([k, v]) => `${k}=${typeof v === "number" ? +v.toFixed(2) : v}`)
    .join(" ");
  ctx.fillText(theta, 8, 48);

  if (st.recovery) {
    ctx.fillStyle = "#ff8844";
    ctx.fillText("RECOVERY", 8, 64);
  }
  if (st.done) {
    ctx.fillStyle = st.done === "goal" ? "#44dd88" : "#ee4444";
    ctx.fillText(st.done.toUpperCase(), 8, 80);
  }

  if (nowMs - view.lastStateAtMs > STALE_AFTER_MS) {
    ctx.fillStyle = "#cc3333";
    ctx.fillRect(0, 0, width, 24);
    ctx.fillStyle = "#ffffff";
    ctx.fillText("STALE — no state from server", width / 2 - 90, 16);
  }
}

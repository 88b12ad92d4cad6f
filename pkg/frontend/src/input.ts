/**
 * Device input to velocity commands. Keyboard is the baseline (arrow keys);
 * analog gamepad axes map linearly onto the same command space. Commands are
 * produced on a fixed 10 Hz cadence and outbound traffic is throttled to at
 * most 20 Hz no matter how fast callers fire.
 */

import { clamp, OMEGA_LIMIT, V_LIMIT } from "./protocol.js";

/** Linear speed sent while the forward arrow is held. */
export const V_MAX_UI = 1.0;
/** Turn rate sent while a turn arrow is held. */
export const OMEGA_MAX_UI = 1.57;
/** Command production cadence. */
export const COMMAND_HZ = 10;
/** Hard ceiling on outbound message rate. */
export const MAX_SEND_HZ = 20;

export interface DeviceState {
  /** Currently held keys ("ArrowUp", "ArrowDown", "ArrowLeft", "ArrowRight"). */
  keys: ReadonlySet<string>;
  /** Optional analog axes: forward in [0, 1], turn in [-1, 1] (+ = left/ccw). */
  axes?: { forward: number; turn: number };
}

export interface Command {
  v: number;
  omega: number;
}

/** Map the current device state to a (v, omega) pair within the command box
 * [0, 2.0] x [-3.14, 3.14]. Analog axes win over keys when present. */
export function inputToCommand(device: DeviceState): Command {
  if (device.axes) {
    return {
      v: clamp(device.axes.forward * V_LIMIT, 0, V_LIMIT),
      omega: clamp(device.axes.turn * OMEGA_LIMIT, -OMEGA_LIMIT, OMEGA_LIMIT),
    };
  }
  let v = 0;
  if (device.keys.has("ArrowUp")) v += V_MAX_UI;
  if (device.keys.has("ArrowDown")) v -= V_MAX_UI;
  let omega = 0;
  if (device.keys.has("ArrowLeft")) omega += OMEGA_MAX_UI;
  if (device.keys.has("ArrowRight")) omega -= OMEGA_MAX_UI;
  return { v: clamp(v, 0, V_LIMIT), omega: clamp(omega, -OMEGA_LIMIT, OMEGA_LIMIT) };
}

/** Rate limiter: lets a call through only if at least 1/maxHz seconds have
 * elapsed since the last one that passed. */
export class Throttle {
  private lastMs = -Infinity;

  constructor(private readonly maxHz: number = MAX_SEND_HZ) {}

  allow(nowMs: number): boolean {
    if (nowMs - this.lastMs >= 1000 / this.maxHz - 1e-9) {
      this.lastMs = nowMs;
      return true;
    }
    return false;
  }
}

/** Fixed-cadence scheduler: fires the callback every 1/hz seconds of supplied
 * wall time. Time is injected so tests and the browser loop drive it alike. */
export class Ticker {
  private nextMs: number | null = null;

  constructor(
    private readonly hz: number,
    private readonly fn: () => void,
  ) {}

  advance(nowMs: number): void {
    if (this.nextMs === null) this.nextMs = nowMs;
    while (nowMs >= this.nextMs) {
      this.fn();
      this.nextMs += 1000 / this.hz;
    }
  }
}

import { describe, expect, it } from "vitest";

import { inputToCommand, MAX_SEND_HZ, Throttle, Ticker, V_MAX_UI } from "../src/input.js";

const keys = (...k: string[]) => ({ keys: new Set(k) });

describe("inputToCommand", () => {
  it("maps no keys to (0, 0)", () => {
    expect(inputToCommand(keys())).toEqual({ v: 0, omega: 0 });
  });

  it("maps the forward key to (V_MAX_UI, 0)", () => {
    expect(inputToCommand(keys("ArrowUp"))).toEqual({ v: V_MAX_UI, omega: 0 });
  });

  it("never commands reverse or exceeds the box", () => {
    expect(inputToCommand(keys("ArrowDown")).v).toBe(0);
    const cmd = inputToCommand({ keys: new Set(), axes: { forward: 3, turn: -5 } });
    expect(cmd.v).toBe(2.0);
    expect(cmd.omega).toBe(-3.14);
  });

  it("maps analog 0.5 forward to v = 1.0 (linear)", () => {
    expect(inputToCommand({ keys: new Set(), axes: { forward: 0.5, turn: 0 } }).v).toBeCloseTo(1.0, 12);
  });

  it("turn keys produce pure rotation", () => {
    expect(inputToCommand(keys("ArrowLeft")).omega).toBeGreaterThan(0);
    expect(inputToCommand(keys("ArrowRight")).omega).toBeLessThan(0);
  });
});

describe("Throttle", () => {
  it("caps throughput at MAX_SEND_HZ regardless of call rate", () => {
    const throttle = new Throttle(MAX_SEND_HZ);
    let sent = 0;
    // 1000 attempts over exactly one second.
    for (let i = 0; i < 1000; i++) {
      if (throttle.allow(i)) sent++;
    }
    expect(sent).toBeLessThanOrEqual(MAX_SEND_HZ);
    expect(sent).toBeGreaterThanOrEqual(MAX_SEND_HZ - 1);
  });
});

describe("Ticker", () => {
  it("fires at its cadence when advanced with wall time", () => {
    let fired = 0;
    const ticker = new Ticker(10, () => fired++);
    for (let t = 0; t <= 1000; t += 16) ticker.advance(t); // ~60 fps frames
    expect(fired).toBeGreaterThanOrEqual(10);
    expect(fired).toBeLessThanOrEqual(11);
  });

  it("catches up after a long frame without exceeding the average rate", () => {
    let fired = 0;
    const ticker = new Ticker(10, () => fired++);
    ticker.advance(0);
    ticker.advance(500); // one dropped half-second frame
    ticker.advance(1000);
    expect(fired).toBe(11); // t = 0, 100, ..., 1000
  });
});

import { describe, expect, it } from "vitest";

import type { EnvJson, StateMessage } from "../src/protocol.js";
import { type Draw2D, initialViewState, renderFrame, STALE_AFTER_MS, type ViewState } from "../src/view.js";

/** Recording fake for the 2D context: keeps every draw call. */
function fakeCtx(): Draw2D & { calls: [string, ...unknown[]][] } {
  const calls: [string, ...unknown[]][] = [];
  const rec =
    (name: string) =>
    (...args: unknown[]) =>
      void calls.push([name, ...args]);
  return {
    calls,
    canvas: { width: 200, height: 200 },
    fillStyle: "",
    strokeStyle: "",
    lineWidth: 1,
    font: "",
    fillRect: rec("fillRect"),
    strokeRect: rec("strokeRect"),
    beginPath: rec("beginPath"),
    moveTo: rec("moveTo"),
    lineTo: rec("lineTo"),
    arc: rec("arc"),
    stroke: rec("stroke"),
    fill: rec("fill"),
    fillText: rec("fillText"),
  };
}

function tinyEnv(): EnvJson {
  const packed = new Uint8Array(2); // 4x4 all-free grid
  return {
    bitmap: Buffer.from(packed).toString("base64"),
    shape: [4, 4],
    resolution: 0.5,
    start: [1, 0.5, 1.57],
    goal: [1, 1.8],
    seed: 0,
    difficulty: 0.5,
  };
}

function someState(over: Partial<StateMessage> = {}): StateMessage {
  return {
    type: "state",
    tick: 7,
    pose: [1, 1, 0.3],
    scan: Array(180).fill(1.5),
    path: [
      [1, 1],
      [1, 1.8],
    ],
    theta: { max_vel_x: 0.5 },
    context: 2,
    recovery: false,
    done: null,
    ...over,
  };
}

function readyView(over: Partial<ViewState> = {}): ViewState {
  return { ...initialViewState(), env: tinyEnv(), latest: someState(), lastStateAtMs: 1000, ...over };
}

const texts = (ctx: { calls: [string, ...unknown[]][] }) =>
  ctx.calls.filter(([op]) => op === "fillText").map(([, text]) => String(text));

describe("renderFrame", () => {
  it("draws an empty-world placeholder before any state arrives", () => {
    const ctx = fakeCtx();
    renderFrame(ctx, initialViewState(), 0);
    expect(texts(ctx).some((t) => t.includes("waiting"))).toBe(true);
    // Nothing else is fabricated: no robot, no rays.
    expect(ctx.calls.filter(([op]) => op === "arc")).toHaveLength(0);
  });

  it("draws robot, 180 scan rays, path, and the verbatim context label", () => {
    const ctx = fakeCtx();
    renderFrame(ctx, readyView(), 1000);
    expect(ctx.calls.filter(([op]) => op === "arc").length).toBeGreaterThanOrEqual(2); // goal + robot
    // one moveTo per scan ray plus path + heading
    expect(ctx.calls.filter(([op]) => op === "moveTo").length).toBeGreaterThanOrEqual(180);
    expect(texts(ctx).some((t) => t === "tick: 7  context: 2")).toBe(true);
  });

  it("shows the recovery indicator exactly when the server says so", () => {
    const ctx = fakeCtx();
    renderFrame(ctx, readyView({ latest: someState({ recovery: true }) }), 1000);
    expect(texts(ctx)).toContain("RECOVERY");
    const ctx2 = fakeCtx();
    renderFrame(ctx2, readyView(), 1000);
    expect(texts(ctx2)).not.toContain("RECOVERY");
  });

  it("raises the staleness banner only after 1 s without state", () => {
    const fresh = fakeCtx();
    renderFrame(fresh, readyView(), 1000 + STALE_AFTER_MS - 1);
    expect(texts(fresh).some((t) => t.includes("STALE"))).toBe(false);
    const stale = fakeCtx();
    renderFrame(stale, readyView(), 1000 + STALE_AFTER_MS + 1);
    expect(texts(stale).some((t) => t.includes("STALE"))).toBe(true);
  });

  it("renders only the server-acknowledged mode", () => {
    const ctx = fakeCtx();
    renderFrame(ctx, readyView({ mode: "evaluate" }), 1000);
    expect(texts(ctx)).toContain("mode: evaluate");
  });
});

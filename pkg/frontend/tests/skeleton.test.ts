import { describe, expect, it } from "vitest";

import { fitTransform, projectFrame } from "../src/skeleton.js";
import { frameAtX, laneSpans, spanRects } from "../src/timeline.js";

const FRAMES = [
  [[0, 0, 0], [1, 2, -1]],
  [[0.5, 0, 0], [1.5, 2, -1]],
];

describe("orthographic projection", () => {
  it("front view maps x,y; side view maps z,y", () => {
    const t = { scale: 1, offsetX: 0, offsetY: 0 };
    const front = projectFrame(FRAMES[0], "front", t);
    expect(front[1]).toEqual({ x: 1, y: -2 }); // canvas y is inverted
    const side = projectFrame(FRAMES[0], "side", t);
    expect(side[1]).toEqual({ x: -1, y: -2 });
  });

  it("fit keeps every joint of every frame inside the canvas", () => {
    const transform = fitTransform(FRAMES, "front", 200, 100, 10);
    for (const frame of FRAMES) {
      for (const p of projectFrame(frame, "front", transform)) {
        expect(p.x).toBeGreaterThanOrEqual(10 - 1e-9);
        expect(p.x).toBeLessThanOrEqual(190 + 1e-9);
        expect(p.y).toBeGreaterThanOrEqual(10 - 1e-9);
        expect(p.y).toBeLessThanOrEqual(90 + 1e-9);
      }
    }
  });

  it("degenerate single-point skeletons do not blow up", () => {
    const transform = fitTransform([[[0, 0, 0]]], "front", 100, 100);
    const [p] = projectFrame([[0, 0, 0]], "front", transform);
    expect(Number.isFinite(p.x)).toBe(true);
    expect(Number.isFinite(p.y)).toBe(true);
  });
});

describe("timeline layout", () => {
  it("separates label and prediction bands", () => {
    const spans = laneSpans(
      [{ classIndex: 0, startFrame: 1, endFrame: 10 }],
      [[0, 1], [0, 1]],
    );
    expect(spans).toContainEqual(
      { classIndex: 0, startFrame: 1, endFrame: 10, kind: "label" },
    );
    expect(spans).toContainEqual(
      { classIndex: 1, startFrame: 1, endFrame: 2, kind: "prediction" },
    );
    const rects = spanRects(spans, 10, 100, 20);
    const label = rects.find((r) => r.kind === "label")!;
    const prediction = rects.find((r) => r.kind === "prediction")!;
    expect(label.y).not.toBe(prediction.y);
  });

  it("maps clicks back to 1-based frames", () => {
    expect(frameAtX(0, 100, 200)).toBe(1);
    expect(frameAtX(199, 100, 200)).toBe(100);
    expect(frameAtX(100, 100, 200)).toBe(51);
  });
});

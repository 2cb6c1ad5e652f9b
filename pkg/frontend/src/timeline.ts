// Layout of label/prediction lanes on the timeline strip. Each class gets
// one lane; human labels and model predictions render as separate stacked
// bands inside it so they are never visually conflated.

import { TimelineSelection, matrixToIntervals } from "./intervals.js";

export interface LaneSpan {
  classIndex: number;
  startFrame: number;
  endFrame: number;
  kind: "label" | "prediction";
}

export function laneSpans(
  selections: TimelineSelection[],
  predictions: number[][] | null,
): LaneSpan[] {
  const spans: LaneSpan[] = selections.map((sel) => ({
    classIndex: sel.classIndex,
    startFrame: sel.startFrame,
    endFrame: sel.endFrame,
    kind: "label" as const,
  }));
  if (predictions) {
    for (const sel of matrixToIntervals(predictions)) {
      spans.push({
        classIndex: sel.classIndex,
        startFrame: sel.startFrame,
        endFrame: sel.endFrame,
        kind: "prediction",
      });
    }
  }
  return spans;
}

export interface SpanRect {
  x: number;
  y: number;
  width: number;
  height: number;
  kind: "label" | "prediction";
  classIndex: number;
}

export function spanRects(
  spans: LaneSpan[],
  totalFrames: number,
  width: number,
  laneHeight: number,
): SpanRect[] {
  const perFrame = width / Math.max(totalFrames, 1);
  const band = laneHeight / 2 - 1;
  return spans.map((span) => ({
    x: (span.startFrame - 1) * perFrame,
    y: span.classIndex * laneHeight + (span.kind === "label" ? 0 : band + 2),
    width: Math.max((span.endFrame - span.startFrame + 1) * perFrame, 1),
    height: band,
    kind: span.kind,
    classIndex: span.classIndex,
  }));
}

export function frameAtX(x: number, totalFrames: number, width: number): number {
  const frame = Math.floor((x / Math.max(width, 1)) * totalFrames) + 1;
  return Math.min(Math.max(frame, 1), Math.max(totalFrames, 1));
}

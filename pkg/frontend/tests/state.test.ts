import { describe, expect, it } from "vitest";

import { Meta, QueueRow, SequenceDoc } from "../src/api.js";
import {
  acceptPredictions,
  initialState,
  markKeyframe,
  queueEmpty,
  removeSelection,
  retrainBusy,
  retrainConflict,
  retrainFinished,
  retrainStarted,
  setActiveClass,
  withMeta,
  withQueue,
  withSequence,
} from "../src/state.js";

const META: Meta = {
  class_names: ["walk", "wave"],
  joint_names: ["a", "b"],
  bones: [[0, 1]],
  fps: 30,
  num_sequences: 3,
};

function doc(id: string, frames = 20, labels: number[][] | null = null,
             predictions: number[][] | null = null): SequenceDoc {
  return {
    id,
    fps: 30,
    frames: Array.from({ length: frames }, () => [[0, 0, 0], [1, 1, 1]]),
    labels,
    predictions,
  };
}

function rows(ids: string[]): QueueRow[] {
  return ids.map((id, i) => ({ id, position: i + 1, score: i === 0 ? null : 0.5 }));
}

describe("queue state", () => {
  it("splits queued and labeled ids", () => {
    let state = withMeta(initialState(), META);
    state = withQueue(state, rows(["s1", "s2"]), ["s1", "s2", "s3"]);
    expect(state.queue.map((r) => r.id)).toEqual(["s1", "s2"]);
    expect(state.labeledIds).toEqual(["s3"]);
    expect(queueEmpty(state)).toBe(false);
  });

  it("empty queue signals completion", () => {
    let state = withMeta(initialState(), META);
    state = withQueue(state, [], ["s1"]);
    expect(queueEmpty(state)).toBe(true);
  });
});

describe("keyframe marking", () => {
  function base() {
    let state = withMeta(initialState(), META);
    return withSequence(state, doc("s1"));
  }

  it("two clicks produce one interval", () => {
    let state = markKeyframe(base(), 5);
    expect(state.pendingStart).toBe(5);
    state = markKeyframe(state, 9);
    expect(state.pendingStart).toBeNull();
    expect(state.selections).toEqual([
      { classIndex: 0, startFrame: 5, endFrame: 9 },
    ]);
  });

  it("end before start is blocked with a toast", () => {
    let state = markKeyframe(base(), 9);
    state = markKeyframe(state, 3);
    expect(state.selections).toEqual([]);
    expect(state.toast).toMatch(/precede/);
    expect(state.pendingStart).toBe(9); // mark stays so the user can retry
  });

  it("class selection applies to new intervals and resets the mark", () => {
    let state = markKeyframe(base(), 4);
    state = setActiveClass(state, 1);
    expect(state.pendingStart).toBeNull();
    state = markKeyframe(state, 2);
    state = markKeyframe(state, 6);
    expect(state.selections[0].classIndex).toBe(1);
  });

  it("committed labels load as editable selections", () => {
    const labels = Array.from({ length: 20 }, (_, t) => [t < 5 ? 1 : 0, 0]);
    const state = withSequence(withMeta(initialState(), META), doc("s1", 20, labels));
    expect(state.selections).toEqual([
      { classIndex: 0, startFrame: 1, endFrame: 5 },
    ]);
  });

  it("selections can be removed", () => {
    let state = markKeyframe(base(), 1);
    state = markKeyframe(state, 2);
    state = removeSelection(state, 0);
    expect(state.selections).toEqual([]);
  });
});

describe("predictions", () => {
  it("are not promoted silently but can be accepted explicitly", () => {
    const predictions = Array.from({ length: 20 }, (_, t) => [0, t >= 10 ? 1 : 0]);
    let state = withSequence(withMeta(initialState(), META), doc("s1", 20, null, predictions));
    expect(state.selections).toEqual([]); // prediction lanes only
    state = acceptPredictions(state);
    expect(state.selections).toEqual([
      { classIndex: 1, startFrame: 11, endFrame: 20 },
    ]);
  });
});

describe("retrain lifecycle", () => {
  it("tracks running and done", () => {
    let state = retrainStarted(initialState(), "job1");
    expect(retrainBusy(state)).toBe(true);
    state = retrainFinished(state, true, 3.2, null);
    expect(retrainBusy(state)).toBe(false);
    expect(state.retrain.phase).toBe("done");
    expect(state.retrain.duration).toBe(3.2);
  });

  it("409 conflict leaves state unchanged except a toast", () => {
    const before = retrainStarted(initialState(), "job1");
    const after = retrainConflict(before);
    expect(after.retrain).toEqual(before.retrain);
    expect(after.toast).toMatch(/in flight/);
  });
});

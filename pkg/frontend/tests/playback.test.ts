import { describe, expect, it } from "vitest";

import {
  advance,
  displayedFrame,
  initialPlayback,
  scrubTo,
  togglePlay,
} from "../src/playback.js";

describe("playback cursor", () => {
  it("advances fps frames per second at speed 1", () => {
    let state = togglePlay(initialPlayback());
    state = advance(state, 1.0, 120, 1000);
    expect(displayedFrame(state)).toBe(121);
  });

  it("respects playback speed", () => {
    let state = { ...initialPlayback(), playing: true, speed: 2 };
    state = advance(state, 0.5, 120, 1000);
    expect(displayedFrame(state)).toBe(121);
  });

  it("paused cursor is frozen", () => {
    let state = initialPlayback(); // not playing
    state = advance(state, 5.0, 120, 1000);
    expect(displayedFrame(state)).toBe(1);
  });

  it("wraps at the end of the sequence", () => {
    let state = { ...initialPlayback(), playing: true };
    state = advance(state, 1.0, 100, 50); // 100 frames into a 50-frame clip
    expect(displayedFrame(state)).toBeGreaterThanOrEqual(1);
    expect(displayedFrame(state)).toBeLessThanOrEqual(50);
  });

  it("scrubbing clamps to valid frames", () => {
    const state = initialPlayback();
    expect(scrubTo(state, 17, 30).cursor).toBe(17);
    expect(scrubTo(state, -5, 30).cursor).toBe(1);
    expect(scrubTo(state, 99, 30).cursor).toBe(30);
  });
});

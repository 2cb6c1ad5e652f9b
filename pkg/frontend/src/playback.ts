// Playback cursor arithmetic, kept pure so it is testable without timers.
// The cursor is a 1-based frame index; at speed 1 it advances fps frames per
// wall-clock second and wraps at the end of the sequence.

export interface PlaybackState {
  cursor: number; // fractional frame position, 1-based
  playing: boolean;
  speed: number;
}

export function initialPlayback(): PlaybackState {
  return { cursor: 1, playing: false, speed: 1 };
}

export function advance(
  state: PlaybackState,
  dtSeconds: number,
  fps: number,
  totalFrames: number,
): PlaybackState {
  if (!state.playing || totalFrames < 1) return state;
  const span = Math.max(totalFrames, 1);
  let cursor = state.cursor + dtSeconds * fps * state.speed;
  // wrap into [1, totalFrames + 1)
  cursor = ((cursor - 1) % span + span) % span + 1;
  return { ...state, cursor };
}

export function scrubTo(state: PlaybackState, frame: number, totalFrames: number): PlaybackState {
  const clamped = Math.min(Math.max(Math.round(frame), 1), Math.max(totalFrames, 1));
  return { ...state, cursor: clamped };
}

export function togglePlay(state: PlaybackState): PlaybackState {
  return { ...state, playing: !state.playing };
}

export function displayedFrame(state: PlaybackState): number {
  return Math.max(1, Math.floor(state.cursor));
}

// Entry point: wires the API client, state transitions, and renderers to the
// page. The annotation loop: pick the top queue item, mark intervals with
// two keyframe clicks, submit, retrain, review the prediction lanes that
// appear on everything still unlabeled.

import { ApiClient, ApiError } from "./api.js";
import { intervalsToMatrix, matrixToIntervals } from "./intervals.js";
import {
  advance,
  displayedFrame,
  initialPlayback,
  PlaybackState,
  scrubTo,
  togglePlay,
} from "./playback.js";
import {
  renderQueue,
  renderSelections,
  renderSkeletonView,
  renderStatus,
  renderTimeline,
} from "./render.js";
import {
  acceptPredictions,
  AppState,
  initialState,
  markKeyframe,
  removeSelection,
  retrainBusy,
  retrainConflict,
  retrainFinished,
  retrainStarted,
  setActiveClass,
  withMeta,
  withQueue,
  withSequence,
} from "./state.js";
import { frameAtX } from "./timeline.js";
import { ViewDirection } from "./skeleton.js";

const api = new ApiClient("");
let state: AppState = initialState();
let playback: PlaybackState = initialPlayback();
let view: ViewDirection = "front";
let allIds: string[] = [];

const $ = (id: string) => document.getElementById(id)!;
const skeletonCanvas = () => $("skeleton") as HTMLCanvasElement;
const timelineCanvas = () => $("timeline") as HTMLCanvasElement;

function redraw(): void {
  renderQueue($("queue-pane"), state, (id) => void openSequence(id));
  renderSkeletonView(skeletonCanvas(), state, playback, view);
  renderTimeline(timelineCanvas(), state, playback);
  renderSelections($("selection-list"), state, (index) => {
    state = removeSelection(state, index);
    redraw();
  });
  renderStatus($("status"), state);
  ($("retrain") as HTMLButtonElement).disabled = retrainBusy(state);
  ($("submit") as HTMLButtonElement).disabled = state.current === null;
}

async function refreshQueue(): Promise<void> {
  const queue = await api.getQueue();
  state = withQueue(state, queue, allIds);
}

async function openSequence(id: string): Promise<void> {
  const doc = await api.getSequence(id);
  state = withSequence(state, doc);
  playback = initialPlayback();
  redraw();
}

async function submitLabels(): Promise<void> {
  if (!state.current || !state.meta) return;
  const names = state.meta.class_names;
  const intervals = state.selections.map((sel) => ({
    start: sel.startFrame,
    end: sel.endFrame,
    class: names[sel.classIndex],
  }));
  try {
    await api.postLabels(state.current.id, intervals);
    await refreshQueue();
    // committed: reload so the timeline shows the server's view
    await openSequence(state.current.id);
  } catch (err) {
    state = { ...state, toast: err instanceof ApiError ? err.message : String(err) };
    redraw();
  }
}

async function triggerRetrain(): Promise<void> {
  try {
    const { job_id } = await api.postRetrain();
    state = retrainStarted(state, job_id);
    redraw();
    pollRetrain(job_id);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      state = retrainConflict(state);
    } else {
      state = { ...state, toast: err instanceof ApiError ? err.message : String(err) };
    }
    redraw();
  }
}

function pollRetrain(jobId: string): void {
  const timer = setInterval(async () => {
    const doc = await api.getStatus(jobId);
    if (doc.state === "done" || doc.state === "failed") {
      clearInterval(timer);
      state = retrainFinished(state, doc.state === "done", doc.duration, doc.error);
      await refreshQueue();
      if (state.current) await openSequence(state.current.id);
      redraw();
    }
  }, 400);
}

function setupControls(): void {
  $("play").addEventListener("click", () => {
    playback = togglePlay(playback);
    ($("play") as HTMLButtonElement).textContent = playback.playing ? "pause" : "play";
  });
  $("view-toggle").addEventListener("click", () => {
    view = view === "front" ? "side" : "front";
    redraw();
  });
  $("mark").addEventListener("click", () => {
    state = markKeyframe(state, displayedFrame(playback));
    redraw();
  });
  $("accept-predictions").addEventListener("click", () => {
    state = acceptPredictions(state);
    redraw();
  });
  $("submit").addEventListener("click", () => void submitLabels());
  $("retrain").addEventListener("click", () => void triggerRetrain());
  ($("class-select") as HTMLSelectElement).addEventListener("change", (ev) => {
    state = setActiveClass(state, Number((ev.target as HTMLSelectElement).value));
    redraw();
  });
  timelineCanvas().addEventListener("click", (ev) => {
    if (!state.current) return;
    const rect = timelineCanvas().getBoundingClientRect();
    const frame = frameAtX(ev.clientX - rect.left, state.current.frames.length, rect.width);
    playback = scrubTo(playback, frame, state.current.frames.length);
    redraw();
  });
  $("export").addEventListener("click", async () => {
    const payload = await api.getExport();
    const blob = new Blob([payload], { type: "application/zip" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "annotations.zip";
    link.click();
    URL.revokeObjectURL(link.href);
  });
}

function populateClassSelect(): void {
  if (!state.meta) return;
  const select = $("class-select") as HTMLSelectElement;
  select.innerHTML = "";
  state.meta.class_names.forEach((name, index) => {
    const option = document.createElement("option");
    option.value = String(index);
    option.textContent = name;
    select.appendChild(option);
  });
}

function animationLoop(): void {
  let last = performance.now();
  const tick = (now: number) => {
    const dt = (now - last) / 1000;
    last = now;
    if (state.current && playback.playing) {
      playback = advance(playback, dt, state.current.fps, state.current.frames.length);
      renderSkeletonView(skeletonCanvas(), state, playback, view);
      renderTimeline(timelineCanvas(), state, playback);
    }
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);
}

async function init(): Promise<void> {
  const meta = await api.getMeta();
  state = withMeta(state, meta);
  const queue = await api.getQueue();
  allIds = queue.map((r) => r.id); // fresh session: everything is queued
  state = withQueue(state, queue, allIds);
  populateClassSelect();
  setupControls();
  if (state.queue.length) await openSequence(state.queue[0].id);
  redraw();
  animationLoop();
}

// matrixToIntervals/intervalsToMatrix re-exported for the scripted e2e test
export { api, intervalsToMatrix, matrixToIntervals };

if (typeof document !== "undefined" && document.getElementById("queue-pane")) {
  void init();
}

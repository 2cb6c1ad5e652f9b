// DOM and canvas drawing. These functions render the current AppState into
// the page; all interaction handlers live in main.ts.

import { AppState, queueEmpty } from "./state.js";
import { drawSkeleton, fitTransform, projectFrame, ViewDirection } from "./skeleton.js";
import { displayedFrame, PlaybackState } from "./playback.js";
import { laneSpans, spanRects } from "./timeline.js";

export const CLASS_COLORS = [
  "#4e9af1", "#f1734e", "#53c26b", "#c96bd6",
  "#e3c54a", "#4ac9c0", "#d65f84", "#9a8df1",
  "#7fb06a", "#b0766a", "#6a8ab0", "#b0a26a",
];

export function classColor(index: number): string {
  return CLASS_COLORS[index % CLASS_COLORS.length];
}

export function renderQueue(
  container: HTMLElement,
  state: AppState,
  onSelect: (id: string) => void,
): void {
  container.innerHTML = "";
  if (queueEmpty(state)) {
    const banner = document.createElement("div");
    banner.className = "banner";
    banner.textContent = "All sequences labeled - queue complete";
    container.appendChild(banner);
  }
  const list = document.createElement("ul");
  list.className = "queue";
  for (const row of state.queue) {
    const item = document.createElement("li");
    item.dataset.id = row.id;
    if (state.current && state.current.id === row.id) item.classList.add("active");
    const score = row.score === null ? "seed" : row.score.toFixed(3);
    item.innerHTML = `<span class="pos">#${row.position}</span> ${row.id} ` +
      `<span class="score">${score}</span>`;
    item.addEventListener("click", () => onSelect(row.id));
    list.appendChild(item);
  }
  container.appendChild(list);

  if (state.labeledIds.length) {
    const done = document.createElement("div");
    done.className = "done-section";
    done.textContent = `labeled (${state.labeledIds.length}): `;
    for (const id of state.labeledIds) {
      const chip = document.createElement("span");
      chip.className = "chip";
      chip.textContent = id;
      chip.addEventListener("click", () => onSelect(id));
      done.appendChild(chip);
    }
    container.appendChild(done);
  }
}

export function renderSkeletonView(
  canvas: HTMLCanvasElement,
  state: AppState,
  playback: PlaybackState,
  view: ViewDirection,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!state.current || !state.meta) return;
  const frames = state.current.frames;
  const frame = frames[Math.min(displayedFrame(playback), frames.length) - 1];
  const transform = fitTransform(frames, view, canvas.width, canvas.height);
  const points = projectFrame(frame, view, transform);
  drawSkeleton(ctx, points, state.meta.bones);
  ctx.fillStyle = "#9aa0a6";
  ctx.font = "12px sans-serif";
  ctx.fillText(
    `${view} - frame ${displayedFrame(playback)}/${frames.length}`,
    8, canvas.height - 8,
  );
}

export function renderTimeline(
  canvas: HTMLCanvasElement,
  state: AppState,
  playback: PlaybackState,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!state.current || !state.meta) return;
  const total = state.current.frames.length;
  const laneHeight = canvas.height / Math.max(state.meta.class_names.length, 1);

  state.meta.class_names.forEach((name, k) => {
    ctx.strokeStyle = "#333";
    ctx.strokeRect(0, k * laneHeight, canvas.width, laneHeight);
    ctx.fillStyle = "#9aa0a6";
    ctx.font = "10px sans-serif";
    ctx.fillText(name, 4, k * laneHeight + 10);
  });

  const spans = laneSpans(state.selections, state.current.predictions);
  for (const rect of spanRects(spans, total, canvas.width, laneHeight)) {
    ctx.fillStyle = classColor(rect.classIndex);
    ctx.globalAlpha = rect.kind === "label" ? 0.9 : 0.35;
    ctx.fillRect(rect.x, rect.y, rect.width, rect.height);
  }
  ctx.globalAlpha = 1.0;

  // playback cursor and pending keyframe mark
  const perFrame = canvas.width / Math.max(total, 1);
  ctx.strokeStyle = "#ffffff";
  const cursorX = (displayedFrame(playback) - 0.5) * perFrame;
  ctx.beginPath();
  ctx.moveTo(cursorX, 0);
  ctx.lineTo(cursorX, canvas.height);
  ctx.stroke();
  if (state.pendingStart !== null) {
    ctx.strokeStyle = "#f1c04e";
    const px = (state.pendingStart - 0.5) * perFrame;
    ctx.beginPath();
    ctx.moveTo(px, 0);
    ctx.lineTo(px, canvas.height);
    ctx.stroke();
  }
}

export function renderSelections(
  container: HTMLElement,
  state: AppState,
  onRemove: (index: number) => void,
): void {
  container.innerHTML = "";
  if (!state.meta) return;
  state.selections.forEach((sel, index) => {
    const row = document.createElement("div");
    row.className = "selection-row";
    const name = state.meta!.class_names[sel.classIndex] ?? `class ${sel.classIndex}`;
    row.innerHTML = `<span class="swatch" style="background:${classColor(sel.classIndex)}"></span>` +
      `${name} ${sel.startFrame}-${sel.endFrame} `;
    const remove = document.createElement("button");
    remove.textContent = "x";
    remove.addEventListener("click", () => onRemove(index));
    row.appendChild(remove);
    container.appendChild(row);
  });
}

export function renderStatus(container: HTMLElement, state: AppState): void {
  const retrain = state.retrain;
  let text = "";
  if (retrain.phase === "running") text = "retraining...";
  else if (retrain.phase === "done") text = `retrained in ${retrain.duration?.toFixed(1)}s`;
  else if (retrain.phase === "failed") text = `retrain failed: ${retrain.message}`;
  if (state.toast) text = state.toast;
  container.textContent = text;
}

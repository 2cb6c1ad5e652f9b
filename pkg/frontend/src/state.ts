// Application state and its transitions. State is a plain object rebuilt
// from server responses plus local in-progress edits; every transition is a
// pure function so the annotation workflow is testable without a DOM.

import { Meta, QueueRow, SequenceDoc } from "./api.js";
import {
  TimelineSelection,
  matrixToIntervals,
  mergeSelections,
  validateSelection,
} from "./intervals.js";

export interface RetrainUi {
  phase: "idle" | "running" | "done" | "failed";
  jobId: string | null;
  duration: number | null;
  message: string | null;
}

export interface AppState {
  meta: Meta | null;
  queue: QueueRow[];
  labeledIds: string[];
  current: SequenceDoc | null;
  // committed labels live on current.labels; these are local, unsubmitted edits
  selections: TimelineSelection[];
  pendingStart: number | null; // first keyframe of an in-progress interval
  activeClass: number;
  retrain: RetrainUi;
  toast: string | null;
}

export function initialState(): AppState {
  return {
    meta: null,
    queue: [],
    labeledIds: [],
    current: null,
    selections: [],
    pendingStart: null,
    activeClass: 0,
    retrain: { phase: "idle", jobId: null, duration: null, message: null },
    toast: null,
  };
}

export function withMeta(state: AppState, meta: Meta): AppState {
  return { ...state, meta, activeClass: Math.min(state.activeClass, meta.class_names.length - 1) };
}

export function withQueue(state: AppState, queue: QueueRow[], allIds: string[]): AppState {
  const queued = new Set(queue.map((r) => r.id));
  return { ...state, queue, labeledIds: allIds.filter((id) => !queued.has(id)) };
}

export function withSequence(state: AppState, doc: SequenceDoc): AppState {
  // committed labels come back as intervals for the editable timeline
  const committed = doc.labels ? matrixToIntervals(doc.labels) : [];
  return { ...state, current: doc, selections: committed, pendingStart: null };
}

export function setActiveClass(state: AppState, classIndex: number): AppState {
  return { ...state, activeClass: classIndex, pendingStart: null };
}

// Two keyframe clicks produce one interval; an end before the start is
// rejected client-side and leaves the pending mark in place.
export function markKeyframe(state: AppState, frame: number): AppState {
  if (!state.current) return state;
  if (state.pendingStart === null) {
    return { ...state, pendingStart: frame, toast: null };
  }
  const selection: TimelineSelection = {
    classIndex: state.activeClass,
    startFrame: state.pendingStart,
    endFrame: frame,
  };
  const total = state.current.frames.length;
  const classes = state.meta ? state.meta.class_names.length : 0;
  const problem = validateSelection(selection, total, classes);
  if (problem) {
    return { ...state, toast: problem };
  }
  return {
    ...state,
    selections: mergeSelections([...state.selections, selection]),
    pendingStart: null,
    toast: null,
  };
}

export function removeSelection(state: AppState, index: number): AppState {
  const selections = state.selections.filter((_, i) => i !== index);
  return { ...state, selections };
}

// Accepting predictions copies the prediction lanes into the editable
// selections; nothing is promoted silently.
export function acceptPredictions(state: AppState): AppState {
  if (!state.current || !state.current.predictions) return state;
  const predicted = matrixToIntervals(state.current.predictions);
  return { ...state, selections: mergeSelections([...state.selections, ...predicted]) };
}

export function retrainStarted(state: AppState, jobId: string): AppState {
  return { ...state, retrain: { phase: "running", jobId, duration: null, message: null } };
}

export function retrainConflict(state: AppState): AppState {
  // 409: a retrain is already running elsewhere; show a toast, change nothing
  return { ...state, toast: "a retrain is already in flight" };
}

export function retrainFinished(
  state: AppState,
  ok: boolean,
  duration: number | null,
  message: string | null,
): AppState {
  return {
    ...state,
    retrain: { phase: ok ? "done" : "failed", jobId: null, duration, message },
  };
}

export function retrainBusy(state: AppState): boolean {
  return state.retrain.phase === "running";
}

export function queueEmpty(state: AppState): boolean {
  return state.queue.length === 0;
}

// Conversions between timeline selections (1-based inclusive frame intervals
// per class) and per-frame binary label matrices. Rendering and submission
// both work on merged intervals, so matrix -> intervals -> matrix is exact
// and intervals -> matrix -> intervals yields the same merged set.

export interface TimelineSelection {
  classIndex: number;
  startFrame: number; // 1-based
  endFrame: number;   // inclusive, >= startFrame
}

export function validateSelection(
  sel: TimelineSelection,
  totalFrames: number,
  numClasses: number,
): string | null {
  if (sel.classIndex < 0 || sel.classIndex >= numClasses) {
    return `class index ${sel.classIndex} out of range`;
  }
  if (sel.startFrame < 1 || sel.endFrame > totalFrames) {
    return `interval ${sel.startFrame}..${sel.endFrame} outside 1..${totalFrames}`;
  }
  if (sel.endFrame < sel.startFrame) {
    return "interval end precedes start";
  }
  return null;
}

export function intervalsToMatrix(
  selections: TimelineSelection[],
  totalFrames: number,
  numClasses: number,
): number[][] {
  const matrix: number[][] = [];
  for (let t = 0; t < totalFrames; t++) {
    matrix.push(new Array<number>(numClasses).fill(0));
  }
  for (const sel of selections) {
    const problem = validateSelection(sel, totalFrames, numClasses);
    if (problem) throw new Error(problem);
    for (let t = sel.startFrame - 1; t < sel.endFrame; t++) {
      matrix[t][sel.classIndex] = 1;
    }
  }
  return matrix;
}

export function matrixToIntervals(matrix: number[][]): TimelineSelection[] {
  const selections: TimelineSelection[] = [];
  if (matrix.length === 0) return selections;
  const numClasses = matrix[0].length;
  for (let c = 0; c < numClasses; c++) {
    let start: number | null = null;
    for (let t = 0; t < matrix.length; t++) {
      const on = matrix[t][c] === 1;
      if (on && start === null) start = t + 1;
      if (!on && start !== null) {
        selections.push({ classIndex: c, startFrame: start, endFrame: t });
        start = null;
      }
    }
    if (start !== null) {
      selections.push({ classIndex: c, startFrame: start, endFrame: matrix.length });
    }
  }
  return selections;
}

// Merge overlapping/adjacent selections of the same class into maximal runs,
// the canonical form produced by matrixToIntervals.
export function mergeSelections(selections: TimelineSelection[]): TimelineSelection[] {
  const byClass = new Map<number, TimelineSelection[]>();
  for (const sel of selections) {
    const list = byClass.get(sel.classIndex) ?? [];
    list.push(sel);
    byClass.set(sel.classIndex, list);
  }
  const merged: TimelineSelection[] = [];
  for (const [classIndex, list] of [...byClass.entries()].sort((a, b) => a[0] - b[0])) {
    list.sort((a, b) => a.startFrame - b.startFrame);
    let current = { ...list[0] };
    for (const sel of list.slice(1)) {
      if (sel.startFrame <= current.endFrame + 1) {
        current.endFrame = Math.max(current.endFrame, sel.endFrame);
      } else {
        merged.push(current);
        current = { ...sel };
      }
    }
    merged.push(current);
    void classIndex;
  }
  return merged;
}

// 2-D orthographic projection of 3-D skeleton frames for canvas rendering.
// Front view looks down the z axis (x right, y up); side view looks down the
// x axis (z right, y up). The fit transform is computed once per sequence
// over all frames so the figure does not jitter as it moves.

export type ViewDirection = "front" | "side";

export interface Point2D {
  x: number;
  y: number;
}

export interface FitTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

function planar(joint: number[], view: ViewDirection): Point2D {
  return view === "front" ? { x: joint[0], y: joint[1] } : { x: joint[2], y: joint[1] };
}

export function fitTransform(
  frames: number[][][],
  view: ViewDirection,
  width: number,
  height: number,
  margin = 20,
): FitTransform {
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const frame of frames) {
    for (const joint of frame) {
      const p = planar(joint, view);
      minX = Math.min(minX, p.x);
      maxX = Math.max(maxX, p.x);
      minY = Math.min(minY, p.y);
      maxY = Math.max(maxY, p.y);
    }
  }
  const spanX = Math.max(maxX - minX, 1e-6);
  const spanY = Math.max(maxY - minY, 1e-6);
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  return {
    scale,
    offsetX: width / 2 - scale * (minX + spanX / 2),
    // canvas y grows downward; world y grows upward
    offsetY: height / 2 + scale * (minY + spanY / 2),
  };
}

export function projectFrame(
  frame: number[][],
  view: ViewDirection,
  transform: FitTransform,
): Point2D[] {
  return frame.map((joint) => {
    const p = planar(joint, view);
    return {
      x: transform.offsetX + transform.scale * p.x,
      y: transform.offsetY - transform.scale * p.y,
    };
  });
}

export function drawSkeleton(
  ctx: CanvasRenderingContext2D,
  points: Point2D[],
  bones: [number, number][],
  color = "#e8e8e8",
): void {
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 2;
  for (const [a, b] of bones) {
    if (a >= points.length || b >= points.length) continue;
    ctx.beginPath();
    ctx.moveTo(points[a].x, points[a].y);
    ctx.lineTo(points[b].x, points[b].y);
    ctx.stroke();
  }
  for (const p of points) {
    ctx.beginPath();
    ctx.arc(p.x, p.y, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

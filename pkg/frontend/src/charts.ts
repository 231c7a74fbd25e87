/**
 * Dependency-free line chart with a flag overlay.
 *
 * Layout math is pure (and unit-tested); only draw() touches a canvas.
 * Flagged points render as markers on top of the line: BAD red,
 * DOUBTFUL amber, custom labels grey.
 */

import type { SeriesPoint } from "./monitor.js";

export interface Layout {
  line: Array<[number, number]>;
  markers: Array<{ x: number; y: number; flag: string }>;
  tMin: number;
  tMax: number;
  vMin: number;
  vMax: number;
}

const PAD = 28;

export function computeLayout(points: SeriesPoint[], width: number,
                              height: number): Layout {
  if (points.length === 0) {
    return { line: [], markers: [], tMin: 0, tMax: 1, vMin: 0, vMax: 1 };
  }
  let tMin = points[0].t;
  let tMax = points[0].t;
  let vMin = points[0].value;
  let vMax = points[0].value;
  for (const p of points) {
    if (p.t < tMin) tMin = p.t;
    if (p.t > tMax) tMax = p.t;
    if (p.value < vMin) vMin = p.value;
    if (p.value > vMax) vMax = p.value;
  }
  if (tMax === tMin) tMax = tMin + 1;
  if (vMax === vMin) {
    vMax += 0.5;
    vMin -= 0.5;
  }
  const sx = (t: number) => PAD + ((t - tMin) / (tMax - tMin)) * (width - 2 * PAD);
  const sy = (v: number) =>
    height - PAD - ((v - vMin) / (vMax - vMin)) * (height - 2 * PAD);
  const line: Array<[number, number]> = points.map((p) => [sx(p.t), sy(p.value)]);
  const markers = points
    .filter((p) => p.flag !== "")
    .map((p) => ({ x: sx(p.t), y: sy(p.value), flag: p.flag }));
  return { line, markers, tMin, tMax, vMin, vMax };
}

export function flagColor(flag: string): string {
  if (flag === "BAD") return "#d64545";
  if (flag === "DOUBTFUL") return "#e6a23c";
  if (flag === "OK") return "#4a9a58";
  return "#8a8a8a";
}

export function draw(canvas: HTMLCanvasElement, points: SeriesPoint[],
                     overlay: boolean): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const layout = computeLayout(points, width, height);
  ctx.strokeStyle = "#3a6ea5";
  ctx.lineWidth = 1.2;
  ctx.beginPath();
  layout.line.forEach(([x, y], index) => {
    if (index === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  if (overlay) {
    for (const marker of layout.markers) {
      ctx.fillStyle = flagColor(marker.flag);
      ctx.beginPath();
      ctx.arc(marker.x, marker.y, 3.2, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  ctx.strokeStyle = "#c9c9c9";
  ctx.strokeRect(PAD, PAD, width - 2 * PAD, height - 2 * PAD);
}

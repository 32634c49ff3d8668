/** Client-side mesh rendering: orbit projection, painter's-algorithm fill,
 * vertex highlighting, and screen-space vertex picking. The math lives in
 * exported pure functions so it can be tested off-DOM. */

import type { MeshPayload } from "./api.js";

export interface Orbit {
  elevation: number; // degrees
  azimuth: number; // degrees
  radius: number;
  fov: number; // vertical, degrees
}

export interface Projected {
  xs: Float64Array;
  ys: Float64Array;
  depths: Float64Array;
}

const DEG = Math.PI / 180;

export function orbitEye(orbit: Orbit): [number, number, number] {
  const el = orbit.elevation * DEG;
  const az = orbit.azimuth * DEG;
  return [
    orbit.radius * Math.cos(el) * Math.sin(az),
    orbit.radius * Math.sin(el),
    orbit.radius * Math.cos(el) * Math.cos(az),
  ];
}

export function projectVertices(
  vertices: Array<[number, number, number]>,
  orbit: Orbit,
  width: number,
  height: number,
): Projected {
  const eye = orbitEye(orbit);
  const fLen = Math.hypot(eye[0], eye[1], eye[2]);
  const forward = [-eye[0] / fLen, -eye[1] / fLen, -eye[2] / fLen];
  const up: [number, number, number] =
    Math.abs(orbit.elevation) < 89 ? [0, 1, 0] : [1, 0, 0];
  let right = [
    forward[1] * up[2] - forward[2] * up[1],
    forward[2] * up[0] - forward[0] * up[2],
    forward[0] * up[1] - forward[1] * up[0],
  ];
  const rLen = Math.hypot(right[0], right[1], right[2]);
  right = [right[0] / rLen, right[1] / rLen, right[2] / rLen];
  const trueUp = [
    right[1] * forward[2] - right[2] * forward[1],
    right[2] * forward[0] - right[0] * forward[2],
    right[0] * forward[1] - right[1] * forward[0],
  ];
  const focal = height / 2 / Math.tan((orbit.fov * DEG) / 2);

  const n = vertices.length;
  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  const depths = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    const dx = vertices[i][0] - eye[0];
    const dy = vertices[i][1] - eye[1];
    const dz = vertices[i][2] - eye[2];
    const cx = dx * right[0] + dy * right[1] + dz * right[2];
    const cy = dx * trueUp[0] + dy * trueUp[1] + dz * trueUp[2];
    const cz = dx * forward[0] + dy * forward[1] + dz * forward[2];
    depths[i] = cz;
    xs[i] = width / 2 + (focal * cx) / cz;
    ys[i] = height / 2 - (focal * cy) / cz;
  }
  return { xs, ys, depths };
}

/** Back-to-front face order for the painter's algorithm. */
export function faceDrawOrder(
  faces: Array<[number, number, number]>,
  depths: Float64Array,
): number[] {
  const order = faces.map((_, i) => i);
  const key = (i: number) => {
    const [a, b, c] = faces[i];
    return (depths[a] + depths[b] + depths[c]) / 3;
  };
  order.sort((i, j) => key(j) - key(i) || i - j);
  return order;
}

/** Nearest projected vertex within maxDist pixels; ties -> lower index. */
export function pickVertex(
  projected: Projected,
  x: number,
  y: number,
  maxDist: number,
): number | null {
  let best: number | null = null;
  let bestDist = maxDist * maxDist;
  for (let i = 0; i < projected.xs.length; i++) {
    if (projected.depths[i] <= 0) continue;
    const dx = projected.xs[i] - x;
    const dy = projected.ys[i] - y;
    const d = dx * dx + dy * dy;
    if (d < bestDist) {
      bestDist = d;
      best = i;
    }
  }
  return best;
}

export class MeshView {
  orbit: Orbit = { elevation: 20, azimuth: 30, radius: 2.5, fov: 60 };
  private mesh: MeshPayload | null = null;
  private projected: Projected | null = null;
  highlighted: ReadonlySet<number> = new Set();
  onVertexClick: ((v: number) => void) | null = null;

  constructor(private canvas: HTMLCanvasElement) {
    let dragging = false;
    let moved = 0;
    let last: [number, number] = [0, 0];
    canvas.addEventListener("mousedown", (e) => {
      dragging = true;
      moved = 0;
      last = [e.offsetX, e.offsetY];
    });
    canvas.addEventListener("mousemove", (e) => {
      if (!dragging) return;
      const dx = e.offsetX - last[0];
      const dy = e.offsetY - last[1];
      moved += Math.abs(dx) + Math.abs(dy);
      last = [e.offsetX, e.offsetY];
      this.orbit.azimuth = (this.orbit.azimuth + dx * 0.8 + 360) % 360;
      this.orbit.elevation = Math.max(-88, Math.min(88, this.orbit.elevation + dy * 0.5));
      this.draw();
    });
    window.addEventListener("mouseup", () => (dragging = false));
    canvas.addEventListener("click", (e) => {
      if (moved > 4 || !this.projected || !this.onVertexClick) return;
      const v = pickVertex(this.projected, e.offsetX, e.offsetY, 14);
      if (v !== null) this.onVertexClick(v);
    });
  }

  setMesh(mesh: MeshPayload): void {
    this.mesh = mesh;
    this.draw();
  }

  setHighlight(highlighted: ReadonlySet<number>): void {
    this.highlighted = highlighted;
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#14171c";
    ctx.fillRect(0, 0, width, height);
    if (!this.mesh) return;
    const projected = projectVertices(this.mesh.vertices, this.orbit, width, height);
    this.projected = projected;
    const order = faceDrawOrder(this.mesh.faces, projected.depths);
    const eye = orbitEye(this.orbit);
    for (const fi of order) {
      const [a, b, c] = this.mesh.faces[fi];
      if (projected.depths[a] <= 0 || projected.depths[b] <= 0 || projected.depths[c] <= 0) {
        continue;
      }
      const va = this.mesh.vertices[a];
      const vb = this.mesh.vertices[b];
      const vc = this.mesh.vertices[c];
      const u = [vb[0] - va[0], vb[1] - va[1], vb[2] - va[2]];
      const w = [vc[0] - va[0], vc[1] - va[1], vc[2] - va[2]];
      const normal = [
        u[1] * w[2] - u[2] * w[1],
        u[2] * w[0] - u[0] * w[2],
        u[0] * w[1] - u[1] * w[0],
      ];
      const nLen = Math.hypot(normal[0], normal[1], normal[2]) || 1;
      const toEye = [eye[0] - va[0], eye[1] - va[1], eye[2] - va[2]];
      const eLen = Math.hypot(toEye[0], toEye[1], toEye[2]) || 1;
      const lambert = Math.abs(
        (normal[0] * toEye[0] + normal[1] * toEye[1] + normal[2] * toEye[2]) / (nLen * eLen),
      );
      const inPart =
        this.highlighted.has(a) && this.highlighted.has(b) && this.highlighted.has(c);
      const shade = Math.round(70 + 130 * lambert);
      ctx.fillStyle = inPart
        ? `rgb(${shade + 55}, ${Math.round(shade * 0.45)}, ${Math.round(shade * 0.35)})`
        : `rgb(${shade}, ${shade}, ${Math.round(shade * 1.08)})`;
      ctx.strokeStyle = "rgba(0,0,0,0.25)";
      ctx.beginPath();
      ctx.moveTo(projected.xs[a], projected.ys[a]);
      ctx.lineTo(projected.xs[b], projected.ys[b]);
      ctx.lineTo(projected.xs[c], projected.ys[c]);
      ctx.closePath();
      ctx.fill();
      ctx.stroke();
    }
    // highlighted vertices drawn as dots so isolated matches stay visible
    ctx.fillStyle = "#ff5a36";
    for (const v of this.highlighted) {
      if (projected.depths[v] <= 0) continue;
      ctx.beginPath();
      ctx.arc(projected.xs[v], projected.ys[v], 3, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}

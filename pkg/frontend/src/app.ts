/** DOM wiring: image canvas with mask overlay, mesh viewport, k slider. */

import { SessionApi, ApiError } from "./api.js";
import { MeshView } from "./mesh_view.js";
import { decodePpm } from "./ppm.js";
import {
  UiSessionState,
  applyError,
  applyPixelClick,
  applyVertexClick,
  beginSession,
  initialState,
  lastClick,
  setK,
} from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class App {
  private api = new SessionApi("");
  private state: UiSessionState = initialState();
  private meshView: MeshView;
  private baseImage: ImageData | null = null;
  private inflight: AbortController | null = null;

  private imageCanvas = el<HTMLCanvasElement>("image-canvas");
  private meshCanvas = el<HTMLCanvasElement>("mesh-canvas");
  private banner = el<HTMLDivElement>("banner");
  private status = el<HTMLDivElement>("status");
  private kSlider = el<HTMLInputElement>("k-slider");
  private kValue = el<HTMLSpanElement>("k-value");

  constructor() {
    this.meshView = new MeshView(this.meshCanvas);
    this.meshView.onVertexClick = (v) => void this.clickVertex(v);
    el<HTMLButtonElement>("connect").addEventListener("click", () => void this.connect());
    this.imageCanvas.addEventListener("click", (e) => {
      const rect = this.imageCanvas.getBoundingClientRect();
      const x = Math.floor(((e.clientX - rect.left) / rect.width) * this.state.imageWidth);
      const y = Math.floor(((e.clientY - rect.top) / rect.height) * this.state.imageHeight);
      void this.clickPixel(x, y);
    });
    this.kSlider.addEventListener("change", () => void this.reclickWithK());
    this.kSlider.addEventListener("input", () => {
      this.kValue.textContent = this.kSlider.value;
    });
  }

  private render(): void {
    this.banner.textContent = this.state.error ?? this.state.banner ?? "";
    this.banner.className = this.state.error ? "error" : this.state.banner ? "warn" : "";
    this.meshView.setHighlight(this.state.highlighted);
    const ctx = this.imageCanvas.getContext("2d");
    if (!ctx || !this.baseImage) return;
    ctx.putImageData(this.baseImage, 0, 0);
    const { imageWidth: w, imageHeight: h } = this.state;
    const paint = (mask: Uint8Array | null, r: number, g: number, b: number) => {
      if (!mask) return;
      const overlay = ctx.getImageData(0, 0, w, h);
      for (let i = 0; i < w * h; i++) {
        if (!mask[i]) continue;
        overlay.data[i * 4] = Math.min(255, overlay.data[i * 4] * 0.4 + r);
        overlay.data[i * 4 + 1] = Math.min(255, overlay.data[i * 4 + 1] * 0.4 + g);
        overlay.data[i * 4 + 2] = Math.min(255, overlay.data[i * 4 + 2] * 0.4 + b);
      }
      ctx.putImageData(overlay, 0, 0);
    };
    paint(this.state.overlay, 40, 140, 60);
    if (this.state.matchPixel) {
      const [mx, my] = this.state.matchPixel;
      ctx.strokeStyle = "#ffd23c";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.arc(mx + 0.5, my + 0.5, 4, 0, Math.PI * 2);
      ctx.stroke();
    }
  }

  private async connect(): Promise<void> {
    const base = el<HTMLInputElement>("service-url").value.replace(/\/$/, "");
    const bundle = el<HTMLInputElement>("bundle-path").value;
    this.api = new SessionApi(base);
    try {
      const id = await this.api.createSession(bundle);
      const mesh = await this.api.getMesh(id);
      const image = await this.api.getImageBytes(id);
      let decoded;
      if (image.contentType.includes("portable")) {
        decoded = decodePpm(image.bytes);
      } else {
        decoded = await this.decodeViaBlob(image.bytes, image.contentType);
      }
      this.state = beginSession(
        this.state,
        id,
        decoded.width,
        decoded.height,
        mesh.vertices.length,
      );
      this.imageCanvas.width = decoded.width;
      this.imageCanvas.height = decoded.height;
      this.baseImage = new ImageData(decoded.rgba, decoded.width, decoded.height);
      this.meshView.setMesh(mesh);
      this.status.textContent = `session ${id} · ${mesh.vertices.length} vertices`;
      this.render();
    } catch (err) {
      this.state = applyError(this.state, err instanceof Error ? err.message : String(err));
      this.render();
    }
  }

  private async decodeViaBlob(
    bytes: Uint8Array,
    contentType: string,
  ): Promise<{ width: number; height: number; rgba: Uint8ClampedArray<ArrayBuffer> }> {
    const bitmap = await createImageBitmap(new Blob([bytes.slice()], { type: contentType }));
    const off = document.createElement("canvas");
    off.width = bitmap.width;
    off.height = bitmap.height;
    const ctx = off.getContext("2d")!;
    ctx.drawImage(bitmap, 0, 0);
    const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
    return { width: bitmap.width, height: bitmap.height, rgba: data.data };
  }

  /** later clicks cancel any in-flight request */
  private freshSignal(): AbortSignal {
    this.inflight?.abort();
    this.inflight = new AbortController();
    return this.inflight.signal;
  }

  private async clickPixel(x: number, y: number): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const resp = await this.api.clickPixel(
        this.state.sessionId, x, y, this.state.k, this.freshSignal(),
      );
      this.state = applyPixelClick(this.state, [x, y], resp);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return;
      this.state = applyError(this.state, err instanceof Error ? err.message : String(err));
    }
    this.render();
  }

  private async clickVertex(v: number): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const resp = await this.api.clickVertex(
        this.state.sessionId, v, this.state.k, this.freshSignal(),
      );
      this.state = applyVertexClick(this.state, v, resp);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return;
      this.state = applyError(this.state, err instanceof Error ? err.message : String(err));
    }
    this.render();
  }

  private async reclickWithK(): Promise<void> {
    this.state = setK(this.state, parseInt(this.kSlider.value, 10));
    const last = lastClick(this.state);
    if (!last) return;
    if (last.kind === "pixel") {
      const [x, y] = last.target as [number, number];
      await this.clickPixel(x, y);
    } else {
      await this.clickVertex(last.target as number);
    }
  }
}

window.addEventListener("load", () => new App());

/** Thin typed client over the session service endpoints. */

import type { RlePairs } from "./rle.js";

export interface ClickResponse {
  vertex: number | null;
  pixel: [number, number] | null;
  iou: number | null;
  mask2d_part: RlePairs;
  mask2d_match: RlePairs | null;
  mask3d: number[];
  candidates: unknown[];
  k: number;
  width: number;
  height: number;
}

export interface VertexClickResponse {
  vertex: number;
  pixel: [number, number] | null;
  iou3d: number | null;
  mask3d: number[];
  mask2d: RlePairs | null;
  candidates: unknown[];
  k: number;
  width: number;
  height: number;
}

export interface MeshPayload {
  vertices: Array<[number, number, number]>;
  faces: Array<[number, number, number]>;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function parse<T>(resp: Response): Promise<T> {
  const body = await resp.json();
  if (!resp.ok) {
    const message = body?.error?.message ?? resp.statusText;
    throw new ApiError(resp.status, message);
  }
  return body as T;
}

export class SessionApi {
  constructor(public baseUrl: string) {}

  async createSession(bundlePath: string): Promise<string> {
    const resp = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      body: JSON.stringify({ path: bundlePath }),
    });
    const body = await parse<{ id: string }>(resp);
    return body.id;
  }

  async clickPixel(
    sessionId: string,
    x: number,
    y: number,
    k?: number,
    signal?: AbortSignal,
  ): Promise<ClickResponse> {
    const payload: Record<string, number> = { x, y };
    if (k !== undefined) payload.k = k;
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/click`, {
      method: "POST",
      body: JSON.stringify(payload),
      signal,
    });
    return parse<ClickResponse>(resp);
  }

  async clickVertex(
    sessionId: string,
    v: number,
    k?: number,
    signal?: AbortSignal,
  ): Promise<VertexClickResponse> {
    const payload: Record<string, number> = { v };
    if (k !== undefined) payload.k = k;
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/vertex-click`, {
      method: "POST",
      body: JSON.stringify(payload),
      signal,
    });
    return parse<VertexClickResponse>(resp);
  }

  async getMesh(sessionId: string): Promise<MeshPayload> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/mesh`);
    return parse<MeshPayload>(resp);
  }

  async getImageBytes(sessionId: string): Promise<{ bytes: Uint8Array; contentType: string }> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/image`);
    if (!resp.ok) throw new ApiError(resp.status, "session has no display image");
    const buf = await resp.arrayBuffer();
    return {
      bytes: new Uint8Array(buf),
      contentType: resp.headers.get("content-type") ?? "application/octet-stream",
    };
  }
}

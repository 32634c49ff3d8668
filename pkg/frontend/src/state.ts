/** Pure session-state transitions: the UI is a view over service responses
 * and never invents correspondence data of its own. */

import type { ClickResponse, VertexClickResponse } from "./api.js";
import { rleDecode } from "./rle.js";

export interface ClickRecord {
  kind: "pixel" | "vertex";
  target: [number, number] | number;
  matched: boolean;
  k: number;
}

export interface UiSessionState {
  sessionId: string | null;
  imageWidth: number;
  imageHeight: number;
  vertexCount: number;
  /** part mask of the active click, image-sized, or null before any click */
  overlay: Uint8Array | null;
  /** mask of the matched counterpart region (forward: q*'s segment) */
  matchOverlay: Uint8Array | null;
  matchPixel: [number, number] | null;
  highlighted: ReadonlySet<number>;
  history: ClickRecord[];
  k: number;
  /** explicit no-correspondence banner, null when a match exists */
  banner: string | null;
  error: string | null;
}

export const NO_MATCH_BANNER = "no corresponding part on the shape";
export const NO_REGION_BANNER = "no corresponding region in the image";

export function initialState(k: number = 100): UiSessionState {
  return {
    sessionId: null,
    imageWidth: 0,
    imageHeight: 0,
    vertexCount: 0,
    overlay: null,
    matchOverlay: null,
    matchPixel: null,
    highlighted: new Set(),
    history: [],
    k,
    banner: null,
    error: null,
  };
}

export function beginSession(
  state: UiSessionState,
  sessionId: string,
  imageWidth: number,
  imageHeight: number,
  vertexCount: number,
): UiSessionState {
  return {
    ...initialState(state.k),
    sessionId,
    imageWidth,
    imageHeight,
    vertexCount,
  };
}

function checkedHighlight(indices: number[], vertexCount: number): Set<number> {
  const set = new Set<number>();
  for (const v of indices) {
    if (!Number.isInteger(v) || v < 0 || v >= vertexCount) {
      throw new RangeError(`highlighted vertex ${v} outside [0, ${vertexCount})`);
    }
    set.add(v);
  }
  return set;
}

function checkedOverlay(
  pairs: Parameters<typeof rleDecode>[0] | null,
  width: number,
  height: number,
): Uint8Array | null {
  if (pairs === null) return null;
  return rleDecode(pairs, width * height);
}

export function applyPixelClick(
  state: UiSessionState,
  click: [number, number],
  resp: ClickResponse,
): UiSessionState {
  if (resp.width !== state.imageWidth || resp.height !== state.imageHeight) {
    throw new RangeError("response mask dims do not match the session image");
  }
  const matched = resp.vertex !== null;
  return {
    ...state,
    overlay: checkedOverlay(resp.mask2d_part, resp.width, resp.height),
    matchOverlay: checkedOverlay(resp.mask2d_match, resp.width, resp.height),
    matchPixel: resp.pixel,
    highlighted: checkedHighlight(resp.mask3d, state.vertexCount),
    history: [...state.history, { kind: "pixel", target: click, matched, k: resp.k }],
    banner: matched ? null : NO_MATCH_BANNER,
    error: null,
  };
}

export function applyVertexClick(
  state: UiSessionState,
  vertex: number,
  resp: VertexClickResponse,
): UiSessionState {
  if (resp.width !== state.imageWidth || resp.height !== state.imageHeight) {
    throw new RangeError("response mask dims do not match the session image");
  }
  const matched = resp.pixel !== null;
  return {
    ...state,
    overlay: checkedOverlay(resp.mask2d, resp.width, resp.height),
    matchOverlay: null,
    matchPixel: resp.pixel,
    highlighted: checkedHighlight(resp.mask3d, state.vertexCount),
    history: [...state.history, { kind: "vertex", target: vertex, matched, k: resp.k }],
    banner: matched ? null : NO_REGION_BANNER,
    error: null,
  };
}

export function applyError(state: UiSessionState, message: string): UiSessionState {
  // inference errors surface inline; correspondence state stays as it was
  return { ...state, error: message };
}

export function setK(state: UiSessionState, k: number): UiSessionState {
  if (!Number.isInteger(k) || k < 1) throw new RangeError(`k must be a positive integer, got ${k}`);
  return { ...state, k };
}

/** The most recent click, for the k slider's re-issue behavior. */
export function lastClick(state: UiSessionState): ClickRecord | null {
  return state.history.length ? state.history[state.history.length - 1] : null;
}

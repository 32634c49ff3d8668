import test from "node:test";
import assert from "node:assert/strict";

import { decodePpm } from "./ppm.js";

function p6(width: number, height: number, pixels: number[]): Uint8Array {
  const header = `P6\n${width} ${height}\n255\n`;
  const bytes = new Uint8Array(header.length + pixels.length);
  for (let i = 0; i < header.length; i++) bytes[i] = header.charCodeAt(i);
  bytes.set(pixels, header.length);
  return bytes;
}

test("decodes a 2x1 P6 image", () => {
  const img = decodePpm(p6(2, 1, [255, 0, 0, 0, 0, 255]));
  assert.equal(img.width, 2);
  assert.equal(img.height, 1);
  assert.deepEqual(Array.from(img.rgba), [255, 0, 0, 255, 0, 0, 255, 255]);
});

test("decodes P5 grayscale", () => {
  const header = "P5\n2 2\n255\n";
  const bytes = new Uint8Array(header.length + 4);
  for (let i = 0; i < header.length; i++) bytes[i] = header.charCodeAt(i);
  bytes.set([0, 64, 128, 255], header.length);
  const img = decodePpm(bytes);
  assert.equal(img.rgba[4], 64);
  assert.equal(img.rgba[5], 64);
  assert.equal(img.rgba[15], 255);
});

test("skips comment lines in the header", () => {
  const header = "P6\n# made by a renderer\n1 1\n255\n";
  const bytes = new Uint8Array(header.length + 3);
  for (let i = 0; i < header.length; i++) bytes[i] = header.charCodeAt(i);
  bytes.set([9, 8, 7], header.length);
  const img = decodePpm(bytes);
  assert.deepEqual(Array.from(img.rgba), [9, 8, 7, 255]);
});

test("rejects truncated payloads and foreign magics", () => {
  assert.throws(() => decodePpm(p6(4, 4, [1, 2, 3])), /truncated/);
  const bad = p6(1, 1, [0, 0, 0]);
  bad[1] = "9".charCodeAt(0);
  assert.throws(() => decodePpm(bad), /unsupported magic/);
});

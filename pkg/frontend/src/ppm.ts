/** Binary PPM/PGM (P6/P5) decoder; the service's demo bundles ship PPM
 * display images, which browsers will not decode natively. */

export interface DecodedImage {
  width: number;
  height: number;
  rgba: Uint8ClampedArray<ArrayBuffer>;
}

function readHeader(bytes: Uint8Array): { magic: string; dims: number[]; offset: number } {
  let pos = 0;
  const tokens: string[] = [];
  while (tokens.length < 4 && pos < bytes.length) {
    // skip whitespace and comment lines
    while (pos < bytes.length) {
      const c = bytes[pos];
      if (c === 0x23) {
        while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
        pos++;
      } else {
        break;
      }
    }
    let start = pos;
    while (pos < bytes.length && !/\s/.test(String.fromCharCode(bytes[pos]))) pos++;
    tokens.push(String.fromCharCode(...bytes.slice(start, pos)));
  }
  pos++; // single whitespace after maxval
  const [magic, w, h, maxval] = tokens;
  if (maxval !== "255") throw new Error(`unsupported maxval ${maxval}`);
  return { magic, dims: [parseInt(w, 10), parseInt(h, 10)], offset: pos };
}

export function decodePpm(bytes: Uint8Array): DecodedImage {
  const { magic, dims, offset } = readHeader(bytes);
  const [width, height] = dims;
  if (!Number.isFinite(width) || !Number.isFinite(height) || width < 1 || height < 1) {
    throw new Error("bad PPM dimensions");
  }
  const rgba = new Uint8ClampedArray(width * height * 4);
  if (magic === "P6") {
    if (bytes.length < offset + width * height * 3) throw new Error("truncated P6 payload");
    for (let i = 0; i < width * height; i++) {
      rgba[i * 4] = bytes[offset + i * 3];
      rgba[i * 4 + 1] = bytes[offset + i * 3 + 1];
      rgba[i * 4 + 2] = bytes[offset + i * 3 + 2];
      rgba[i * 4 + 3] = 255;
    }
  } else if (magic === "P5") {
    if (bytes.length < offset + width * height) throw new Error("truncated P5 payload");
    for (let i = 0; i < width * height; i++) {
      const v = bytes[offset + i];
      rgba[i * 4] = v;
      rgba[i * 4 + 1] = v;
      rgba[i * 4 + 2] = v;
      rgba[i * 4 + 3] = 255;
    }
  } else {
    throw new Error(`unsupported magic ${magic}`);
  }
  return { width, height, rgba };
}

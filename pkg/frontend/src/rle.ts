/** Run-length mask codec matching the service wire format:
 * pairs of [start, length] over the row-major flattening of the mask. */

export type RlePairs = Array<[number, number]>;

export function rleDecode(pairs: RlePairs, size: number): Uint8Array {
  const out = new Uint8Array(size);
  for (const [start, length] of pairs) {
    if (start < 0 || length < 0 || start + length > size) {
      throw new RangeError(`run [${start}, ${length}] exceeds mask size ${size}`);
    }
    out.fill(1, start, start + length);
  }
  return out;
}

export function rleEncode(bits: Uint8Array): RlePairs {
  const pairs: RlePairs = [];
  let runStart = -1;
  for (let i = 0; i < bits.length; i++) {
    const on = bits[i] !== 0;
    if (on && runStart < 0) {
      runStart = i;
    } else if (!on && runStart >= 0) {
      pairs.push([runStart, i - runStart]);
      runStart = -1;
    }
  }
  if (runStart >= 0) {
    pairs.push([runStart, bits.length - runStart]);
  }
  return pairs;
}

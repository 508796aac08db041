import type { Pgm } from "./types.js";

// Binary PGM (P5) decoder for the server's adjacency rasters.
export function parsePgm(buffer: ArrayBuffer): Pgm {
  const bytes = new Uint8Array(buffer);
  if (bytes.length < 2 || bytes[0] !== 0x50 || bytes[1] !== 0x35) {
    throw new Error("not a binary PGM (missing P5 magic)");
  }
  let pos = 2;
  const isSpace = (b: number) => b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;

  function nextToken(): number {
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    if (pos < bytes.length && bytes[pos] === 0x23) {
      // comment line
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      return nextToken();
    }
    let start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) pos++;
    if (start === pos) throw new Error("truncated PGM header");
    let value = 0;
    for (let i = start; i < pos; i++) {
      const digit = bytes[i] - 0x30;
      if (digit < 0 || digit > 9) throw new Error("malformed PGM header token");
      value = value * 10 + digit;
    }
    return value;
  }

  const width = nextToken();
  const height = nextToken();
  const maxval = nextToken();
  if (maxval !== 255) throw new Error(`unsupported PGM maxval ${maxval}`);
  pos++; // single whitespace byte separates header from raster
  const expected = width * height;
  if (bytes.length - pos < expected) {
    throw new Error(`PGM raster truncated: need ${expected}, have ${bytes.length - pos}`);
  }
  return { width, height, pixels: bytes.slice(pos, pos + expected) };
}

// Grayscale raster to RGBA, highlighting nothing; canvases draw this directly.
export function pgmToRgba(pgm: Pgm): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(pgm.width * pgm.height * 4);
  for (let i = 0; i < pgm.pixels.length; i++) {
    const v = pgm.pixels[i];
    out[4 * i] = v;
    out[4 * i + 1] = v;
    out[4 * i + 2] = v;
    out[4 * i + 3] = 255;
  }
  return out;
}

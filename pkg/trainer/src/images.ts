/**
 * PNG loading and nearest-neighbor resizing into float32 [0, 1] pixel data.
 * Decoding failures return null so callers can skip-and-log per the export
 * contract instead of aborting a whole run.
 */

import * as fs from "node:fs";
import { PNG } from "pngjs";

export interface ImageTensorData {
  data: Float32Array; // side * side * 3, row-major RGB
  side: number;
}

export function loadPngAsFloats(filePath: string, side: number): ImageTensorData | null {
  let png: PNG;
  try {
    png = PNG.sync.read(fs.readFileSync(filePath));
  } catch {
    return null;
  }
  const out = new Float32Array(side * side * 3);
  for (let y = 0; y < side; y++) {
    const srcY = Math.min(png.height - 1, Math.floor((y * png.height) / side));
    for (let x = 0; x < side; x++) {
      const srcX = Math.min(png.width - 1, Math.floor((x * png.width) / side));
      const src = (srcY * png.width + srcX) * 4;
      const dst = (y * side + x) * 3;
      out[dst] = png.data[src] / 255;
      out[dst + 1] = png.data[src + 1] / 255;
      out[dst + 2] = png.data[src + 2] / 255;
    }
  }
  return { data: out, side };
}

export function writePng(filePath: string, rgb: Uint8Array, width: number, height: number): void {
  const png = new PNG({ width, height });
  for (let i = 0; i < width * height; i++) {
    png.data[i * 4] = rgb[i * 3];
    png.data[i * 4 + 1] = rgb[i * 3 + 1];
    png.data[i * 4 + 2] = rgb[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(filePath, PNG.sync.write(png));
}

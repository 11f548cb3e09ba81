/** Toy dataset synthesis: class-colored noise PNGs plus a treatment manifest. */

import * as fs from "node:fs";
import * as path from "node:path";

import { writePng } from "../src/images";
import { ManifestEntry } from "../src/interchange";

const CLASSES = ["fungal", "healthy", "virus"] as const;

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Class k gets a dominant color channel plus noise: trivially learnable. */
export function makeToyDataset(
  dir: string,
  perClass: { train: number; val: number; test: number },
  side = 32,
  seed = 7,
): { manifestPath: string; counts: typeof perClass } {
  const rand = mulberry32(seed);
  const entries: ManifestEntry[] = [];
  fs.mkdirSync(dir, { recursive: true });

  CLASSES.forEach((cls, k) => {
    let index = 0;
    for (const [split, count] of Object.entries(perClass) as Array<[ManifestEntry["split"], number]>) {
      for (let i = 0; i < count; i++, index++) {
        const rgb = new Uint8Array(side * side * 3);
        for (let px = 0; px < side * side; px++) {
          for (let c = 0; c < 3; c++) {
            const base = c === k ? 180 : 40;
            rgb[px * 3 + c] = Math.max(0, Math.min(255, base + Math.floor(rand() * 70)));
          }
        }
        const rel = path.join("images", cls, `${index.toString().padStart(4, "0")}.png`);
        const abs = path.join(dir, rel);
        fs.mkdirSync(path.dirname(abs), { recursive: true });
        writePng(abs, rgb, side, side);
        entries.push({ id: `real:${cls}/${index}`, path: rel, class: cls, source: "real", split });
      }
    }
  });

  const manifest = {
    treatment: "H0",
    seed,
    config: {
      treatment: "H0",
      real_per_class: perClass.train + perClass.val + perClass.test,
      synth_ratio: 0,
      include_unknown: false,
      seed,
      test_fraction: 0.15,
      val_fraction_of_remainder: 0.2,
    },
    entries,
    checksum: "toy",
  };
  const manifestPath = path.join(dir, "manifest.json");
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2));
  return { manifestPath, counts: perClass };
}

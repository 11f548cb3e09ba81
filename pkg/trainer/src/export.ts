/**
 * Interchange export: per-test-image class probabilities and penultimate
 * layer embeddings. Unreadable images are skipped and logged; the sidecar
 * carries the skip count as `warnings`.
 */

import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

import { loadPngAsFloats } from "./images";
import {
  entriesForSplit,
  Manifest,
  writeEmbeddingsCsv,
  writePredictionsCsv,
} from "./interchange";

function resolveEntryPath(manifestDir: string, entryPath: string): string {
  if (path.isAbsolute(entryPath)) return entryPath;
  const cwdRel = path.resolve(entryPath);
  if (require("node:fs").existsSync(cwdRel)) return cwdRel;
  return path.resolve(manifestDir, entryPath);
}

export interface ExportResult {
  predictionsPath: string;
  embeddingsPath: string;
  rows: number;
  warnings: number;
}

export async function exportInterchange(
  backbone: tf.LayersModel,
  head: tf.LayersModel,
  manifest: Manifest,
  manifestDir: string,
  side: number,
  outDir: string,
  producer: string,
): Promise<ExportResult> {
  const featureModel = tf.model({
    inputs: head.inputs,
    outputs: head.getLayer("penultimate").output,
    name: "feature_extractor",
  });

  const entries = entriesForSplit(manifest, "test");
  const classIndex = new Map(manifest.classNames.map((c, i) => [c, i]));

  const predictions = [];
  const embeddings = [];
  let warnings = 0;
  for (const entry of entries) {
    const img = loadPngAsFloats(resolveEntryPath(manifestDir, entry.path), side);
    if (img === null) {
      console.warn(`skipping unreadable image ${entry.id}`);
      warnings += 1;
      continue;
    }
    const { probs, features } = tf.tidy(() => {
      const x = tf.tensor4d(img.data, [1, side, side, 3]);
      const feats = backbone.predict(x) as tf.Tensor2D;
      const penultimate = featureModel.predict(feats) as tf.Tensor2D;
      const p = head.predict(feats) as tf.Tensor2D;
      return {
        probs: p.dataSync() as Float32Array,
        features: penultimate.dataSync() as Float32Array,
      };
    });

    // exact renormalization so exported rows satisfy the 1e-6 sum contract
    let sum = 0;
    for (const p of probs) sum += p;
    const normed = Array.from(probs, (p) => p / sum);
    let predLabel = 0;
    for (let i = 1; i < normed.length; i++) {
      if (normed[i] > normed[predLabel]) predLabel = i;
    }

    predictions.push({
      id: entry.id,
      trueLabel: classIndex.get(entry.class)!,
      predLabel,
      probs: normed,
    });
    embeddings.push({ id: entry.id, label: classIndex.get(entry.class)!, vector: features });
  }
  if (predictions.length === 0) throw new Error("no readable test images to export");

  const predictionsPath = path.join(outDir, "predictions.csv");
  const embeddingsPath = path.join(outDir, "embeddings.csv");
  writePredictionsCsv(predictionsPath, predictions, manifest.classNames);
  writeEmbeddingsCsv(embeddingsPath, embeddings, manifest.classNames, producer, warnings);
  featureModel.dispose();
  return { predictionsPath, embeddingsPath, rows: predictions.length, warnings };
}

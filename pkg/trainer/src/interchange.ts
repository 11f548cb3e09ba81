/**
 * File interchange with the evaluation harness.
 *
 * Reads treatment manifests ({treatment, seed, config, entries, checksum})
 * and writes the two export files the harness consumes: a predictions CSV
 * (`id,true_label,pred_label,p_<class>,...`, integer labels, probabilities
 * summing to 1) and an embeddings CSV (`id,label,e0..e{d-1}`) with a JSON
 * sidecar {n, d, class_names, producer, checksum} where the checksum is the
 * SHA-256 of the CSV bytes.
 */

import { createHash } from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";

// canonical class order shared with the harness (not alphabetical)
export const CLASS_ORDER = ["fungal", "healthy", "virus", "unknown"] as const;

export type Split = "train" | "val" | "test";

export interface ManifestEntry {
  id: string;
  path: string;
  class: string;
  source: string;
  split: Split;
}

export interface Manifest {
  treatment: string;
  seed: number;
  entries: ManifestEntry[];
  classNames: string[];
}

export function readManifest(manifestPath: string): Manifest {
  const raw = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  if (!Array.isArray(raw.entries) || raw.entries.length === 0) {
    throw new Error(`manifest ${manifestPath} has no entries`);
  }
  const entries: ManifestEntry[] = raw.entries.map((e: any) => ({
    id: String(e.id),
    path: String(e.path),
    class: String(e.class),
    source: String(e.source),
    split: e.split as Split,
  }));
  const present = new Set(entries.map((e) => e.class));
  const classNames = CLASS_ORDER.filter((c) => present.has(c));
  if (classNames.length !== present.size) {
    const extra = [...present].filter((c) => !(CLASS_ORDER as readonly string[]).includes(c));
    throw new Error(`manifest contains unknown class labels: ${extra.join(", ")}`);
  }
  return { treatment: raw.treatment, seed: raw.seed, entries, classNames };
}

export function entriesForSplit(manifest: Manifest, split: Split): ManifestEntry[] {
  return manifest.entries.filter((e) => e.split === split);
}

function writeFileAtomic(filePath: string, data: string | Buffer): void {
  fs.mkdirSync(path.dirname(path.resolve(filePath)), { recursive: true });
  const tmp = `${filePath}.${process.pid}.tmp`;
  fs.writeFileSync(tmp, data);
  fs.renameSync(tmp, filePath);
}

export interface PredictionRow {
  id: string;
  trueLabel: number;
  predLabel: number;
  probs: number[];
}

export function writePredictionsCsv(
  filePath: string,
  rows: PredictionRow[],
  classNames: string[],
): void {
  const header = ["id", "true_label", "pred_label", ...classNames.map((c) => `p_${c}`)];
  const lines = [header.join(",")];
  for (const row of rows) {
    const probs = row.probs.map((p) => p.toPrecision(17)).join(",");
    lines.push(`${row.id},${row.trueLabel},${row.predLabel},${probs}`);
  }
  writeFileAtomic(filePath, lines.join("\n") + "\n");
}

export interface EmbeddingRow {
  id: string;
  label: number;
  vector: Float32Array | number[];
}

export function writeEmbeddingsCsv(
  filePath: string,
  rows: EmbeddingRow[],
  classNames: string[],
  producer: string,
  warnings: number,
): void {
  if (rows.length === 0) throw new Error("no embedding rows to write");
  const d = rows[0].vector.length;
  const header = ["id", "label", ...Array.from({ length: d }, (_, i) => `e${i}`)];
  const lines = [header.join(",")];
  for (const row of rows) {
    const vec = Array.from(row.vector, (v) => Number(v).toPrecision(17)).join(",");
    lines.push(`${row.id},${row.label},${vec}`);
  }
  const data = lines.join("\n") + "\n";
  writeFileAtomic(filePath, data);
  const sidecar = {
    n: rows.length,
    d,
    class_names: classNames,
    producer,
    checksum: createHash("sha256").update(data).digest("hex"),
    warnings,
  };
  const sidecarPath = filePath.replace(/\.csv$/, ".json");
  writeFileAtomic(sidecarPath, JSON.stringify(sidecar, null, 2) + "\n");
}

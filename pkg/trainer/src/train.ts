/**
 * Two-phase transfer-learning protocol.
 *
 * Phase A trains only the classifier head: every backbone parameter layer is
 * frozen and its weight checksums are verified bit-identical afterwards (a
 * violation aborts the run). Phase B unfreezes the deepest fraction of the
 * backbone's parameter layers at a reduced learning rate. Both phases use
 * Adam plus decoupled weight decay, early stopping on validation loss and
 * plateau learning-rate reduction.
 */

import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

import { DecoupledWeightDecay, EpochLog, LrState, ReduceLROnPlateau } from "./callbacks";
import { loadPngAsFloats } from "./images";
import { entriesForSplit, Manifest, ManifestEntry } from "./interchange";
import {
  assemble,
  buildHead,
  buildTinyBackbone,
  defaultHeadSpec,
  defaultPhasePlan,
  HeadSpec,
  loadEfficientNetV2L,
  PhasePlan,
  setBackboneTrainable,
  validatePhasePlan,
  weightChecksums,
} from "./model";

export interface LoadedSplit {
  xs: tf.Tensor4D;
  ys: tf.Tensor2D;
  ids: string[];
  labels: number[];
  skipped: string[];
}

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

function seededShuffle<T>(items: T[], seed: number): T[] {
  const rand = mulberry32(seed);
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

function resolveEntryPath(manifestDir: string, entryPath: string): string {
  if (path.isAbsolute(entryPath)) return entryPath;
  // try relative to the working dir first, then next to the manifest
  const cwdRel = path.resolve(entryPath);
  if (require("node:fs").existsSync(cwdRel)) return cwdRel;
  return path.resolve(manifestDir, entryPath);
}

export function loadSplit(
  manifest: Manifest,
  manifestDir: string,
  split: "train" | "val" | "test",
  side: number,
  seed: number,
): LoadedSplit {
  let entries: ManifestEntry[] = entriesForSplit(manifest, split);
  if (split === "train") entries = seededShuffle(entries, seed);
  const classIndex = new Map(manifest.classNames.map((c, i) => [c, i]));

  const rows: Float32Array[] = [];
  const labels: number[] = [];
  const ids: string[] = [];
  const skipped: string[] = [];
  for (const entry of entries) {
    const img = loadPngAsFloats(resolveEntryPath(manifestDir, entry.path), side);
    if (img === null) {
      skipped.push(entry.id);
      continue;
    }
    rows.push(img.data);
    labels.push(classIndex.get(entry.class)!);
    ids.push(entry.id);
  }
  if (rows.length === 0) throw new Error(`no readable images in ${split} split`);

  const flat = new Float32Array(rows.length * side * side * 3);
  rows.forEach((r, i) => flat.set(r, i * side * side * 3));
  const xs = tf.tensor4d(flat, [rows.length, side, side, 3]);
  const ys = tf.oneHot(tf.tensor1d(labels, "int32"), manifest.classNames.length) as tf.Tensor2D;
  return { xs, ys, ids, labels, skipped };
}

export interface PhaseLog {
  epochsRun: number;
  trainableBackboneLayers: string[];
  rows: EpochLog["rows"];
}

export interface TrainLog {
  treatment: string;
  seed: number;
  classNames: string[];
  backbone: string;
  inputSide: number;
  phaseA: PhaseLog;
  phaseB: PhaseLog;
  backboneLayersChangedInPhaseB: string[];
  skippedImages: string[];
}

export interface TrainResult {
  model: tf.LayersModel;
  backbone: tf.LayersModel;
  head: tf.LayersModel;
  log: TrainLog;
}

export interface TrainOptions {
  backbone: "tiny" | "efficientnetv2l";
  weightsPath?: string;
  headSpec?: HeadSpec;
  plan?: PhasePlan;
  seed: number;
  verbose?: boolean;
}

async function fitPhase(
  model: tf.LayersModel,
  backbone: tf.LayersModel,
  train: LoadedSplit,
  val: LoadedSplit,
  lr: number,
  epochs: number,
  patience: number,
  plan: PhasePlan,
  phaseName: string,
  verbose: boolean,
): Promise<PhaseLog> {
  const optimizer = tf.train.adam(lr);
  model.compile({ optimizer, loss: "categoricalCrossentropy", metrics: ["accuracy"] });
  const state = new LrState(lr);
  const epochLog = new EpochLog(state, phaseName, verbose);
  const history = await model.fit(train.xs, train.ys, {
    epochs,
    batchSize: plan.batchSize,
    validationData: [val.xs, val.ys],
    shuffle: false, // order fixed by the seeded shuffle at load time
    verbose: 0,
    callbacks: [
      epochLog,
      new ReduceLROnPlateau(optimizer, state, plan.lrReductionFactor, plan.lrReductionPatience),
      new DecoupledWeightDecay(model, state, plan.weightDecay),
      tf.callbacks.earlyStopping({ monitor: "val_loss", patience }),
    ],
  });
  optimizer.dispose();
  const trainable = backbone.layers
    .filter((l) => l.getWeights().length > 0 && l.trainable)
    .map((l) => l.name);
  return {
    epochsRun: history.epoch.length,
    trainableBackboneLayers: trainable,
    rows: epochLog.rows,
  };
}

export async function trainTwoPhase(
  manifest: Manifest,
  manifestDir: string,
  opts: TrainOptions,
): Promise<TrainResult> {
  const plan = opts.plan ?? defaultPhasePlan(opts.backbone === "tiny" ? 32 : 480);
  validatePhasePlan(plan);
  const headSpec = opts.headSpec ?? defaultHeadSpec(manifest.classNames.length);
  if (headSpec.outputClasses !== manifest.classNames.length) {
    throw new Error(
      `head outputs ${headSpec.outputClasses} classes but the manifest has ` +
        `${manifest.classNames.length} (${manifest.classNames.join(", ")})`,
    );
  }

  const backbone =
    opts.backbone === "tiny"
      ? buildTinyBackbone(plan.inputSide, opts.seed)
      : await loadEfficientNetV2L(opts.weightsPath);
  const featureDim = backbone.outputs[0].shape[1] as number;
  const head = buildHead(featureDim, headSpec, opts.seed);
  const model = assemble(backbone, head);

  const train = loadSplit(manifest, manifestDir, "train", plan.inputSide, opts.seed);
  const val = loadSplit(manifest, manifestDir, "val", plan.inputSide, opts.seed);

  // phase A: frozen backbone, head only
  setBackboneTrainable(backbone, 0);
  const before = weightChecksums(backbone);
  const phaseA = await fitPhase(
    model, backbone, train, val,
    plan.phaseA.learningRate, plan.phaseA.epochs, plan.phaseA.patience,
    plan, "phase A", opts.verbose ?? false,
  );
  const afterA = weightChecksums(backbone);
  for (const [name, sum] of before) {
    if (afterA.get(name) !== sum) {
      throw new Error(`freeze contract violated: backbone layer ${name} changed in phase A`);
    }
  }

  // phase B: unfreeze the deepest fraction at a reduced learning rate
  const unfrozen = setBackboneTrainable(backbone, plan.phaseB.unfrozenFraction);
  const phaseB = await fitPhase(
    model, backbone, train, val,
    plan.phaseB.learningRate, plan.phaseB.epochs, plan.phaseB.patience,
    plan, "phase B", opts.verbose ?? false,
  );
  const afterB = weightChecksums(backbone);
  const changed: string[] = [];
  for (const [name, sum] of afterA) {
    if (afterB.get(name) !== sum) changed.push(name);
  }
  const frozenChanged = changed.filter((name) => !unfrozen.includes(name));
  if (frozenChanged.length > 0) {
    throw new Error(
      `freeze contract violated: frozen layers changed in phase B: ${frozenChanged.join(", ")}`,
    );
  }

  train.xs.dispose();
  train.ys.dispose();
  val.xs.dispose();
  val.ys.dispose();

  return {
    model,
    backbone,
    head,
    log: {
      treatment: manifest.treatment,
      seed: opts.seed,
      classNames: manifest.classNames,
      backbone: opts.backbone,
      inputSide: plan.inputSide,
      phaseA: { ...phaseA, trainableBackboneLayers: [] },
      phaseB: { ...phaseB, trainableBackboneLayers: unfrozen },
      backboneLayersChangedInPhaseB: changed,
      skippedImages: [...train.skipped, ...val.skipped],
    },
  };
}

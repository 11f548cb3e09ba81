/**
 * Backbone and classifier-head construction.
 *
 * The classifier head follows the two-phase protocol's shape: three dense
 * blocks (default 512/256/128) each as dense -> batch norm -> swish ->
 * dropout (0.3/0.3/0.2), then a softmax output. The swish activation of the
 * last block is named "penultimate"; its activations are the exported
 * embedding features.
 *
 * Backbones:
 *  - tiny: a small conv stack for desk-scale runs (32x32 by default). It
 *    carries no batch norm, so freezing it really freezes every parameter.
 *  - efficientnetv2l: loads a converted tf.js LayersModel from --weights
 *    (480x480 inputs); the protocol logic is identical, only the graph is
 *    bigger. Without a weights path this backbone is refused.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

export interface HeadSpec {
  denseWidths: number[];
  batchNorm: boolean[];
  dropoutRates: number[];
  outputClasses: number;
}

export function defaultHeadSpec(outputClasses: number): HeadSpec {
  return {
    denseWidths: [512, 256, 128],
    batchNorm: [true, true, true],
    dropoutRates: [0.3, 0.3, 0.2],
    outputClasses,
  };
}

export function validateHeadSpec(spec: HeadSpec): void {
  if (spec.denseWidths.some((w) => w <= 0)) throw new Error("dense widths must be positive");
  if (spec.dropoutRates.some((r) => r < 0 || r >= 1)) {
    throw new Error("dropout rates must lie in [0, 1)");
  }
  if (
    spec.denseWidths.length !== spec.dropoutRates.length ||
    spec.denseWidths.length !== spec.batchNorm.length
  ) {
    throw new Error("head spec arrays must have equal length");
  }
  if (spec.outputClasses < 2) throw new Error("need at least 2 output classes");
}

export interface PhasePlan {
  phaseA: { epochs: number; learningRate: number; patience: number };
  phaseB: { unfrozenFraction: number; epochs: number; learningRate: number; patience: number };
  lrReductionFactor: number;
  lrReductionPatience: number;
  weightDecay: number;
  inputSide: number;
  batchSize: number;
}

export function defaultPhasePlan(inputSide = 480): PhasePlan {
  return {
    phaseA: { epochs: 30, learningRate: 1e-3, patience: 5 },
    phaseB: { unfrozenFraction: 0.25, epochs: 20, learningRate: 1e-5, patience: 5 },
    lrReductionFactor: 0.5,
    lrReductionPatience: 3,
    weightDecay: 1e-4,
    inputSide,
    batchSize: 16,
  };
}

export function validatePhasePlan(plan: PhasePlan): void {
  if (plan.phaseB.learningRate >= plan.phaseA.learningRate) {
    throw new Error("phase B learning rate must be below phase A's");
  }
  const f = plan.phaseB.unfrozenFraction;
  if (!(f > 0 && f <= 1)) throw new Error("unfrozen fraction must lie in (0, 1]");
  if (plan.inputSide < 8) throw new Error("input side too small");
}

export function buildTinyBackbone(inputSide: number, seed: number): tf.LayersModel {
  let s = seed;
  const init = () => tf.initializers.glorotUniform({ seed: s++ });
  const input = tf.input({ shape: [inputSide, inputSide, 3], name: "image" });
  let x = tf.layers
    .conv2d({ filters: 16, kernelSize: 3, padding: "same", activation: "swish",
              kernelInitializer: init(), name: "backbone_conv1" })
    .apply(input) as tf.SymbolicTensor;
  x = tf.layers.maxPooling2d({ poolSize: 2, name: "backbone_pool1" }).apply(x) as tf.SymbolicTensor;
  x = tf.layers
    .conv2d({ filters: 32, kernelSize: 3, padding: "same", activation: "swish",
              kernelInitializer: init(), name: "backbone_conv2" })
    .apply(x) as tf.SymbolicTensor;
  x = tf.layers.maxPooling2d({ poolSize: 2, name: "backbone_pool2" }).apply(x) as tf.SymbolicTensor;
  x = tf.layers
    .conv2d({ filters: 64, kernelSize: 3, padding: "same", activation: "swish",
              kernelInitializer: init(), name: "backbone_conv3" })
    .apply(x) as tf.SymbolicTensor;
  x = tf.layers.globalAveragePooling2d({ name: "backbone_gap" }).apply(x) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: x, name: "tiny_backbone" });
}

export async function loadEfficientNetV2L(weightsPath: string | undefined): Promise<tf.LayersModel> {
  if (!weightsPath) {
    throw new Error(
      "backbone 'efficientnetv2l' needs --weights pointing at a converted " +
        "tf.js LayersModel (model.json); use --backbone tiny for desk-scale runs",
    );
  }
  const handler = fileLoadHandler(weightsPath);
  return tf.loadLayersModel(handler);
}

export function buildHead(featureDim: number, spec: HeadSpec, seed: number): tf.LayersModel {
  validateHeadSpec(spec);
  let s = seed + 1000;
  const init = () => tf.initializers.glorotUniform({ seed: s++ });
  const input = tf.input({ shape: [featureDim], name: "features" });
  let x: tf.SymbolicTensor = input;
  const last = spec.denseWidths.length - 1;
  spec.denseWidths.forEach((width, i) => {
    x = tf.layers
      .dense({ units: width, kernelInitializer: init(), name: `head_dense${i + 1}` })
      .apply(x) as tf.SymbolicTensor;
    if (spec.batchNorm[i]) {
      x = tf.layers.batchNormalization({ name: `head_bn${i + 1}` }).apply(x) as tf.SymbolicTensor;
    }
    x = tf.layers
      .activation({ activation: "swish", name: i === last ? "penultimate" : `head_swish${i + 1}` })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers
      .dropout({ rate: spec.dropoutRates[i], seed: s++, name: `head_dropout${i + 1}` })
      .apply(x) as tf.SymbolicTensor;
  });
  const output = tf.layers
    .dense({ units: spec.outputClasses, activation: "softmax",
             kernelInitializer: init(), name: "class_probs" })
    .apply(x) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: output, name: "classifier_head" });
}

export function assemble(backbone: tf.LayersModel, head: tf.LayersModel): tf.LayersModel {
  const output = head.apply(backbone.outputs[0]) as tf.SymbolicTensor;
  return tf.model({ inputs: backbone.inputs, outputs: output, name: "classifier" });
}

/** Layers that actually hold parameters, shallow-to-deep. */
export function weightedLayers(model: tf.LayersModel): tf.layers.Layer[] {
  return model.layers.filter((l) => l.getWeights().length > 0);
}

export function setBackboneTrainable(
  backbone: tf.LayersModel,
  unfrozenFraction: number,
): string[] {
  const layers = weightedLayers(backbone);
  const nUnfrozen = unfrozenFraction <= 0 ? 0 : Math.ceil(layers.length * unfrozenFraction);
  const cut = layers.length - nUnfrozen;
  const unfrozen: string[] = [];
  layers.forEach((layer, i) => {
    layer.trainable = i >= cut;
    if (layer.trainable) unfrozen.push(layer.name);
  });
  return unfrozen;
}

export function weightChecksums(model: tf.LayersModel): Map<string, string> {
  const { createHash } = require("node:crypto") as typeof import("node:crypto");
  const out = new Map<string, string>();
  for (const layer of weightedLayers(model)) {
    const hash = createHash("sha256");
    // getWeights() hands back the live variable tensors; read, never dispose
    for (const w of layer.getWeights()) {
      const data = w.dataSync() as Float32Array;
      hash.update(Buffer.from(data.buffer.slice(data.byteOffset, data.byteOffset + data.byteLength)));
    }
    out.set(layer.name, hash.digest("hex"));
  }
  return out;
}

// ---------------------------------------------------------------------------
// checkpoint save/load: @tensorflow/tfjs has no file:// IO handler in node,
// so artifacts are written by hand (model.json + weights.bin)
// ---------------------------------------------------------------------------

export async function saveModel(model: tf.LayersModel, dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const weightData = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(path.join(dir, "weights.bin"), Buffer.from(weightData));
      const manifest = {
        modelTopology: artifacts.modelTopology,
        weightsManifest: [{ paths: ["weights.bin"], weights: artifacts.weightSpecs }],
        format: artifacts.format,
        generatedBy: artifacts.generatedBy,
        convertedBy: null,
      };
      fs.writeFileSync(path.join(dir, "model.json"), JSON.stringify(manifest));
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
    }),
  );
}

function fileLoadHandler(modelJsonPath: string): tf.io.IOHandler {
  return {
    load: async () => {
      const dir = path.dirname(modelJsonPath);
      const manifest = JSON.parse(fs.readFileSync(modelJsonPath, "utf-8"));
      const weightSpecs = manifest.weightsManifest.flatMap((g: any) => g.weights);
      const buffers = manifest.weightsManifest.flatMap((g: any) =>
        g.paths.map((p: string) => fs.readFileSync(path.join(dir, p))),
      );
      const total = buffers.reduce((n: number, b: Buffer) => n + b.length, 0);
      const weightData = new Uint8Array(total);
      let offset = 0;
      for (const b of buffers) {
        weightData.set(b, offset);
        offset += b.length;
      }
      return {
        modelTopology: manifest.modelTopology,
        weightSpecs,
        weightData: weightData.buffer,
        format: manifest.format,
        generatedBy: manifest.generatedBy,
      };
    },
  };
}

export async function loadModel(dir: string): Promise<tf.LayersModel> {
  return tf.loadLayersModel(fileLoadHandler(path.join(dir, "model.json")));
}

/**
 * Trainer command line.
 *
 *   train --manifest M.json --out DIR [--backbone tiny|efficientnetv2l]
 *         [--seed S] [--input-side N] [--weights model.json]
 *         [--phase-a-epochs N] [--phase-b-epochs N] [--batch-size N]
 *         [--unfrozen-fraction F] [--verbose]
 *
 * Trains the two-phase protocol on the manifest's train/val splits, saves a
 * checkpoint plus training log under --out, and exports the predictions and
 * embeddings interchange files for the manifest's test split.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { exportInterchange } from "./export";
import { readManifest } from "./interchange";
import { defaultPhasePlan, saveModel } from "./model";
import { trainTwoPhase } from "./train";

interface CliArgs {
  manifest: string;
  out: string;
  backbone: "tiny" | "efficientnetv2l";
  seed: number;
  inputSide?: number;
  weights?: string;
  phaseAEpochs?: number;
  phaseBEpochs?: number;
  batchSize?: number;
  unfrozenFraction?: number;
  verbose: boolean;
}

function usage(message?: string): never {
  if (message) console.error(`error: ${message}`);
  console.error(
    "usage: train --manifest M.json --out DIR [--backbone tiny|efficientnetv2l] " +
      "[--seed S] [--input-side N] [--weights model.json] [--phase-a-epochs N] " +
      "[--phase-b-epochs N] [--batch-size N] [--unfrozen-fraction F] [--verbose]",
  );
  process.exit(64);
}

function parseArgs(argv: string[]): CliArgs {
  if (argv[0] !== "train") usage(`unknown command ${argv[0] ?? "(none)"}`);
  const args: Partial<CliArgs> = { backbone: "tiny", seed: 0, verbose: false };
  for (let i = 1; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) usage(`flag ${flag} needs a value`);
      return argv[++i];
    };
    switch (flag) {
      case "--manifest": args.manifest = next(); break;
      case "--out": args.out = next(); break;
      case "--backbone": {
        const b = next();
        if (b !== "tiny" && b !== "efficientnetv2l") usage(`unknown backbone ${b}`);
        args.backbone = b;
        break;
      }
      case "--seed": args.seed = Number(next()); break;
      case "--input-side": args.inputSide = Number(next()); break;
      case "--weights": args.weights = next(); break;
      case "--phase-a-epochs": args.phaseAEpochs = Number(next()); break;
      case "--phase-b-epochs": args.phaseBEpochs = Number(next()); break;
      case "--batch-size": args.batchSize = Number(next()); break;
      case "--unfrozen-fraction": args.unfrozenFraction = Number(next()); break;
      case "--verbose": args.verbose = true; break;
      case "--help": case "-h":
        console.log("two-phase trainer; see usage below");
        usage();
        break;
      default: usage(`unknown flag ${flag}`);
    }
  }
  if (!args.manifest || !args.out) usage("--manifest and --out are required");
  return args as CliArgs;
}

export async function main(argv: string[]): Promise<number> {
  const args = parseArgs(argv);

  let manifest;
  try {
    manifest = readManifest(args.manifest);
  } catch (err) {
    console.error(`manifest error: ${(err as Error).message}`);
    return 2;
  }
  const manifestDir = path.dirname(path.resolve(args.manifest));

  const plan = defaultPhasePlan(args.inputSide ?? (args.backbone === "tiny" ? 32 : 480));
  if (args.phaseAEpochs) plan.phaseA.epochs = args.phaseAEpochs;
  if (args.phaseBEpochs) plan.phaseB.epochs = args.phaseBEpochs;
  if (args.batchSize) plan.batchSize = args.batchSize;
  if (args.unfrozenFraction) plan.phaseB.unfrozenFraction = args.unfrozenFraction;

  try {
    const result = await trainTwoPhase(manifest, manifestDir, {
      backbone: args.backbone,
      weightsPath: args.weights,
      plan,
      seed: args.seed,
      verbose: args.verbose,
    });

    fs.mkdirSync(args.out, { recursive: true });
    await saveModel(result.model, path.join(args.out, "checkpoint"));
    fs.writeFileSync(
      path.join(args.out, "training_log.json"),
      JSON.stringify(result.log, null, 2) + "\n",
    );

    const exported = await exportInterchange(
      result.backbone, result.head, manifest, manifestDir,
      plan.inputSide, args.out, `hybrideval-trainer/${args.backbone}`,
    );
    console.log(
      `${manifest.treatment}: trained ${result.log.phaseA.epochsRun}+` +
        `${result.log.phaseB.epochsRun} epochs, exported ${exported.rows} test rows ` +
        `(${exported.warnings} skipped) -> ${args.out}`,
    );
    return 0;
  } catch (err) {
    console.error(`training error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}

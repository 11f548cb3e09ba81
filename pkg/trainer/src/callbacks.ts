/**
 * Training callbacks: plateau learning-rate reduction and decoupled weight
 * decay (AdamW = Adam steps plus a per-batch multiplicative decay on the
 * trainable kernels, applied outside the gradient path).
 */

import * as tf from "@tensorflow/tfjs";

/** Epoch logs reach subclass overrides unresolved: values may still be scalars. */
function logValue(logs: tf.Logs | undefined, key: string): number | undefined {
  const v = (logs as Record<string, unknown> | undefined)?.[key];
  if (v === undefined) return undefined;
  if (typeof v === "number") return v;
  return (v as tf.Scalar).dataSync()[0];
}

export class LrState {
  constructor(public lr: number) {}
}

export class ReduceLROnPlateau extends tf.CustomCallback {
  private best = Infinity;
  private wait = 0;

  constructor(
    private optimizer: tf.Optimizer,
    private state: LrState,
    private factor: number,
    private patience: number,
    private minLr = 1e-7,
    private monitor = "val_loss",
  ) {
    super({});
  }

  override async onEpochEnd(_epoch: number, logs?: tf.Logs): Promise<void> {
    const current = logValue(logs, this.monitor);
    if (current === undefined) return;
    if (current < this.best) {
      this.best = current;
      this.wait = 0;
      return;
    }
    this.wait += 1;
    if (this.wait >= this.patience) {
      const next = Math.max(this.state.lr * this.factor, this.minLr);
      if (next < this.state.lr) {
        this.state.lr = next;
        // adam keeps its moments; only the step size changes
        (this.optimizer as unknown as { learningRate: number }).learningRate = next;
      }
      this.wait = 0;
    }
  }
}

export class DecoupledWeightDecay extends tf.CustomCallback {
  constructor(
    private model: tf.LayersModel,
    private state: LrState,
    private decay: number,
  ) {
    super({});
  }

  override async onBatchEnd(): Promise<void> {
    if (this.decay <= 0) return;
    const shrink = 1.0 - this.state.lr * this.decay;
    tf.tidy(() => {
      for (const layer of this.model.layers) {
        if (!layer.trainable) continue;
        for (const w of layer.trainableWeights) {
          // decay kernels only, the usual AdamW convention
          if (!w.name.includes("kernel")) continue;
          w.write(tf.keep(w.read().mul(shrink)));
        }
      }
    });
  }
}

export class EpochLog extends tf.CustomCallback {
  rows: Array<{ epoch: number; loss: number; valLoss: number; acc: number; valAcc: number; lr: number }> = [];

  constructor(private state: LrState, private phase: string, private verbose: boolean) {
    super({});
  }

  override async onEpochEnd(epoch: number, logs?: tf.Logs): Promise<void> {
    const row = {
      epoch,
      loss: logValue(logs, "loss") ?? NaN,
      valLoss: logValue(logs, "val_loss") ?? NaN,
      acc: logValue(logs, "acc") ?? logValue(logs, "categoricalAccuracy") ?? NaN,
      valAcc: logValue(logs, "val_acc") ?? logValue(logs, "val_categoricalAccuracy") ?? NaN,
      lr: this.state.lr,
    };
    this.rows.push(row);
    if (this.verbose) {
      console.log(
        `[${this.phase}] epoch ${epoch + 1}: loss ${row.loss.toFixed(4)} ` +
          `val_loss ${row.valLoss.toFixed(4)} val_acc ${row.valAcc.toFixed(3)} lr ${row.lr}`,
      );
    }
  }
}

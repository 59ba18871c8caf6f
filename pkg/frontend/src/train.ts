/**
 * Deterministic trainer for the position-regression network.
 *
 * Full-batch Adam on mean squared (x, y) error. There is intentionally no
 * shuffling: with seeded initializers and a fixed sample order, two runs
 * with the same inputs produce identical weights. Adam with learning rate
 * 1e-3 is simply our default; both are plain knobs.
 */

import * as tf from "@tensorflow/tfjs";
import { modelShape } from "./model";

export class ShapeMismatch extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ShapeMismatch";
  }
}

export interface LabeledSample {
  /** Flattened rows*cols image, as produced by the preprocessing chain. */
  values: Float64Array;
  /** Ground-truth (x, y) in metres. */
  label: readonly [number, number];
}

export interface TrainOptions {
  epochs: number;
  learningRate?: number;
  /** Called after every optimizer step with the loss at that step. */
  log?: (epoch: number, loss: number) => void;
  /** Early stop: return true to end training after the current epoch. */
  stopWhen?: (loss: number, epoch: number) => boolean;
}

export interface TrainResult {
  /** Loss before each optimizer step, one entry per epoch. */
  losses: number[];
  /** Mean squared error before the first step. */
  initialLoss: number;
  /** Mean squared error after the last step. */
  finalLoss: number;
}

export const DEFAULT_LEARNING_RATE = 1e-3;

export async function train(
  model: tf.LayersModel,
  samples: ReadonlyArray<LabeledSample>,
  opts: TrainOptions,
): Promise<TrainResult> {
  if (samples.length === 0) {
    throw new ShapeMismatch("no training samples");
  }
  if (opts.epochs < 0) {
    throw new RangeError(`epochs must be >= 0, got ${opts.epochs}`);
  }
  const { rows, cols } = modelShape(model);
  const size = rows * cols;
  for (let i = 0; i < samples.length; i++) {
    if (samples[i].values.length !== size) {
      throw new ShapeMismatch(
        `sample ${i} has ${samples[i].values.length} values, model wants ${size}`,
      );
    }
  }

  const n = samples.length;
  const flat = new Float32Array(n * size);
  const labels = new Float32Array(n * 2);
  samples.forEach((s, i) => {
    flat.set(s.values, i * size);
    labels[2 * i] = s.label[0];
    labels[2 * i + 1] = s.label[1];
  });
  const xs = tf.tensor4d(flat, [n, rows, cols, 1]);
  const ys = tf.tensor2d(labels, [n, 2]);

  const evalLoss = () =>
    tf.tidy(() =>
      tf.losses
        .meanSquaredError(ys, model.predict(xs) as tf.Tensor)
        .dataSync(),
    )[0];

  const optimizer = tf.train.adam(opts.learningRate ?? DEFAULT_LEARNING_RATE);
  const lossFn = (): tf.Scalar =>
    tf.losses.meanSquaredError(
      ys,
      model.apply(xs, { training: true }) as tf.Tensor,
    ) as tf.Scalar;

  const initialLoss = evalLoss();
  const losses: number[] = [];
  try {
    for (let epoch = 0; epoch < opts.epochs; epoch++) {
      const cost = optimizer.minimize(lossFn, true);
      if (cost === null) {
        throw new Error("optimizer returned no cost");
      }
      const stepLoss = cost.dataSync()[0];
      cost.dispose();
      losses.push(stepLoss);
      opts.log?.(epoch, stepLoss);
      if (opts.stopWhen?.(stepLoss, epoch)) {
        break;
      }
      // keep the event loop breathing during long trainings
      await new Promise<void>((resolve) => setImmediate(resolve));
    }
    const finalLoss = evalLoss();
    return { losses, initialLoss, finalLoss };
  } finally {
    optimizer.dispose();
    xs.dispose();
    ys.dispose();
  }
}
